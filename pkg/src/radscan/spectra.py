"""Energy-domain densities.

Builds everything the scorer needs in the energy dimension: probability
mass functions for each source variant (from supplied intensity
histograms), a background pmf estimated from source-free run data, the
50-50 two-source combination, and the precomputed per-bin log density
ratio tables used as per-event evidence at scan time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from radscan.errors import FileFormatError, InsufficientDataError, InvalidInputError

__all__ = [
    "EnergyGrid",
    "IntensityHistogram",
    "Pmf",
    "SourceVariantId",
    "ALL_SOURCE_VARIANTS",
    "LogRatioTable",
    "pmf_from_intensity_histogram",
    "estimate_null_pmf",
    "mix_pmfs",
    "build_log_ratio_table",
    "DEFAULT_DENSITY_FLOOR",
    "DEFAULT_KDE_BANDWIDTH_KEV",
]

DEFAULT_DENSITY_FLOOR = 1e-12
DEFAULT_KDE_BANDWIDTH_KEV = 1.0
DEFAULT_MIN_NULL_READINGS = 1000

# Gaussian kernels are accumulated only within this many bandwidths of each
# reading; the discarded tail mass (~1e-31 relative) is invisible in float64.
_KDE_TRUNCATION_SIGMAS = 12.0


@dataclass(frozen=True)
class EnergyGrid:
    """Uniform energy grid on which all pmfs and ratio tables live.

    The default covers 11 to 4001 keV in 0.5 keV steps (7981 bins).
    """

    start_kev: float = 11.0
    end_kev: float = 4001.0
    step_kev: float = 0.5

    def __post_init__(self):
        if not (self.start_kev < self.end_kev):
            raise InvalidInputError("grid start must be below grid end")
        if self.step_kev <= 0:
            raise InvalidInputError("grid step must be positive")

    @property
    def n_bins(self) -> int:
        return int(math.floor((self.end_kev - self.start_kev) / self.step_kev)) + 1

    def energies(self) -> np.ndarray:
        return self.start_kev + self.step_kev * np.arange(self.n_bins)

    def nearest_bin(self, energies_kev) -> np.ndarray:
        """Nearest bin index for each energy; half-step ties round up.

        Indices are not range-checked; combine with :meth:`contains`.
        """
        e = np.asarray(energies_kev, dtype=np.float64)
        return np.floor((e - self.start_kev) / self.step_kev + 0.5).astype(np.int64)

    def contains(self, energies_kev) -> np.ndarray:
        e = np.asarray(energies_kev, dtype=np.float64)
        return (e >= self.start_kev) & (e <= self.end_kev)


@dataclass(frozen=True)
class IntensityHistogram:
    """Count-rate histogram over contiguous energy bins.

    ``counts[j]`` is the rate in the bin starting at
    ``bin_start_kev + j * bin_width_kev``.
    """

    counts: np.ndarray
    bin_start_kev: float = 11.0
    bin_width_kev: float = 2.0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64)
        if counts.ndim != 1 or counts.size == 0:
            raise InvalidInputError("histogram counts must be a non-empty 1-d sequence")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise InvalidInputError("histogram counts must be finite and non-negative")
        if not np.any(counts > 0):
            raise InvalidInputError("histogram has no positive counts")
        if self.bin_width_kev <= 0:
            raise InvalidInputError("bin width must be positive")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n_bins(self) -> int:
        return self.counts.size

    def centers(self) -> np.ndarray:
        return self.bin_start_kev + (np.arange(self.n_bins) + 0.5) * self.bin_width_kev

    @property
    def span_kev(self) -> tuple[float, float]:
        return (self.bin_start_kev, self.bin_start_kev + self.n_bins * self.bin_width_kev)


@dataclass(eq=False)
class Pmf:
    """Probability mass function aligned to an :class:`EnergyGrid`."""

    grid: EnergyGrid
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.shape != (self.grid.n_bins,):
            raise InvalidInputError(
                f"pmf length {mass.size} does not match grid bins {self.grid.n_bins}"
            )
        if np.any(mass < 0):
            raise InvalidInputError("pmf mass must be non-negative")
        total = float(mass.sum())
        if abs(total - 1.0) > 1e-9:
            raise InvalidInputError(f"pmf mass sums to {total!r}, expected 1")
        mass.setflags(write=False)
        self.mass = mass

    @classmethod
    def from_weights(cls, grid: EnergyGrid, weights) -> "Pmf":
        """Normalize non-negative weights into a pmf."""
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if not np.isfinite(total) or total <= 0:
            raise InvalidInputError("weights must have positive finite total mass")
        return cls(grid, w / total)

    def to_csv(self, path) -> None:
        _write_value_csv(path, "energy_kev,value", self.grid.energies(), self.mass)

    @classmethod
    def from_csv(cls, path) -> "Pmf":
        grid, values = _read_value_csv(path, "energy_kev,value")
        return cls(grid, values)


@dataclass(frozen=True, order=True)
class SourceVariantId:
    """One of the twelve source alternatives: source 1..6, shielded or not.

    Background-only (source 0) is never represented as a variant.
    """

    source: int
    shielded: bool

    def __post_init__(self):
        if not 1 <= self.source <= 6:
            raise InvalidInputError(f"source must be 1..6, got {self.source}")

    @property
    def label(self) -> str:
        return f"{self.source}.{int(self.shielded)}"

    @classmethod
    def parse(cls, label: str) -> "SourceVariantId":
        try:
            src, flag = label.strip().split(".")
            return cls(int(src), bool(int(flag)))
        except (ValueError, TypeError) as exc:
            raise FileFormatError(f"bad source variant label {label!r}") from exc


ALL_SOURCE_VARIANTS: tuple[SourceVariantId, ...] = tuple(
    SourceVariantId(k, shielded) for k in range(1, 7) for shielded in (False, True)
)


@dataclass(eq=False)
class LogRatioTable:
    """Per-bin evidence values, one array per source variant.

    Each entry is max(0, ln(f_source / f_background)) at that bin, so it is
    non-negative everywhere and exactly zero wherever the source density
    does not exceed the background.
    """

    grid: EnergyGrid
    ratios: dict[SourceVariantId, np.ndarray]

    def __post_init__(self):
        clean: dict[SourceVariantId, np.ndarray] = {}
        for variant, values in self.ratios.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != (self.grid.n_bins,):
                raise InvalidInputError(f"ratio length mismatch for variant {variant.label}")
            if np.any(arr < 0):
                raise InvalidInputError(f"negative ratio entry for variant {variant.label}")
            arr.setflags(write=False)
            clean[variant] = arr
        self.ratios = clean

    @property
    def variants(self) -> list[SourceVariantId]:
        return sorted(self.ratios)

    def lookup(self, variant: SourceVariantId, energies_kev) -> np.ndarray:
        """Evidence at the nearest grid bin; energies off the grid give 0.

        Total function: never raises for any finite energy.
        """
        values = self.ratios[variant]
        e = np.atleast_1d(np.asarray(energies_kev, dtype=np.float64))
        inside = self.grid.contains(e)
        idx = np.where(inside, self.grid.nearest_bin(e), 0)
        return np.where(inside, values[idx], 0.0)

    def lookup_scalar(self, variant: SourceVariantId, energy_kev: float) -> float:
        return float(self.lookup(variant, [energy_kev])[0])

    def save_dir(self, directory) -> None:
        """Persist as a directory of CSVs plus a metadata file (lossless)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {
            "grid": {
                "start_kev": self.grid.start_kev,
                "end_kev": self.grid.end_kev,
                "step_kev": self.grid.step_kev,
            },
            "variants": [v.label for v in self.variants],
        }
        (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        energies = self.grid.energies()
        for variant in self.variants:
            _write_value_csv(
                directory / f"ratio_{variant.label}.csv",
                "energy_kev,value",
                energies,
                self.ratios[variant],
            )

    @classmethod
    def load_dir(cls, directory) -> "LogRatioTable":
        directory = Path(directory)
        meta_path = directory / "meta.json"
        if not meta_path.exists():
            raise FileFormatError(f"missing table metadata: {meta_path}")
        meta = json.loads(meta_path.read_text())
        grid = EnergyGrid(**meta["grid"])
        ratios = {}
        for label in meta["variants"]:
            variant = SourceVariantId.parse(label)
            file_grid, values = _read_value_csv(
                directory / f"ratio_{label}.csv", "energy_kev,value"
            )
            if file_grid != grid:
                raise FileFormatError(f"grid mismatch in ratio file for variant {label}")
            ratios[variant] = values
        return cls(grid, ratios)


def pmf_from_intensity_histogram(hist: IntensityHistogram, grid: EnergyGrid) -> Pmf:
    """Convert an intensity histogram to a pmf on the grid.

    Each bin's rate is treated as the value at the bin center and linearly
    interpolated to every grid energy (constant extension across the half
    bin beyond the outermost centers). Grid points outside the histogram
    span get zero, negatives are clamped, and the result is rescaled to
    sum to one.
    """
    lo, hi = hist.span_kev
    if hi <= grid.start_kev or lo >= grid.end_kev:
        raise InvalidInputError("histogram span does not overlap the grid")
    energies = grid.energies()
    values = np.interp(energies, hist.centers(), hist.counts)
    values[(energies < lo) | (energies > hi)] = 0.0
    np.clip(values, 0.0, None, out=values)
    if values.sum() <= 0:
        raise InvalidInputError("histogram mass does not overlap the grid")
    return Pmf.from_weights(grid, values)


def estimate_null_pmf(
    energies_kev,
    grid: EnergyGrid,
    kde_bandwidth_kev: float = DEFAULT_KDE_BANDWIDTH_KEV,
    min_readings: int = DEFAULT_MIN_NULL_READINGS,
) -> Pmf:
    """Estimate the background pmf from pooled source-free energy readings.

    A Gaussian kernel density estimate (bandwidth = standard deviation, in
    keV) is evaluated at every grid energy and rescaled to sum to one.

    Parameters
    ----------
    energies_kev : array-like
        Pooled energy readings from source-free runs.
    grid : EnergyGrid
        Evaluation grid.
    kde_bandwidth_kev : float
        Kernel standard deviation.
    min_readings : int
        Floor on the number of readings; fewer raises
        :class:`InsufficientDataError`.
    """
    readings = np.asarray(energies_kev, dtype=np.float64).ravel()
    if readings.size < min_readings:
        raise InsufficientDataError(
            f"need at least {min_readings} readings to estimate the background pmf, "
            f"got {readings.size}"
        )
    if kde_bandwidth_kev <= 0:
        raise InvalidInputError("KDE bandwidth must be positive")

    n_bins = grid.n_bins
    halfwidth = int(math.ceil(_KDE_TRUNCATION_SIGMAS * kde_bandwidth_kev / grid.step_kev))
    offsets = np.arange(-halfwidth, halfwidth + 1)
    inv_two_bw2 = 1.0 / (2.0 * kde_bandwidth_kev * kde_bandwidth_kev)

    density = np.zeros(n_bins)
    chunk = 32768
    for start in range(0, readings.size, chunk):
        x = readings[start : start + chunk]
        center = grid.nearest_bin(x)
        idx = center[:, None] + offsets[None, :]
        valid = (idx >= 0) & (idx < n_bins)
        grid_e = grid.start_kev + grid.step_kev * idx
        diff = x[:, None] - grid_e
        weights = np.exp(-diff * diff * inv_two_bw2)
        density += np.bincount(idx[valid], weights=weights[valid], minlength=n_bins)
    return Pmf.from_weights(grid, density)


def mix_pmfs(a: Pmf, b: Pmf, weight_a: float) -> Pmf:
    """Convex combination ``weight_a * a + (1 - weight_a) * b``.

    Used with weight 0.5 to synthesize the sixth source from sources 1
    and 5 (like shielding mixed with like shielding).
    """
    if a.grid != b.grid:
        raise InvalidInputError("cannot mix pmfs on different grids")
    if not 0.0 <= weight_a <= 1.0:
        raise InvalidInputError("mix weight must be within [0, 1]")
    return Pmf(a.grid, weight_a * a.mass + (1.0 - weight_a) * b.mass)


def build_log_ratio_table(
    sources: Mapping[SourceVariantId, Pmf],
    null: Pmf,
    floor: float = DEFAULT_DENSITY_FLOOR,
) -> LogRatioTable:
    """Precompute max(0, ln(f_source / f_background)) for every variant and bin.

    Both densities are floored before the ratio so empty bins cannot
    produce infinite (or spuriously huge) evidence.
    """
    if floor <= 0:
        raise InvalidInputError("density floor must be positive")
    f0 = np.maximum(null.mass, floor)
    ratios = {}
    for variant, pmf in sources.items():
        if pmf.grid != null.grid:
            raise InvalidInputError(f"grid mismatch for variant {variant.label}")
        fk = np.maximum(pmf.mass, floor)
        ratios[variant] = np.clip(np.log(fk / f0), 0.0, None)
    return LogRatioTable(null.grid, ratios)


def _write_value_csv(path, header: str, energies: np.ndarray, values: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header]
    lines.extend(f"{float(e)!r},{float(v)!r}" for e, v in zip(energies, values))
    path.write_text("\n".join(lines) + "\n")


def _read_value_csv(path, expected_header: str) -> tuple[EnergyGrid, np.ndarray]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0].strip() != expected_header:
        raise FileFormatError(f"{path}: expected header {expected_header!r}")
    try:
        rows = [line.split(",") for line in lines[1:] if line.strip()]
        energies = np.array([float(r[0]) for r in rows])
        values = np.array([float(r[1]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise FileFormatError(f"{path}: malformed row") from exc
    if energies.size < 2:
        raise FileFormatError(f"{path}: need at least two grid rows")
    step = energies[1] - energies[0]
    grid = EnergyGrid(start_kev=energies[0], end_kev=energies[-1], step_kev=step)
    if grid.n_bins != energies.size:
        raise FileFormatError(f"{path}: rows do not form a uniform grid")
    return grid, values
