"""Synthetic run generation with known ground truth.

Produces labeled null and single-source runs so the whole pipeline can be
exercised and verified at desk scale. Background events follow a
homogeneous Poisson process with energies drawn from a background pmf;
source events follow an inhomogeneous Poisson process whose rate traces
the inverse-square profile of a point source passed at constant speed,
with energies drawn from the variant's pmf.

Also provides a set of synthetic source and background intensity
histograms (distinct photopeaks on falling continua) so the pipeline has
spectra to run against without any external data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from radscan.engine import DEFAULT_TAU_MIN_S, Run
from radscan.errors import InvalidInputError
from radscan.spectra import (
    ALL_SOURCE_VARIANTS,
    EnergyGrid,
    IntensityHistogram,
    Pmf,
    SourceVariantId,
    mix_pmfs,
    pmf_from_intensity_histogram,
)

__all__ = [
    "SimConfig",
    "GroundTruth",
    "BatchRanges",
    "simulate_run",
    "simulate_batch",
    "source_intensity",
    "synthetic_source_histograms",
    "synthetic_background_histogram",
    "write_synthetic_spectra",
    "build_truth_pmfs",
]


@dataclass(frozen=True)
class SimConfig:
    """Parameters for one simulated run.

    ``source_amplitude_hz`` is the peak source event rate at closest
    approach; ``standoff_shape_s`` is the profile half-width (the time
    offset at which the rate falls to half its peak).
    """

    duration_s: float = 60.0
    background_rate_hz: float = 60.0
    source_amplitude_hz: float = 0.0
    source_variant: SourceVariantId | None = None
    tau_true_s: float | None = None
    standoff_shape_s: float = 2.0
    seed: object = 0

    def __post_init__(self):
        if self.duration_s <= DEFAULT_TAU_MIN_S:
            raise InvalidInputError(
                f"run duration must exceed {DEFAULT_TAU_MIN_S} s, got {self.duration_s}"
            )
        if self.background_rate_hz < 0 or self.source_amplitude_hz < 0:
            raise InvalidInputError("event rates must be non-negative")
        if self.standoff_shape_s <= 0:
            raise InvalidInputError("standoff shape must be positive")
        if (self.source_variant is None) != (self.tau_true_s is None):
            raise InvalidInputError("source variant and tau_true must be set together")
        if self.tau_true_s is not None and not (
            DEFAULT_TAU_MIN_S <= self.tau_true_s <= self.duration_s
        ):
            raise InvalidInputError(
                f"tau_true must lie within [{DEFAULT_TAU_MIN_S}, duration], got {self.tau_true_s}"
            )


@dataclass(frozen=True)
class GroundTruth:
    """Label for one run: generating source (0 = none) and true closest time."""

    run_id: str
    source_id: int
    shielded: bool | None
    tau_true_s: float | None

    def __post_init__(self):
        if (self.source_id == 0) != (self.tau_true_s is None):
            raise InvalidInputError("tau_true must be present exactly when a source is")


@dataclass(frozen=True)
class BatchRanges:
    """Per-run randomization applied by :func:`simulate_batch`."""

    amplitude_scale: tuple[float, float] = (0.75, 1.25)
    duration_scale: tuple[float, float] = (0.95, 1.1)
    background_scale: tuple[float, float] = (0.85, 1.15)
    tau_margin_s: float = 5.0


def source_intensity(t, amplitude_hz: float, tau_s: float, shape_s: float):
    """Source event rate over time: amplitude * c^2 / (c^2 + (t - tau)^2).

    This is the exact 1/r^2 intensity of a point source passed at constant
    speed, peaking at the closest-approach time tau.
    """
    t = np.asarray(t, dtype=np.float64)
    c2 = shape_s * shape_s
    return amplitude_hz * c2 / (c2 + (t - tau_s) ** 2)


def _sample_energies(pmf: Pmf, n: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(pmf.mass)
    idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    return pmf.grid.energies()[np.minimum(idx, pmf.grid.n_bins - 1)]


def _generate(
    config: SimConfig,
    rng: np.random.Generator,
    null_pmf: Pmf,
    source_pmf: Pmf | None,
    run_id: str,
) -> tuple[Run, GroundTruth]:
    n_bg = rng.poisson(config.background_rate_hz * config.duration_s)
    times = np.sort(rng.uniform(0.0, config.duration_s, n_bg))
    energies = _sample_energies(null_pmf, n_bg, rng)

    if config.source_variant is not None and config.source_amplitude_hz > 0:
        if source_pmf is None:
            raise InvalidInputError("source_pmf required when a source variant is configured")
        # Thinning: homogeneous candidates at the peak rate, accepted with
        # probability intensity(t) / peak.
        n_cand = rng.poisson(config.source_amplitude_hz * config.duration_s)
        t_cand = rng.uniform(0.0, config.duration_s, n_cand)
        accept = rng.random(n_cand) * config.source_amplitude_hz <= source_intensity(
            t_cand, config.source_amplitude_hz, config.tau_true_s, config.standoff_shape_s
        )
        t_src = t_cand[accept]
        e_src = _sample_energies(source_pmf, t_src.size, rng)
        order = np.argsort(np.concatenate([times, t_src]), kind="stable")
        energies = np.concatenate([energies, e_src])[order]
        times = np.concatenate([times, t_src])[order]

    if times.size == 0:
        raise InvalidInputError("simulated run produced no events; raise the rates")

    # Zero amplitude emits nothing, so the run is truthfully a null run
    # even when a variant was configured.
    if config.source_variant is not None and config.source_amplitude_hz > 0:
        truth = GroundTruth(
            run_id=run_id,
            source_id=config.source_variant.source,
            shielded=config.source_variant.shielded,
            tau_true_s=config.tau_true_s,
        )
    else:
        truth = GroundTruth(run_id=run_id, source_id=0, shielded=None, tau_true_s=None)
    return Run(run_id, times, energies), truth


def simulate_run(
    config: SimConfig,
    null_pmf: Pmf,
    source_pmf: Pmf | None = None,
    run_id: str | None = None,
) -> tuple[Run, GroundTruth]:
    """Generate one run and its label. Deterministic given ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    if run_id is None:
        run_id = f"sim-{config.seed}"
    return _generate(config, rng, null_pmf, source_pmf, run_id)


def simulate_batch(
    n_null: int,
    per_source: int,
    base: SimConfig,
    seed: int,
    null_pmf: Pmf,
    source_pmfs: Mapping[SourceVariantId, Pmf],
    ranges: BatchRanges = BatchRanges(),
    run_id_prefix: str = "run",
) -> list[tuple[Run, GroundTruth]]:
    """Generate ``n_null`` null runs plus ``per_source`` runs per variant.

    Duration, background rate, amplitude, and true closest time are
    randomized per run within ``ranges``. Every run's stream is seeded
    from (seed, run index), so any run regenerates identically.
    """
    jobs: list[SourceVariantId | None] = [None] * n_null
    for variant in ALL_SOURCE_VARIANTS:
        jobs.extend([variant] * per_source)

    out = []
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(jobs))
    for index, (variant, child) in enumerate(zip(jobs, children)):
        rng = np.random.default_rng(child)
        duration = base.duration_s * rng.uniform(*ranges.duration_scale)
        background = base.background_rate_hz * rng.uniform(*ranges.background_scale)
        if variant is None:
            config = replace(
                base,
                duration_s=duration,
                background_rate_hz=background,
                source_amplitude_hz=0.0,
                source_variant=None,
                tau_true_s=None,
            )
            source_pmf = None
            run_id = f"{run_id_prefix}-null-{index:05d}"
        else:
            tau_hi = max(duration - ranges.tau_margin_s, DEFAULT_TAU_MIN_S)
            config = replace(
                base,
                duration_s=duration,
                background_rate_hz=background,
                source_amplitude_hz=base.source_amplitude_hz * rng.uniform(*ranges.amplitude_scale),
                source_variant=variant,
                tau_true_s=rng.uniform(DEFAULT_TAU_MIN_S, tau_hi),
            )
            source_pmf = source_pmfs[variant]
            run_id = f"{run_id_prefix}-src{variant.label}-{index:05d}"
        out.append(_generate(config, rng, null_pmf, source_pmf, run_id))
    return out


# ---------------------------------------------------------------------------
# Synthetic spectra
#
# Distinct photopeaks on falling continua, loosely patterned on the isotope
# families the six sources represent. Absolute scale is irrelevant (the
# conversion to pmf is scale-invariant); only the shapes matter.
# ---------------------------------------------------------------------------

_HIST_BIN_START_KEV = 11.0
_HIST_BIN_WIDTH_KEV = 2.0
_HIST_N_BINS = 1495  # centers 12..3000 keV

_SOURCE_PEAKS = {
    1: [(186.0, 40.0), (143.0, 8.0), (205.0, 6.0)],
    2: [(414.0, 30.0), (375.0, 12.0), (129.0, 10.0), (203.0, 8.0)],
    3: [(364.0, 45.0), (637.0, 8.0), (284.0, 10.0)],
    4: [(1173.0, 25.0), (1332.0, 22.0)],
    5: [(140.0, 60.0), (181.0, 5.0)],
}
_SOURCE_CONTINUUM_SCALE_KEV = {1: 250.0, 2: 300.0, 3: 350.0, 4: 700.0, 5: 200.0}


def _peak(centers: np.ndarray, energy: float, area: float) -> np.ndarray:
    sigma = 1.5 + 0.08 * np.sqrt(energy)
    return area * np.exp(-((centers - energy) ** 2) / (2.0 * sigma * sigma))


def _shield(centers: np.ndarray, counts: np.ndarray) -> np.ndarray:
    # Low energies attenuate hardest; a broad down-scatter continuum picks
    # up part of the absorbed intensity.
    attenuation = np.exp(-3.0 * (centers / 100.0) ** -1.6)
    absorbed = np.sum(counts * (1.0 - attenuation))
    scatter = np.exp(-centers / 280.0)
    scatter *= 0.25 * absorbed / scatter.sum()
    return counts * attenuation + scatter


def synthetic_background_histogram() -> IntensityHistogram:
    """Urban-style background: two falling continua plus high-energy lines."""
    centers = _HIST_BIN_START_KEV + (np.arange(_HIST_N_BINS) + 0.5) * _HIST_BIN_WIDTH_KEV
    counts = 3.0 * np.exp(-centers / 400.0) + 1.0 * np.exp(-centers / 900.0)
    counts += _peak(centers, 92.0, 6.0)
    counts += _peak(centers, 1461.0, 4.0)
    counts += _peak(centers, 2614.0, 1.5)
    return IntensityHistogram(counts, _HIST_BIN_START_KEV, _HIST_BIN_WIDTH_KEV)


def synthetic_source_histograms() -> dict[SourceVariantId, IntensityHistogram]:
    """Intensity histograms for sources 1..5, shielded and unshielded.

    The sixth source has no histogram of its own; its pmf is the 50-50
    combination of sources 1 and 5.
    """
    centers = _HIST_BIN_START_KEV + (np.arange(_HIST_N_BINS) + 0.5) * _HIST_BIN_WIDTH_KEV
    out: dict[SourceVariantId, IntensityHistogram] = {}
    for source, peaks in _SOURCE_PEAKS.items():
        counts = 0.4 * np.exp(-centers / _SOURCE_CONTINUUM_SCALE_KEV[source])
        for energy, area in peaks:
            counts = counts + _peak(centers, energy, area)
        out[SourceVariantId(source, False)] = IntensityHistogram(
            counts, _HIST_BIN_START_KEV, _HIST_BIN_WIDTH_KEV
        )
        out[SourceVariantId(source, True)] = IntensityHistogram(
            _shield(centers, counts), _HIST_BIN_START_KEV, _HIST_BIN_WIDTH_KEV
        )
    return out


def build_truth_pmfs(grid: EnergyGrid) -> tuple[Pmf, dict[SourceVariantId, Pmf]]:
    """(background pmf, variant pmfs incl. source 6) used to draw events."""
    background = pmf_from_intensity_histogram(synthetic_background_histogram(), grid)
    pmfs = {
        variant: pmf_from_intensity_histogram(hist, grid)
        for variant, hist in synthetic_source_histograms().items()
    }
    for shielded in (False, True):
        pmfs[SourceVariantId(6, shielded)] = mix_pmfs(
            pmfs[SourceVariantId(1, shielded)], pmfs[SourceVariantId(5, shielded)], 0.5
        )
    return background, pmfs


def write_synthetic_spectra(directory) -> list[Path]:
    """Write the synthetic spectra as ``energy_kev,count_rate`` CSV files.

    One file per source variant (``source<k>_<shielded|unshielded>.csv``)
    plus ``background.csv``; this is the input layout the table-building
    command expects.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    items = [("background.csv", synthetic_background_histogram())]
    for variant, hist in sorted(synthetic_source_histograms().items()):
        suffix = "shielded" if variant.shielded else "unshielded"
        items.append((f"source{variant.source}_{suffix}.csv", hist))
    for name, hist in items:
        path = directory / name
        lines = ["energy_kev,count_rate"]
        lines.extend(f"{float(e)!r},{float(c)!r}" for e, c in zip(hist.centers(), hist.counts))
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written
