"""Source-free calibration of the maximized smoothed scores.

The mean and standard deviation of the per-(variant, bandwidth) maximized
score over source-free runs put every cell of the scan grid on a common
scale; without this, cells with higher intrinsic variance would dominate
the scan maximum and over-trigger.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from radscan.engine import Run, ScanConfig, max_score_grid
from radscan.errors import CalibrationMismatchError, FileFormatError, InsufficientDataError
from radscan.spectra import LogRatioTable, SourceVariantId

__all__ = [
    "CalEntry",
    "NullCalibration",
    "calibrate",
    "save_calibration",
    "load_calibration",
    "table_config_fingerprint",
    "SIGMA_FLOOR",
]

SIGMA_FLOOR = 1e-9


class CalEntry(NamedTuple):
    mu0: float
    sigma0: float


@dataclass(eq=False)
class NullCalibration:
    """Per-(variant, bandwidth) source-free mean and standard deviation."""

    entries: dict[tuple[SourceVariantId, float], CalEntry]
    n_runs: int
    config_fingerprint: str

    def __post_init__(self):
        for key, entry in self.entries.items():
            if entry.sigma0 < SIGMA_FLOOR:
                raise FileFormatError(
                    f"sigma0 below floor for variant {key[0].label}, bandwidth {key[1]}"
                )

    def lookup(self, variant: SourceVariantId, h_s: float) -> CalEntry:
        try:
            return self.entries[(variant, h_s)]
        except KeyError:
            raise CalibrationMismatchError(
                f"no calibration entry for variant {variant.label}, bandwidth {h_s}"
            ) from None


def table_config_fingerprint(table: LogRatioTable, config: ScanConfig) -> str:
    """Digest binding a calibration to the exact table and scan settings."""
    digest = hashlib.sha256()
    digest.update(
        struct.pack("<3d", table.grid.start_kev, table.grid.end_kev, table.grid.step_kev)
    )
    for variant in table.variants:
        digest.update(variant.label.encode())
        digest.update(table.ratios[variant].tobytes())
    digest.update(np.asarray(config.bandwidths_s).tobytes())
    digest.update(
        struct.pack("<3d", config.tau_min_s, config.tau_step_s, config.kernel_truncation_sigmas)
    )
    return digest.hexdigest()[:16]


def calibrate(
    null_runs: Sequence[Run], table: LogRatioTable, config: ScanConfig
) -> NullCalibration:
    """Estimate per-cell source-free score statistics from null runs.

    Uses the sample (n-1) standard deviation, floored at ``SIGMA_FLOOR``
    so degenerate cells cannot blow up the standardized score.
    """
    if len(null_runs) < 2:
        raise InsufficientDataError(
            f"calibration needs at least 2 source-free runs, got {len(null_runs)}"
        )
    keys = [(variant, h) for variant in table.variants for h in config.bandwidths_s]
    scores = {key: np.empty(len(null_runs)) for key in keys}
    for i, run in enumerate(null_runs):
        grid = max_score_grid(run, table, config)
        for key in keys:
            scores[key][i] = grid[key][0]
    entries = {}
    for key in keys:
        values = scores[key]
        mu0 = float(values.mean())
        sigma0 = max(float(values.std(ddof=1)), SIGMA_FLOOR)
        entries[key] = CalEntry(mu0, sigma0)
    return NullCalibration(
        entries=entries,
        n_runs=len(null_runs),
        config_fingerprint=table_config_fingerprint(table, config),
    )


def save_calibration(calib: NullCalibration, path) -> None:
    """Write the calibration as CSV with a metadata comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"# n_runs={calib.n_runs} fingerprint={calib.config_fingerprint}",
        "source,shielded,bandwidth_s,mu0,sigma0",
    ]
    for (variant, h), entry in sorted(calib.entries.items()):
        lines.append(
            f"{variant.source},{int(variant.shielded)},{h!r},{entry.mu0!r},{entry.sigma0!r}"
        )
    path.write_text("\n".join(lines) + "\n")


def load_calibration(path, expected_fingerprint: str | None = None) -> NullCalibration:
    """Read a calibration file; optionally verify its fingerprint.

    Raises :class:`CalibrationMismatchError` when the stored fingerprint
    differs from ``expected_fingerprint``, which guards against scoring
    with a calibration built from different tables or scan settings.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FileFormatError(f"cannot read calibration {path}: {exc}") from exc
    if len(lines) < 3 or not lines[0].startswith("#"):
        raise FileFormatError(f"{path}: missing calibration metadata line")
    meta = dict(
        item.split("=", 1) for item in lines[0].lstrip("# ").split() if "=" in item
    )
    try:
        n_runs = int(meta["n_runs"])
        fingerprint = meta["fingerprint"]
    except (KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed metadata line") from exc
    if lines[1].strip() != "source,shielded,bandwidth_s,mu0,sigma0":
        raise FileFormatError(f"{path}: unexpected header")
    entries: dict[tuple[SourceVariantId, float], CalEntry] = {}
    for line in lines[2:]:
        if not line.strip():
            continue
        try:
            source, shielded, h, mu0, sigma0 = line.split(",")
            key = (SourceVariantId(int(source), bool(int(shielded))), float(h))
            entries[key] = CalEntry(float(mu0), float(sigma0))
        except (ValueError, TypeError) as exc:
            raise FileFormatError(f"{path}: malformed row {line!r}") from exc
    calib = NullCalibration(entries=entries, n_runs=n_runs, config_fingerprint=fingerprint)
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise CalibrationMismatchError(
            f"calibration fingerprint {fingerprint} does not match active "
            f"configuration {expected_fingerprint}"
        )
    return calib
