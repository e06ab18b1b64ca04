"""CSV interchange: runs, labels, score summaries, and the per-cell dump."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from radscan.engine import Run, ScanResult
from radscan.errors import FileFormatError, InvalidInputError
from radscan.simulate import GroundTruth
from radscan.spectra import IntensityHistogram, SourceVariantId

__all__ = [
    "load_run",
    "write_run",
    "load_labels",
    "write_labels",
    "write_scores",
    "load_scores",
    "write_score_grid",
    "load_intensity_histogram",
]

TIME_FORMATS = ("seconds", "delta-us")


def load_run(path, time_format: str = "seconds") -> Run:
    """Read one run CSV (``time,energy_kev``); run id is the file stem.

    ``time_format`` selects the timestamp encoding: ``seconds`` for
    absolute seconds since run start, ``delta-us`` for inter-event deltas
    in microseconds (converted by cumulative sum).
    """
    if time_format not in TIME_FORMATS:
        raise InvalidInputError(f"time_format must be one of {TIME_FORMATS}")
    path = Path(path)
    times, energies = _read_two_columns(path, ("time", "energy_kev"))
    if time_format == "delta-us":
        times = np.cumsum(times) * 1e-6
    return Run(path.stem, times, energies)


def write_run(run: Run, path) -> None:
    """Write a run CSV with absolute times in seconds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["time,energy_kev"]
    lines.extend(f"{float(t)!r},{float(e)!r}" for t, e in zip(run.times_s, run.energies_kev))
    path.write_text("\n".join(lines) + "\n")


def write_labels(truths: Sequence[GroundTruth], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["run_id,source_id,tau_true_s"]
    for t in truths:
        tau = "" if t.tau_true_s is None else repr(t.tau_true_s)
        lines.append(f"{t.run_id},{t.source_id},{tau}")
    path.write_text("\n".join(lines) + "\n")


def load_labels(path) -> dict[str, GroundTruth]:
    path = Path(path)
    rows = _read_rows(path, ("run_id", "source_id", "tau_true_s"))
    out: dict[str, GroundTruth] = {}
    for row in rows:
        try:
            run_id = row["run_id"]
            source_id = int(row["source_id"])
            tau = float(row["tau_true_s"]) if row["tau_true_s"] else None
            out[run_id] = GroundTruth(
                run_id=run_id, source_id=source_id, shielded=None, tau_true_s=tau
            )
        except (ValueError, InvalidInputError) as exc:
            raise FileFormatError(f"{path}: bad label row {row!r}: {exc}") from exc
    return out


def write_scores(results: Sequence[ScanResult], path) -> None:
    """Summary CSV, one row per run: ``run_id,T,k_hat,source_id,tau_hat_s``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["run_id,T,k_hat,source_id,tau_hat_s"]
    for r in results:
        lines.append(
            f"{r.run_id},{r.stat!r},{r.k_hat.label},{r.k_hat.source},{r.tau_hat_s!r}"
        )
    path.write_text("\n".join(lines) + "\n")


def load_scores(path) -> list[ScanResult]:
    """Read a summary CSV back; the per-cell grid is not retained there."""
    path = Path(path)
    rows = _read_rows(path, ("run_id", "T", "k_hat", "source_id", "tau_hat_s"))
    out = []
    for row in rows:
        try:
            out.append(
                ScanResult(
                    run_id=row["run_id"],
                    stat=float(row["T"]),
                    k_hat=SourceVariantId.parse(row["k_hat"]),
                    tau_hat_s=float(row["tau_hat_s"]),
                    cells=None,
                )
            )
        except (ValueError, FileFormatError) as exc:
            raise FileFormatError(f"{path}: bad score row {row!r}: {exc}") from exc
    return out


def write_score_grid(results: Sequence[ScanResult], path) -> None:
    """Long-form dump: one row per (run, variant, bandwidth) cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["run_id,source,shielded,bandwidth_s,z,s_tilde,tau_k_s"]
    for r in results:
        if r.cells is None:
            raise InvalidInputError(f"result {r.run_id} has no retained score grid")
        for (variant, h), cell in sorted(r.cells.items()):
            lines.append(
                f"{r.run_id},{variant.source},{int(variant.shielded)},{h!r},"
                f"{cell.z!r},{cell.score!r},{cell.tau_s!r}"
            )
    path.write_text("\n".join(lines) + "\n")


def load_intensity_histogram(path) -> IntensityHistogram:
    """Read a spectra CSV (``energy_kev,count_rate``; energies are bin centers)."""
    path = Path(path)
    centers, counts = _read_two_columns(path, ("energy_kev", "count_rate"))
    if centers.size < 2:
        raise FileFormatError(f"{path}: need at least two bins")
    width = centers[1] - centers[0]
    if width <= 0 or not np.allclose(np.diff(centers), width, rtol=0, atol=1e-9):
        raise FileFormatError(f"{path}: energy bins are not uniform")
    try:
        return IntensityHistogram(
            counts, bin_start_kev=float(centers[0] - width / 2), bin_width_kev=float(width)
        )
    except InvalidInputError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def _read_two_columns(path: Path, names: tuple[str, str]) -> tuple[np.ndarray, np.ndarray]:
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from exc
    if not lines or [c.strip() for c in lines[0].split(",")] != list(names):
        raise FileFormatError(f"{path}: expected header {','.join(names)!r}")
    try:
        first = np.empty(len(lines) - 1)
        second = np.empty(len(lines) - 1)
        count = 0
        for line in lines[1:]:
            if not line.strip():
                continue
            a, b = line.split(",")
            first[count] = float(a)
            second[count] = float(b)
            count += 1
    except (ValueError, IndexError) as exc:
        raise FileFormatError(f"{path}: malformed row") from exc
    return first[:count], second[:count]


def _read_rows(path: Path, names: Sequence[str]) -> list[dict[str, str]]:
    try:
        with open(path, newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != list(names):
                raise FileFormatError(f"{path}: expected header {','.join(names)!r}")
            return [row for row in reader if any(v.strip() for v in row.values() if v)]
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from exc
