"""Detection, identification, and localization metrics over labeled runs.

Everything operates on (ground truth, scan result) pairs and sweeps the
decision threshold: detection rates, precision, identification accuracy,
confusion matrices, and closest-approach-time error statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from radscan.engine import ScanResult
from radscan.errors import InvalidInputError
from radscan.simulate import GroundTruth

__all__ = [
    "LabeledOutcome",
    "ThresholdMetrics",
    "confusion_matrix",
    "metrics_over_thresholds",
    "localization_distances",
    "write_metrics_csv",
    "write_confusion_csv",
    "write_localization_csv",
]


@dataclass(frozen=True)
class LabeledOutcome:
    """A scored run paired with its ground truth."""

    truth: GroundTruth
    result: ScanResult

    def __post_init__(self):
        if self.truth.run_id != self.result.run_id:
            raise InvalidInputError(
                f"label/result run id mismatch: {self.truth.run_id} vs {self.result.run_id}"
            )

    @property
    def run_id(self) -> str:
        return self.truth.run_id


@dataclass(frozen=True)
class ThresholdMetrics:
    """Detection and identification metrics at one decision threshold.

    ``id_accuracy`` is scored over source runs detected at this threshold;
    ``id_accuracy_all_runs`` scores every source run, counting missed
    detections as errors. Localization stats cover detected source runs
    and are NaN when there are none.
    """

    phi: float
    tpr: float
    fpr: float
    precision: float
    id_accuracy: float
    id_accuracy_all_runs: float
    loc_median_s: float
    loc_mean_s: float
    loc_p95_s: float


def _arrays(outcomes: Sequence[LabeledOutcome]):
    if not outcomes:
        raise InvalidInputError("no outcomes to evaluate")
    stat = np.array([o.result.stat for o in outcomes])
    true_id = np.array([o.truth.source_id for o in outcomes])
    est_id = np.array([o.result.k_hat.source for o in outcomes])
    tau_true = np.array(
        [o.truth.tau_true_s if o.truth.tau_true_s is not None else np.nan for o in outcomes]
    )
    tau_hat = np.array([o.result.tau_hat_s for o in outcomes])
    return stat, true_id, est_id, tau_true, tau_hat


def confusion_matrix(outcomes: Sequence[LabeledOutcome], phi: float) -> np.ndarray:
    """7x7 count matrix: rows true source 0..6, columns estimated source 0..6.

    A run estimates source 0 whenever its scan statistic is below phi.
    """
    stat, true_id, est_id, _, _ = _arrays(outcomes)
    est = np.where(stat >= phi, est_id, 0)
    matrix = np.zeros((7, 7), dtype=np.int64)
    np.add.at(matrix, (true_id, est), 1)
    return matrix


def metrics_over_thresholds(
    outcomes: Sequence[LabeledOutcome], phis: Sequence[float]
) -> list[ThresholdMetrics]:
    """Sweep thresholds and compute detection/identification/localization metrics.

    Conventions: precision is 1 when nothing is detected; tpr (fpr) is 0
    when there are no positive (negative) runs.
    """
    if len(phis) == 0:
        raise InvalidInputError("need at least one threshold")
    stat, true_id, est_id, tau_true, tau_hat = _arrays(outcomes)
    is_source = true_id > 0
    n_pos = int(is_source.sum())
    n_neg = int((~is_source).sum())

    out = []
    for phi in phis:
        detected = stat >= phi
        tp = int((detected & is_source).sum())
        fp = int((detected & ~is_source).sum())
        tpr = tp / n_pos if n_pos else 0.0
        fpr = fp / n_neg if n_neg else 0.0
        precision = tp / (tp + fp) if (tp + fp) else 1.0

        correct = est_id == true_id
        det_src = detected & is_source
        id_acc = float((correct & det_src).sum() / det_src.sum()) if det_src.any() else 1.0
        id_acc_all = float((correct & det_src).sum() / n_pos) if n_pos else 1.0

        distances = np.abs(tau_hat[det_src] - tau_true[det_src])
        if distances.size:
            loc_median = float(np.median(distances))
            loc_mean = float(np.mean(distances))
            loc_p95 = float(np.percentile(distances, 95))
        else:
            loc_median = loc_mean = loc_p95 = math.nan
        out.append(
            ThresholdMetrics(
                phi=float(phi),
                tpr=tpr,
                fpr=fpr,
                precision=precision,
                id_accuracy=id_acc,
                id_accuracy_all_runs=id_acc_all,
                loc_median_s=loc_median,
                loc_mean_s=loc_mean,
                loc_p95_s=loc_p95,
            )
        )
    return out


def localization_distances(outcomes: Sequence[LabeledOutcome], phi: float) -> list[tuple[str, float]]:
    """|true - estimated| closest-approach time for detected source runs.

    Order follows the input; missed detections and null runs are excluded.
    """
    out = []
    for o in outcomes:
        if o.truth.source_id > 0 and o.result.stat >= phi:
            out.append((o.run_id, abs(o.truth.tau_true_s - o.result.tau_hat_s)))
    return out


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_metrics_csv(metrics: Sequence[ThresholdMetrics], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "phi,tpr,fpr,precision,id_accuracy,id_accuracy_all_runs,"
        "loc_median_s,loc_mean_s,loc_p95_s"
    ]
    for m in metrics:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    m.phi,
                    m.tpr,
                    m.fpr,
                    m.precision,
                    m.id_accuracy,
                    m.id_accuracy_all_runs,
                    m.loc_median_s,
                    m.loc_mean_s,
                    m.loc_p95_s,
                )
            )
        )
    path.write_text("\n".join(lines) + "\n")


def write_confusion_csv(matrix: np.ndarray, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["true_source," + ",".join(f"est_{j}" for j in range(7)) + ",total"]
    for i in range(7):
        row = matrix[i]
        lines.append(f"{i}," + ",".join(str(v) for v in row) + f",{row.sum()}")
    totals = matrix.sum(axis=0)
    lines.append("total," + ",".join(str(v) for v in totals) + f",{matrix.sum()}")
    path.write_text("\n".join(lines) + "\n")


def write_localization_csv(distances: Sequence[tuple[str, float]], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["run_id,distance_s"]
    lines.extend(f"{run_id},{_fmt(d)}" for run_id, d in distances)
    path.write_text("\n".join(lines) + "\n")
