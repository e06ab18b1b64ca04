"""Command-line pipeline driver.

Subcommands cover the full workflow: ``simulate`` emits labeled synthetic
datasets, ``build-tables`` turns spectra into pmfs and ratio tables,
``calibrate`` estimates source-free score statistics, ``score`` scans run
files in parallel, and ``evaluate`` produces metric CSVs. A JSON config
file describes paths and parameters; flags override the common knobs.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from radscan import calibration as cal
from radscan import evaluate as ev
from radscan import io as rio
from radscan import simulate as sim
from radscan._kernels import BACKEND
from radscan.engine import Run, ScanConfig, scan_run
from radscan.errors import InvalidInputError, RadscanError
from radscan.spectra import (
    ALL_SOURCE_VARIANTS,
    EnergyGrid,
    LogRatioTable,
    Pmf,
    SourceVariantId,
    build_log_ratio_table,
    estimate_null_pmf,
    mix_pmfs,
    pmf_from_intensity_histogram,
)

__all__ = ["main", "PipelineConfig"]


@dataclass
class SimSettings:
    duration_s: float = 60.0
    background_rate_hz: float = 60.0
    source_amplitude_hz: float = 45.0
    standoff_shape_s: float = 2.0
    n_null_train: int = 12
    n_calibration: int = 30
    n_null: int = 40
    per_source: int = 3


@dataclass
class PipelineConfig:
    spectra_dir: str = "out/spectra"
    tables_dir: str = "out/tables"
    null_train_dir: str = "out/null_train"
    calibration_runs_dir: str = "out/calibration_runs"
    runs_dir: str = "out/runs"
    labels_file: str = "out/labels.csv"
    calibration_file: str = "out/calibration.csv"
    scores_file: str = "out/scores.csv"
    output_dir: str = "out"
    grid: EnergyGrid = field(default_factory=EnergyGrid)
    scan: ScanConfig = field(default_factory=ScanConfig)
    kde_bandwidth_kev: float = 1.0
    density_floor: float = 1e-12
    min_null_readings: int = 1000
    sim: SimSettings = field(default_factory=SimSettings)
    evaluate_phis: tuple[float, ...] = tuple(np.arange(0.0, 10.01, 0.5))
    default_phi: float = 2.5
    workers: int = 1
    seed: int = 0
    time_format: str = "seconds"

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text())
        cfg = cls()
        paths = raw.get("paths", {})
        for key in (
            "spectra_dir",
            "tables_dir",
            "null_train_dir",
            "calibration_runs_dir",
            "runs_dir",
            "labels_file",
            "calibration_file",
            "scores_file",
            "output_dir",
        ):
            if key in paths:
                setattr(cfg, key, paths[key])
        if "grid" in raw:
            cfg.grid = EnergyGrid(**raw["grid"])
        if "scan" in raw:
            scan = raw["scan"]
            cfg.scan = ScanConfig(
                bandwidths_s=tuple(scan.get("bandwidths_s", cfg.scan.bandwidths_s)),
                tau_min_s=scan.get("tau_min_s", cfg.scan.tau_min_s),
                tau_step_s=scan.get("tau_step_s", cfg.scan.tau_step_s),
                kernel_truncation_sigmas=scan.get(
                    "kernel_truncation_sigmas", cfg.scan.kernel_truncation_sigmas
                ),
            )
        if "simulator" in raw:
            cfg.sim = SimSettings(**raw["simulator"])
        evaluate = raw.get("evaluate", {})
        if "phis" in evaluate:
            cfg.evaluate_phis = tuple(float(p) for p in evaluate["phis"])
        if "default_phi" in evaluate:
            cfg.default_phi = float(evaluate["default_phi"])
        for key in ("kde_bandwidth_kev", "density_floor", "min_null_readings", "workers", "seed"):
            if key in raw:
                setattr(cfg, key, raw[key])
        return cfg


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "time_format", None) is not None:
        cfg.time_format = args.time_format
    return cfg


def _spectra_path(directory: Path, variant: SourceVariantId) -> Path:
    suffix = "shielded" if variant.shielded else "unshielded"
    return directory / f"source{variant.source}_{suffix}.csv"


def _load_source_pmfs(cfg: PipelineConfig) -> dict[SourceVariantId, Pmf]:
    directory = Path(cfg.spectra_dir)
    pmfs: dict[SourceVariantId, Pmf] = {}
    for variant in ALL_SOURCE_VARIANTS:
        if variant.source == 6:
            continue
        path = _spectra_path(directory, variant)
        if not path.exists():
            shielding = "shielded" if variant.shielded else "unshielded"
            raise InvalidInputError(
                f"missing spectra file for source {variant.source} {shielding}: {path}"
            )
        pmfs[variant] = pmf_from_intensity_histogram(
            rio.load_intensity_histogram(path), cfg.grid
        )
    for shielded in (False, True):
        pmfs[SourceVariantId(6, shielded)] = mix_pmfs(
            pmfs[SourceVariantId(1, shielded)], pmfs[SourceVariantId(5, shielded)], 0.5
        )
    return pmfs


def _sorted_run_paths(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidInputError(f"run directory does not exist: {directory}")
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise InvalidInputError(f"no run CSVs found in {directory}")
    return paths


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    spectra_dir = Path(cfg.spectra_dir)
    if args.emit_spectra:
        sim.write_synthetic_spectra(spectra_dir)
        print(f"wrote synthetic spectra to {spectra_dir}")

    background_path = spectra_dir / "background.csv"
    if not background_path.exists():
        raise InvalidInputError(
            f"missing background spectrum for simulation: {background_path} "
            "(run with --emit-spectra to generate the synthetic set)"
        )
    null_pmf = pmf_from_intensity_histogram(
        rio.load_intensity_histogram(background_path), cfg.grid
    )
    source_pmfs = _load_source_pmfs(cfg)

    base = sim.SimConfig(
        duration_s=cfg.sim.duration_s,
        background_rate_hz=cfg.sim.background_rate_hz,
        source_amplitude_hz=cfg.sim.source_amplitude_hz,
        standoff_shape_s=cfg.sim.standoff_shape_s,
    )
    sets = [
        ("train", cfg.null_train_dir, cfg.sim.n_null_train, 0, (cfg.seed, 0)),
        ("calib", cfg.calibration_runs_dir, cfg.sim.n_calibration, 0, (cfg.seed, 1)),
        ("eval", cfg.runs_dir, cfg.sim.n_null, cfg.sim.per_source, (cfg.seed, 2)),
    ]
    for prefix, directory, n_null, per_source, seed in sets:
        batch = sim.simulate_batch(
            n_null,
            per_source,
            base,
            seed,
            null_pmf,
            source_pmfs,
            run_id_prefix=prefix,
        )
        directory = Path(directory)
        for run, _truth in batch:
            rio.write_run(run, directory / f"{run.run_id}.csv")
        if prefix == "eval":
            rio.write_labels([truth for _run, truth in batch], cfg.labels_file)
        print(f"wrote {len(batch)} {prefix} runs to {directory}")
    print(f"wrote labels to {cfg.labels_file}")
    return 0


def cmd_build_tables(args) -> int:
    cfg = _load_config(args)
    source_pmfs = _load_source_pmfs(cfg)

    null_pmf_path = Path(cfg.spectra_dir) / "null_pmf.csv"
    if null_pmf_path.exists():
        null_pmf = Pmf.from_csv(null_pmf_path)
        if null_pmf.grid != cfg.grid:
            raise InvalidInputError(f"{null_pmf_path}: grid does not match configuration")
        null_source = str(null_pmf_path)
    else:
        paths = _sorted_run_paths(cfg.null_train_dir)
        energies = np.concatenate(
            [rio.load_run(p, cfg.time_format).energies_kev for p in paths]
        )
        null_pmf = estimate_null_pmf(
            energies, cfg.grid, cfg.kde_bandwidth_kev, cfg.min_null_readings
        )
        null_source = f"{len(paths)} source-free runs ({energies.size} readings)"

    table = build_log_ratio_table(source_pmfs, null_pmf, cfg.density_floor)

    tables_dir = Path(cfg.tables_dir)
    table.save_dir(tables_dir)
    null_pmf.to_csv(tables_dir / "null_pmf.csv")
    for variant in sorted(source_pmfs):
        source_pmfs[variant].to_csv(tables_dir / f"pmf_{variant.label}.csv")

    print(f"grid: {cfg.grid.n_bins} bins from {cfg.grid.start_kev} to {cfg.grid.end_kev} keV")
    print(f"background pmf from {null_source}; mass {null_pmf.mass.sum():.9f}")
    for variant in sorted(source_pmfs):
        mass = source_pmfs[variant].mass.sum()
        print(f"pmf {variant.label}: mass {mass:.9f}")
    print(f"wrote {len(table.variants)}-variant ratio table to {tables_dir}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    table = LogRatioTable.load_dir(cfg.tables_dir)
    paths = _sorted_run_paths(cfg.calibration_runs_dir)
    runs = [rio.load_run(p, cfg.time_format) for p in paths]
    calib = cal.calibrate(runs, table, cfg.scan)
    cal.save_calibration(calib, cfg.calibration_file)
    ids_path = Path(str(cfg.calibration_file) + ".runs.txt")
    ids_path.write_text("\n".join(sorted(run.run_id for run in runs)) + "\n")
    print(
        f"calibrated {len(calib.entries)} (variant, bandwidth) cells from "
        f"{calib.n_runs} runs; fingerprint {calib.config_fingerprint}"
    )
    print(f"wrote {cfg.calibration_file}")
    return 0


_WORKER: dict = {}


def _score_init(table, calib, scan_config, time_format):
    _WORKER["table"] = table
    _WORKER["calib"] = calib
    _WORKER["scan"] = scan_config
    _WORKER["time_format"] = time_format


def _score_one(path):
    run = rio.load_run(path, _WORKER["time_format"])
    return scan_run(run, _WORKER["table"], _WORKER["calib"], _WORKER["scan"])


def cmd_score(args) -> int:
    cfg = _load_config(args)
    table = LogRatioTable.load_dir(cfg.tables_dir)
    fingerprint = cal.table_config_fingerprint(table, cfg.scan)
    calib = cal.load_calibration(cfg.calibration_file, expected_fingerprint=fingerprint)

    paths = _sorted_run_paths(cfg.runs_dir)
    run_ids = {p.stem for p in paths}
    ids_path = Path(str(cfg.calibration_file) + ".runs.txt")
    if ids_path.exists():
        overlap = run_ids & set(ids_path.read_text().split())
        if overlap:
            raise InvalidInputError(
                f"{len(overlap)} runs were used for calibration and may not be scored: "
                f"{sorted(overlap)[:5]}"
            )

    if cfg.workers > 1:
        with multiprocessing.Pool(
            cfg.workers,
            initializer=_score_init,
            initargs=(table, calib, cfg.scan, cfg.time_format),
        ) as pool:
            results = pool.map(_score_one, paths)
    else:
        _score_init(table, calib, cfg.scan, cfg.time_format)
        results = [_score_one(p) for p in paths]

    results.sort(key=lambda r: r.run_id)
    rio.write_scores(results, cfg.scores_file)
    print(f"scored {len(results)} runs with {cfg.workers} worker(s) [{BACKEND} kernel]")
    print(f"wrote {cfg.scores_file}")
    if args.dump_grid:
        rio.write_score_grid(results, args.dump_grid)
        print(f"wrote per-cell grid to {args.dump_grid}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    phi = args.phi if args.phi is not None else cfg.default_phi
    results = rio.load_scores(cfg.scores_file)
    labels = rio.load_labels(cfg.labels_file)

    score_ids = {r.run_id for r in results}
    label_ids = set(labels)
    if score_ids != label_ids:
        missing = sorted(score_ids - label_ids)[:5]
        extra = sorted(label_ids - score_ids)[:5]
        raise InvalidInputError(
            f"run ids differ between scores and labels; scored-but-unlabeled: {missing}, "
            f"labeled-but-unscored: {extra}"
        )

    outcomes = [ev.LabeledOutcome(labels[r.run_id], r) for r in results]
    out_dir = Path(cfg.output_dir)

    metrics = ev.metrics_over_thresholds(outcomes, cfg.evaluate_phis)
    ev.write_metrics_csv(metrics, out_dir / "metrics.csv")
    matrix = ev.confusion_matrix(outcomes, phi)
    ev.write_confusion_csv(matrix, out_dir / f"confusion_phi{phi:g}.csv")
    distances = ev.localization_distances(outcomes, phi)
    ev.write_localization_csv(distances, out_dir / f"localization_phi{phi:g}.csv")

    at_phi = ev.metrics_over_thresholds(outcomes, [phi])[0]
    print(f"evaluated {len(outcomes)} runs at phi={phi:g}:")
    print(f"  tpr={at_phi.tpr:.6g} fpr={at_phi.fpr:.6g} precision={at_phi.precision:.6g}")
    print(
        f"  id_accuracy={at_phi.id_accuracy:.6g} "
        f"(all source runs: {at_phi.id_accuracy_all_runs:.6g})"
    )
    print(
        f"  localization median={at_phi.loc_median_s:.6g}s mean={at_phi.loc_mean_s:.6g}s "
        f"p95={at_phi.loc_p95_s:.6g}s"
    )
    print(f"wrote metrics to {out_dir / 'metrics.csv'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="radscan",
        description="Scan-statistic detection of radiological sources in mobile-sensor runs.",
    )
    parser.add_argument("--config", help="JSON pipeline configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate labeled synthetic datasets")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument(
        "--emit-spectra",
        action="store_true",
        help="write the built-in synthetic spectra CSVs first",
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_tables = sub.add_parser("build-tables", help="build pmfs and the log-ratio table")
    p_tables.add_argument("--time-format", choices=rio.TIME_FORMATS, default=None)
    p_tables.set_defaults(func=cmd_build_tables)

    p_cal = sub.add_parser("calibrate", help="estimate source-free score statistics")
    p_cal.add_argument("--time-format", choices=rio.TIME_FORMATS, default=None)
    p_cal.set_defaults(func=cmd_calibrate)

    p_score = sub.add_parser("score", help="scan a directory of run CSVs")
    p_score.add_argument("--workers", type=int, default=None)
    p_score.add_argument("--time-format", choices=rio.TIME_FORMATS, default=None)
    p_score.add_argument("--dump-grid", default=None, help="also write the per-cell score grid")
    p_score.set_defaults(func=cmd_score)

    p_eval = sub.add_parser("evaluate", help="compute metrics from scores and labels")
    p_eval.add_argument("--phi", type=float, default=None, help="decision threshold")
    p_eval.set_defaults(func=cmd_evaluate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RadscanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
