"""Scan-statistic detection, identification, and localization of
radiological sources in mobile-sensor (time, energy) event streams."""

from radscan._kernels import BACKEND as KERNEL_BACKEND
from radscan.calibration import (
    NullCalibration,
    calibrate,
    load_calibration,
    save_calibration,
    table_config_fingerprint,
)
from radscan.engine import (
    Decision,
    Run,
    ScanConfig,
    ScanResult,
    decide,
    event_evidence,
    maximize_over_tau,
    scan_run,
    smoothed_score,
    standardize,
)
from radscan.errors import (
    CalibrationMismatchError,
    FileFormatError,
    InsufficientDataError,
    InvalidInputError,
    RadscanError,
)
from radscan.evaluate import (
    LabeledOutcome,
    ThresholdMetrics,
    confusion_matrix,
    localization_distances,
    metrics_over_thresholds,
)
from radscan.simulate import (
    BatchRanges,
    GroundTruth,
    SimConfig,
    simulate_batch,
    simulate_run,
)
from radscan.spectra import (
    ALL_SOURCE_VARIANTS,
    EnergyGrid,
    IntensityHistogram,
    LogRatioTable,
    Pmf,
    SourceVariantId,
    build_log_ratio_table,
    estimate_null_pmf,
    mix_pmfs,
    pmf_from_intensity_histogram,
)

__version__ = "0.1.0"
