import numpy as np
import pytest
from hypothesis import settings

from radscan.calibration import calibrate
from radscan.engine import Run, ScanConfig
from radscan.simulate import SimConfig, build_truth_pmfs, simulate_batch
from radscan.spectra import EnergyGrid, LogRatioTable, SourceVariantId, build_log_ratio_table

settings.register_profile("suite", max_examples=25, deadline=None)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def grid():
    return EnergyGrid()


@pytest.fixture(scope="session")
def truth_pmfs(grid):
    """(background pmf, per-variant pmfs) used as simulation ground truth."""
    return build_truth_pmfs(grid)


@pytest.fixture(scope="session")
def truth_table(grid, truth_pmfs):
    """Ratio table built from the true pmfs (no estimation noise)."""
    null_pmf, source_pmfs = truth_pmfs
    return build_log_ratio_table(source_pmfs, null_pmf)


@pytest.fixture(scope="session")
def scan_config():
    return ScanConfig()


@pytest.fixture(scope="session")
def truth_calibration(truth_table, truth_pmfs, scan_config):
    """Calibration from 40 simulated source-free runs against truth_table."""
    null_pmf, source_pmfs = truth_pmfs
    runs = simulate_batch(
        40, 0, SimConfig(), seed=(2024, 11), null_pmf=null_pmf, source_pmfs=source_pmfs
    )
    return calibrate([r for r, _ in runs], truth_table, scan_config)


@pytest.fixture
def small_grid():
    return EnergyGrid(start_kev=11.0, end_kev=31.0, step_kev=0.5)


def make_single_bin_table(grid, entries):
    """Table where each variant has evidence only at the listed energies.

    ``entries``: {variant: {energy_kev: ratio_value}}.
    """
    ratios = {}
    for variant, spec in entries.items():
        values = np.zeros(grid.n_bins)
        for energy, value in spec.items():
            values[int(grid.nearest_bin(energy))] = value
        ratios[variant] = values
    return LogRatioTable(grid, ratios)


@pytest.fixture
def toy_table(small_grid):
    """Two-variant table: evidence 2.0 at 20 keV for 1.0, 3.0 at 25 keV for 2.1."""
    return make_single_bin_table(
        small_grid,
        {
            SourceVariantId(1, False): {20.0: 2.0},
            SourceVariantId(2, True): {25.0: 3.0},
        },
    )


def make_run(run_id, times, energies):
    return Run(run_id, np.asarray(times, dtype=float), np.asarray(energies, dtype=float))
