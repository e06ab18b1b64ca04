import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radscan.errors import FileFormatError, InsufficientDataError, InvalidInputError
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

from .oracles import interp_pmf_oracle, two_point_kde_oracle


class TestEnergyGrid:
    def test_default_grid_has_7981_bins(self, grid):
        assert grid.n_bins == 7981
        energies = grid.energies()
        assert energies[0] == 11.0
        assert energies[-1] == 4001.0
        assert energies[1] - energies[0] == 0.5

    def test_invalid_grids_rejected(self):
        with pytest.raises(InvalidInputError):
            EnergyGrid(start_kev=100.0, end_kev=50.0)
        with pytest.raises(InvalidInputError):
            EnergyGrid(step_kev=0.0)

    def test_nearest_bin_rounds_half_up(self, grid):
        # 11.25 is exactly halfway between bins 11.0 and 11.5
        assert grid.nearest_bin(11.25) == 1
        assert grid.nearest_bin(11.24) == 0
        assert grid.nearest_bin(100.26) == 179  # bin at 100.5 keV

    def test_contains_is_inclusive(self, grid):
        assert grid.contains([11.0, 4001.0, 10.99, 4001.01]).tolist() == [
            True,
            True,
            False,
            False,
        ]


class TestIntensityHistogram:
    def test_rejects_all_zero_counts(self):
        with pytest.raises(InvalidInputError):
            IntensityHistogram(np.zeros(4))

    def test_rejects_negative_counts(self):
        with pytest.raises(InvalidInputError):
            IntensityHistogram([1.0, -0.5])

    def test_centers_and_span(self):
        hist = IntensityHistogram([1.0, 2.0], bin_start_kev=11.0, bin_width_kev=2.0)
        assert hist.centers().tolist() == [12.0, 14.0]
        assert hist.span_kev == (11.0, 15.0)


class TestPmfFromHistogram:
    def test_single_bin_gives_uniform_mass_one(self):
        # One 2 keV bin; on a grid restricted to its span the interpolant
        # is constant, so the pmf is uniform.
        hist = IntensityHistogram([5.0], bin_start_kev=11.0, bin_width_kev=2.0)
        pmf = pmf_from_intensity_histogram(hist, EnergyGrid(11.0, 13.0, 0.5))
        assert pmf.mass.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(pmf.mass, 0.2)

    def test_equal_adjacent_bins_interpolate_flat(self):
        hist = IntensityHistogram([4.0, 4.0])
        pmf = pmf_from_intensity_histogram(hist, EnergyGrid(11.0, 15.0, 0.5))
        between = (pmf.grid.energies() >= 12.0) & (pmf.grid.energies() <= 14.0)
        assert np.ptp(pmf.mass[between]) == 0.0
        assert pmf.mass.sum() == pytest.approx(1.0, abs=1e-9)

    def test_matches_interpolation_oracle(self):
        hist = IntensityHistogram([2.0, 6.0], bin_start_kev=11.0, bin_width_kev=2.0)
        grid = EnergyGrid(11.0, 15.0, 0.5)
        pmf = pmf_from_intensity_histogram(hist, grid)
        expected = interp_pmf_oracle(11.0, 2.0, [2.0, 6.0], grid.energies())
        np.testing.assert_allclose(pmf.mass, expected, rtol=0, atol=1e-12)

    def test_zero_outside_histogram_span(self, grid):
        hist = IntensityHistogram([3.0, 1.0], bin_start_kev=100.0, bin_width_kev=2.0)
        pmf = pmf_from_intensity_histogram(hist, grid)
        energies = grid.energies()
        outside = (energies < 100.0) | (energies > 104.0)
        assert np.all(pmf.mass[outside] == 0.0)
        assert pmf.mass.sum() == pytest.approx(1.0, abs=1e-9)

    def test_no_overlap_is_an_error(self):
        hist = IntensityHistogram([1.0], bin_start_kev=5000.0, bin_width_kev=2.0)
        with pytest.raises(InvalidInputError):
            pmf_from_intensity_histogram(hist, EnergyGrid())

    @given(scale=st.floats(min_value=1e-6, max_value=1e6, allow_nan=False))
    def test_scale_invariance(self, scale):
        counts = np.array([2.0, 6.0, 1.0, 3.0])
        grid = EnergyGrid(11.0, 19.0, 0.5)
        base = pmf_from_intensity_histogram(IntensityHistogram(counts), grid)
        scaled = pmf_from_intensity_histogram(IntensityHistogram(counts * scale), grid)
        np.testing.assert_allclose(scaled.mass, base.mass, rtol=0, atol=1e-12)


class TestEstimateNullPmf:
    def test_point_sample_is_peaked_and_symmetric(self, grid):
        readings = np.full(1200, 100.0)
        pmf = estimate_null_pmf(readings, grid)
        peak = int(np.argmax(pmf.mass))
        assert grid.energies()[peak] == 100.0
        for k in (1, 3, 7):
            assert pmf.mass[peak - k] == pytest.approx(pmf.mass[peak + k], rel=1e-12)
        assert pmf.mass.sum() == pytest.approx(1.0, abs=1e-9)

    def test_matches_two_kernel_oracle(self, grid):
        pmf = estimate_null_pmf([100.0, 200.0], grid, kde_bandwidth_kev=1.0, min_readings=2)
        expected = two_point_kde_oracle(100.0, 200.0, 1.0, grid.energies())
        np.testing.assert_allclose(pmf.mass, expected, rtol=0, atol=1e-12)

    def test_insufficient_readings_rejected(self, grid):
        with pytest.raises(InsufficientDataError):
            estimate_null_pmf(np.full(999, 50.0), grid)

    def test_permutation_invariance(self, grid):
        rng = np.random.default_rng(5)
        readings = rng.uniform(20.0, 3000.0, 2000)
        base = estimate_null_pmf(readings, grid)
        shuffled = estimate_null_pmf(rng.permutation(readings), grid)
        np.testing.assert_allclose(shuffled.mass, base.mass, rtol=1e-12)

    def test_output_is_valid_pmf(self, grid):
        rng = np.random.default_rng(6)
        pmf = estimate_null_pmf(rng.uniform(15.0, 3990.0, 1500), grid)
        assert np.all(pmf.mass >= 0)
        assert pmf.mass.sum() == pytest.approx(1.0, abs=1e-9)


class TestMixPmfs:
    def test_self_mix_is_identity(self):
        grid = EnergyGrid(11.0, 15.0, 0.5)
        pmf = Pmf.from_weights(grid, [1.0, 2.0, 3.0, 2.0, 1.0, 0.5, 0.25, 0.5, 1.0])
        mixed = mix_pmfs(pmf, pmf, 0.5)
        assert np.array_equal(mixed.mass, pmf.mass)

    def test_mix_of_point_masses(self):
        grid = EnergyGrid(11.0, 13.0, 0.5)
        a = Pmf(grid, [1.0, 0, 0, 0, 0])
        b = Pmf(grid, [0, 0, 0, 1.0, 0])
        mixed = mix_pmfs(a, b, 0.5)
        assert mixed.mass.tolist() == [0.5, 0, 0, 0.5, 0]

    def test_grid_mismatch_rejected(self):
        a = Pmf(EnergyGrid(11.0, 13.0, 0.5), [0.2] * 5)
        b = Pmf(EnergyGrid(11.0, 13.0, 1.0), [1 / 3] * 3)
        with pytest.raises(InvalidInputError):
            mix_pmfs(a, b, 0.5)

    def test_weight_out_of_range_rejected(self):
        grid = EnergyGrid(11.0, 13.0, 0.5)
        p = Pmf(grid, [0.2] * 5)
        with pytest.raises(InvalidInputError):
            mix_pmfs(p, p, 1.5)

    @given(weight=st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    def test_weight_symmetry(self, weight):
        grid = EnergyGrid(11.0, 14.0, 0.5)
        a = Pmf.from_weights(grid, [1.0, 4.0, 2.0, 0.5, 3.0, 1.5, 2.5])
        b = Pmf.from_weights(grid, [2.0, 1.0, 5.0, 1.0, 0.5, 2.0, 1.0])
        left = mix_pmfs(a, b, weight)
        right = mix_pmfs(b, a, 1.0 - weight)
        np.testing.assert_allclose(left.mass, right.mass, rtol=1e-12, atol=1e-15)
        assert left.mass.sum() == pytest.approx(1.0, abs=1e-9)


class TestLogRatioTable:
    def _pmf_pair(self):
        grid = EnergyGrid(11.0, 13.0, 0.5)
        f0 = Pmf(grid, [0.05, 0.2375, 0.2375, 0.2375, 0.2375])
        ratio = math.exp(2.0)
        fk0 = 0.05 * ratio
        rest = (1.0 - fk0) / 4
        fk = Pmf(grid, [fk0, rest, rest, rest, rest])
        return grid, f0, fk

    def test_equal_densities_give_zero(self):
        grid, f0, _ = self._pmf_pair()
        table = build_log_ratio_table({SourceVariantId(1, False): f0}, f0)
        assert np.all(table.ratios[SourceVariantId(1, False)] == 0.0)

    def test_e_squared_ratio_gives_two(self):
        _, f0, fk = self._pmf_pair()
        table = build_log_ratio_table({SourceVariantId(1, False): fk}, f0)
        assert table.ratios[SourceVariantId(1, False)][0] == pytest.approx(2.0, abs=1e-12)

    def test_source_below_background_clamps_to_zero(self):
        _, f0, fk = self._pmf_pair()
        # swap roles: background now carries the excess mass at bin 0
        table = build_log_ratio_table({SourceVariantId(1, False): f0}, fk)
        assert table.ratios[SourceVariantId(1, False)][0] == 0.0

    def test_zero_exactly_where_source_below_background(self, truth_table, truth_pmfs):
        null_pmf, source_pmfs = truth_pmfs
        for variant in ALL_SOURCE_VARIANTS:
            ratios = truth_table.ratios[variant]
            below = source_pmfs[variant].mass <= null_pmf.mass
            assert np.all(ratios[below] == 0.0)
            assert np.all(ratios >= 0.0)

    def test_grid_mismatch_rejected(self):
        grid, f0, fk = self._pmf_pair()
        other = Pmf(EnergyGrid(11.0, 13.0, 1.0), [1 / 3] * 3)
        with pytest.raises(InvalidInputError):
            build_log_ratio_table({SourceVariantId(1, False): other}, f0)

    def test_lookup_conventions(self, small_grid):
        values = np.zeros(small_grid.n_bins)
        values[int(small_grid.nearest_bin(20.0))] = 2.0
        table = LogRatioTable(small_grid, {SourceVariantId(3, True): values})
        k = SourceVariantId(3, True)
        assert table.lookup_scalar(k, 10.0) == 0.0  # below the grid
        assert table.lookup_scalar(k, 31.5) == 0.0  # above the grid
        assert table.lookup_scalar(k, 20.0) == 2.0  # exactly on the bin
        assert table.lookup_scalar(k, 20.1) == 2.0  # nearest bin
        assert table.lookup_scalar(k, 20.25) == 0.0  # half-tie rounds up to 20.5

    def test_lookup_at_100_26_reads_bin_100_5(self, grid):
        values = np.arange(grid.n_bins, dtype=float)
        table = LogRatioTable(grid, {SourceVariantId(1, False): values})
        assert table.lookup_scalar(SourceVariantId(1, False), 100.26) == 179.0


class TestVariantId:
    def test_twelve_distinct_variants(self):
        assert len(ALL_SOURCE_VARIANTS) == 12
        assert len(set(ALL_SOURCE_VARIANTS)) == 12

    def test_label_round_trip(self):
        for variant in ALL_SOURCE_VARIANTS:
            assert SourceVariantId.parse(variant.label) == variant

    def test_source_zero_is_not_a_variant(self):
        with pytest.raises(InvalidInputError):
            SourceVariantId(0, False)

    def test_bad_label_rejected(self):
        with pytest.raises(FileFormatError):
            SourceVariantId.parse("seven")


class TestPersistence:
    def test_pmf_csv_round_trip_is_lossless(self, tmp_path):
        grid = EnergyGrid(11.0, 15.0, 0.5)
        pmf = Pmf.from_weights(grid, np.random.default_rng(3).uniform(0.1, 5.0, grid.n_bins))
        path = tmp_path / "pmf.csv"
        pmf.to_csv(path)
        loaded = Pmf.from_csv(path)
        assert loaded.grid == grid
        assert np.array_equal(loaded.mass, pmf.mass)

    def test_table_dir_round_trip_is_lossless(self, tmp_path, toy_table):
        toy_table.save_dir(tmp_path / "tables")
        loaded = LogRatioTable.load_dir(tmp_path / "tables")
        assert loaded.grid == toy_table.grid
        assert loaded.variants == toy_table.variants
        for variant in toy_table.variants:
            assert np.array_equal(loaded.ratios[variant], toy_table.ratios[variant])

    def test_malformed_pmf_csv_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("energy_kev,value\n11.0,abc\n")
        with pytest.raises(FileFormatError):
            Pmf.from_csv(path)
