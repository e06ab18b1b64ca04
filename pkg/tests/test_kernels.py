"""Both kernel backends must agree exactly on semantics."""

import importlib
import math

import numpy as np
import pytest

from radscan._kernels import _scan_py

try:
    from radscan._kernels import _scan_cy
except ImportError:
    _scan_cy = None

from .oracles import dense_score_curve

BACKENDS = [pytest.param(_scan_py, id="python")]
if _scan_cy is not None:
    BACKENDS.append(pytest.param(_scan_cy, id="cython"))


def _random_case(seed, n_events=400):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0.0, 90.0, n_events))
    evidence = np.where(rng.random(n_events) < 0.4, rng.exponential(1.5, n_events), 0.0)
    return times, evidence


@pytest.mark.parametrize("backend", BACKENDS)
def test_curve_matches_truncated_dense_oracle(backend):
    times, evidence = _random_case(1)
    tau0, step, n_tau = 30.0, 0.25, 241
    taus = tau0 + step * np.arange(n_tau)
    for h in (0.5, 1.0, 1.5):
        curve = backend.score_curve(times, evidence, tau0, step, n_tau, h, 5.0)
        expected = dense_score_curve(times, evidence, taus, h, truncation=5.0)
        np.testing.assert_allclose(curve, expected, rtol=1e-12, atol=1e-300)


@pytest.mark.skipif(_scan_cy is None, reason="compiled kernel not built")
def test_backends_agree():
    for seed in range(5):
        times, evidence = _random_case(seed)
        for h in (0.5, 0.75, 1.25):
            args = (times, evidence, 30.0, 0.25, 241, h, 5.0)
            np.testing.assert_allclose(
                _scan_cy.score_curve(*args), _scan_py.score_curve(*args), rtol=1e-13
            )
            s_cy, j_cy = _scan_cy.scan_max(*args)
            s_py, j_py = _scan_py.scan_max(*args)
            assert j_cy == j_py
            assert s_cy == pytest.approx(s_py, rel=1e-13)


@pytest.mark.parametrize("backend", BACKENDS)
def test_truncation_boundary_inclusive(backend):
    # single grid point at tau=30; events exactly at the 5h radius count,
    # just beyond do not
    h = 1.0
    times = np.array([35.0, 35.0 + 1e-9])
    evidence = np.array([1.0, 1.0])
    curve = backend.score_curve(times, evidence, 30.0, 0.25, 1, h, 5.0)
    assert curve[0] == pytest.approx(math.exp(-12.5), rel=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_evidence_gives_zero_curve(backend):
    times = np.array([40.0, 50.0])
    evidence = np.zeros(2)
    curve = backend.score_curve(times, evidence, 30.0, 0.25, 81, 1.0, 5.0)
    assert np.all(curve == 0.0)
    score, j = backend.scan_max(times, evidence, 30.0, 0.25, 81, 1.0, 5.0)
    assert score == 0.0
    assert j == 0  # ties break to the first grid point


@pytest.mark.parametrize("backend", BACKENDS)
def test_no_events_gives_zero_curve(backend):
    empty = np.empty(0)
    score, j = backend.scan_max(empty, empty, 30.0, 0.25, 11, 1.0, 5.0)
    assert score == 0.0 and j == 0


@pytest.mark.parametrize("backend", BACKENDS)
def test_events_far_outside_grid_ignored(backend):
    times = np.array([0.5, 200.0])
    evidence = np.array([5.0, 5.0])
    curve = backend.score_curve(times, evidence, 30.0, 0.25, 41, 1.0, 5.0)
    assert np.all(curve == 0.0)
