"""Pure-numpy scan kernel, used when the compiled extension is unavailable.

Semantics match ``_scan_cy`` exactly: an event contributes to a grid time
tau iff |t - tau| <= truncation * h, with unnormalized Gaussian weight
exp(-(t - tau)^2 / (2 h^2)).
"""

from __future__ import annotations

import numpy as np

_CHUNK = 65536


def score_curve(times, evidence, tau0, tau_step, n_tau, h, truncation):
    """Smoothed evidence at every grid time tau0 + j * tau_step, j < n_tau."""
    times = np.asarray(times, dtype=np.float64)
    evidence = np.asarray(evidence, dtype=np.float64)
    out = np.zeros(n_tau)
    pos = evidence > 0.0
    t = times[pos]
    r = evidence[pos]
    if t.size == 0:
        return out

    radius = truncation * h
    inv_two_h2 = 1.0 / (2.0 * h * h)
    # Fixed-width window of candidate grid indices per event, masked back to
    # the exact |t - tau| <= radius set so results match the compiled kernel.
    width = int(np.floor(2.0 * radius / tau_step)) + 1
    for start in range(0, t.size, _CHUNK):
        tc = t[start : start + _CHUNK]
        rc = r[start : start + _CHUNK]
        j_lo = np.ceil((tc - radius - tau0) / tau_step).astype(np.int64)
        j_hi = np.floor((tc + radius - tau0) / tau_step).astype(np.int64)
        j = np.maximum(j_lo, 0)[:, None] + np.arange(width)[None, :]
        keep = (j <= np.minimum(j_hi, n_tau - 1)[:, None]) & (j < n_tau)
        diff = tc[:, None] - (tau0 + tau_step * j)
        w = np.exp(-diff * diff * inv_two_h2) * rc[:, None]
        out += np.bincount(j[keep], weights=w[keep], minlength=n_tau)
    return out


def scan_max(times, evidence, tau0, tau_step, n_tau, h, truncation):
    """Maximum of the score curve and its first-attaining grid index."""
    curve = score_curve(times, evidence, tau0, tau_step, n_tau, h, truncation)
    j = int(np.argmax(curve))
    return float(curve[j]), j
