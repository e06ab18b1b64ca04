# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan kernel: kernel-smoothed evidence over a uniform tau grid.

An event at time t with evidence r > 0 contributes
r * exp(-(t - tau)^2 / (2 h^2)) to every grid time tau with
|t - tau| <= truncation * h. Events outside that window are skipped.
"""

from libc.math cimport ceil, exp, floor

import numpy as np


def score_curve(const double[::1] times, const double[::1] evidence,
                double tau0, double tau_step, Py_ssize_t n_tau,
                double h, double truncation):
    """Smoothed evidence at every grid time tau0 + j * tau_step, j < n_tau."""
    out = np.zeros(n_tau)
    cdef double[::1] s = out
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t i, j, j_lo, j_hi
    cdef double t, r, diff
    cdef double radius = truncation * h
    cdef double inv_two_h2 = 1.0 / (2.0 * h * h)

    for i in range(n):
        r = evidence[i]
        if r <= 0.0:
            continue
        t = times[i]
        j_lo = <Py_ssize_t>ceil((t - radius - tau0) / tau_step)
        j_hi = <Py_ssize_t>floor((t + radius - tau0) / tau_step)
        if j_lo < 0:
            j_lo = 0
        if j_hi > n_tau - 1:
            j_hi = n_tau - 1
        for j in range(j_lo, j_hi + 1):
            diff = t - (tau0 + tau_step * j)
            s[j] += exp(-diff * diff * inv_two_h2) * r
    return out


def scan_max(const double[::1] times, const double[::1] evidence,
             double tau0, double tau_step, Py_ssize_t n_tau,
             double h, double truncation):
    """Maximum of the score curve and its first-attaining grid index."""
    curve = score_curve(times, evidence, tau0, tau_step, n_tau, h, truncation)
    cdef double[::1] s = curve
    cdef Py_ssize_t j, best_j = 0
    cdef double best = s[0]
    for j in range(1, n_tau):
        if s[j] > best:
            best = s[j]
            best_j = j
    return float(best), int(best_j)
