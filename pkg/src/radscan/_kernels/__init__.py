"""Scan kernel backend selection.

Prefers the compiled Cython kernel and falls back to the pure-numpy
implementation when the extension has not been built. Both expose the
same functions with identical semantics; ``BACKEND`` records which one
is active.
"""

try:
    from radscan._kernels._scan_cy import scan_max, score_curve

    BACKEND = "cython"
except ImportError:  # extension not built
    from radscan._kernels._scan_py import scan_max, score_curve

    BACKEND = "python"

__all__ = ["BACKEND", "scan_max", "score_curve"]
