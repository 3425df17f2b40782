"""Kernel backend selection.

The compiled Cython core is used when it built successfully; otherwise (or
when the environment variable FAIRPRICE_PURE is set to a non-empty value) the
pure numpy/Python fallback is used. Both expose the same two functions with
bit-identical results; benchmarks/bench_kernels.py checks and times them.
"""
import os

from . import _fallback

if os.environ.get("FAIRPRICE_PURE"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND_NAME
dp_forward = _impl.dp_forward
ucb_phase2 = _impl.ucb_phase2

__all__ = ["BACKEND", "dp_forward", "ucb_phase2"]
