"""Backend selection for the hot loops.

The compiled extension ``skembed._kernels`` is used when it imports; otherwise
(or when SKEMBED_PURE_PYTHON=1) the numpy versions in ``_kernels_py`` run.
Both produce identical walk output for identical inputs.
"""
from __future__ import annotations

import logging
import os

import numpy as np

from . import _kernels_py
from ._kernels_py import CAPPED, GAP, OK, GAMMA, mix64, next_uniform, path_states  # noqa: F401

log = logging.getLogger(__name__)

_compiled = None
if os.environ.get("SKEMBED_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        log.debug("compiled kernels unavailable, using numpy fallback")
        _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"


def _impl(backend: str | None):
    if backend is None:
        return _compiled or _kernels_py
    if backend == "numpy":
        return _kernels_py
    if backend == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {backend!r}")


def walk_paths(neighbors, boundary, rho, start_node, start_row, states, max_steps,
               cond_node=-1, backend=None):
    impl = _impl(backend)
    return impl.walk_paths(np.ascontiguousarray(neighbors, dtype=np.int64),
                           np.ascontiguousarray(boundary, dtype=np.uint8),
                           np.ascontiguousarray(rho, dtype=np.float64),
                           np.ascontiguousarray(start_node, dtype=np.int64),
                           np.ascontiguousarray(start_row, dtype=np.int64),
                           states, int(max_steps), int(cond_node))


def shell_sweep(values, sph_ptr, mem_ptr, members, backend=None):
    impl = _impl(backend)
    return impl.shell_sweep(np.ascontiguousarray(values, dtype=np.float64),
                            np.ascontiguousarray(sph_ptr, dtype=np.int64),
                            np.ascontiguousarray(mem_ptr, dtype=np.int64),
                            np.ascontiguousarray(members, dtype=np.int64))
