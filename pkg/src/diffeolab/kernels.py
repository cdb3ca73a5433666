"""Backend selection for the word-evaluation kernel.

The compiled Cython module is used when importable; otherwise the numpy
implementation.  Setting ``DIFFEOLAB_BACKEND=python`` forces the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _pykernels}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_requested = os.environ.get("DIFFEOLAB_BACKEND", "").strip().lower()
if _requested and _requested not in _BACKENDS:
    raise ImportError(f"DIFFEOLAB_BACKEND={_requested!r} unavailable; have {sorted(_BACKENDS)}")
BACKEND = _requested or ("cython" if _compiled is not None else "python")
_impl = _BACKENDS[BACKEND]


def available() -> list[str]:
    return sorted(_BACKENDS)


def use_backend(name: str) -> None:
    global BACKEND, _impl
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available()}")
    BACKEND, _impl = name, _BACKENDS[name]


def eval_word(ops, offs, data, x):
    return _impl.eval_word(ops, offs, data, x)


def eval_word_with(name: str, ops, offs, data, x):
    return _BACKENDS[name].eval_word(ops, offs, data, x)
