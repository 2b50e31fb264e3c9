"""Kernel backend selection.

The compiled extension (expstencil._core, Cython) is preferred when it
imported cleanly; the numpy fallback (expstencil._pykernels) is always
available.  Selection happens at import and can be forced with the
environment variable EXPSTENCIL_KERNELS=python|compiled, or per call site by
passing backend="python"/"compiled" to the operators.  Both backends are
importable side by side so the benchmark harness can compare them.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _core
except ImportError:  # pragma: no cover - depends on the build environment
    _core = None

_FORCED = os.environ.get("EXPSTENCIL_KERNELS", "").strip().lower()
if _FORCED and _FORCED not in ("python", "compiled"):
    raise ImportError(f"EXPSTENCIL_KERNELS must be 'python' or 'compiled', got {_FORCED!r}")
if _FORCED == "compiled" and _core is None:
    raise ImportError("EXPSTENCIL_KERNELS=compiled but expstencil._core failed to import")

_DEFAULT = "python" if _FORCED == "python" or _core is None else "compiled"


def have_compiled() -> bool:
    return _core is not None


def default_backend() -> str:
    return _DEFAULT


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _core is not None else ("python",)


def get_kernels(backend: str = "auto"):
    """Resolve a backend name to its kernel module."""
    if backend in (None, "auto"):
        backend = _DEFAULT
    if backend == "python":
        return _pykernels
    if backend == "compiled":
        if _core is None:
            raise ValueError("compiled kernel backend is not available")
        return _core
    raise ValueError(f"unknown kernel backend {backend!r}")
