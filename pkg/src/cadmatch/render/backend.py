"""Rasterizer kernel selection.

The compiled Cython kernel is preferred when importable; otherwise the numpy
fallback is used. CADMATCH_RASTERIZER=python|compiled forces a choice (the
forced compiled backend raises if the extension is missing).
"""

import os

from . import _rasterkern_py

try:
    from . import _rasterkern
except ImportError:
    _rasterkern = None

_KERNELS = {"python": _rasterkern_py.fill_triangles}
if _rasterkern is not None:
    _KERNELS["compiled"] = _rasterkern.fill_triangles


def available_backends():
    return sorted(_KERNELS)


def default_backend():
    forced = os.environ.get("CADMATCH_RASTERIZER", "").strip().lower()
    if forced:
        if forced not in _KERNELS:
            raise RuntimeError(
                f"CADMATCH_RASTERIZER={forced!r} but available backends are "
                f"{available_backends()}"
            )
        return forced
    return "compiled" if "compiled" in _KERNELS else "python"


def get_kernel(name=None):
    """Return the fill_triangles callable for a backend (default: best available)."""
    return _KERNELS[name or default_backend()]
