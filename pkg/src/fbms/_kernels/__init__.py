"""Clipping kernel backend selection: compiled Cython core when available,
NumPy fallback otherwise. Both implement the same subdivision algorithm; each
backend sums in a fixed order, so results are deterministic per backend."""

try:
    from . import _clip_cy as _impl

    clip_backend = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    from . import clip_py as _impl

    clip_backend = "numpy"

from . import clip_py

mass_in_ball_tris = _impl.mass_in_ball_tris
deficit_sum_tris = _impl.deficit_sum_tris

__all__ = ["mass_in_ball_tris", "deficit_sum_tris", "clip_backend", "clip_py"]
