"""Unit flows across a single box between the fractals on two of its faces."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..renorm import ScaleLadder
from .env import CarpetError, CleanEnvironment, Environment
from .faces import face_of, fractal
from .flow import LatticeFlow
from .paths import bundle_k, path0


def _key(v) -> tuple[int, ...]:
    return tuple(int(t) for t in v)


@lru_cache(maxsize=None)
def _template(lad: ScaleLadder, k: int, v: tuple, w: tuple) -> LatticeFlow:
    env = CleanEnvironment(lad)
    return _build(env, (0,) * lad.d, k, v, w)


def template_cache_clear() -> None:
    _template.cache_clear()


def flow_box(env: Environment, x, k: int, v, w) -> LatticeFlow:
    """Unit flow across the k-box at x from the fractal on face v to the one on face w.

    Its divergence is the uniform probability on the v-fractal minus the
    uniform probability on the w-fractal. When no cylinder comes near the box
    or its neighbours the flow is a translate of a cached clean template.
    """
    v, w = _key(v), _key(w)
    if v == w:
        raise CarpetError("entry and exit faces must differ")
    if env.quiet(x, k):
        return _template(env.ladder, k, v, w).translated(np.asarray(x, np.int64))
    return _build(env, x, k, v, w)


def _build(env: Environment, x, k: int, v: tuple, w: tuple) -> LatticeFlow:
    if k == 0:
        paths, Fv, _ = path0(env, x, v, w)
        return LatticeFlow.from_paths(paths, [1.0 / len(Fv)] * len(paths))
    Ls = env.ladder.L[k - 1]
    bundles = bundle_k(env, x, k, v, w)
    n_sub = len(fractal(env, face_of(env, x, k, v))) // len(bundles)
    if n_sub * len(bundles) != len(fractal(env, face_of(env, x, k, v))):
        raise CarpetError("fractal size is not a multiple of the bundle size")
    weight = 1.0 / len(bundles)
    parts = []
    vv, ww = np.asarray(v, np.int64), np.asarray(w, np.int64)
    for path in bundles:
        n = len(path)
        for i, z in enumerate(path):
            a = vv if i == 0 else (path[i - 1] - z) // (2 * Ls)
            b = ww if i == n - 1 else (path[i + 1] - z) // (2 * Ls)
            parts.append(flow_box(env, z, k - 1, a, b).scaled(weight))
    return LatticeFlow.concat(parts, d=env.d)


def box_flow_paths(env: Environment, x, k: int, v, w) -> list[np.ndarray]:
    """The box paths (scale k >= 1) or vertex paths (scale 0) used by ``flow_box``."""
    if k == 0:
        return path0(env, x, v, w)[0]
    return bundle_k(env, x, k, v, w)
