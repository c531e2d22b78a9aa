"""Faces of ladder boxes, their grids of small faces, and the fractal subsets.

A face is identified by its center ``x + L_k v`` together with the scale and
the normal axis, so the two boxes sharing it see the same object. Both boxes
take part in deciding which small faces avoid the holes, and the anchor is
the lexicographically smallest admissible center; that makes anchors and
fractals agree from either side.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .env import CarpetError, Environment


def units(d: int) -> list[tuple[int, ...]]:
    """Unit vectors e_1..e_d followed by -e_1..-e_d."""
    eye = np.eye(d, dtype=np.int64)
    return [tuple(int(t) for t in eye[i]) for i in range(d)] + [tuple(int(t) for t in -eye[i]) for i in range(d)]


def axis_of(v) -> tuple[int, int]:
    v = np.asarray(v)
    j = int(np.flatnonzero(v)[0])
    return j, int(v[j])


@dataclass(frozen=True, order=True)
class Face:
    center: tuple[int, ...]
    k: int
    axis: int

    @property
    def d(self) -> int:
        return len(self.center)

    def boxes(self, L: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Centers of the lower and upper box along the normal axis."""
        lo = list(self.center)
        hi = list(self.center)
        lo[self.axis] -= L
        hi[self.axis] += L
        return tuple(lo), tuple(hi)


def face_of(env: Environment, x, k: int, v) -> Face:
    L = env.ladder.L[k]
    c = tuple(int(a) + L * int(b) for a, b in zip(x, v))
    return Face(c, k, axis_of(v)[0])


# ----------------------------------------------------------------- grids


def scale0_grid_params(L0: int) -> tuple[int, list[int], int]:
    """(spacing, allowed multipliers, integer half-width of a small face) at scale 0."""
    spacing = math.floor(L0**0.7)
    bound = L0**0.3 / 2
    mult = [a for a in range(-math.ceil(bound), math.ceil(bound) + 1) if abs(a) < bound]
    half = math.floor(L0**0.7 / 4)
    return spacing, mult, half


@dataclass(frozen=True)
class FaceGrid:
    face: Face
    centers: np.ndarray  # (n, d) small-face centers, lexicographic
    radius: float  # sup-norm radius of each small face inside the face


def face_grid(env: Environment, face: Face) -> FaceGrid:
    lad = env.ladder
    d = face.d
    if face.k == 0:
        spacing, mult, _ = scale0_grid_params(lad.L0)
        offs = [a * spacing for a in mult]
        radius = lad.L0**0.7 / 4
    else:
        step = lad.L[face.k] // 17
        offs = [a * step for a in range(-8, 9, 2)]
        radius = float(step)
    trans = [i for i in range(d) if i != face.axis]
    pts = []
    for combo in itertools.product(offs, repeat=d - 1):
        p = list(face.center)
        for i, o in zip(trans, combo):
            p[i] += o
        pts.append(p)
    return FaceGrid(face, np.array(sorted(pts), np.int64), radius)


def small_face_points(env: Environment, face: Face, y) -> np.ndarray:
    """Lattice points (scale 0) or (k-1)-sub-face centers (scale k) of the small face at y."""
    lad = env.ladder
    d = face.d
    trans = [i for i in range(d) if i != face.axis]
    if face.k == 0:
        h = scale0_grid_params(lad.L0)[2]
        offs = [list(range(-h, h + 1))] * (d - 1)
    else:
        r = lad.L[face.k] // 17
        step = 2 * lad.L[face.k - 1]
        offs = []
        for i in trans:
            lo = -((-(y[i] - r)) // step)
            hi = (y[i] + r) // step
            offs.append([j * step - y[i] for j in range(lo, hi + 1)])
    pts = []
    for combo in itertools.product(*offs):
        p = list(y)
        for i, o in zip(trans, combo):
            p[i] += o
        pts.append(p)
    return np.array(sorted(pts), np.int64)


# ------------------------------------------------------------- good centers


def _prism0(env: Environment, face: Face, y) -> np.ndarray:
    L0 = env.ladder.L0
    pts = small_face_points(env, face, y)
    s = np.arange(-2 * L0, 2 * L0 + 1)
    out = np.repeat(pts, len(s), axis=0)
    out[:, face.axis] += np.tile(s, len(pts))
    return out


def _column_subboxes(env: Environment, box, k: int, face: Face, y) -> np.ndarray:
    """(k-1)-sub-boxes of the k-box at ``box`` whose closure meets the column over the small face."""
    lad = env.ladder
    Ls, Lk = lad.L[k - 1], lad.L[k]
    r = Lk // 17
    axes = []
    for i, c in enumerate(box):
        lo, hi = c - (Lk - Ls), c + (Lk - Ls)
        if i != face.axis:
            lo, hi = max(lo, y[i] - r - Ls), min(hi, y[i] + r + Ls)
        j0 = -((-lo) // (2 * Ls))
        j1 = hi // (2 * Ls)
        axes.append(np.arange(j0, j1 + 1, dtype=np.int64) * 2 * Ls)
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in g], axis=1)


def good_centers(env: Environment, face: Face) -> np.ndarray:
    """Mask over ``face_grid(face).centers`` of the small faces avoiding both projected holes."""
    key = ("G", face)
    if key in env.cache:
        return env.cache[key]
    grid = face_grid(env, face)
    k = face.k
    L = env.ladder.L[k]
    lo_box, hi_box = face.boxes(L)
    mask = np.zeros(len(grid.centers), bool)
    if env.is_good(lo_box, k) and env.is_good(hi_box, k):
        for n, y in enumerate(grid.centers.tolist()):
            if k == 0:
                mask[n] = not env.closed(_prism0(env, face, y)).any()
            else:
                ok = True
                for b in (lo_box, hi_box):
                    D = env.defect(b, k)
                    if D.contains(_column_subboxes(env, b, k, face, y)).any():
                        ok = False
                        break
                mask[n] = ok
    env.cache[key] = mask
    return mask


def anchor(env: Environment, face: Face) -> tuple[int, ...]:
    """Lexicographically smallest admissible small-face center."""
    key = ("anchor", face)
    if key not in env.cache:
        G = good_centers(env, face)
        if not G.any():
            raise CarpetError(f"no admissible small face on {face}")
        env.cache[key] = tuple(int(t) for t in face_grid(env, face).centers[np.flatnonzero(G)[0]])
    return env.cache[key]


def sub_faces(env: Environment, face: Face) -> list[Face]:
    """The (k-1)-faces whose union is the small face at the anchor, lexicographic."""
    y = anchor(env, face)
    return [Face(tuple(int(t) for t in c), face.k - 1, face.axis) for c in small_face_points(env, face, y)]


def fractal(env: Environment, face: Face) -> np.ndarray:
    """Vertices of the fractal subset of ``face``, sorted lexicographically."""
    key = ("fractal", face)
    if key in env.cache:
        return env.cache[key]
    if face.k == 0:
        out = small_face_points(env, face, anchor(env, face))
    else:
        parts = [fractal(env, f) for f in sub_faces(env, face)]
        sizes = {len(p) for p in parts}
        if len(sizes) != 1:
            raise CarpetError(f"sub-fractals of {face} have unequal sizes {sorted(sizes)}")
        out = np.unique(np.concatenate(parts), axis=0)
    env.cache[key] = out
    return out
