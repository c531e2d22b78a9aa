"""Geometric kernel for lines, cylinders, balls and l-infinity boxes in R^d.

Scalar helpers operate on single objects. The ``*_many`` variants take
stacked anchors/directions so that samplers and classifiers can stay
vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DIST_TOL = 1e-9
UNIT_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for degenerate geometric input."""

    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        super().__init__(f"{kind}: {message}" if message else kind)


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _as_vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)


def canonical_direction(v: np.ndarray) -> np.ndarray:
    """Flip rows of ``v`` so the first coordinate above tolerance is positive."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    nz = np.abs(v) > UNIT_TOL
    first = np.argmax(nz, axis=1)
    sign = np.sign(v[np.arange(len(v)), first])
    sign[sign == 0] = 1.0
    return v * sign[:, None]


def canonical_anchor(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Foot of the perpendicular from the origin, row-wise."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    return a - np.sum(a * v, axis=1, keepdims=True) * v


@dataclass(frozen=True)
class Line:
    anchor: tuple
    direction: tuple

    @classmethod
    def through(cls, point, direction) -> "Line":
        v = _as_vec(direction)
        n = np.linalg.norm(v)
        if n < UNIT_TOL:
            raise GeometryError("degenerate-direction", "zero direction vector")
        v = canonical_direction(v / n)[0]
        a = canonical_anchor(_as_vec(point), v)[0]
        return cls(tuple(float(t) for t in a), tuple(float(t) for t in v))

    @classmethod
    def through_points(cls, p, q) -> "Line":
        return cls.through(p, _as_vec(q) - _as_vec(p))

    @property
    def a(self) -> np.ndarray:
        return np.array(self.anchor)

    @property
    def v(self) -> np.ndarray:
        return np.array(self.direction)

    @property
    def d(self) -> int:
        return len(self.anchor)

    def is_canonical(self) -> bool:
        a, v = self.a, self.v
        if abs(np.linalg.norm(v) - 1) > UNIT_TOL or abs(a @ v) > UNIT_TOL * max(1.0, np.linalg.norm(a)):
            return False
        nz = np.flatnonzero(np.abs(v) > UNIT_TOL)
        return bool(v[nz[0]] > 0)

    def canonical(self) -> "Line":
        return self if self.is_canonical() else Line.through(self.anchor, self.direction)

    def point(self, t: float) -> np.ndarray:
        return self.a + t * self.v

    def same_as(self, other: "Line", tol: float = DIST_TOL) -> bool:
        x, y = self.canonical(), other.canonical()
        return bool(
            np.allclose(x.a, y.a, atol=tol, rtol=0) and np.allclose(x.v, y.v, atol=tol, rtol=0)
        )


@dataclass(frozen=True)
class HyperplaneParam:
    p: tuple
    w: tuple

    @property
    def h(self) -> float:
        return self.p[-1]


@dataclass(frozen=True)
class Cylinder:
    axis: Line
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("invalid-radius", f"radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class BoxInf:
    """Closed l-infinity ball. ``radius`` may be a scalar or one half-width per axis."""

    center: tuple
    radius: float | tuple

    def __post_init__(self):
        if np.any(np.asarray(self.radius, dtype=float) <= 0):
            raise GeometryError("invalid-radius", "box radius must be positive")

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def r(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.radius, dtype=float), (len(self.center),))

    def bounding_radius(self) -> float:
        """Radius of the smallest Euclidean ball around the center containing the box."""
        return float(np.linalg.norm(self.r))


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("invalid-radius", "ball radius must be positive")

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def bounding_radius(self) -> float:
        return float(self.radius)


# ---------------------------------------------------------------- distances


def dist_points_lines(x, anchors, dirs) -> np.ndarray:
    """Distance from points to lines. Shapes broadcast over the leading axis.

    ``x`` is (n, d) or (d,), ``anchors`` and ``dirs`` are (m, d) or (d,).
    With both stacked the result has shape (n, m).
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(anchors, dtype=float)
    v = np.asarray(dirs, dtype=float)
    if x.ndim == 2 and a.ndim == 2:
        diff = x[:, None, :] - a[None, :, :]
        t = np.einsum("nmd,md->nm", diff, v)
        perp = diff - t[..., None] * v[None, :, :]
    else:
        diff = x - a
        t = np.sum(diff * v, axis=-1, keepdims=True)
        perp = diff - t * v
    return np.linalg.norm(perp, axis=-1)


def dist_point_line(x, line: Line) -> float:
    return float(dist_points_lines(_as_vec(x), line.a, line.v))


def dist_box_lines(center, radius, anchors, dirs) -> np.ndarray:
    """Exact distance from an axis-aligned box to each of many lines.

    Along a line the squared distance to the box is a convex piecewise
    quadratic in the line parameter, with breakpoints where a coordinate
    enters or leaves the slab ``|y_i| <= r_i``. On each piece the active
    coordinates are fixed, so the piece minimiser is explicit; clipping it
    to the piece and taking the best piece gives the global minimum.

    ``center`` may also be an (n, d) array paired row by row with the lines.
    """
    a = np.atleast_2d(np.asarray(anchors, dtype=float))
    v = np.atleast_2d(np.asarray(dirs, dtype=float))
    c = np.asarray(center, dtype=float)
    b = a - c
    v = np.broadcast_to(v, b.shape)
    r = np.broadcast_to(np.asarray(radius, dtype=float), b.shape)
    n, d = b.shape
    if n == 0:
        return np.zeros(0)
    v = np.where(np.abs(v) > 1e-14, v, 0.0)
    moving = v != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = np.where(moving, (-r - b) / v, np.nan)
        t_hi = np.where(moving, (r - b) / v, np.nan)
    bp = np.sort(np.concatenate([t_lo, t_hi], axis=1), axis=1)  # NaN sorts last
    n_bp = np.sum(~np.isnan(bp), axis=1)

    def g(t):
        y = b + t[:, None] * v
        excess = np.maximum(np.abs(y) - r, 0.0)
        return np.sum(excess * excess, axis=1)

    best = np.full(n, np.inf)
    rows = np.arange(n)
    for k in range(2 * d + 1):
        lo = np.full(n, -np.inf) if k == 0 else bp[:, k - 1]
        hi = bp[:, k] if k < 2 * d else np.full(n, np.nan)
        valid = np.ones(n, bool) if k == 0 else (k <= n_bp)
        hi = np.where(np.isnan(hi), np.inf, hi)
        lo = np.where(np.isnan(lo), np.inf, lo)
        mid = np.where(
            np.isfinite(lo) & np.isfinite(hi),
            0.5 * (lo + hi),
            np.where(np.isfinite(lo), lo + 1.0, np.where(np.isfinite(hi), hi - 1.0, 0.0)),
        )
        y = b + mid[:, None] * v
        s = np.sign(y) * (np.abs(y) > r)
        act = s != 0
        den = np.sum(np.where(act, v * v, 0.0), axis=1)
        num = -np.sum(np.where(act, v * (b - s * r), 0.0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ts = np.where(den > 0, num / np.where(den > 0, den, 1.0), mid)
        ts = np.where(valid, np.clip(ts, lo, hi), 0.0)
        val = g(ts)
        best[rows[valid]] = np.minimum(best[valid], val[valid])
    return np.sqrt(best)


def dist_set_lines(A, anchors, dirs) -> np.ndarray:
    """Distance from a ball or box to many lines."""
    if isinstance(A, Ball):
        return np.maximum(dist_points_lines(A.c, anchors, dirs) - A.radius, 0.0)
    if isinstance(A, BoxInf):
        return dist_box_lines(A.c, A.r, anchors, dirs)
    raise TypeError(f"unsupported set type {type(A).__name__}")


def dist_set_line(A, line: Line) -> float:
    return float(dist_set_lines(A, line.a[None], line.v[None])[0])


def cylinder_hits_box(c: Cylinder, B) -> bool:
    return dist_set_line(B, c.axis) <= c.radius


def dist_segments_lines(x, y, anchors, dirs) -> np.ndarray:
    """Distance from segments [x_i, y_i] to lines (a_j, v_j), shape (n, m).

    The squared distance from x + s(y - x) to a line is a quadratic in s
    after projecting out the line direction; the clamped vertex is exact.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    a = np.atleast_2d(np.asarray(anchors, dtype=float))
    v = np.atleast_2d(np.asarray(dirs, dtype=float))
    p = x[:, None, :] - a[None, :, :]
    q = (y - x)[:, None, :] + np.zeros_like(p)
    p = p - np.sum(p * v[None], axis=2, keepdims=True) * v[None]
    q = q - np.sum(q * v[None], axis=2, keepdims=True) * v[None]
    qq = np.sum(q * q, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(qq > 0, -np.sum(p * q, axis=2) / np.where(qq > 0, qq, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    return np.linalg.norm(p + s[..., None] * q, axis=2)


def segment_hits_cylinder(x, y, c: Cylinder) -> bool:
    x, y = _as_vec(x), _as_vec(y)
    if np.array_equal(x, y):
        raise GeometryError("invalid-segment", "segment endpoints coincide")
    return bool(dist_segments_lines(x, y, c.axis.a, c.axis.v)[0, 0] <= c.radius)


# ---------------------------------------------------------- parametrization


def to_hyperplane_param(line: Line, h: float) -> HyperplaneParam:
    a, v = line.a, line.v
    if abs(v[-1]) < UNIT_TOL:
        raise GeometryError("degenerate-direction", "line parallel to the hyperplane")
    w = v if v[-1] > 0 else -v
    t = (h - a[-1]) / v[-1]
    p = a + t * v
    p[-1] = h
    return HyperplaneParam(tuple(float(s) for s in p), tuple(float(s) for s in w))


def from_hyperplane_param(hp: HyperplaneParam) -> Line:
    return Line.through(hp.p, hp.w)


def hyperplane_points(anchors, dirs, h: float) -> np.ndarray:
    """Intersection points of many lines with {x_d = h}; rows with v_d = 0 give NaN."""
    a = np.atleast_2d(np.asarray(anchors, dtype=float))
    v = np.atleast_2d(np.asarray(dirs, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (h - a[:, -1]) / v[:, -1]
    p = a + t[:, None] * v
    p[:, -1] = h
    return p


def upper_hemisphere(dirs) -> np.ndarray:
    v = np.atleast_2d(np.asarray(dirs, dtype=float))
    return np.where(v[:, -1:] < 0, -v, v)


# ---------------------------------------------------------------- rotations


def rotation_to(v) -> np.ndarray:
    """Deterministic rotation R with R e_d = v.

    Built from a Householder reflection swapping e_d and v, composed with
    the reflection flipping e_1, so that det R = +1.
    """
    v = _as_vec(v)
    d = len(v)
    if abs(np.linalg.norm(v) - 1) > 1e-9:
        raise GeometryError("not-unit", "rotation target must be a unit vector")
    e = np.zeros(d)
    e[-1] = 1.0
    u = e - v
    nu = np.linalg.norm(u)
    if nu < UNIT_TOL:
        return np.eye(d)
    u = u / nu
    H = np.eye(d) - 2.0 * np.outer(u, u)
    S = np.eye(d)
    S[0, 0] = -1.0
    return H @ S
