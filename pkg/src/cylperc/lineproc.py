"""Poisson cylinder process: samplers, level couplings and radius views.

Intensity convention: the set of lines meeting a ball of radius R carries
mass kappa_{d-1} R^{d-1}. Under this convention the hyperplane sampler's
point intensity is ``c_mu(d) = 2 kappa_{d-1} / (d kappa_d)`` per unit
(d-1)-volume, so both samplers describe the same process.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Ball,
    BoxInf,
    GeometryError,
    Line,
    canonical_anchor,
    canonical_direction,
    dist_points_lines,
    dist_segments_lines,
    dist_set_lines,
    unit_ball_volume,
)
from .rng import as_generator, stream

CHUNK = 1024  # replicas per RNG sub-stream in batch samplers


class WindowError(ValueError):
    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        super().__init__(f"{kind}: {message}" if message else kind)


def c_mu(d: int) -> float:
    """Point intensity of the hyperplane parametrization per unit intensity."""
    return 2 * unit_ball_volume(d - 1) / (d * unit_ball_volume(d))


# ------------------------------------------------------------------ windows


@dataclass(frozen=True)
class BallWindow:
    center: tuple
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise WindowError("invalid-window", f"ball window radius must be positive, got {self.R}")

    @property
    def d(self) -> int:
        return len(self.center)

    def mass(self) -> float:
        return unit_ball_volume(self.d - 1) * self.R ** (self.d - 1)

    def covers(self, A, rho: float) -> bool:
        c = np.asarray(self.center, float)
        return bool(np.linalg.norm(A.c - c) + A.bounding_radius() + rho <= self.R * (1 + 1e-12))

    def describe(self) -> str:
        return "ball:" + ",".join(repr(float(t)) for t in self.center) + ":" + repr(float(self.R))


@dataclass(frozen=True)
class HyperplaneWindow:
    h: float
    lows: tuple
    highs: tuple

    def __post_init__(self):
        if len(self.lows) != len(self.highs) or any(hi <= lo for lo, hi in zip(self.lows, self.highs)):
            raise WindowError("invalid-window", "hyperplane window rectangle is empty")

    @property
    def d(self) -> int:
        return len(self.lows) + 1

    def volume(self) -> float:
        return float(np.prod(np.subtract(self.highs, self.lows)))

    def mass(self) -> float:
        return c_mu(self.d) * self.volume()

    def covers(self, A, rho: float) -> bool:
        # A hyperplane window never certifies that every line near A was drawn.
        return False

    def describe(self) -> str:
        lo = ",".join(repr(float(t)) for t in self.lows)
        hi = ",".join(repr(float(t)) for t in self.highs)
        return f"plane:{float(self.h)!r}:{lo}:{hi}"


def parse_window(text: str):
    kind, *rest = text.split(":")
    if kind == "ball":
        return BallWindow(tuple(float(t) for t in rest[0].split(",")), float(rest[1]))
    if kind == "plane":
        return HyperplaneWindow(
            float(rest[0]),
            tuple(float(t) for t in rest[1].split(",")),
            tuple(float(t) for t in rest[2].split(",")),
        )
    raise WindowError("invalid-window", f"unknown window descriptor {text!r}")


def covering_window(sets, rho: float) -> BallWindow:
    """Smallest ball window (centered at the mean of the set centers) covering ``sets`` padded by ``rho``."""
    centers = np.array([A.c for A in sets], dtype=float)
    c = centers.mean(axis=0)
    R = max(np.linalg.norm(A.c - c) + A.bounding_radius() for A in sets) + rho
    return BallWindow(tuple(float(t) for t in c), float(R))


# ------------------------------------------------------------ line drawing


def random_directions(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ball_lines(rng: np.random.Generator, n: int, center, R: float) -> tuple[np.ndarray, np.ndarray]:
    """``n`` isotropic lines conditioned to meet the ball B(center, R)."""
    c = np.asarray(center, float)
    d = len(c)
    v = random_directions(rng, n, d)
    g = rng.standard_normal((n, d))
    g -= np.sum(g * v, axis=1, keepdims=True) * v
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = R * rng.random(n) ** (1.0 / (d - 1))
    v = canonical_direction(v) if n else v
    a = canonical_anchor(c + rad[:, None] * g, v) if n else np.zeros((0, d))
    return a, v


def chi_directions(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Directions from the density proportional to <w, e_d> on the upper hemisphere.

    Rejection from the uniform hemisphere with acceptance probability <w, e_d>.
    """
    out = np.empty((0, d))
    while len(out) < n:
        m = max(16, int(2.2 * (n - len(out))))
        w = random_directions(rng, m, d)
        w[:, -1] = np.abs(w[:, -1])
        keep = rng.random(m) < w[:, -1]
        out = np.vstack([out, w[keep]])
    return out[:n]


def chi_cap_directions(rng: np.random.Generator, n: int, d: int, cos_min: float) -> np.ndarray:
    """Directions from the same density conditioned on <w, e_d> > cos_min.

    Projecting that density onto the equatorial (d-1)-disk gives the uniform
    law, so a uniform point of the disk of radius sqrt(1 - cos_min^2) lifted
    back to the sphere is an exact draw.
    """
    s_max = np.sqrt(max(0.0, 1.0 - cos_min * cos_min))
    g = rng.standard_normal((n, d - 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    s = s_max * rng.random(n) ** (1.0 / (d - 1))
    perp = g * s[:, None]
    wd = np.sqrt(np.maximum(0.0, 1.0 - s * s))
    return np.hstack([perp, wd[:, None]])


def plane_lines(rng: np.random.Generator, n: int, window: HyperplaneWindow) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = np.asarray(window.lows, float), np.asarray(window.highs, float)
    pts = lo + (hi - lo) * rng.random((n, len(lo)))
    p = np.hstack([pts, np.full((n, 1), float(window.h))])
    w = chi_directions(rng, n, window.d)
    v = canonical_direction(w) if n else w
    a = canonical_anchor(p, v) if n else np.zeros((0, window.d))
    return a, v


def _draw(rng, window, n):
    if isinstance(window, BallWindow):
        return ball_lines(rng, n, window.center, window.R)
    return plane_lines(rng, n, window)


# ------------------------------------------------------------------ samples


def _frozen(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True)
class LabeledLine:
    line: Line
    level: float


@dataclass(frozen=True, eq=False)
class ProcessSample:
    anchors: np.ndarray
    dirs: np.ndarray
    levels: np.ndarray
    window: BallWindow | HyperplaneWindow
    u_max: float
    seed: int
    provenance: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "anchors", _frozen(np.reshape(self.anchors, (-1, self.d))))
        object.__setattr__(self, "dirs", _frozen(np.reshape(self.dirs, (-1, self.d))))
        object.__setattr__(self, "levels", _frozen(np.reshape(self.levels, (-1,))))

    @property
    def d(self) -> int:
        return self.window.d

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def lines(self) -> list[LabeledLine]:
        return [
            LabeledLine(Line(tuple(map(float, a)), tuple(map(float, v))), float(t))
            for a, v, t in zip(self.anchors, self.dirs, self.levels)
        ]

    def restrict(self, u: float) -> "ProcessSample":
        """The coupled sample at intensity ``u`` (lines with level below ``u``)."""
        if u > self.u_max:
            raise ValueError(f"cannot restrict to u={u} above u_max={self.u_max}")
        keep = self.levels < u
        return ProcessSample(
            self.anchors[keep], self.dirs[keep], self.levels[keep], self.window, float(u), self.seed, self.provenance
        )

    def view(self, u: float | None = None, rho: float = 1.0) -> "CylinderView":
        return CylinderView(self, self.u_max if u is None else u, rho)

    def identical(self, other: "ProcessSample") -> bool:
        return (
            self.window == other.window
            and self.u_max == other.u_max
            and self.anchors.tobytes() == other.anchors.tobytes()
            and self.dirs.tobytes() == other.dirs.tobytes()
            and self.levels.tobytes() == other.levels.tobytes()
        )


def _sample(window, u_max: float, seed: int) -> ProcessSample:
    if u_max < 0:
        raise ValueError("u_max must be non-negative")
    rng = stream(seed, "sample")
    n = int(rng.poisson(u_max * window.mass())) if u_max > 0 else 0
    a, v = _draw(rng, window, n)
    levels = u_max * rng.random(n)
    return ProcessSample(a, v, levels, window, float(u_max), int(seed))


def sample_hitting_ball(u_max: float, center, R: float, seed: int) -> ProcessSample:
    return _sample(BallWindow(tuple(float(t) for t in center), float(R)), u_max, seed)


def sample_hyperplane_window(u_max: float, h: float, lows, highs, seed: int) -> ProcessSample:
    return _sample(HyperplaneWindow(float(h), tuple(map(float, lows)), tuple(map(float, highs))), u_max, seed)


def sample_in_window(window, u_max: float, seed: int) -> ProcessSample:
    return _sample(window, u_max, seed)


def top_up(sample: ProcessSample, delta: float, seed: int) -> ProcessSample:
    """Superpose an independent layer of intensity ``delta`` above ``u_max``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    rng = stream(seed, "top_up")
    n = int(rng.poisson(delta * sample.window.mass()))
    a, v = _draw(rng, sample.window, n)
    levels = sample.u_max + delta * rng.random(n)
    return ProcessSample(
        np.vstack([sample.anchors, a]),
        np.vstack([sample.dirs, v]),
        np.concatenate([sample.levels, levels]),
        sample.window,
        sample.u_max + delta,
        sample.seed,
        sample.provenance + ((float(delta), int(seed)),),
    )


def from_lines(lines, window, u_max: float = 1.0, seed: int = 0) -> ProcessSample:
    """Sample made of explicit lines (all at level 0). Useful for synthetic instances."""
    lines = list(lines)
    d = window.d
    a = np.array([ln.anchor for ln in lines], float).reshape(-1, d)
    v = np.array([ln.direction for ln in lines], float).reshape(-1, d)
    return ProcessSample(a, v, np.zeros(len(lines)), window, float(u_max), int(seed))


# -------------------------------------------------------------------- views


@dataclass(frozen=True)
class CylinderView:
    sample: ProcessSample
    u: float
    rho: float

    def __post_init__(self):
        if self.u > self.sample.u_max:
            raise ValueError(f"view level {self.u} exceeds u_max {self.sample.u_max}")
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def active(self) -> tuple[np.ndarray, np.ndarray]:
        keep = self.sample.levels <= self.u
        return self.sample.anchors[keep], self.sample.dirs[keep]

    def _check(self, A, strict: bool):
        if strict and not self.sample.window.covers(A, self.rho):
            raise WindowError("window-undercoverage", f"{A} padded by {self.rho} leaves {self.sample.window.describe()}")

    def hit_mask(self, A, strict: bool = True) -> np.ndarray:
        self._check(A, strict)
        a, v = self.active()
        return dist_set_lines(A, a, v) <= self.rho

    def count_hitting(self, A, strict: bool = True) -> int:
        return int(np.count_nonzero(self.hit_mask(A, strict)))

    def covered(self, points, strict: bool = True) -> np.ndarray:
        """Boolean coverage of each row of ``points``."""
        pts = np.atleast_2d(np.asarray(points, float))
        if strict and len(pts):
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            box = BoxInf(tuple((lo + hi) / 2), tuple(np.maximum((hi - lo) / 2, 1e-12)))
            self._check(box, True)
        a, v = self.active()
        if len(a) == 0:
            return np.zeros(len(pts), bool)
        out = np.zeros(len(pts), bool)
        for s in range(0, len(pts), 4096):
            out[s : s + 4096] = (dist_points_lines(pts[s : s + 4096], a, v) <= self.rho).any(axis=1)
        return out

    def is_covered(self, x, strict: bool = True) -> bool:
        return bool(self.covered(np.asarray(x, float)[None], strict)[0])

    def closed(self, points, strict: bool = True) -> np.ndarray:
        """Lattice vertices with at least one incident unit edge meeting a cylinder.

        The complement is the discrete vacant set.
        """
        pts = np.atleast_2d(np.asarray(points, float))
        out = np.zeros(len(pts), bool)
        if len(pts) == 0:
            return out
        if strict:
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            self._check(BoxInf(tuple((lo + hi) / 2), tuple((hi - lo) / 2 + 1.0)), True)
        a, v = self.active()
        if len(a) == 0:
            return out
        d = pts.shape[1]
        steps = np.vstack([np.eye(d), -np.eye(d)])
        for s in range(0, len(pts), 2048):
            chunk = pts[s : s + 2048]
            near = dist_points_lines(chunk, a, v) <= self.rho + 1.0
            cols = np.flatnonzero(near.any(axis=0))
            if len(cols) == 0:
                continue
            hit = np.zeros(len(chunk), bool)
            for e in steps:
                hit |= (dist_segments_lines(chunk, chunk + e, a[cols], v[cols]) <= self.rho).any(axis=1)
            out[s : s + 2048] = hit
        return out


def count_hitting(view: CylinderView, A, strict: bool = True) -> int:
    return view.count_hitting(A, strict)


def is_covered(view: CylinderView, x, strict: bool = True) -> bool:
    return view.is_covered(x, strict)


# ------------------------------------------------------------ batch samples


@dataclass(frozen=True, eq=False)
class LineBatch:
    """Lines of many independent replicas, tagged by replica index."""

    anchors: np.ndarray
    dirs: np.ndarray
    levels: np.ndarray
    rep: np.ndarray
    n_rep: int

    def select(self, mask) -> "LineBatch":
        return LineBatch(self.anchors[mask], self.dirs[mask], self.levels[mask], self.rep[mask], self.n_rep)

    def counts(self, mask=None) -> np.ndarray:
        rep = self.rep if mask is None else self.rep[mask]
        return np.bincount(rep, minlength=self.n_rep)


def sample_batch(window, u_max: float, n_rep: int, seed: int, *names) -> LineBatch:
    """``n_rep`` independent samples in ``window``, drawn chunk by chunk.

    Each chunk of CHUNK replicas has its own sub-stream, so results do not
    depend on how chunks are scheduled.
    """
    parts = []
    for j, start in enumerate(range(0, n_rep, CHUNK)):
        m = min(CHUNK, n_rep - start)
        rng = stream(seed, *names, "chunk", j)
        counts = rng.poisson(u_max * window.mass(), size=m) if u_max > 0 else np.zeros(m, int)
        n = int(counts.sum())
        a, v = _draw(rng, window, n)
        levels = u_max * rng.random(n)
        rep = start + np.repeat(np.arange(m), counts)
        parts.append((a, v, levels, rep))
    d = window.d
    if not parts:
        return LineBatch(np.zeros((0, d)), np.zeros((0, d)), np.zeros(0), np.zeros(0, int), n_rep)
    return LineBatch(
        np.vstack([p[0] for p in parts]).reshape(-1, d),
        np.vstack([p[1] for p in parts]).reshape(-1, d),
        np.concatenate([p[2] for p in parts]),
        np.concatenate([p[3] for p in parts]).astype(np.int64),
        n_rep,
    )


# ---------------------------------------------------------- serialization


def write_csv(sample: ProcessSample, path) -> None:
    d = sample.d
    with open(path, "w", newline="") as fh:
        fh.write(
            "# "
            + json.dumps({"d": d, "window": sample.window.describe(), "u_max": sample.u_max, "seed": sample.seed})
            + "\n"
        )
        w = csv.writer(fh)
        w.writerow([f"a{i}" for i in range(d)] + [f"v{i}" for i in range(d)] + ["level"])
        for a, v, t in zip(sample.anchors, sample.dirs, sample.levels):
            w.writerow([repr(float(s)) for s in a] + [repr(float(s)) for s in v] + [repr(float(t))])


def read_csv(path) -> ProcessSample:
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError("missing sample header")
        meta = json.loads(first[2:])
        rows = list(csv.reader(fh))[1:]
    d = int(meta["d"])
    arr = np.array(rows, dtype=float).reshape(-1, 2 * d + 1)
    window = parse_window(meta["window"])
    return ProcessSample(arr[:, :d], arr[:, d : 2 * d], arr[:, 2 * d], window, float(meta["u_max"]), int(meta["seed"]))


__all__ = [
    "Ball",
    "BallWindow",
    "BoxInf",
    "CylinderView",
    "GeometryError",
    "HyperplaneWindow",
    "LabeledLine",
    "LineBatch",
    "ProcessSample",
    "WindowError",
    "as_generator",
    "c_mu",
    "count_hitting",
    "covering_window",
    "is_covered",
    "read_csv",
    "sample_batch",
    "sample_hitting_ball",
    "sample_hyperplane_window",
    "top_up",
    "write_csv",
]
