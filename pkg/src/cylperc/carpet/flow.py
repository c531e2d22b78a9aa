"""Edge flows on the lattice Z^d.

A flow is stored on positively oriented edges only: row (x, i, t) means the
edge x -> x + e_i carries t, and x + e_i -> x carries -t. Antisymmetry is
therefore structural rather than checked after the fact.
"""

from __future__ import annotations

import csv

import numpy as np


def _keys(tails: np.ndarray, axes: np.ndarray):
    """Integer keys for (tail, axis) rows plus what is needed to undo them."""
    lo = tails.min(axis=0)
    span = tails.max(axis=0) - lo + 1
    d = tails.shape[1]
    if float(np.prod(span.astype(float))) * d < 2.0**62:
        key = np.ravel_multi_index(tuple((tails - lo).T), tuple(span)) * d + axes
        return key, (lo, span, d)
    return None, None


class LatticeFlow:
    __slots__ = ("tails", "axes", "values", "d")

    def __init__(self, tails, axes, values, d: int | None = None, coalesce: bool = True):
        tails = np.asarray(tails, dtype=np.int64)
        if tails.ndim != 2:
            tails = tails.reshape(-1, d)
        self.d = tails.shape[1] if d is None else d
        self.tails = tails.reshape(-1, self.d)
        self.axes = np.asarray(axes, dtype=np.int64).reshape(-1)
        self.values = np.asarray(values, dtype=float).reshape(-1)
        if coalesce:
            self._coalesce()

    @classmethod
    def empty(cls, d: int) -> "LatticeFlow":
        return cls(np.zeros((0, d), np.int64), np.zeros(0, np.int64), np.zeros(0), d, coalesce=False)

    @classmethod
    def from_path(cls, vertices, weight: float = 1.0) -> "LatticeFlow":
        """Unit flow (times ``weight``) along a nearest-neighbour vertex path."""
        p = np.asarray(vertices, dtype=np.int64)
        if p.ndim != 2:
            raise ValueError("path must be an (n, d) array")
        d = p.shape[1]
        if len(p) < 2:
            return cls.empty(d)
        step = np.diff(p, axis=0)
        if not np.all(np.abs(step).sum(axis=1) == 1):
            raise ValueError("consecutive path vertices must be lattice neighbours")
        axis = np.argmax(np.abs(step), axis=1)
        sign = step[np.arange(len(step)), axis]
        tails = np.where((sign > 0)[:, None], p[:-1], p[1:])
        return cls(tails, axis, sign * float(weight), d)

    @classmethod
    def from_paths(cls, paths, weights) -> "LatticeFlow":
        parts = [cls.from_path(p, w) for p, w in zip(paths, weights)]
        return cls.concat(parts, d=parts[0].d if parts else None)

    @classmethod
    def concat(cls, flows, d: int | None = None, coalesce: bool = True) -> "LatticeFlow":
        flows = [f for f in flows if f is not None]
        if not flows:
            return cls.empty(d)
        return cls(
            np.concatenate([f.tails for f in flows]),
            np.concatenate([f.axes for f in flows]),
            np.concatenate([f.values for f in flows]),
            flows[0].d,
            coalesce=coalesce,
        )

    def _coalesce(self):
        if len(self.values) == 0:
            return
        key, meta = _keys(self.tails, self.axes)
        if key is not None:
            uk, inv = np.unique(key, return_inverse=True)
            vals = np.bincount(inv.ravel(), weights=self.values, minlength=len(uk))
            lo, span, d = meta
            tails = np.stack(np.unravel_index(uk // d, tuple(span)), axis=1) + lo
            axes = uk % d
        else:
            rows = np.column_stack([self.tails, self.axes])
            urows, inv = np.unique(rows, axis=0, return_inverse=True)
            vals = np.bincount(inv.ravel(), weights=self.values, minlength=len(urows))
            tails, axes = urows[:, :-1], urows[:, -1]
        keep = vals != 0.0
        self.tails = np.ascontiguousarray(tails[keep], dtype=np.int64)
        self.axes = axes[keep].astype(np.int64)
        self.values = vals[keep]

    # -- arithmetic

    def __len__(self) -> int:
        return len(self.values)

    def __add__(self, other: "LatticeFlow") -> "LatticeFlow":
        return LatticeFlow.concat([self, other], d=self.d)

    def __sub__(self, other: "LatticeFlow") -> "LatticeFlow":
        return self + (-other)

    def __neg__(self) -> "LatticeFlow":
        return LatticeFlow(self.tails, self.axes, -self.values, self.d, coalesce=False)

    def scaled(self, c: float) -> "LatticeFlow":
        if c == 0:
            return LatticeFlow.empty(self.d)
        return LatticeFlow(self.tails, self.axes, self.values * c, self.d, coalesce=False)

    __mul__ = scaled
    __rmul__ = scaled

    def translated(self, offset) -> "LatticeFlow":
        off = np.asarray(offset, dtype=np.int64)
        return LatticeFlow(self.tails + off, self.axes, self.values, self.d, coalesce=False)

    # -- queries

    @property
    def heads(self) -> np.ndarray:
        return self.tails + np.eye(self.d, dtype=np.int64)[self.axes]

    def value(self, x, y) -> float:
        """theta(x -> y) for neighbouring x, y (zero off the support)."""
        x = np.asarray(x, np.int64)
        y = np.asarray(y, np.int64)
        step = y - x
        if np.abs(step).sum() != 1:
            raise ValueError("x and y must be lattice neighbours")
        i = int(np.argmax(np.abs(step)))
        tail, sign = (x, 1.0) if step[i] > 0 else (y, -1.0)
        hit = np.flatnonzero((self.axes == i) & np.all(self.tails == tail, axis=1))
        return sign * float(self.values[hit[0]]) if len(hit) else 0.0

    def energy(self) -> float:
        return float(np.dot(self.values, self.values))

    def divergence(self) -> tuple[np.ndarray, np.ndarray]:
        """Net outflow per vertex, as (vertices, values) with zeros dropped."""
        if len(self.values) == 0:
            return np.zeros((0, self.d), np.int64), np.zeros(0)
        verts = np.concatenate([self.tails, self.heads])
        vals = np.concatenate([self.values, -self.values])
        return coalesce_vertex_values(verts, vals)

    def vertices(self) -> np.ndarray:
        if len(self.values) == 0:
            return np.zeros((0, self.d), np.int64)
        return np.unique(np.concatenate([self.tails, self.heads]), axis=0)

    def edge_keys(self) -> set:
        return {(tuple(t), int(a)) for t, a in zip(self.tails.tolist(), self.axes.tolist())}

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if len(self.values) else 0.0

    # -- export

    def write_csv(self, path, append: bool = False) -> None:
        d = self.d
        with open(path, "a" if append else "w", newline="") as fh:
            w = csv.writer(fh)
            if not append:
                w.writerow([f"x{i}" for i in range(d)] + [f"y{i}" for i in range(d)] + ["value"])
            for t, h, v in zip(self.tails.tolist(), self.heads.tolist(), self.values.tolist()):
                w.writerow(t + h + [repr(v)])

    @classmethod
    def read_csv(cls, path) -> "LatticeFlow":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        d = (len(rows[0]) - 1) // 2
        if len(rows) == 1:
            return cls.empty(d)
        data = np.array([[float(c) for c in r] for r in rows[1:]])
        x = data[:, :d].astype(np.int64)
        y = data[:, d : 2 * d].astype(np.int64)
        step = y - x
        axis = np.argmax(np.abs(step), axis=1)
        sign = step[np.arange(len(step)), axis]
        tails = np.where((sign > 0)[:, None], x, y)
        return cls(tails, axis, sign * data[:, -1], d)


def coalesce_vertex_values(verts: np.ndarray, vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum values on repeated vertices; drop exact zeros."""
    if len(vals) == 0:
        return np.zeros((0, verts.shape[1]), np.int64), np.zeros(0)
    uv, inv = np.unique(verts, axis=0, return_inverse=True)
    s = np.bincount(inv.ravel(), weights=vals, minlength=len(uv))
    keep = s != 0.0
    return uv[keep], s[keep]


def divergence_error(verts, vals, expected: dict) -> float:
    """Max |div - expected| over the union of supports; ``expected`` maps tuples to values."""
    got = {tuple(v): float(s) for v, s in zip(np.asarray(verts).tolist(), np.asarray(vals).tolist())}
    keys = set(got) | set(expected)
    return max((abs(got.get(k, 0.0) - expected.get(k, 0.0)) for k in keys), default=0.0)
