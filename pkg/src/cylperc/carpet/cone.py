"""Flows on the coarse dual graph of a cone of k-boxes.

The cone of scale k is made of the k-boxes inside B_(0, k+1) that meet a
segment from 2 L_k e_1 to the small face anchored on the e_1-face of
B_(0, k+1). Dual vertices are the faces of these boxes; two faces are
adjacent when they bound the same box. For each target face Z the unit flow
runs along a path that stays as close as possible, in sup distance, to the
segment from the source face to Z; the cone flow is the average over Z.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix

from .env import CarpetError, Environment
from .faces import Face, anchor, small_face_points, units
from .paths import connected, lex_shortest_path

DECAY_CONSTANT_FACTOR = 8  # envelope constant is this times 17^(d-1)


def _interval(alpha, beta, lo, hi, tol=1e-12):
    """Intersect [lo, hi] with {t : alpha t <= beta}, elementwise."""
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = beta / alpha
    pos, neg, zero = alpha > 0, alpha < 0, alpha == 0
    hi = np.where(pos, np.minimum(hi, bound + tol), hi)
    lo = np.where(neg, np.maximum(lo, bound - tol), lo)
    hi = np.where(zero & (beta < -tol), -np.inf, hi)
    return lo, hi


def cone_boxes(env: Environment, k: int, y=None) -> np.ndarray:
    """Centers of the k-boxes of the cone, lexicographic."""
    lad = env.ladder
    d = env.d
    L, L1 = lad.L[k], lad.L[k + 1]
    if y is None:
        y = anchor(env, Face((L1,) + (0,) * (d - 1), k + 1, 0))
    r = L1 // 17
    n = (L1 - L) // (2 * L)
    ax = np.arange(-n, n + 1, dtype=np.int64) * 2 * L
    c = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d).astype(float)
    p1 = 2.0 * L
    lo = np.zeros(len(c))
    hi = np.ones(len(c))
    D = L1 - p1
    lo, hi = _interval(np.full(len(c), D), c[:, 0] + L - p1, lo, hi)
    lo, hi = _interval(np.full(len(c), -D), -(c[:, 0] - L - p1), lo, hi)
    for i in range(1, d):
        # segment point p + t (s - p) has i-th coordinate t s_i with s_i in [y_i - r, y_i + r]
        lo, hi = _interval(np.full(len(c), float(y[i] - r)), c[:, i] + L, lo, hi)
        lo, hi = _interval(np.full(len(c), -float(y[i] + r)), -(c[:, i] - L), lo, hi)
    keep = lo <= hi
    return c[keep].astype(np.int64)


def _seg_dist(P, a, b):
    ab = b - a
    t = np.clip(((P - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(P - (a + t[:, None] * ab), axis=1)


@dataclass
class ConeFlow:
    k: int
    L: int
    boxes: np.ndarray
    source: tuple
    basis: list
    edges: dict = field(default_factory=dict)  # (box, i, j) with i < j -> flow from face i to face j
    paths: list = field(default_factory=list)

    def value(self, box, v, w) -> float:
        U = units(len(box))
        i, j = U.index(tuple(v)), U.index(tuple(w))
        if i < j:
            return self.edges.get((tuple(box), i, j), 0.0)
        return -self.edges.get((tuple(box), j, i), 0.0)

    def box_pairs(self):
        """Per box, the list of (v, w, value) with non-zero flow from face v to face w."""
        out: dict = {}
        U = units(len(self.source))
        for (box, i, j), val in sorted(self.edges.items()):
            if val != 0.0:
                out.setdefault(box, []).append((U[i], U[j], val))
        return out

    def divergence(self) -> dict:
        div: dict = {}
        U = units(len(self.source))
        for (box, i, j), val in self.edges.items():
            fi = tuple(b + self.L * u for b, u in zip(box, U[i]))
            fj = tuple(b + self.L * u for b, u in zip(box, U[j]))
            div[fi] = div.get(fi, 0.0) + val
            div[fj] = div.get(fj, 0.0) - val
        return {f: s for f, s in div.items() if s != 0.0}

    def decay_profile(self) -> list[dict]:
        """Per layer of boxes (first coordinate t): the largest |flow| and the envelope."""
        d = len(self.source)
        c = DECAY_CONSTANT_FACTOR * 17 ** (d - 1)
        layers: dict = {}
        for (box, _, _), val in self.edges.items():
            layers[box[0]] = max(layers.get(box[0], 0.0), abs(val))
        return [
            {"t": t, "max_flow": m, "envelope": min(1.0, c * (self.L / t) ** (d - 1))}
            for t, m in sorted(layers.items())
        ]

    def energy(self) -> float:
        return float(sum(v * v for v in self.edges.values()))


def cone_flow(env: Environment, k: int) -> ConeFlow:
    lad = env.ladder
    d = env.d
    L, L1 = lad.L[k], lad.L[k + 1]
    top = Face((L1,) + (0,) * (d - 1), k + 1, 0)
    y = anchor(env, top)
    boxes = cone_boxes(env, k, y)
    for b in boxes:
        if not env.is_good(b, k):
            raise CarpetError(f"cone box {tuple(b)} at scale {k} is bad")
    U = np.array(units(d), np.int64)
    faces = (boxes[:, None, :] + L * U[None]).reshape(-1, d)
    uniq, inv = np.unique(faces, axis=0, return_inverse=True)
    inv = inv.reshape(len(boxes), 2 * d)
    pairs = list(itertools.combinations(range(2 * d), 2))
    rows, cols, owner = [], [], {}
    for bi, row in enumerate(inv):
        for i, j in pairs:
            a, b = int(row[i]), int(row[j])
            rows += [a, b]
            cols += [b, a]
            owner[(a, b)] = (bi, i, j, 1.0)
            owner[(b, a)] = (bi, i, j, -1.0)
    n = len(uniq)
    adj = coo_matrix((np.ones(len(rows), np.int8), (rows, cols)), shape=(n, n)).tocsr()
    index = {tuple(f): i for i, f in enumerate(uniq.tolist())}
    source = (L,) + (0,) * (d - 1)
    s = index.get(source)
    if s is None:
        raise CarpetError("source face is not in the cone")
    basis = [tuple(int(t) for t in f) for f in small_face_points(env, top, y)]
    flow = ConeFlow(k, L, boxes, source, basis)
    count: dict = {}  # integer path counts, divided once at the end so sums stay exact
    P = uniq.astype(float)
    for Z in basis:
        t = index.get(Z)
        if t is None:
            raise CarpetError(f"basis face {Z} is not in the cone")
        dist = _seg_dist(P, P[s], P[t])
        levels = np.unique(dist)
        levels = levels[levels >= max(dist[s], dist[t])]
        lo_i, hi_i = 0, len(levels) - 1
        while lo_i < hi_i:  # smallest level keeping source and target connected
            mid = (lo_i + hi_i) // 2
            if connected(_restrict(adj, dist <= levels[mid]), s, t):
                hi_i = mid
            else:
                lo_i = mid + 1
        sub = _restrict(adj, dist <= levels[lo_i])
        path = lex_shortest_path(sub, uniq, s, t)
        if path is None:
            raise CarpetError("cone target unreachable")
        flow.paths.append([tuple(int(c) for c in uniq[q]) for q in path])
        for a, b in zip(path[:-1], path[1:]):
            bi, i, j, sign = owner[(a, b)]
            key = (tuple(int(c) for c in boxes[bi]), i, j)
            count[key] = count.get(key, 0) + int(sign)
    flow.edges = {key: c / len(basis) for key, c in count.items() if c != 0}
    return flow


def _restrict(adj, keep: np.ndarray):
    """Adjacency with every edge touching a dropped node removed (node count unchanged)."""
    m = adj.tocoo()
    ok = keep[m.row] & keep[m.col]
    return coo_matrix((m.data[ok], (m.row[ok], m.col[ok])), shape=adj.shape).tocsr()
