"""Vertex paths inside boxes and bundles of box paths across a coarse grid.

Shortest paths are made canonical: among all shortest paths the walk always
steps to the lexicographically smallest neighbour that is one step closer to
the target.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, shortest_path

from .env import CarpetError, Environment
from .faces import face_of, fractal


def grid_graph(mask: np.ndarray):
    """Nearest-neighbour adjacency (CSR) among the True cells of a boolean grid."""
    shape = mask.shape
    n = mask.size
    idx = np.arange(n).reshape(shape)
    rows, cols = [], []
    for ax in range(len(shape)):
        a = np.take(idx, np.arange(shape[ax] - 1), axis=ax).ravel()
        b = np.take(idx, np.arange(1, shape[ax]), axis=ax).ravel()
        ok = mask.ravel()[a] & mask.ravel()[b]
        rows += [a[ok], b[ok]]
        cols += [b[ok], a[ok]]
    r = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    return coo_matrix((np.ones(len(r), np.int8), (r, c)), shape=(n, n)).tocsr()


def lex_shortest_path(adj, coords: np.ndarray, src: int, dst: int, dist=None) -> list[int] | None:
    """Canonical shortest path from ``src`` to ``dst`` (node indices), or None."""
    if dist is None:
        dist = shortest_path(adj, unweighted=True, directed=False, indices=dst)
    if not np.isfinite(dist[src]):
        return None
    path = [src]
    u = src
    while u != dst:
        nb = adj.indices[adj.indptr[u] : adj.indptr[u + 1]]
        nb = nb[dist[nb] == dist[u] - 1]
        order = np.lexsort(coords[nb].T[::-1])
        u = int(nb[order[0]])
        path.append(u)
    return path


def connected(adj, src: int, dst: int) -> bool:
    return dst in set(breadth_first_order(adj, src, directed=False, return_predecessors=False).tolist())


# ------------------------------------------------------------------ scale 0


def path0(env: Environment, x, v, w) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Vertex paths across the 0-box at x between the fractals on faces v and w.

    Returns (paths, F_v, F_w); the i-th path joins F_v[i] to F_w[i]. Apart
    from its two endpoints every path stays in the interior of the box and
    avoids the closed vertices.
    """
    L0 = env.ladder.L0
    d = env.d
    Fv = fractal(env, face_of(env, x, 0, v))
    Fw = fractal(env, face_of(env, x, 0, w))
    if len(Fv) != len(Fw):
        raise CarpetError("fractals of different sizes")
    side = 2 * L0 - 1
    lo = np.asarray(x, np.int64) - (L0 - 1)
    g = np.indices((side,) * d).reshape(d, -1).T
    pts = g + lo
    vac = ~env.closed(pts)
    adj = grid_graph(vac.reshape((side,) * d))
    vv, ww = np.asarray(v, np.int64), np.asarray(w, np.int64)
    strides = np.array([side ** (d - 1 - i) for i in range(d)], np.int64)
    paths = []
    for a, b in zip(Fv, Fw):
        s = int(((a - vv) - lo) @ strides)
        t = int(((b - ww) - lo) @ strides)
        if not (vac[s] and vac[t]):
            raise CarpetError("fractal point next to a closed vertex")
        p = lex_shortest_path(adj, g, s, t)
        if p is None:
            raise CarpetError(f"no vacant path in 0-box {tuple(x)}")
        paths.append(np.vstack([a[None], pts[p], b[None]]))
    return paths, Fv, Fw


# ------------------------------------------------------------------ scale k


def coarse_centers(env: Environment, x, k: int) -> np.ndarray:
    """The 17^d coarse-box centers of the k-box at x, as a (17,)*d + (d,) array."""
    step = 2 * (env.ladder.L[k] // 17)
    off = np.arange(-8, 9, dtype=np.int64) * step
    g = np.stack(np.meshgrid(*([off] * env.d), indexing="ij"), axis=-1)
    return g + np.asarray(x, np.int64)


def coarse_grid(env: Environment, x, k: int) -> np.ndarray:
    """The coarse grid of the k-box at x as a flat (17^d, d) array, lexicographic."""
    return coarse_centers(env, x, k).reshape(-1, env.d)


def coarse_allowed(env: Environment, x, k: int) -> np.ndarray:
    """Coarse boxes none of whose (k-1)-sub-boxes is bad."""
    cc = coarse_centers(env, x, k)
    ok = np.ones(cc.shape[:-1], bool)
    bad = np.asarray(env.bad_sub(x, k), np.int64).reshape(-1, env.d)
    if len(bad):
        r = env.ladder.L[k] // 17
        step = 2 * r
        idx = (bad - np.asarray(x, np.int64) + 8 * step + r) // step  # coarse cell holding each bad sub-box
        ok[tuple(idx.T)] = False
    return ok


def coarse_path17(env: Environment, x, k: int, start, goal) -> np.ndarray:
    """Canonical shortest chain of coarse boxes (centers) from ``start`` to ``goal``."""
    cc = coarse_centers(env, x, k)
    ok = coarse_allowed(env, x, k)
    shape = ok.shape
    flat = cc.reshape(-1, env.d)
    step = 2 * (env.ladder.L[k] // 17)

    def index(c):
        j = (np.asarray(c, np.int64) - flat[0]) // step
        return int(np.ravel_multi_index(tuple(j), shape))

    s, t = index(start), index(goal)
    if not (ok.ravel()[s] and ok.ravel()[t]):
        raise CarpetError("coarse path endpoint in a coarse box with a bad sub-box")
    p = lex_shortest_path(grid_graph(ok), flat, s, t)
    if p is None:
        raise CarpetError(f"no coarse path in {k}-box {tuple(x)}")
    return flat[p]


def bundle_box(z, a, b, q: int, Ls: int, start) -> np.ndarray:
    """Path of sub-box centers through the coarse box at z, entering through face a and leaving through b.

    The coarse box holds q^d sub-boxes of half-width ``Ls``. Opposite faces are
    joined by straight lines; adjacent faces by an L-shaped path that turns on
    the diagonal hyperplane where the two local coordinates agree, so paths
    from different starts never meet.
    """
    h = (q - 1) // 2
    z = np.asarray(z, np.int64)
    a = np.asarray(a, np.int64)
    b = np.asarray(b, np.int64)
    j = (np.asarray(start, np.int64) - z) // (2 * Ls)
    if int(j @ a) != h or np.any(np.abs(j) > h):
        raise CarpetError("bundle start is not next to the entry face")
    out = [j.copy()]
    if np.array_equal(a, -b):
        while int(j @ b) < h:
            j = j + b
            out.append(j.copy())
    elif int(a @ b) == 0:
        r0 = int(j @ b)
        while int(j @ a) > r0:
            j = j - a
            out.append(j.copy())
        while int(j @ b) < h:
            j = j + b
            out.append(j.copy())
    else:
        raise CarpetError("entry and exit faces coincide")
    return z + 2 * Ls * np.array(out, np.int64)


def bundle_k(env: Environment, x, k: int, v, w) -> list[np.ndarray]:
    """Vertex-disjoint paths of (k-1)-box centers crossing the k-box at x from face v to face w.

    Path i starts behind the i-th sub-face (lexicographic) of the small face on
    v and ends behind a sub-face of the small face on w.
    """
    from .faces import anchor, small_face_points

    lad = env.ladder
    Lk, Ls = lad.L[k], lad.L[k - 1]
    r = Lk // 17
    q = r // Ls
    vv, ww = np.asarray(v, np.int64), np.asarray(w, np.int64)
    fv, fw = face_of(env, x, k, v), face_of(env, x, k, w)
    yv, yw = np.asarray(anchor(env, fv)), np.asarray(anchor(env, fw))
    chain = coarse_path17(env, x, k, yv - r * vv, yw - r * ww)
    n = len(chain)
    entry = [vv] + [(chain[i - 1] - chain[i]) // (2 * r) for i in range(1, n)]
    exit_ = [(chain[i + 1] - chain[i]) // (2 * r) for i in range(n - 1)] + [ww]
    ends = {tuple(p) for p in small_face_points(env, fw, tuple(yw))}
    paths = []
    for x0 in small_face_points(env, fv, tuple(yv)):
        s = x0 - Ls * vv
        pieces = []
        for z, a, b in zip(chain, entry, exit_):
            seg = bundle_box(z, a, b, q, Ls, s)
            pieces.append(seg)
            s = seg[-1] + 2 * Ls * b
        path = np.vstack(pieces)
        if not all(env.is_good(c, k - 1) for c in path.tolist()):
            raise CarpetError("bundle path passes through a bad sub-box")
        if tuple(path[-1] + Ls * ww) not in ends:
            raise CarpetError("bundle path missed the target small face")
        paths.append(path)
    return paths
