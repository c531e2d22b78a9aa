"""Random walks and electrical quantities on the vacant lattice graph.

The graph lives on the lattice points of a sup-norm box B_inf(0, R). Its
edges are the unit segments that miss every cylinder of the configuration,
and all conductances are one, so the simple random walk on the graph and the
unit-conductance network describe the same object.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg

from .geometry import BoxInf, dist_box_lines, dist_segments_lines
from .lineproc import ProcessSample
from .rng import stream
from .stats import wilson_interval

DEFAULT_TOL = 1e-10


class StartCovered(ValueError):
    """The requested start vertex is not a vertex of the graph."""


class NoConnection(RuntimeError):
    """Source and boundary lie in different components (infinite resistance)."""


class FlowNotFeasible(ValueError):
    """A flow uses an edge outside the graph or has the wrong divergence."""


class SolverFailure(RuntimeError):
    pass


# ------------------------------------------------------------------ graphs


@dataclass(eq=False)
class Network:
    """Unit-conductance network on lattice points. ``edges`` index into ``coords``."""

    coords: np.ndarray  # (n, d) int64
    edges: np.ndarray  # (m, 2) int64, i < j
    R: int | None = None
    _adj: csr_matrix | None = field(default=None, repr=False)
    _index: dict | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def adjacency(self) -> csr_matrix:
        if self._adj is None:
            i, j = self.edges[:, 0], self.edges[:, 1]
            data = np.ones(2 * len(i))
            self._adj = coo_matrix((data, (np.r_[i, j], np.r_[j, i])), shape=(self.n, self.n)).tocsr()
        return self._adj

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def index(self, x) -> int:
        if self._index is None:
            self._index = {tuple(p): i for i, p in enumerate(self.coords.tolist())}
        key = tuple(int(t) for t in x)
        if key not in self._index:
            raise StartCovered(f"{key} is not a vertex")
        return self._index[key]

    def indices(self, pts) -> np.ndarray:
        return np.array([self.index(p) for p in np.asarray(pts).tolist()], np.int64)

    def components(self) -> np.ndarray:
        return connected_components(self.adjacency, directed=False)[1]

    def edge_set(self) -> set:
        a, b = self.coords[self.edges[:, 0]], self.coords[self.edges[:, 1]]
        return {(tuple(x), tuple(y)) for x, y in zip(a.tolist(), b.tolist())}

    def boundary(self, R_out: int | None = None) -> np.ndarray:
        """Indices of vertices with sup norm exactly ``R_out`` (default: the box radius)."""
        R_out = self.R if R_out is None else R_out
        return np.flatnonzero(np.abs(self.coords).max(axis=1) == R_out)


VacantGraph = Network


def _box_lattice(R: int, d: int) -> np.ndarray:
    side = 2 * R + 1
    return np.indices((side,) * d).reshape(d, -1).T.astype(np.int64) - R


def _box_edges(R: int, d: int) -> np.ndarray:
    """All nearest-neighbour pairs (i, j), i < j, of the box lattice in its index order."""
    side = 2 * R + 1
    idx = np.arange(side**d).reshape((side,) * d)
    out = []
    for ax in range(d):
        a = np.take(idx, np.arange(side - 1), axis=ax).ravel()
        b = np.take(idx, np.arange(1, side), axis=ax).ravel()
        out.append(np.stack([a, b], axis=1))
    e = np.concatenate(out)
    return e[np.lexsort(e.T[::-1])]


def _hit_brute(x, y, a, v, rho) -> np.ndarray:
    hit = np.zeros(len(x), bool)
    if len(a) == 0:
        return hit
    for s in range(0, len(x), 4096):
        hit[s : s + 4096] = (dist_segments_lines(x[s : s + 4096], y[s : s + 4096], a, v) <= rho).any(axis=1)
    return hit


def _hit_hashed(x, y, a, v, rho, cell: int = 2) -> np.ndarray:
    """Same answer as the brute-force test, but each line is only compared with
    the edges of the cells it passes near."""
    hit = np.zeros(len(x), bool)
    if len(a) == 0:
        return hit
    key = np.floor_divide(x + cell, 2 * cell).astype(np.int64)  # cell j holds tails with |tail - 2 cell j| <= cell
    lo = key.min(axis=0)
    span = key.max(axis=0) - lo + 1
    flat = np.ravel_multi_index(tuple((key - lo).T), tuple(span))
    cells, inv = np.unique(flat, return_inverse=True)
    order = np.argsort(inv, kind="stable")
    starts = np.searchsorted(inv[order], np.arange(len(cells) + 1))
    centers = 2.0 * cell * (np.stack(np.unravel_index(cells, tuple(span)), axis=1) + lo)
    # every edge with its tail in a cell lies in the cell box enlarged by one
    reach = float(cell + 1)
    ci = np.repeat(np.arange(len(cells)), len(a))
    li = np.tile(np.arange(len(a)), len(cells))
    near = np.zeros(len(ci), bool)
    for s in range(0, len(ci), 1 << 20):
        sl = slice(s, s + (1 << 20))
        near[sl] = dist_box_lines(centers[ci[sl]], reach, a[li[sl]], v[li[sl]]) <= rho
    ci, li = ci[near], li[near]
    bounds = np.searchsorted(ci, np.arange(len(cells) + 1))
    for c in np.unique(ci):
        lines = li[bounds[c] : bounds[c + 1]]
        rows = order[starts[c] : starts[c + 1]]
        hit[rows] = (dist_segments_lines(x[rows], y[rows], a[lines], v[lines]) <= rho).any(axis=1)
    return hit


def build_vacant_graph(sample: ProcessSample, u: float, rho: float, R: int, method: str = "hash") -> Network:
    """Graph on Z^d within B_inf(0, R) whose edges miss every cylinder with level <= u."""
    view = sample.view(u, rho)
    d = sample.d
    view._check(BoxInf((0.0,) * d, float(R)), True)
    coords = _box_lattice(R, d)
    edges = _box_edges(R, d)
    a, v = view.active()
    x = coords[edges[:, 0]].astype(float)
    y = coords[edges[:, 1]].astype(float)
    if method == "hash":
        hit = _hit_hashed(x, y, a, v, rho)
    elif method == "brute":
        hit = _hit_brute(x, y, a, v, rho)
    else:
        raise ValueError(f"unknown build method {method!r}")
    return Network(coords, edges[~hit], R)


def full_lattice_graph(R: int, d: int) -> Network:
    return Network(_box_lattice(R, d), _box_edges(R, d), R)


def support_network(flow) -> Network:
    """Network made of the edges carrying a lattice flow."""
    verts = flow.vertices()
    net = Network(verts, np.zeros((0, 2), np.int64))
    i = net.indices(flow.tails)
    j = net.indices(flow.heads)
    net.edges = np.sort(np.stack([i, j], axis=1), axis=1)
    return net


# -------------------------------------------------------------- resistance


@dataclass
class ResistanceReport:
    source: tuple
    boundary_size: int
    resistance: float
    residual: float
    iterations: int
    tolerance: float

    def to_dict(self) -> dict:
        return asdict(self)


def _solve(net: Network, s: int, sinks: np.ndarray, tol: float, maxiter: int | None):
    """Potential with value 1 at s and 0 on the sinks, harmonic elsewhere in s's component."""
    comp = net.components()
    sinks = np.unique(sinks)
    live = comp == comp[s]
    if s in set(sinks.tolist()):
        raise ValueError("source is one of the sinks")
    if not live[sinks].any():
        raise NoConnection("boundary not reachable from the source")
    fixed = np.zeros(net.n, bool)
    fixed[s] = True
    fixed[sinks] = True
    free = np.flatnonzero(live & ~fixed)
    A = net.adjacency
    phi = np.zeros(net.n)
    phi[s] = 1.0
    it = [0]
    if len(free):
        deg = np.asarray(A.sum(axis=1)).ravel()
        Aff = A[free][:, free]
        M = (csr_matrix((deg[free], (np.arange(len(free)), np.arange(len(free)))), shape=Aff.shape) - Aff).tocsr()
        b = np.asarray(A[free][:, [s]].todense()).ravel()

        def count(_):
            it[0] += 1

        sol, info = cg(M, b, rtol=tol, atol=0.0, maxiter=maxiter, callback=count)
        resid = float(np.linalg.norm(M @ sol - b) / max(np.linalg.norm(b), 1e-300))
        if info != 0 or resid > 10 * tol:
            raise SolverFailure(f"CG stopped with info={info}, relative residual {resid:.3g}")
        phi[free] = sol
    else:
        resid = 0.0
    return phi, resid, it[0]


def effective_resistance(net: Network, source, sinks=None, tol: float = DEFAULT_TOL, maxiter: int | None = None):
    """R_eff between ``source`` (a point) and ``sinks`` (vertex indices; default: the box boundary)."""
    s = net.index(source)
    sinks = net.boundary() if sinks is None else np.asarray(sinks, np.int64)
    phi, resid, its = _solve(net, s, sinks, tol, maxiter)
    nb = net.adjacency.indices[net.adjacency.indptr[s] : net.adjacency.indptr[s + 1]]
    current = float(np.sum(1.0 - phi[nb]))
    if current <= 0:
        raise NoConnection("no current leaves the source")
    return ResistanceReport(tuple(int(t) for t in net.coords[s]), len(sinks), 1.0 / current, resid, its, tol)


def harmonic_flow(net: Network, source, sinks=None, tol: float = DEFAULT_TOL):
    """The unit current flow from ``source`` to the sinks, as a lattice flow."""
    from .carpet.flow import LatticeFlow

    s = net.index(source)
    sinks = net.boundary() if sinks is None else np.asarray(sinks, np.int64)
    phi, _, _ = _solve(net, s, sinks, tol, None)
    nb = net.adjacency.indices[net.adjacency.indptr[s] : net.adjacency.indptr[s + 1]]
    current = float(np.sum(1.0 - phi[nb]))
    i, j = net.edges[:, 0], net.edges[:, 1]
    x, y = net.coords[i], net.coords[j]
    val = (phi[i] - phi[j]) / current
    step = y - x
    axis = np.argmax(np.abs(step), axis=1)
    sign = step[np.arange(len(step)), axis]
    tails = np.where((sign > 0)[:, None], x, y)
    return LatticeFlow(tails, axis, sign * val, net.d)


@dataclass
class ThomsonResult:
    energy: float
    resistance: float
    slack: float
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def thomson_check(flow, net: Network, source, sinks, tol: float = 1e-6) -> ThomsonResult:
    """Compare a unit flow's energy with R_eff(source <-> sinks) on ``net``."""
    s = net.index(source)
    sinks = np.asarray(sinks, np.int64)
    edges = net.edge_set()
    for x, y in zip(flow.tails.tolist(), flow.heads.tolist()):
        if (tuple(x), tuple(y)) not in edges and (tuple(y), tuple(x)) not in edges:
            raise FlowNotFeasible(f"edge {x}-{y} is not in the graph")
    V, D = flow.divergence()
    sink_set = {tuple(p) for p in net.coords[sinks].tolist()}
    src = tuple(int(t) for t in net.coords[s])
    out_of_sink = 0.0
    for p, val in zip(V.tolist(), D.tolist()):
        p = tuple(p)
        if p == src:
            if abs(val - 1.0) > 1e-9:
                raise FlowNotFeasible(f"source divergence {val} differs from 1")
        elif p in sink_set:
            if val > 1e-12:
                raise FlowNotFeasible("positive divergence on a sink")
            out_of_sink += val
        elif abs(val) > 1e-9:
            raise FlowNotFeasible(f"non-zero divergence {val} at {p}")
    rep = effective_resistance(net, src, sinks)
    slack = flow.energy() - rep.resistance
    return ThomsonResult(flow.energy(), rep.resistance, slack, slack >= -tol)


# ------------------------------------------------------------------ walks


@dataclass
class EscapeEstimate:
    start: tuple
    R_out: int
    walks: int
    escapes: int
    estimate: float
    ci: tuple
    se: float
    max_steps_hit: int

    def to_dict(self) -> dict:
        return asdict(self)


def escape_probability(net: Network, start, R_out: int, walks: int, seed: int, max_steps: int = 10**7):
    """Fraction of simple random walks from ``start`` that reach sup norm ``R_out`` before coming back."""
    s = net.index(start)
    A = net.adjacency
    deg = np.diff(A.indptr)
    if deg[s] == 0:
        return EscapeEstimate(tuple(int(t) for t in start), R_out, walks, 0, 0.0, (0.0, 0.0), 0.0, 0)
    far = np.abs(net.coords).max(axis=1) >= R_out
    rng = stream(seed, "escape", R_out)
    pos = np.full(walks, s, np.int64)
    alive = np.ones(walks, bool)
    escaped = np.zeros(walks, bool)
    steps = 0
    while alive.any() and steps < max_steps:
        idx = np.flatnonzero(alive)
        p = pos[idx]
        r = rng.random(len(idx))
        nxt = A.indices[A.indptr[p] + (r * deg[p]).astype(np.int64)]
        pos[idx] = nxt
        esc = far[nxt]
        escaped[idx[esc]] = True
        alive[idx[esc | (nxt == s)]] = False
        steps += 1
    k = int(escaped.sum())
    est = k / walks
    return EscapeEstimate(
        tuple(int(t) for t in start),
        R_out,
        walks,
        k,
        est,
        wilson_interval(k, walks, 3.0),
        math.sqrt(est * (1 - est) / walks),
        int(alive.sum()),
    )


def escape_identity(net: Network, start, R_out: int) -> float:
    """1 / (deg(start) R_eff(start <-> sup-norm sphere of radius R_out))."""
    s = net.index(start)
    sinks = np.flatnonzero(np.abs(net.coords).max(axis=1) >= R_out)
    rep = effective_resistance(net, start, sinks)
    return 1.0 / (net.degree[s] * rep.resistance)


def reaches(net: Network, start, R_out: int) -> bool:
    """Whether the component of ``start`` contains a vertex of sup norm >= R_out."""
    try:
        s = net.index(start)
    except StartCovered:
        return False
    comp = net.components()
    return bool(np.any((comp == comp[s]) & (np.abs(net.coords).max(axis=1) >= R_out)))


def resistance_curve(net: Network, start, radii) -> list[dict]:
    """R_eff from ``start`` to the sphere of each radius, or inf when it is not reached."""
    out = []
    for R in radii:
        sinks = np.flatnonzero(np.abs(net.coords).max(axis=1) >= R)
        try:
            r = effective_resistance(net, start, sinks).resistance
        except (NoConnection, StartCovered):
            r = math.inf
        out.append({"R": int(R), "resistance": r})
    return out
