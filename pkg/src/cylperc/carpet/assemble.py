"""Unit flow from the origin built scale by scale, with its energy ledger.

The flow is the sum of a flow inside the origin's 0-box and one flow per
scale k = 0..k_max. The scale-k flow is split into blocks, one per box of
the k-cone; each block is a combination of k-box flows weighted by the cone
flow. Every block lives on edges with an endpoint inside its own box, so
blocks never share an edge: energies add and divergences can be summed
block by block without ever holding the whole flow in memory.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..renorm import lattice_points
from .boxflow import flow_box
from .cone import ConeFlow, cone_flow
from .env import CarpetError, Environment
from .faces import Face, fractal
from .flow import LatticeFlow, coalesce_vertex_values
from .paths import grid_graph, lex_shortest_path


def event_report(env: Environment, k_max: int) -> dict:
    """Which parts of the good event hold: the origin box is vacant and every
    (k-1)-box of B_(0, k) is good for k = 1..k_max+1."""
    d = env.d
    zero = (0,) * d
    out = {"A0": not env.closed(lattice_points(zero, env.ladder.L0)).any()}
    for k in range(1, k_max + 2):
        out[f"A{k}"] = len(env.bad_sub(zero, k)) == 0
    out["holds"] = all(out.values())
    return out


def origin_flow(env: Environment) -> LatticeFlow:
    """Unit flow from the origin to the uniform measure on the e_1-fractal of its 0-box.

    Each fractal point receives its share along a canonical shortest path
    through the interior of the box.
    """
    d = env.d
    L0 = env.ladder.L0
    F = fractal(env, Face((L0,) + (0,) * (d - 1), 0, 0))
    side = 2 * L0 - 1
    g = np.indices((side,) * d).reshape(d, -1).T
    lo = -(L0 - 1)
    pts = g + lo
    vac = ~env.closed(pts)
    adj = grid_graph(vac.reshape((side,) * d))
    strides = np.array([side ** (d - 1 - i) for i in range(d)], np.int64)
    src = int((np.zeros(d, np.int64) - lo) @ strides)
    e1 = np.eye(d, dtype=np.int64)[0]
    paths = []
    for f in F:
        t = int(((f - e1) - lo) @ strides)
        p = lex_shortest_path(adj, g, src, t)
        if p is None:
            raise CarpetError("origin cannot reach its fractal")
        paths.append(np.vstack([pts[p], f[None]]))
    return LatticeFlow.from_paths(paths, [1.0 / len(F)] * len(F))


def scale_blocks(env: Environment, k: int, cone: ConeFlow | None = None):
    """Yield (box center, block flow) for the scale-k part of the assembled flow."""
    cone = cone_flow(env, k) if cone is None else cone
    for box, pairs in sorted(cone.box_pairs().items()):
        parts = [flow_box(env, box, k, v, w).scaled(val) for v, w, val in pairs]
        yield box, LatticeFlow.concat(parts, d=env.d)


@dataclass
class ScaleEntry:
    k: int
    L: int
    energy: float
    scaled_energy: float  # energy * L_k^(2J)
    blocks: int
    edges: int
    cone_boxes: int
    cone_energy: float
    decay_ok: bool


@dataclass
class AssemblyReport:
    k_max: int
    J: float
    event: dict
    origin_energy: float
    scales: list = field(default_factory=list)
    total_energy: float = 0.0
    divergence_error: float = float("nan")
    sink_size: int = 0
    support_vacant: bool | None = None
    scaled_ratio: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


def assemble_flow(env: Environment, k_max: int = 1, J: float = 0.5, keep: bool = False, csv_path=None):
    """Build the flow and its ledger. Returns (report, flow or None).

    ``keep`` materializes the whole flow (only sensible for small k_max);
    ``csv_path`` streams every block to one CSV file instead.
    """
    d = env.d
    event = event_report(env, k_max)
    if not event["holds"]:
        raise CarpetError(f"good event fails: {event}")
    theta0 = origin_flow(env)
    rep = AssemblyReport(k_max, J, event, theta0.energy())
    verts, vals = [*theta0.divergence()]
    verts, vals = [verts], [vals]
    kept = [theta0] if keep else None
    if csv_path is not None:
        theta0.write_csv(csv_path)
    vacant = True
    check_vacancy = hasattr(env, "sample")
    if check_vacancy:
        vacant &= not env.closed(theta0.vertices()).any()
    for k in range(k_max + 1):
        cone = cone_flow(env, k)
        energy, n_blocks, n_edges = 0.0, 0, 0
        for _, block in scale_blocks(env, k, cone):
            energy += block.energy()
            n_blocks += 1
            n_edges += len(block)
            v, s = block.divergence()
            verts.append(v)
            vals.append(s)
            if check_vacancy:
                vacant &= not env.closed(block.vertices()).any()
            if keep:
                kept.append(block)
            if csv_path is not None:
                block.write_csv(csv_path, append=True)
        L = env.ladder.L[k]
        decay = all(r["max_flow"] <= r["envelope"] + 1e-12 for r in cone.decay_profile())
        rep.scales.append(
            ScaleEntry(k, L, energy, energy * L ** (2 * J), n_blocks, n_edges, len(cone.boxes), cone.energy(), decay)
        )
    rep.total_energy = rep.origin_energy + sum(s.energy for s in rep.scales)
    V, S = coalesce_vertex_values(np.concatenate(verts), np.concatenate(vals))
    sink = fractal(env, Face((env.ladder.L[k_max + 1],) + (0,) * (d - 1), k_max + 1, 0))
    rep.sink_size = len(sink)
    expected = {tuple(f): -1.0 / len(sink) for f in sink.tolist()}
    expected[(0,) * d] = 1.0
    got = {tuple(v): s for v, s in zip(V.tolist(), S.tolist())}
    rep.divergence_error = max(abs(got.get(x, 0.0) - expected.get(x, 0.0)) for x in set(got) | set(expected))
    rep.support_vacant = vacant if check_vacancy else None
    se = [s.scaled_energy for s in rep.scales]
    rep.scaled_ratio = max(se) / min(se) if min(se) > 0 else float("inf")
    flow = LatticeFlow.concat(kept, d=d, coalesce=False) if keep else None
    return rep, flow
