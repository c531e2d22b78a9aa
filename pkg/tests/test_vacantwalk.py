import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cylperc.carpet import LatticeFlow
from cylperc.geometry import Line
from cylperc.lineproc import BallWindow, from_lines, sample_hitting_ball
from cylperc.renorm import desk_ladder
from cylperc.vacantwalk import (
    FlowNotFeasible,
    Network,
    NoConnection,
    build_vacant_graph,
    effective_resistance,
    escape_identity,
    escape_probability,
    full_lattice_graph,
    harmonic_flow,
    reaches,
    resistance_curve,
    support_network,
    thomson_check,
)

U_TILDE = desk_ladder().u_tilde


def _dense_resistance(n, edges, s, sinks):
    """Oracle: Dirichlet problem solved with a dense linear solve."""
    Lap = np.zeros((n, n))
    for i, j in edges:
        Lap[i, i] += 1
        Lap[j, j] += 1
        Lap[i, j] -= 1
        Lap[j, i] -= 1
    fixed = {s, *sinks}
    free = [i for i in range(n) if i not in fixed]
    phi = np.zeros(n)
    phi[s] = 1.0
    if free:
        A = Lap[np.ix_(free, free)]
        b = -Lap[np.ix_(free, [s])].ravel()
        # vertices cut off from both terminals make A singular; lstsq gives them zero current anyway
        phi[free] = np.linalg.lstsq(A, b, rcond=None)[0]
    current = Lap[s] @ phi
    return 1.0 / current


# ----------------------------------------------------------- graph building


@pytest.mark.parametrize("R,d", [(1, 2), (3, 2), (2, 3), (4, 3)])
def test_empty_configuration_has_every_lattice_edge(R, d):
    smp = sample_hitting_ball(0.0, np.zeros(d), R * math.sqrt(d) + 2, 1)
    g = build_vacant_graph(smp, 0.0, 1.0, R)
    assert g.n == (2 * R + 1) ** d
    assert len(g.edges) == d * (2 * R + 1) ** (d - 1) * 2 * R


def test_vertical_cylinder_removes_the_edges_it_touches():
    R = 4
    win = BallWindow((0.0, 0.0, 0.0), R * math.sqrt(3) + 3)
    smp = from_lines([Line.through((0.3, 0.2, 0.0), (0, 0, 1))], win)
    rho = 1.0
    g = build_vacant_graph(smp, 1.0, rho, R)
    # oracle: a segment misses the vertical line iff its planar projection stays farther than rho
    full = full_lattice_graph(R, 3)
    kept = set()
    for i, j in full.edges.tolist():
        x, y = full.coords[i].astype(float), full.coords[j].astype(float)
        t = np.linspace(0, 1, 2001)[:, None]
        seg = x + t * (y - x)
        if np.min(np.hypot(seg[:, 0] - 0.3, seg[:, 1] - 0.2)) > rho:
            kept.add((tuple(full.coords[i]), tuple(full.coords[j])))
    assert g.edge_set() == kept


@pytest.mark.parametrize("seed", range(6))
def test_hashed_build_matches_brute_force(seed):
    R = 10
    smp = sample_hitting_ball(4 * U_TILDE * 20, np.zeros(3), R * math.sqrt(3) + 2, seed)
    a = build_vacant_graph(smp, smp.u_max, 1.0, R, method="hash")
    b = build_vacant_graph(smp, smp.u_max, 1.0, R, method="brute")
    assert np.array_equal(a.edges, b.edges)


def test_window_too_small_is_refused():
    from cylperc.lineproc import WindowError

    smp = sample_hitting_ball(0.1, np.zeros(3), 5.0, 0)
    with pytest.raises(WindowError):
        build_vacant_graph(smp, 0.1, 1.0, 8)


def test_more_cylinders_never_add_edges():
    R = 8
    smp = sample_hitting_ball(0.2, np.zeros(3), R * math.sqrt(3) + 3, 7)
    small = build_vacant_graph(smp, 0.05, 1.0, R).edge_set()
    big_u = build_vacant_graph(smp, 0.2, 1.0, R).edge_set()
    big_rho = build_vacant_graph(smp, 0.05, 1.5, R).edge_set()
    assert big_u <= small
    assert big_rho <= small


# --------------------------------------------------------------- resistance


def test_single_edge_has_unit_resistance():
    net = Network(np.array([[0, 0], [1, 0]]), np.array([[0, 1]]))
    assert effective_resistance(net, (0, 0), [1]).resistance == pytest.approx(1.0, abs=1e-12)


def test_two_parallel_paths_of_length_two():
    # 0 -> 1 -> 3 and 0 -> 2 -> 3: two resistances of 2 in parallel
    coords = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
    net = Network(coords, np.array([[0, 1], [0, 2], [1, 3], [2, 3]]))
    assert effective_resistance(net, (0, 0), [3]).resistance == pytest.approx(1.0, abs=1e-10)


def test_series_chain():
    n = 7
    coords = np.stack([np.arange(n), np.zeros(n, int)], axis=1)
    net = Network(coords, np.stack([np.arange(n - 1), np.arange(1, n)], axis=1))
    assert effective_resistance(net, (0, 0), [n - 1]).resistance == pytest.approx(n - 1, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.3, 0.9))
def test_cg_matches_dense_solve_on_random_subgraphs(seed, keep):
    rng = np.random.default_rng(seed)
    full = full_lattice_graph(2, 2)
    mask = rng.random(len(full.edges)) < keep
    net = Network(full.coords, full.edges[mask], 2)
    s = net.index((0, 0))
    sinks = net.boundary()
    try:
        r = effective_resistance(net, (0, 0)).resistance
    except NoConnection:
        comp = net.components()
        assert not np.any(comp[sinks] == comp[s])
        return
    assert r == pytest.approx(_dense_resistance(net.n, net.edges.tolist(), s, sinks.tolist()), rel=1e-8)


def test_isolated_start():
    net = Network(np.array([[0, 0], [5, 0], [6, 0]]), np.array([[1, 2]]), 6)
    with pytest.raises(NoConnection):
        effective_resistance(net, (0, 0), [2])
    est = escape_probability(net, (0, 0), 6, 100, 1)
    assert est.estimate == 0.0 and est.escapes == 0
    assert resistance_curve(net, (0, 0), [6])[0]["resistance"] == math.inf
    assert not reaches(net, (0, 0), 6)


def test_lattice_resistance_increases_with_radius_and_stays_bounded():
    net = full_lattice_graph(8, 3)
    curve = resistance_curve(net, (0, 0, 0), [1, 2, 4, 8])
    r = [c["resistance"] for c in curve]
    assert r[0] == pytest.approx(1 / 6)
    assert all(a < b for a, b in zip(r, r[1:]))
    assert r[-1] < 0.2527  # below the infinite-volume value G(0)/1 ~ 0.2527


def test_removing_edges_cannot_lower_resistance():
    rng = np.random.default_rng(3)
    full = full_lattice_graph(3, 3)
    base = effective_resistance(full, (0, 0, 0)).resistance
    for _ in range(5):
        mask = rng.random(len(full.edges)) < 0.85
        net = Network(full.coords, full.edges[mask], 3)
        try:
            r = effective_resistance(net, (0, 0, 0)).resistance
        except NoConnection:
            continue
        assert r >= base - 1e-10


# ------------------------------------------------------------------- walks


def test_escape_matches_electrical_identity_small_box():
    net = full_lattice_graph(4, 3)
    est = escape_probability(net, (0, 0, 0), 4, 20_000, 11)
    target = escape_identity(net, (0, 0, 0), 4)
    assert abs(est.estimate - target) <= 3 * est.se
    assert est.ci[0] <= target <= est.ci[1]
    assert est.max_steps_hit == 0


def test_escape_decreases_with_intensity_on_coupled_samples():
    R = 6
    smp = sample_hitting_ball(0.12, np.zeros(3), R * math.sqrt(3) + 2, 21)
    est = []
    for u in (0.0, 0.04, 0.12):
        g = build_vacant_graph(smp, u, 1.0, R)
        est.append(escape_probability(g, (0, 0, 0), R, 4000, 8))
    for a, b in zip(est, est[1:]):
        assert b.estimate <= a.estimate + 3 * math.hypot(a.se, b.se)
    assert est[-1].estimate < est[0].estimate


def test_escape_is_reproducible():
    net = full_lattice_graph(3, 2)
    a = escape_probability(net, (0, 0), 3, 500, 5)
    b = escape_probability(net, (0, 0), 3, 500, 5)
    assert a == b


def test_escape_identity_on_a_line_graph():
    # walk on {0,..,4} from 0 reaching 4 before returning: 1/(deg * R) = 1/(1*4)
    coords = np.stack([np.arange(5), np.zeros(5, int)], axis=1)
    net = Network(coords, np.stack([np.arange(4), np.arange(1, 5)], axis=1))
    assert escape_identity(net, (0, 0), 4) == pytest.approx(0.25)
    est = escape_probability(net, (0, 0), 4, 40_000, 2)
    assert abs(est.estimate - 0.25) <= 3 * est.se


# ----------------------------------------------------------------- Thomson


def test_harmonic_flow_attains_the_resistance():
    net = full_lattice_graph(4, 2)
    sinks = net.boundary()
    flow = harmonic_flow(net, (0, 0), sinks)
    res = thomson_check(flow, net, (0, 0), sinks)
    assert abs(res.slack) < 1e-6 and res.holds


def test_single_path_flow_has_positive_slack():
    net = full_lattice_graph(3, 2)
    path = np.array([[0, 0], [1, 0], [2, 0], [3, 0]])
    flow = LatticeFlow.from_path(path)
    res = thomson_check(flow, net, (0, 0), net.boundary())
    assert res.energy == pytest.approx(3.0)
    assert res.slack > 0.5 and res.holds


def test_flow_leaving_the_graph_is_rejected():
    full = full_lattice_graph(2, 2)
    keep = ~np.all(full.coords[full.edges[:, 0]] == [0, 0], axis=1)
    net = Network(full.coords, full.edges[keep], 2)
    flow = LatticeFlow.from_path(np.array([[0, 0], [1, 0], [2, 0]]))
    with pytest.raises(FlowNotFeasible):
        thomson_check(flow, net, (0, 0), net.boundary())


def test_flow_with_wrong_divergence_is_rejected():
    net = full_lattice_graph(2, 2)
    flow = LatticeFlow.from_path(np.array([[0, 0], [1, 0]]))
    with pytest.raises(FlowNotFeasible):
        thomson_check(flow, net, (0, 0), net.boundary())


def test_support_network_of_a_cycle():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]])
    net = support_network(LatticeFlow.from_path(sq))
    assert net.n == 4 and len(net.edges) == 4
    assert sorted(net.degree.tolist()) == [2, 2, 2, 2]


def test_subcritical_intensity_keeps_the_origin_connected_in_small_box():
    R = 6
    hits = 0
    for seed in range(5):
        smp = sample_hitting_ball(U_TILDE / 4, np.zeros(3), R * math.sqrt(3) + 2, seed)
        g = build_vacant_graph(smp, U_TILDE / 4, 1.0, R)
        hits += reaches(g, (0, 0, 0), R)
    assert hits == 5


def test_all_pairs_neighbours_are_unit_steps():
    g = full_lattice_graph(2, 3)
    steps = g.coords[g.edges[:, 1]] - g.coords[g.edges[:, 0]]
    assert np.all(np.abs(steps).sum(axis=1) == 1)
    assert len({tuple(e) for e in g.edges.tolist()}) == len(g.edges)
    for i, j in itertools.islice(g.edges.tolist(), 20):
        assert i < j
