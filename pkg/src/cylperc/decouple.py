"""Two-box and three-box laboratory: geometry, direction resampling and
statistical checks of the sprinkled decoupling inequality.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, stats

from .geometry import (
    Ball,
    BoxInf,
    canonical_anchor,
    canonical_direction,
    dist_box_lines,
    dist_points_lines,
    hyperplane_points,
    rotation_to,
)
from .lineproc import BallWindow, LineBatch, c_mu, chi_cap_directions, sample_batch
from .rng import stream
from .stats import mean_and_se


# ----------------------------------------------------------------- geometry


@dataclass(frozen=True)
class TwoBoxGeometry:
    L: float
    alpha: float
    eps: float
    rho: float
    d: int = 3

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.eps < 1):
            raise ValueError("alpha and eps must lie in (0, 1)")
        if not 1 <= self.rho <= 4:
            raise ValueError("rho must lie in [1, 4]")
        if self.L < 1:
            raise ValueError("L must be at least 1")
        if self.d < 3:
            raise ValueError("dimension must be at least 3")

    @property
    def separation(self) -> float:
        return self.L ** (2 + self.alpha) / self.eps

    @property
    def shift(self) -> float:
        return 2 * self.L + self.separation

    def _e(self, t: float) -> tuple:
        return (0.0,) * (self.d - 1) + (float(t),)

    @property
    def B1(self) -> BoxInf:
        return BoxInf(self._e(0.0), float(self.L))

    @property
    def B2(self) -> BoxInf:
        return BoxInf(self._e(self.shift), float(self.L))

    @property
    def plane1(self) -> float:
        return float(self.L)

    @property
    def plane2(self) -> float:
        return float(self.L + self.separation)

    @property
    def s_half(self) -> float:
        """Half side of the squares S_i."""
        return 2.0 * self.L

    @property
    def s_prime_half(self) -> float:
        """Half side of the squares S_i'."""
        return 2.0 * self.L ** (1 + self.alpha)

    @property
    def cap_chord(self) -> float:
        """Chordal radius of the direction cap around e_d."""
        return self.eps / (8 * self.L)

    @property
    def cap_cos(self) -> float:
        return 1.0 - self.eps**2 / (128 * self.L**2)

    def enlarged(self, i: int) -> tuple[BoxInf, float]:
        """Box B_i together with the padding radius rho (1 + eps)."""
        return (self.B1 if i == 1 else self.B2), self.rho * (1 + self.eps)

    def padded_ball(self, i: int, pad: float) -> Ball:
        box = self.B1 if i == 1 else self.B2
        return Ball(box.center, box.bounding_radius() + pad)

    def in_cap(self, dirs) -> np.ndarray:
        w = np.atleast_2d(dirs)
        return np.abs(w[:, -1]) > self.cap_cos

    def in_square(self, p, half: float) -> np.ndarray:
        return np.all(np.abs(np.atleast_2d(p)[:, :-1]) <= half, axis=1)


def build_two_box(L, alpha, eps, rho, d=3) -> TwoBoxGeometry:
    return TwoBoxGeometry(float(L), float(alpha), float(eps), float(rho), int(d))


def cap_mass(eps: float, L: float, d: int = 3) -> float:
    """chi-mass of the cap {w : |w - e_d| < eps / (8L)}."""
    if not eps / (8 * L) < math.sqrt(2):
        raise ValueError("cap radius must be below sqrt(2)")
    c = 1.0 - eps**2 / (128 * L**2)
    # 1 - c^2 computed without cancellation
    t = eps**2 / (128 * L**2)
    return (t * (2 - t)) ** ((d - 1) / 2) if c > 0 else (1 - c * c) ** ((d - 1) / 2)


def cap_mass_quadrature(eps: float, L: float, d: int = 3) -> float:
    """Same mass by integrating the chi density over polar angle."""
    theta = math.acos(1.0 - eps**2 / (128 * L**2))
    f = lambda t: math.cos(t) * math.sin(t) ** (d - 2)
    num = integrate.quad(f, 0, theta, epsabs=1e-15, epsrel=1e-13)[0]
    den = integrate.quad(f, 0, math.pi / 2, epsabs=1e-15, epsrel=1e-13)[0]
    return num / den


# ------------------------------------------------------------- resampling


def gamma_resample(anchors, dirs, plane: int, geom: TwoBoxGeometry, rng):
    """Redraw cap directions of lines crossing S_i' while keeping their crossing point.

    Returns ``(anchors, dirs, resampled_mask)``.
    """
    a = np.atleast_2d(np.asarray(anchors, float)).reshape(-1, geom.d)
    v = np.atleast_2d(np.asarray(dirs, float)).reshape(-1, geom.d)
    if len(a) == 0:
        return a.copy(), v.copy(), np.zeros(0, bool)
    if np.any(np.abs(v[:, -1]) < 1e-12):
        raise ValueError("degenerate-direction: line parallel to the reference plane")
    if not np.all(geom.in_cap(v)):
        raise ValueError("input lines must have directions in the cap")
    h = geom.plane1 if plane == 1 else geom.plane2
    p = hyperplane_points(a, v, h)
    hit = geom.in_square(p, geom.s_prime_half)
    new_v = v.copy()
    new_a = a.copy()
    k = int(hit.sum())
    if k:
        w = canonical_direction(chi_cap_directions(rng, k, geom.d, geom.cap_cos))
        new_v[hit] = w
        new_a[hit] = canonical_anchor(p[hit], w)
    return new_a, new_v, hit


def crossing_points(anchors, dirs, plane: int, geom: TwoBoxGeometry) -> np.ndarray:
    return hyperplane_points(anchors, dirs, geom.plane1 if plane == 1 else geom.plane2)


def _eta_batch(geom: TwoBoxGeometry, u: float, n_rep: int, seed, *names) -> LineBatch:
    """Lines crossing S_1' with cap directions, for ``n_rep`` replicas."""
    half = geom.s_prime_half
    lam = u * c_mu(geom.d) * (2 * half) ** (geom.d - 1) * cap_mass(geom.eps, geom.L, geom.d)
    rng = stream(seed, *names)
    counts = rng.poisson(lam, size=n_rep) if u > 0 else np.zeros(n_rep, int)
    n = int(counts.sum())
    pts = np.hstack([rng.uniform(-half, half, size=(n, geom.d - 1)), np.full((n, 1), geom.plane1)])
    w = canonical_direction(chi_cap_directions(rng, n, geom.d, geom.cap_cos)) if n else np.zeros((0, geom.d))
    a = canonical_anchor(pts, w) if n else np.zeros((0, geom.d))
    return LineBatch(a, w, np.zeros(n), np.repeat(np.arange(n_rep), counts), n_rep)


def default_probes(geom: TwoBoxGeometry) -> list[BoxInf]:
    """Probe sets seen by the resampled lines: B_2, B_2 enlarged, and off-center boxes on Pi_2."""
    L, d = geom.L, geom.d
    foot = geom.separation * geom.cap_chord
    probes = [geom.B2, BoxInf(geom.B2.center, 2 * L)]
    for k in range(d - 1):
        c = np.array(geom.B2.center)
        c[k] += 0.5 * foot
        probes.append(BoxInf(tuple(c), max(L / 2, foot / 4)))
    return probes


@dataclass
class BalanceReport:
    replicas: int
    statistics: dict
    ks_pvalues: dict
    all_within_3sigma: bool
    all_ks_above_001: bool


def detailed_balance_test(geom: TwoBoxGeometry, u: float, replicas: int, seed: int, probes=None) -> BalanceReport:
    """Exchangeability of (eta, Gamma_1 eta) probed by antisymmetric statistics."""
    probes = default_probes(geom) if probes is None else probes
    eta = _eta_batch(geom, u, replicas, seed, "eta")
    a2, v2, _ = gamma_resample(eta.anchors, eta.dirs, 1, geom, stream(seed, "gamma"))
    out, ks = {}, {}
    ok = True
    for j, P in enumerate(probes):
        h1 = eta.counts(dist_box_lines(P.c, P.r, eta.anchors, eta.dirs) <= 0)
        h2 = eta.counts(dist_box_lines(P.c, P.r, a2, v2) <= 0) if len(a2) else np.zeros(replicas, int)
        m, se = mean_and_se(h1 - h2)
        within = abs(m) <= 3 * se or (m == 0 and se == 0)
        ok &= within
        out[f"probe{j}_hits_difference"] = {"mean": m, "se": se, "symmetric_mean": float((h1 + h2).mean() / 2), "within": within}
        ks[f"probe{j}"] = float(stats.ks_2samp(h1, h2, method="asymp").pvalue) if (h1.any() or h2.any()) else 1.0
    # direction statistic: mean vertical component per replica
    if len(eta.rep):
        s1 = np.bincount(eta.rep, weights=np.abs(eta.dirs[:, -1]) - geom.cap_cos, minlength=replicas)
        s2 = np.bincount(eta.rep, weights=np.abs(v2[:, -1]) - geom.cap_cos, minlength=replicas)
        m, se = mean_and_se((s1 - s2) / (1 - geom.cap_cos))
        within = abs(m) <= 3 * se or (m == 0 and se == 0)
    else:
        m, se, within = 0.0, 0.0, True
    ok &= within
    out["tilt_difference"] = {"mean": m, "se": se, "within": within}
    return BalanceReport(replicas, out, ks, bool(ok), all(p > 0.01 for p in ks.values()))


@dataclass
class WiggleReport:
    max_displacement: float
    bound: float
    samples: int
    exceptions: int

    @property
    def ok(self) -> bool:
        return self.exceptions == 0


def wiggle_check(L: float, eps: float, samples: int, seed: int, d: int = 3, min_L: float = 1.0) -> WiggleReport:
    """Largest gap between two cap lines through a common point of Pi_1, measured on {x_d = z0}, z0 in [-L, L]."""
    if L < min_L:
        raise ValueError(f"L = {L} is below the configured validity threshold {min_L}")
    rng = stream(seed, "wiggle")
    c = 1.0 - eps**2 / (128 * L**2)
    v1 = chi_cap_directions(rng, samples, d, c)
    v2 = chi_cap_directions(rng, samples, d, c)
    z0 = rng.uniform(-L, L, samples)
    t1 = (z0 - L) / v1[:, -1]
    t2 = (z0 - L) / v2[:, -1]
    disp = np.linalg.norm(t1[:, None] * v1 - t2[:, None] * v2, axis=1)
    bound = 0.75 * eps
    return WiggleReport(float(disp.max(initial=0.0)), bound, samples, int(np.sum(disp >= bound)))


def wiggle_displacement(L, z0, v1, v2) -> float:
    v1, v2 = np.asarray(v1, float), np.asarray(v2, float)
    return float(np.linalg.norm((z0 - L) / v1[-1] * v1 - (z0 - L) / v2[-1] * v2))


# ----------------------------------------------------------- observables


@dataclass(frozen=True)
class MonotoneObservable:
    """Indicator observable of a box configuration.

    ``kind`` is ``count_at_least`` (needs ``box``, ``threshold``),
    ``covered_fraction_at_least`` (needs ``points``, ``threshold``) or
    ``all_vacant`` (needs ``points``).
    """

    kind: str
    box: BoxInf | None = None
    points: np.ndarray | None = field(default=None, compare=False)
    threshold: float = 1

    @property
    def direction(self) -> str:
        return "decreasing" if self.kind == "all_vacant" else "increasing"

    def region(self) -> BoxInf:
        if self.box is not None:
            return self.box
        p = np.asarray(self.points, float)
        lo, hi = p.min(axis=0), p.max(axis=0)
        return BoxInf(tuple((lo + hi) / 2), tuple(np.maximum((hi - lo) / 2, 1e-9)))

    def line_scores(self, anchors, dirs) -> np.ndarray:
        """Per-line distance to the observable's set (points kinds: minimum over points)."""
        if len(anchors) == 0:
            return np.zeros(0)
        if self.kind == "count_at_least":
            return dist_box_lines(self.box.c, self.box.r, anchors, dirs)
        if self.kind == "all_vacant":
            out = np.empty(len(anchors))
            for s in range(0, len(anchors), 2048):
                out[s : s + 2048] = dist_points_lines(self.points, anchors[s : s + 2048], dirs[s : s + 2048]).min(axis=0)
            return out
        raise ValueError("covered_fraction_at_least has no scalar per-line score")

    def evaluate(self, batch: LineBatch, u: float, rho: float, scores=None) -> np.ndarray:
        live = batch.levels <= u
        if self.kind in ("count_at_least", "all_vacant"):
            sc = self.line_scores(batch.anchors, batch.dirs) if scores is None else scores
            counts = batch.counts(live & (sc <= rho))
            if self.kind == "count_at_least":
                return (counts >= self.threshold).astype(float)
            return (counts == 0).astype(float)
        if self.kind == "covered_fraction_at_least":
            pts = np.asarray(self.points, float)
            covered = np.zeros((batch.n_rep, len(pts)), bool)
            idx = np.flatnonzero(live)
            for s in range(0, len(idx), 2048):
                sel = idx[s : s + 2048]
                hit = dist_points_lines(pts, batch.anchors[sel], batch.dirs[sel]).T <= rho
                np.logical_or.at(covered, batch.rep[sel], hit)
            return (covered.mean(axis=1) >= self.threshold).astype(float)
        raise ValueError(f"unknown observable kind {self.kind}")


def count_at_least(threshold: int, box: BoxInf) -> MonotoneObservable:
    return MonotoneObservable("count_at_least", box=box, threshold=threshold)


def box_grid(box: BoxInf, n: int = 8) -> np.ndarray:
    axes = [np.linspace(c - r, c + r, n) for c, r in zip(box.c, box.r)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))


def all_vacant(points) -> MonotoneObservable:
    return MonotoneObservable("all_vacant", points=np.asarray(points, float))


def covered_fraction_at_least(points, threshold: float) -> MonotoneObservable:
    return MonotoneObservable("covered_fraction_at_least", points=np.asarray(points, float), threshold=threshold)


def default_observables(geom: TwoBoxGeometry, direction: str = "increasing"):
    if direction == "increasing":
        return count_at_least(1, geom.B1), count_at_least(1, geom.B2)
    return all_vacant(box_grid(geom.B1)), all_vacant(box_grid(geom.B2))


# ---------------------------------------------------------------- estimate


def union_batch(balls, u: float, n_rep: int, seed: int, *names) -> LineBatch:
    """Replicas of the process restricted to lines meeting any of ``balls``.

    Lines for ball j are drawn from its own window and kept only if they miss
    balls 0..j-1, which reproduces the union without double counting.
    """
    parts = []
    for j, B in enumerate(balls):
        b = sample_batch(BallWindow(B.center, B.radius), u, n_rep, seed, *names, "ball", j)
        keep = np.ones(len(b.levels), bool)
        for P in balls[:j]:
            keep &= dist_points_lines(P.c, b.anchors, b.dirs) > P.radius
        parts.append(b.select(keep))
    d = len(balls[0].center)
    return LineBatch(
        np.vstack([p.anchors for p in parts]).reshape(-1, d),
        np.vstack([p.dirs for p in parts]).reshape(-1, d),
        np.concatenate([p.levels for p in parts]),
        np.concatenate([p.rep for p in parts]),
        n_rep,
    )


def _verdict(value: float, bound: float, sigma: float) -> str:
    """'pass' if value <= bound clearly, 'fail' if value > bound clearly, else 'inconclusive'."""
    if value + 3 * sigma <= bound:
        return "pass"
    if value - 3 * sigma > bound:
        return "fail"
    return "inconclusive"


@dataclass
class DecoupleReport:
    lhs: float
    lhs_se: float
    rhs1: float
    rhs1_se: float
    rhs2: float
    rhs2_se: float
    fkg: float
    fkg_se: float
    error_term: float
    error_constant: float
    baseline: float
    replicas: int
    direction: str
    verdict_fkg: str
    verdict_decoupling: str
    verdict_decoupling_no_error: str
    coupling_violations: int
    parameters: dict

    @property
    def product(self) -> float:
        return self.rhs1 * self.rhs2

    @property
    def product_se(self) -> float:
        return math.hypot(self.rhs2 * self.rhs1_se, self.rhs1 * self.rhs2_se)

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_decoupling(
    geom: TwoBoxGeometry,
    u: float,
    delta: float,
    f1: MonotoneObservable,
    f2: MonotoneObservable,
    replicas: int,
    seed: int,
    error_constant: float = 1.0,
) -> DecoupleReport:
    if f1.direction != f2.direction:
        raise ValueError("observables must share a monotonicity direction")
    inc = f1.direction == "increasing"
    eps, rho = geom.eps, geom.rho
    if not inc and not (delta < u and eps < rho):
        raise ValueError("decreasing observables need delta < u and eps < rho")
    r1 = f1.region()
    r2 = f2.region()
    # coupled stream: the largest (u, rho) touched by either side of the coupling check
    u_top = u + delta if inc else u
    rho_top = rho + eps if inc else rho
    balls = [Ball(r.center, r.bounding_radius() + rho_top) for r in (r1, r2)]
    coupled = union_batch(balls, u_top, replicas, seed, "lhs") if u_top > 0 else _empty(replicas, geom.d)
    s1 = f1.line_scores(coupled.anchors, coupled.dirs) if f1.kind != "covered_fraction_at_least" else None
    s2 = f2.line_scores(coupled.anchors, coupled.dirs) if f2.kind != "covered_fraction_at_least" else None
    g1 = f1.evaluate(coupled, u, rho, s1)
    g2 = f2.evaluate(coupled, u, rho, s2)
    lhs, lhs_se = mean_and_se(g1 * g2)
    m1, e1 = mean_and_se(g1)
    m2, e2 = mean_and_se(g2)
    fkg, fkg_se = m1 * m2, math.hypot(m2 * e1, m1 * e2)

    if inc:
        h1 = f1.evaluate(coupled, u + delta, rho + eps, s1)
        h2 = f2.evaluate(coupled, u + delta, rho + eps, s2)
        violations = int(np.sum(g1 > h1) + np.sum(g2 > h2))
        u1, u2, rho_s = u, u + delta, rho + eps
    else:
        h1 = f1.evaluate(coupled, u - delta, rho - eps, s1)
        h2 = f2.evaluate(coupled, u - delta, rho - eps, s2)
        violations = int(np.sum(g1 > h1) + np.sum(g2 > h2))
        u1, u2, rho_s = u, u - delta, rho - eps

    def marginal(f, region, uu, name):
        if uu <= 0:
            return mean_and_se(f.evaluate(_empty(replicas, geom.d), 0.0, rho_s))
        ball = Ball(region.center, region.bounding_radius() + rho_s)
        b = sample_batch(BallWindow(ball.center, ball.radius), uu, replicas, seed, name)
        return mean_and_se(f.evaluate(b, uu, rho_s))

    rhs1, rhs1_se = marginal(f1, r1, u1, "rhs1")
    rhs2, rhs2_se = marginal(f2, r2, u2, "rhs2")
    err = math.exp(-error_constant * delta * eps ** (geom.d - 1) * geom.L ** (geom.alpha * (geom.d - 1)))
    r = max(r1.bounding_radius(), r2.bounding_radius())
    dist = float(np.linalg.norm(r1.c - r2.c))
    baseline = u * ((r + 1) ** 2 / dist) ** (geom.d - 1)

    prod = rhs1 * rhs2
    prod_se = math.hypot(rhs2 * rhs1_se, rhs1 * rhs2_se)
    sig = math.hypot(lhs_se, prod_se)
    return DecoupleReport(
        lhs=lhs,
        lhs_se=lhs_se,
        rhs1=rhs1,
        rhs1_se=rhs1_se,
        rhs2=rhs2,
        rhs2_se=rhs2_se,
        fkg=fkg,
        fkg_se=fkg_se,
        error_term=err,
        error_constant=error_constant,
        baseline=baseline,
        replicas=replicas,
        direction=f1.direction,
        verdict_fkg=_verdict(fkg, lhs, math.hypot(fkg_se, lhs_se)),
        verdict_decoupling=_verdict(lhs, prod + err, sig),
        verdict_decoupling_no_error=_verdict(lhs, prod, sig),
        coupling_violations=violations,
        parameters={"L": geom.L, "alpha": geom.alpha, "eps": eps, "rho": rho, "d": geom.d, "u": u, "delta": delta, "seed": seed},
    )


def _empty(n_rep: int, d: int) -> LineBatch:
    return LineBatch(np.zeros((0, d)), np.zeros((0, d)), np.zeros(0), np.zeros(0, np.int64), n_rep)


# ------------------------------------------------------------ landing probe


@dataclass
class LandingReport:
    samples: int
    grid: int
    footprint_radius: float
    distinct_cells: int
    sup_density: float
    scaled_sup_density: float
    fraction_in_s2_prime: float
    independence_pvalue: float


def landing_density_probe(geom: TwoBoxGeometry, samples: int, seed: int, grid: int = 32, start=None) -> LandingReport:
    """Landing points on Pi_2 of a line from S_1 after one direction resampling at Pi_1.

    Cells tile the bounding square of the landing footprint (radius
    separation * s_max around the start point), ``grid`` cells per side.
    """
    d = geom.d
    rng = stream(seed, "landing")
    p1 = np.zeros(d) if start is None else np.asarray(start, float)
    p1[-1] = geom.plane1
    w = chi_cap_directions(rng, samples, d, geom.cap_cos)
    H = geom.plane2 - geom.plane1
    p2 = p1 + (H / w[:, -1])[:, None] * w
    s_max = math.sqrt(1 - geom.cap_cos**2)
    foot = H * s_max / geom.cap_cos
    cell = 2 * foot / grid
    idx = np.floor((p2[:, :-1] - (p1[:-1] - foot)) / cell).astype(int)
    idx = np.clip(idx, 0, grid - 1)
    flat = np.ravel_multi_index(tuple(idx.T), (grid,) * (d - 1))
    counts = np.bincount(flat, minlength=grid ** (d - 1))
    sup = counts.max() / (samples * cell ** (d - 1))
    scaled = sup * geom.L ** ((1 + geom.alpha) * (d - 1))
    in_s2 = float(np.mean(geom.in_square(p2, geom.s_prime_half)))
    # second resampling at Pi_2: its direction must not depend on the landing cell
    w2 = chi_cap_directions(rng, samples, d, geom.cap_cos)
    quad = (p2[:, 0] > p1[0]).astype(int) * 2 + (p2[:, 1 % (d - 1)] > p1[1 % (d - 1)]).astype(int)
    tilt_bin = np.minimum((np.linalg.norm(w2[:, :-1], axis=1) / s_max * 4).astype(int), 3)
    table = np.zeros((4, 4))
    np.add.at(table, (quad, tilt_bin), 1)
    pval = float(stats.chi2_contingency(table[table.sum(1) > 0][:, table.sum(0) > 0])[1])
    return LandingReport(samples, grid, float(foot), int(np.count_nonzero(counts)), float(sup), float(scaled), in_s2, pval)


# ------------------------------------------------------------- three boxes


@dataclass
class ThreeBoxDiagnostics:
    distances: tuple
    distance_floor: float
    direction_gap: float
    gap_floor: float
    gap_ceiling: float

    @property
    def separation_margin(self) -> float:
        return min(self.distances) - self.distance_floor

    @property
    def unalignment_margin(self) -> float:
        return self.direction_gap - self.gap_floor

    @property
    def right_angle_margin(self) -> float:
        return self.gap_ceiling - self.direction_gap


def _unit(x):
    return x / np.linalg.norm(x)


def direction_gap(x1, x2, x3) -> float:
    x1, x2, x3 = (np.asarray(t, float) for t in (x1, x2, x3))
    return float(np.linalg.norm(_unit(x1 - x2) - _unit(x1 - x3)))


def three_box_predicates(x1, x2, x3, L, eps, alpha, rel_tol: float = 1e-12):
    x1, x2, x3 = (np.asarray(t, float) for t in (x1, x2, x3))
    if np.array_equal(x1, x2) or np.array_equal(x1, x3) or np.array_equal(x2, x3):
        raise ValueError("invalid-input: coincident points")
    d = len(x1)
    dists = (float(np.linalg.norm(x1 - x2)), float(np.linalg.norm(x1 - x3)), float(np.linalg.norm(x2 - x3)))
    floor = L ** (2 + alpha) / eps
    gap = direction_gap(x1, x2, x3)
    gfloor = 30 * math.sqrt(d) * eps / L
    diag = ThreeBoxDiagnostics(dists, floor, gap, gfloor, math.sqrt(2))
    ok = (
        min(dists) >= floor * (1 - rel_tol)
        and gap >= gfloor * (1 - rel_tol)
        and gap <= math.sqrt(2) * (1 + rel_tol)
    )
    return bool(ok), diag


@dataclass
class DisjointnessReport:
    samples: int
    violations: int
    min_margin: float


def unaligned_disjointness_check(x1, x2, x3, L, eps, alpha, samples: int, seed: int) -> DisjointnessReport:
    """Lines through S_13' and S_33' should never have a direction in the 1-2 cap.

    S_13' is the (d-1)-box of radius 6 sqrt(d) L^(1+alpha) centered on the face of
    the rotated box around x1 that faces x3; S_33' is the mirror one around x3.
    """
    x1, x2, x3 = (np.asarray(t, float) for t in (x1, x2, x3))
    d = len(x1)
    v12, v13 = _unit(x2 - x1), _unit(x3 - x1)
    R13 = rotation_to(v13)
    rng = stream(seed, "disjoint")
    half = 6 * math.sqrt(d) * L ** (1 + alpha)
    face = 2 * math.sqrt(d) * L

    def face_points(center):
        s = rng.uniform(-half, half, size=(samples, d - 1))
        return center + s @ R13[:, : d - 1].T

    y1 = face_points(x1 + face * v13)
    y3 = face_points(x3 - face * v13)
    u = y3 - y1
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u = np.where((u @ v12)[:, None] < 0, -u, u)
    radius = eps / (16 * math.sqrt(d) * L)
    gap = np.linalg.norm(u - v12, axis=1)
    return DisjointnessReport(samples, int(np.sum(gap < radius)), float((gap - radius).min()))

