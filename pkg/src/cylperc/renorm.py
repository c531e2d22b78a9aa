"""Multi-scale renormalization: scale ladders, good/bad boxes, defects and holes.

Box centers and scales are exact integers throughout. Floats enter only in
the direction predicate of the k-scale badness test and in distances to
lines.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from decimal import ROUND_CEILING, Decimal, localcontext

import numpy as np
from scipy import stats as sps

from .geometry import BoxInf, Line, dist_box_lines, unit_ball_volume
from .lineproc import BallWindow, CylinderView, ProcessSample, c_mu, sample_batch
from .stats import wilson_interval

PRECISION = 80
MAX_DIGITS = 60  # ceilings beyond this many digits are not trusted at PRECISION
HOLE_LIMIT = 20_000_000  # lattice points materialized by hole() before refusing


class LadderOverflow(ArithmeticError):
    pass


class ParameterError(ValueError):
    pass


class PreconditionWarning(UserWarning):
    """A "sufficiently large L_0" requirement is not met by the chosen parameters."""


def ceil_power(n: int, x: float) -> int:
    """Exact ceiling of n**x, with x read as its shortest decimal repr."""
    with localcontext() as ctx:
        ctx.prec = PRECISION
        val = Decimal(int(n)) ** Decimal(repr(float(x)))
        if val.adjusted() > MAX_DIGITS:
            raise LadderOverflow(f"{n}**{x} has {val.adjusted() + 1} digits")
        return int(val.to_integral_value(rounding=ROUND_CEILING))


@dataclass(frozen=True)
class ScaleLadder:
    d: int
    L0: int
    gamma: float
    alpha: float
    beta: float
    L: tuple[int, ...]
    rule: str = "recursive"

    @property
    def k_max(self) -> int:
        return len(self.L) - 1

    @property
    def u_tilde(self) -> float:
        return float(self.L0) ** (-(self.d - 1 - self.gamma / 2))

    def u(self, k: int) -> float:
        return self.u_tilde * (1 - 1 / (k + 2))

    def rho(self, k: int) -> float:
        return 2 * (1 - 1 / (k + 2))

    def separation(self, k: int) -> float:
        """Pairwise distance floor k^2 L_{k-1}^{2+alpha} for k-scale badness."""
        return k * k * float(self.L[k - 1]) ** (2 + self.alpha)

    def gap_floor(self, k: int) -> float:
        return 30 * math.sqrt(self.d) / (k * k * self.L[k - 1])

    def defect_radius(self, k: int) -> float:
        return 2 * self.separation(k)

    def invariant_failures(self) -> list[str]:
        bad = []
        for k, Lk in enumerate(self.L):
            if Lk % 17:
                bad.append(f"17 does not divide L_{k}")
            if k:
                if Lk % self.L[k - 1]:
                    bad.append(f"L_{k - 1} does not divide L_{k}")
                if Lk % (2 * self.L[k - 1]) == 0:
                    bad.append(f"2 L_{k - 1} divides L_{k}")
        return bad

    def precondition_warnings(self) -> list[str]:
        out = []
        if self.gamma >= 0.2:
            out.append("gamma = 1/5 is the closed endpoint of the admissible open interval")
        for k in range(1, len(self.L)):
            if self.gap_floor(k) > math.sqrt(2):
                out.append(f"scale {k}: direction floor {self.gap_floor(k):.3g} exceeds sqrt(2); no {k}-box can be bad")
            if self.separation(k) > 2 * math.sqrt(self.d) * self.L[k]:
                out.append(f"scale {k}: separation floor exceeds the box diameter; no {k}-box can be bad")
        return out

    def table(self) -> list[dict]:
        return [{"k": k, "L": Lk, "u": self.u(k), "rho": self.rho(k)} for k, Lk in enumerate(self.L)]

    def box_id(self, x, k: int) -> "BoxId":
        x = tuple(int(c) for c in x)
        if len(x) != self.d:
            raise ParameterError(f"box center has dimension {len(x)}, expected {self.d}")
        if any(c % (2 * self.L[k]) for c in x):
            raise ParameterError(f"{x} is not in 2 L_{k} Z^d")
        return BoxId(x, k)

    def box(self, m: "BoxId") -> BoxInf:
        return BoxInf(tuple(float(c) for c in m.x), float(self.L[m.k]))


def _check_params(L0, gamma, alpha, beta, d):
    if d < 3:
        raise ParameterError("dimension must be at least 3")
    if L0 <= 0 or L0 % 17:
        raise ParameterError("L0 must be a positive multiple of 17")
    if not 0 < gamma <= 0.2:
        raise ParameterError("gamma must lie in (0, 1/5]")
    if not 1 - gamma / (2 * (d - 1)) < alpha < 1:
        raise ParameterError("alpha must lie in (1 - gamma/(2(d-1)), 1)")
    if not 0 < beta < 1 - alpha:
        raise ParameterError("beta must lie in (0, 1 - alpha)")


def _warn(lad: ScaleLadder) -> ScaleLadder:
    for msg in lad.precondition_warnings():
        warnings.warn(msg, PreconditionWarning, stacklevel=3)
    return lad


def ladder(L0: int, gamma: float, alpha: float, beta: float, d: int = 3, k_max: int = 2) -> ScaleLadder:
    """L_k = 17 (k^2 * 2 L_{k-1}^2 * ceil(L_{k-1}^{alpha+beta}) + L_{k-1})."""
    _check_params(L0, gamma, alpha, beta, d)
    L = [int(L0)]
    for k in range(1, k_max + 1):
        p = L[-1]
        L.append(17 * (k * k * 2 * p * p * ceil_power(p, alpha + beta) + p))
    return _warn(ScaleLadder(d, int(L0), gamma, alpha, beta, tuple(L)))


def compact_ladder(L0: int, ratios, gamma: float, alpha: float, beta: float, d: int = 3) -> ScaleLadder:
    """L_k = 17 q_k L_{k-1} with odd q_k.

    Keeps the divisibility structure of the recursive ladder (17 | L_k,
    L_{k-1} | L_k, 2 L_{k-1} does not divide L_k) at sizes where explicit
    flows are computable.
    """
    _check_params(L0, gamma, alpha, beta, d)
    L = [int(L0)]
    for q in ratios:
        if int(q) != q or q < 1 or q % 2 == 0:
            raise ParameterError("compact ratios must be odd positive integers")
        L.append(17 * int(q) * L[-1])
    return _warn(ScaleLadder(d, int(L0), gamma, alpha, beta, tuple(L), rule="compact"))


DESK = dict(L0=17, gamma=0.2, alpha=0.96, beta=0.02, d=3, k_max=2)
COMPACT_RATIOS = (3, 1)


def desk_ladder() -> ScaleLadder:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PreconditionWarning)
        return ladder(**DESK)


def desk_compact_ladder() -> ScaleLadder:
    p = {k: v for k, v in DESK.items() if k != "k_max"}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PreconditionWarning)
        return compact_ladder(ratios=COMPACT_RATIOS, **p)


@dataclass(frozen=True, order=True)
class BoxId:
    x: tuple[int, ...]
    k: int


def sub_box_centers(lad: ScaleLadder, m: BoxId) -> np.ndarray:
    """Centers of the (k-1)-boxes contained in B_m, lexicographically ordered."""
    if m.k < 1:
        raise ParameterError("scale-0 boxes have no sub-boxes")
    Ls, Lk = lad.L[m.k - 1], lad.L[m.k]
    axes = []
    for c in m.x:
        lo = -((-(c - (Lk - Ls))) // (2 * Ls))
        hi = (c + (Lk - Ls)) // (2 * Ls)
        axes.append(np.arange(lo, hi + 1, dtype=np.int64) * 2 * Ls)
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def inside(lad: ScaleLadder, m: BoxId, centers) -> np.ndarray:
    """Mask of (k-1)-box centers whose boxes lie in B_m (exact integers)."""
    c = np.asarray(centers, dtype=np.int64).reshape(-1, lad.d)
    Ls, Lk = lad.L[m.k - 1], lad.L[m.k]
    on_grid = np.all(c % (2 * Ls) == 0, axis=1)
    return on_grid & np.all(np.abs(c - np.asarray(m.x, dtype=np.int64)) <= Lk - Ls, axis=1)


# ---------------------------------------------------------------- scale 0


def classify0(sample: ProcessSample, u: float, rho: float, m: BoxId, lad: ScaleLadder) -> bool:
    """True iff more than L_0^gamma cylinders meet the 0-box."""
    if m.k != 0:
        raise ParameterError("classify0 takes a scale-0 box")
    return sample.view(u, rho).count_hitting(lad.box(m)) > float(lad.L0) ** lad.gamma


def boxes_hit_by_lines(anchors, dirs, L: int, pad: float, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    """All pairs (line, grid index j) with dist(B_inf(2 L j, L), line) <= pad.

    Only indices with lo <= j <= hi (componentwise) are reported. Each line is
    walked at half-box steps; every box within reach of a step point is a
    candidate, and candidates are confirmed with the exact box distance.
    """
    a = np.atleast_2d(np.asarray(anchors, float))
    v = np.atleast_2d(np.asarray(dirs, float))
    lo = np.asarray(lo, np.int64)
    hi = np.asarray(hi, np.int64)
    d = lo.size
    if len(a) == 0:
        return np.zeros(0, np.int64), np.zeros((0, d), np.int64)
    e_lo = 2.0 * L * lo - L - pad
    e_hi = 2.0 * L * hi + L + pad
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (e_lo - a) / v
        t2 = (e_hi - a) / v
    still = np.abs(v) < 1e-15
    inside_slab = (a >= e_lo) & (a <= e_hi)
    t_in = np.where(still, np.where(inside_slab, -np.inf, np.inf), np.minimum(t1, t2)).max(axis=1)
    t_out = np.where(still, np.where(inside_slab, np.inf, -np.inf), np.maximum(t1, t2)).min(axis=1)
    keep = np.flatnonzero(t_in <= t_out)
    step = L / 2.0
    reach = L + pad + step / 2
    span = hi - lo + 1
    bits = np.array(list(itertools.product((0, 1), repeat=d)), np.int64)
    out_line, out_idx = [], []
    for s in range(0, len(keep), 256):
        rows = keep[s : s + 256]
        n_s = np.floor((t_out[rows] - t_in[rows]) / step).astype(np.int64) + 2
        which = np.repeat(rows, n_s)
        offs = np.arange(n_s.sum()) - np.repeat(np.cumsum(n_s) - n_s, n_s)
        t = np.minimum(t_in[which] + offs * step, t_out[which])
        p = a[which] + t[:, None] * v[which]
        jlo = np.ceil((p - reach) / (2 * L)).astype(np.int64)
        jhi = np.floor((p + reach) / (2 * L)).astype(np.int64)
        cand = jlo[:, None, :] + bits[None]
        ok = np.all((cand <= jhi[:, None, :]) & (cand >= lo) & (cand <= hi), axis=2)
        line = np.broadcast_to(which[:, None], ok.shape)[ok]
        cand = cand[ok]
        key = np.ravel_multi_index(tuple((cand - lo).T), tuple(span)) if len(cand) else np.zeros(0, np.int64)
        pair = np.unique(np.stack([line, key], axis=1), axis=0)
        if len(pair) == 0:
            continue
        idx = np.stack(np.unravel_index(pair[:, 1], tuple(span)), axis=1) + lo
        dist = dist_box_lines(2.0 * L * idx, float(L), a[pair[:, 0]], v[pair[:, 0]])
        hit = dist <= pad
        out_line.append(pair[hit, 0])
        out_idx.append(idx[hit])
    if not out_line:
        return np.zeros(0, np.int64), np.zeros((0, d), np.int64)
    return np.concatenate(out_line), np.concatenate(out_idx)


def zero_box_counts(sample: ProcessSample, u: float, rho: float, lad: ScaleLadder, m: BoxId):
    """Cylinder counts of every 0-box inside the 1-box m that some cylinder meets.

    Returns (centers, counts) for boxes with positive count, lexicographic.
    """
    if m.k != 1:
        raise ParameterError("zero_box_counts takes a scale-1 box")
    view = sample.view(u, rho)
    view._check(lad.box(m), True)
    a, v = view.active()
    L0 = lad.L0
    half = (lad.L[1] - L0) // (2 * L0)
    base = np.asarray(m.x, np.int64) // (2 * L0)
    line, idx = boxes_hit_by_lines(a, v, L0, rho, base - half, base + half)
    if len(idx) == 0:
        return np.zeros((0, lad.d), np.int64), np.zeros(0, np.int64)
    uniq, counts = np.unique(idx, axis=0, return_counts=True)
    return uniq * 2 * L0, counts


def bad_zero_boxes(sample: ProcessSample, u: float, rho: float, lad: ScaleLadder, m: BoxId) -> np.ndarray:
    centers, counts = zero_box_counts(sample, u, rho, lad, m)
    return centers[counts > float(lad.L0) ** lad.gamma]


# ---------------------------------------------------------------- scale k


@dataclass(frozen=True)
class Verdict:
    bad: bool
    witness: tuple | None = None  # (apex, other, other) centers when bad


def _unit(x):
    return x / np.linalg.norm(x)


def triple_ok(x1, x2, x3, sep: float, gap: float) -> bool:
    """Separation and direction conditions with x1 as the apex."""
    x1, x2, x3 = (np.asarray(x, float) for x in (x1, x2, x3))
    if min(np.linalg.norm(x1 - x2), np.linalg.norm(x1 - x3), np.linalg.norm(x2 - x3)) < sep:
        return False
    g = np.linalg.norm(_unit(x1 - x2) - _unit(x1 - x3))
    return gap <= g <= math.sqrt(2) + 1e-12


def _sorted_inside(lad, m, bad):
    c = np.asarray(bad, dtype=np.int64).reshape(-1, lad.d)
    c = c[inside(lad, m, c)]
    if len(c) == 0:
        return c
    c = np.unique(c, axis=0)  # lexicographic
    return c


def classify_k(bad_sub, lad: ScaleLadder, m: BoxId) -> Verdict:
    """k-scale badness from the list of bad (k-1)-box centers.

    Searches triples of bad sub-boxes in lexicographic order and returns the
    first one that satisfies the separation and direction conditions under
    some choice of apex.
    """
    if m.k < 1:
        raise ParameterError("classify_k takes a box of scale at least 1")
    c = _sorted_inside(lad, m, bad_sub)
    n = len(c)
    if n < 3:
        return Verdict(False)
    sep, gap = lad.separation(m.k), lad.gap_floor(m.k)
    if gap > math.sqrt(2) + 1e-12:
        return Verdict(False)
    cf = c.astype(float)
    far = np.linalg.norm(cf[:, None] - cf[None], axis=2) >= sep
    for i in range(n):
        for j in np.flatnonzero(far[i, i + 1 :]) + i + 1:
            for l in np.flatnonzero(far[i, j + 1 :] & far[j, j + 1 :]) + j + 1:
                for apex, p, q in ((i, j, l), (j, i, l), (l, i, j)):
                    if triple_ok(cf[apex], cf[p], cf[q], sep, gap):
                        return Verdict(True, tuple(tuple(int(t) for t in c[s]) for s in (apex, p, q)))
    return Verdict(False)


@dataclass(frozen=True)
class Defect:
    """The (k-1)-boxes of B_m within ``radius`` of ``line``.

    ``empty`` marks the defect of a box without bad sub-boxes: no sub-box
    needs to be avoided, so it has no members.
    """

    owner: BoxId
    line: Line
    radius: float
    L_sub: int
    L_owner: int
    empty: bool = False

    def contains(self, centers) -> np.ndarray:
        c = np.asarray(centers, dtype=np.int64).reshape(-1, len(self.owner.x))
        if self.empty or len(c) == 0:
            return np.zeros(len(c), bool)
        ins = np.all(c % (2 * self.L_sub) == 0, axis=1)
        ins &= np.all(np.abs(c - np.asarray(self.owner.x, np.int64)) <= self.L_owner - self.L_sub, axis=1)
        out = np.zeros(len(c), bool)
        if ins.any():
            dist = dist_box_lines(c[ins].astype(float), float(self.L_sub), self.line.a[None], self.line.v[None])
            out[ins] = dist <= self.radius
        return out

    def members(self, lad: ScaleLadder) -> np.ndarray:
        c = sub_box_centers(lad, self.owner)
        return c[self.contains(c)]

    def hole_mask(self, points) -> np.ndarray:
        """Lattice points lying in some member box."""
        p = np.asarray(points, dtype=np.int64).reshape(-1, len(self.owner.x))
        out = np.zeros(len(p), bool)
        if self.empty or len(p) == 0:
            return out
        step = 2 * self.L_sub
        lo = -((-(p - self.L_sub)) // step)  # smallest center index with center >= p - L
        hi = (p + self.L_sub) // step
        d = p.shape[1]
        for bits in itertools.product((0, 1), repeat=d):
            j = lo + np.asarray(bits)
            ok = np.all(j <= hi, axis=1)
            if ok.any():
                hit = self.contains(j[ok] * step)
                out[np.flatnonzero(ok)[hit]] = True
        return out


@dataclass(frozen=True)
class Covering:
    line: Line | None
    case: str  # "no-bad", "near-first", "through-two"
    defect: Defect | None

    @property
    def success(self) -> bool:
        return self.line is not None


def find_covering_line(bad_sub, lad: ScaleLadder, m: BoxId) -> Covering:
    """A line whose defect contains every bad sub-box of m, if the constructive choice works.

    The input order does not matter: bad centers are sorted first.
    """
    k = m.k
    c = _sorted_inside(lad, m, bad_sub)
    d = lad.d
    e_d = np.eye(d)[-1]
    R = lad.defect_radius(k)

    def defect(line, empty=False):
        return Defect(m, line, R, lad.L[k - 1], lad.L[k], empty)

    if len(c) == 0:
        line = Line.through(np.asarray(m.x, float), e_d)
        return Covering(line, "no-bad", defect(line, empty=True))
    x1 = c[0]
    far_corner = np.linalg.norm(np.abs(c - x1).astype(float) + lad.L[k - 1], axis=1)
    outside = far_corner > R
    if not outside.any():
        line = Line.through(x1.astype(float), e_d)
        return Covering(line, "near-first", defect(line))
    dist = np.linalg.norm((c - x1).astype(float), axis=1)
    x2 = c[int(np.argmax(dist))]  # argmax picks the lexicographically first among ties
    line = Line.through_points(x1.astype(float), x2.astype(float))
    D = defect(line)
    if D.contains(c).all():
        return Covering(line, "through-two", D)
    return Covering(None, "through-two", None)


def hole0(sample: ProcessSample, u: float, rho: float, m: BoxId, lad: ScaleLadder) -> np.ndarray:
    """Closed lattice points of a 0-box: its points outside the discrete vacant set."""
    if m.k != 0:
        raise ParameterError("hole0 takes a scale-0 box")
    pts = lattice_points(m.x, lad.L0)
    return pts[sample.view(u, rho).closed(pts)]


def hole(m: BoxId, lad: ScaleLadder, sample=None, u=None, rho=None, defect: Defect | None = None) -> np.ndarray:
    if m.k == 0:
        if sample is None:
            raise ParameterError("a scale-0 hole needs a sample")
        return hole0(sample, u, rho, m, lad)
    if defect is None:
        raise ParameterError("a scale-k hole needs a defect")
    if defect.empty:
        return np.zeros((0, lad.d), np.int64)
    members = defect.members(lad)
    if len(members) * (2 * lad.L[m.k - 1] + 1) ** lad.d > HOLE_LIMIT:
        raise ParameterError("hole too large to enumerate; test points with Defect.hole_mask")
    pts = [lattice_points(x, lad.L[m.k - 1]) for x in members]
    if not pts:
        return np.zeros((0, lad.d), np.int64)
    return np.unique(np.concatenate(pts), axis=0)


def lattice_points(center, L: int) -> np.ndarray:
    axes = [np.arange(int(c) - L, int(c) + L + 1, dtype=np.int64) for c in center]
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


# ---------------------------------------------------------------- reports


@dataclass
class BadnessReport:
    ladder: ScaleLadder
    box: BoxId
    u: float
    rho: float
    bad_sub: list
    verdict: Verdict
    covering: Covering | None
    hole_size: int | None
    hole_exact: bool = True  # False when hole_size only bounds the hole from above
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        cov = None
        if self.covering is not None:
            cov = {"case": self.covering.case, "success": self.covering.success}
            if self.covering.line is not None:
                cov["anchor"] = self.covering.line.a.tolist()
                cov["direction"] = self.covering.line.v.tolist()
                cov["empty_defect"] = self.covering.defect.empty
        return {
            "ladder": self.ladder.table(),
            "box": {"x": list(self.box.x), "k": self.box.k},
            "u": self.u,
            "rho": self.rho,
            "bad_sub_boxes": [list(map(int, x)) for x in self.bad_sub],
            "verdict": "bad" if self.verdict.bad else "good",
            "witness": None if self.verdict.witness is None else [list(x) for x in self.verdict.witness],
            "covering_line": cov,
            "hole_size": self.hole_size,
            "hole_exact": self.hole_exact,
            "warnings": list(self.warnings),
        }


def badness_report(sample: ProcessSample, lad: ScaleLadder, m: BoxId, u=None, rho=None) -> BadnessReport:
    """Classify a 0- or 1-box of ``sample`` at (u, rho), defaulting to (u_k, rho_k)."""
    u = lad.u(m.k) if u is None else u
    rho = lad.rho(m.k) if rho is None else rho
    notes = lad.precondition_warnings()
    if m.k == 0:
        bad = classify0(sample, u, rho, m, lad)
        size = None if bad else int(len(hole0(sample, u, rho, m, lad)))
        return BadnessReport(lad, m, u, rho, [], Verdict(bad), None, size, True, notes)
    if m.k != 1:
        raise ParameterError("box classification from a sample is available for k <= 1")
    bad_sub = bad_zero_boxes(sample, u, rho, lad, m)
    verdict = classify_k(bad_sub, lad, m)
    cov = None if verdict.bad else find_covering_line(bad_sub, lad, m)
    size = None
    if cov is not None and cov.success:
        n_members = 0 if cov.defect.empty else int(len(cov.defect.members(lad)))
        size = n_members * (2 * lad.L0 + 1) ** lad.d  # upper bound: member boxes may share faces
    return BadnessReport(lad, m, u, rho, [tuple(x) for x in bad_sub.tolist()], verdict, cov, size, False, notes)


# ---------------------------------------------------------------- p_0


def box_hitting_mass(L: float, rho: float, d: int) -> float:
    """Measure of lines within distance rho of B_inf(0, L).

    Cauchy's formula gives c_mu(d)/2 times the surface area of the
    rho-neighbourhood of the box, and Steiner's formula gives that area.
    """
    a = 2.0 * L
    surface = sum(math.comb(d, j) * a**j * (d - j) * unit_ball_volume(d - j) * rho ** (d - j - 1) for j in range(d))
    return c_mu(d) / 2 * surface


@dataclass(frozen=True)
class P0Estimate:
    L0: int
    u: float
    rho: float
    threshold: float
    replicas: int
    bad: int
    estimate: float
    ci: tuple[float, float]
    lam: float
    exact_tail: float
    lam_envelope: float
    envelope_tail: float

    @property
    def agrees(self) -> bool:
        return self.ci[0] <= self.exact_tail <= self.ci[1]

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"agrees": self.agrees}


def poisson_tail(lam: float, threshold: float) -> float:
    """P[Poisson(lam) > threshold]."""
    return float(sps.poisson.sf(math.floor(threshold), lam)) if lam > 0 else 0.0


def estimate_p0(lad: ScaleLadder, replicas: int, seed: int, u=None, rho=None, z: float = 3.0) -> P0Estimate:
    u = lad.u(0) if u is None else u
    rho = lad.rho(0) if rho is None else rho
    L0, d = lad.L0, lad.d
    thr = float(L0) ** lad.gamma
    if u > 0:
        batch = sample_batch(BallWindow((0.0,) * d, L0 * math.sqrt(d) + rho), u, replicas, seed, "p0", L0)
        hit = dist_box_lines(np.zeros(d), float(L0), batch.anchors, batch.dirs) <= rho
        n_bad = int(np.count_nonzero(batch.counts(hit) > thr))
    else:
        n_bad = 0
    lam = u * box_hitting_mass(L0, rho, d)
    env = u * unit_ball_volume(d - 1) * (L0 * math.sqrt(d) + rho) ** (d - 1)
    return P0Estimate(
        L0, u, rho, thr, replicas, n_bad, n_bad / replicas, wilson_interval(n_bad, replicas, z),
        lam, poisson_tail(lam, thr), env, poisson_tail(env, thr),
    )


def random_bad_pattern(lad: ScaleLadder, m: BoxId, rng: np.random.Generator, max_bad: int = 6) -> np.ndarray:
    """Random set of bad (k-1)-box centers inside B_m.

    Mixes three shapes so that both verdicts occur: uniform scatter, points
    near a random line (jitter up to the defect radius) and tight clusters.
    """
    k, d = m.k, lad.d
    Ls, Lk = lad.L[k - 1], lad.L[k]
    half = (Lk - Ls) / (2 * Ls)  # index half-width
    n = int(rng.integers(1, max_bad + 1))
    shape = rng.integers(3)
    if shape == 0:
        pts = rng.uniform(-half, half, (n, d)) * 2 * Ls
    else:
        base = rng.uniform(-half, half, d) * 2 * Ls
        if shape == 1:
            w = rng.normal(size=d)
            w /= np.linalg.norm(w)
            pts = base + rng.uniform(-2, 2, (n, 1)) * Lk * w
            spread = lad.defect_radius(k)
        else:
            pts = np.repeat(base[None], n, axis=0)
            spread = lad.separation(k)
        pts = pts + rng.uniform(-1, 1, (n, d)) * spread * rng.uniform(0, 1.5)
    hi = math.floor(half)
    idx = np.clip(np.rint(pts / (2 * Ls)), -hi, hi).astype(np.int64)
    return np.asarray(m.x, np.int64) + idx * 2 * Ls


def covering_trial(lad: ScaleLadder, m: BoxId, n: int, seed: int) -> dict:
    """Run classify_k and find_covering_line on n random patterns.

    A counterexample is a good verdict without a covering line.
    """
    from .rng import stream

    rng = stream(seed, "covering", m.k)
    good = bad = counter = 0
    examples = []
    for _ in range(n):
        pat = random_bad_pattern(lad, m, rng)
        if classify_k(pat, lad, m).bad:
            bad += 1
            continue
        good += 1
        if not find_covering_line(pat, lad, m).success:
            counter += 1
            if len(examples) < 5:
                examples.append(pat.tolist())
    return {"trials": n, "good": good, "bad": bad, "counterexamples": counter, "examples": examples}
