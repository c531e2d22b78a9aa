"""Configurations seen by the flow construction.

An environment answers three questions about boxes of the ladder: is a box
good, what is its hole, and is it far enough from every cylinder that the
translation-invariant templates apply. Everything is evaluated at a single
pair (u, rho); badness and holes only grow with either parameter, so using
the largest pair of the scales involved is conservative.
"""

from __future__ import annotations

import numpy as np

from ..geometry import BoxInf, dist_box_lines
from ..lineproc import ProcessSample
from ..renorm import (
    BoxId,
    Defect,
    ParameterError,
    ScaleLadder,
    bad_zero_boxes,
    boxes_hit_by_lines,
    classify_k,
    find_covering_line,
    inside,
)


class CarpetError(RuntimeError):
    """A construction step found no admissible choice."""


class Environment:
    ladder: ScaleLadder

    def __init__(self, ladder: ScaleLadder):
        self.ladder = ladder
        self.cache: dict = {}

    @property
    def d(self) -> int:
        return self.ladder.d

    def box(self, x, k: int) -> BoxId:
        return self.ladder.box_id(x, k)

    # the four hooks below are what subclasses provide

    def closed(self, points) -> np.ndarray:
        raise NotImplementedError

    def bad_sub(self, x, k: int) -> np.ndarray:
        """Centers of the bad (k-1)-boxes inside the k-box at x."""
        raise NotImplementedError

    def is_good0(self, x) -> bool:
        raise NotImplementedError

    def quiet(self, x, k: int) -> bool:
        raise NotImplementedError

    # derived

    def is_good(self, x, k: int) -> bool:
        key = ("good", tuple(int(c) for c in x), k)
        if key not in self.cache:
            if k == 0:
                self.cache[key] = self.is_good0(x)
            else:
                m = self.box(x, k)
                self.cache[key] = not classify_k(self.bad_sub(x, k), self.ladder, m).bad
        return self.cache[key]

    def defect(self, x, k: int) -> Defect:
        key = ("defect", tuple(int(c) for c in x), k)
        if key not in self.cache:
            m = self.box(x, k)
            cov = find_covering_line(self.bad_sub(x, k), self.ladder, m)
            if not cov.success:
                raise CarpetError(f"no covering line for {m}")
            self.cache[key] = cov.defect
        return self.cache[key]


class CleanEnvironment(Environment):
    """No cylinders at all."""

    def closed(self, points) -> np.ndarray:
        return np.zeros(len(np.atleast_2d(points)), bool)

    def bad_sub(self, x, k: int) -> np.ndarray:
        return np.zeros((0, self.d), np.int64)

    def is_good0(self, x) -> bool:
        return True

    def quiet(self, x, k: int) -> bool:
        return True


class SampleEnvironment(Environment):
    """Cylinders of radius ``rho`` around the lines of ``sample`` with level <= u."""

    def __init__(self, sample: ProcessSample, ladder: ScaleLadder, u: float | None = None, rho: float | None = None):
        super().__init__(ladder)
        top = ladder.k_max
        self.sample = sample
        self.u = ladder.u(top) if u is None else float(u)
        self.rho = ladder.rho(top) if rho is None else float(rho)
        self.view = sample.view(self.u, self.rho)
        self.anchors, self.dirs = self.view.active()

    def closed(self, points) -> np.ndarray:
        return self.view.closed(points)

    def is_good0(self, x) -> bool:
        L0 = self.ladder.L0
        return self.view.count_hitting(BoxInf(tuple(float(c) for c in x), float(L0))) <= float(L0) ** self.ladder.gamma

    def bad_sub(self, x, k: int) -> np.ndarray:
        key = ("bad_sub", tuple(int(c) for c in x), k)
        if key in self.cache:
            return self.cache[key]
        lad = self.ladder
        m = self.box(x, k)
        if k == 1:
            out = bad_zero_boxes(self.sample, self.u, self.rho, lad, m)
        elif k >= 2:
            Ls = lad.L[k - 1]
            half = (lad.L[k] - Ls) // (2 * Ls)
            base = np.asarray(m.x, np.int64) // (2 * Ls)
            self.view._check(lad.box(m), True)
            _, idx = boxes_hit_by_lines(self.anchors, self.dirs, Ls, self.rho, base - half, base + half)
            cand = np.unique(idx, axis=0) * 2 * Ls if len(idx) else np.zeros((0, self.d), np.int64)
            cand = cand[inside(lad, m, cand)]
            out = np.array([c for c in cand if not self.is_good(c, k - 1)], np.int64).reshape(-1, self.d)
        else:
            raise ParameterError("scale-0 boxes have no sub-boxes")
        self.cache[key] = out
        return out

    def quiet(self, x, k: int) -> bool:
        if len(self.anchors) == 0:
            return True
        reach = 3.0 * self.ladder.L[k]
        dist = dist_box_lines(np.asarray(x, float), reach, self.anchors, self.dirs)
        return bool(np.all(dist > self.rho + 1.0))
