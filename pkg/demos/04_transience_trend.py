"""
Resistance to the boundary of growing boxes
===========================================

In a transient graph the effective resistance from the origin to the sphere
of radius R converges as R grows. We compare a sparse and a dense intensity.
"""

import math

import numpy as np

from cylperc.lineproc import sample_hitting_ball
from cylperc.renorm import desk_ladder
from cylperc.vacantwalk import build_vacant_graph, escape_probability, reaches, resistance_curve

R = 20
u_tilde = desk_ladder().u_tilde
for u in (u_tilde / 4, 10 * u_tilde, 40 * u_tilde):
    smp = sample_hitting_ball(u, np.zeros(3), R * math.sqrt(3) + 2, seed=7)
    g = build_vacant_graph(smp, u, 1.0, R)
    if not reaches(g, (0, 0, 0), R):
        print(f"u = {u:.4f}: origin cut off before radius {R}")
        continue
    curve = resistance_curve(g, (0, 0, 0), [5, 10, 20])
    esc = escape_probability(g, (0, 0, 0), R, 5000, seed=7)
    pretty = ", ".join(f"R={c['R']}: {c['resistance']:.4f}" for c in curve)
    print(f"u = {u:.4f} ({len(smp)} lines): {pretty}; escape {esc.estimate:.3f}")
