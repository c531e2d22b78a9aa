"""
Good and bad boxes across scales
================================

The scale ladder grows super-exponentially, so the lattice at scale 2 is
astronomically large. Badness at scale 0 is a Poisson tail, and badness at
higher scales only looks at which sub-boxes are bad.
"""

import warnings

from cylperc.renorm import BoxId, PreconditionWarning, classify_k, covering_trial, desk_ladder, estimate_p0

with warnings.catch_warnings():
    warnings.simplefilter("ignore", PreconditionWarning)
    lad = desk_ladder()

for row in lad.table():
    print(f"k={row['k']}  L={lad.L[row['k']]}  u_k={row['u']:.5f}  rho_k={row['rho']:.4f}")
print("warnings at this L0:", *lad.precondition_warnings(), sep="\n  ")

# a 0-box is bad when more than L0^gamma cylinders hit it
p0 = estimate_p0(lad, 5000, seed=3)
print(f"P[0-box bad]: Monte Carlo {p0.estimate:.3f}, exact Poisson tail {p0.exact_tail:.3f}")

# Three far-apart bad sub-boxes in an L shape break a 2-box; three in a row do not.
m = BoxId((0, 0, 0), 2)
grid = 2 * lad.L[1]
leg = int(1.2 * lad.separation(2)) // grid * grid
corner = [(0, 0, 0), (leg, 0, 0), (0, leg, 0)]
row = [(0, 0, 0), (leg, 0, 0), (2 * leg, 0, 0)]
print("L shape bad:", classify_k(corner, lad, m).bad, " collinear bad:", classify_k(row, lad, m).bad)

# Every good box comes with a single line whose tube holds all of its bad sub-boxes.
print(covering_trial(lad, m, 200, seed=4) | {"examples": "..."})
