"""
A planar slice through a Poisson cylinder configuration
=======================================================

Draw every line that meets a ball of radius 24, thicken each into a cylinder
of radius 1, and look at the plane z = 0. Run with an output directory as the
only argument (default: ./demo_output).
"""

import sys
from pathlib import Path

import numpy as np

from cylperc.cli import _slice_svg
from cylperc.lineproc import sample_hitting_ball

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(parents=True, exist_ok=True)

# The number of lines hitting the ball is Poisson with mean u times the measure of those lines,
# which is the area of a disc of radius R in this normalization.
u, R = 0.07, 24.0
smp = sample_hitting_ball(u, np.zeros(3), R, seed=1)
print(f"{len(smp)} lines hit the ball (mean {u * smp.window.mass():.1f})")

# Levels let one sample serve every u' <= u: restricting to a lower level thins the process.
for level in (0.01, 0.03, 0.07):
    view = smp.view(level, 1.0)
    grid = np.stack(np.meshgrid(np.arange(-16, 17), np.arange(-16, 17), [0], indexing="ij"), -1).reshape(-1, 3)
    frac = view.covered(grid.astype(float), strict=False).mean()
    print(f"u = {level:.2f}: {frac:.1%} of the plane's lattice points near the origin are covered")

svg = _slice_svg(smp.view(u, 1.0), z=0.0, extent=R, pixels=300)
(out / "slice_u007.svg").write_text(svg)
print("wrote", out / "slice_u007.svg")
