"""Elliptical cross sections fitted to stacks of square, U-shaped and circular slices.

The U-shape shows the cost of the elliptical assumption: the ellipse covers
the notch, so FP stays high whatever the level.

    python3 demos/shape_misspecification.py
"""

from tubefit.evalsim import run_shape_sim

for shape in ("square", "u_shape", "circle"):
    for alpha in (0.12, 0.2):
        r = run_shape_sim(shape, alpha, seed=3)
        print(f"{shape:8s} alpha {alpha:.2f}: TP {r.tp:.3f}  FP {r.fp:.3f}")
