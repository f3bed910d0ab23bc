"""How the nominal level maps to coverage of a known ellipse as noise grows.

    python3 demos/alpha_calibration.py
"""

from tubefit.evalsim import AlphaSimConfig, run_alpha_sim

grid = (0.05, 0.12, 0.3, 0.62, 0.9)
for A, B in [(1.0, 1.0), (4.0, 1.0)]:
    for sigma in (0.1, 1.0):
        r = run_alpha_sim(AlphaSimConfig(A, B, sigma, n_replicates=50, alpha_grid=grid, seed=2))
        print(f"A={A:g} B={B:g} sigma={sigma:g}")
        for a, tp, fp in zip(grid, r.tp, r.fp):
            print(f"   alpha {a:4.2f}: TP {tp:.3f}  FP {fp:.3f}")
