"""Concentration profiles along a cylinder whose radius doubles halfway.

The raw sum quadruples with the cross-section area, the area-normalized
profile stays flat, and a fixed cube around the centerline reads low where
it pokes out of the narrow part.

    python3 demos/concentration_along_cylinder.py
"""

import numpy as np

from tubefit import TubeConfig, concentration_profile, fit_tube, segment, voxel_neighborhood_profile
from tubefit.evalsim import generate_cylinder_cloud

cloud = generate_cylinder_cloud(1.0, 20.0, 40_000, seed=4, step_radius=2.0, intensity=1.0)
axis = segment([0, 0, 0], [0, 0, 20])
tube = fit_tube(axis, cloud, TubeConfig(20, 0.1, 0.15))

raw = concentration_profile(tube, cloud, "sum", normalize=True)
area = concentration_profile(tube, cloud, "area_normalized", normalize=True)
cube = voxel_neighborhood_profile(axis, cloud, 3.0, 20, normalize=True)

print(" distance    sum  area-norm  cube(3)")
for d, s, a, c in zip(raw.distances, raw.values, area.values, cube.values):
    print(f"  {d:6.2f}  {s:5.2f}  {a:9.2f}  {c:7.2f}")
print(f"wide/narrow sum ratio: {np.mean(raw.values[12:18]) / np.mean(raw.values[2:8]):.2f}")
