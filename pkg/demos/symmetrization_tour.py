"""Rearranging a lopsided raster shape: polarization, Steiner and circular.

Run:  python3 demos/symmetrization_tour.py
Prints small ASCII pictures; every transform keeps the cell count.
"""
import numpy as np

from isop.geometry.domains import Ball, BallUnion, rasterize
from isop.geometry.raster import Hyperplane, RasterSet, hausdorff_distance
from isop.symmetrize import circular, polarization_schedule_to_steiner, polarize, steiner


def show(title, A):
    print(f"{title}  ({A.count} cells)")
    # row 0 is the top of the picture
    for row in A.mask.T[::-1]:
        print("  " + "".join("#" if v else "." for v in row))
    print()


grid = RasterSet.centered_grid(1.0, 24, 2)
shape = rasterize(BallUnion([[-0.35, 0.3], [0.3, -0.2]], [0.45, 0.3]), grid=grid)
show("two overlapping disks", shape)

# Polarization pushes mass across a line toward its positive side.
show("polarized across y = 0", polarize(shape, Hyperplane([0.0, 1.0])))

# Steiner symmetrization: each vertical section becomes a centered interval.
S = steiner(shape, axis=1)
show("Steiner symmetral in y", S)

# Circular symmetrization: each ring section becomes an arc centered on +x.
show("circular symmetral", circular(shape))

# Enough polarizations reach the Steiner symmetral up to grid resolution.
final, trace = polarization_schedule_to_steiner(shape, Hyperplane.axis(2, 1), budget=200, seed=3)
print(f"polarization schedule: Hausdorff distance {trace[0]:.3f} -> {trace[-1]:.3f} in {len(trace) - 1} steps")
print(f"distance from Steiner symmetral now {hausdorff_distance(final, S):.3f} (cell {grid.cell:.3f})")
