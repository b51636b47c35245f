"""Dense BEV grid cost against the sparse pipeline as the range grows.

The dense grid grows with the square of the range; the sparse pipeline's
work follows the number of points and instances, which stays nearly flat
when the object count is held fixed.
"""
from sparsefusion.bench import cost_scan, to_table

reports = cost_scan([54.0, 100.0, 150.0, 200.0], repeats=5)
print(to_table(reports))

lo, hi = reports[0], reports[-1]
print(f"\n{hi.range_m:.0f} m vs {lo.range_m:.0f} m:")
print(f"  dense cells  x{hi.dense_cells / lo.dense_cells:.2f}")
print(f"  sparse live  x{hi.sparse_live / lo.sparse_live:.2f}")
print(f"  sparse wall  x{hi.wall_ms / lo.wall_ms:.2f}")
