"""
Which payoffs survive the rate constraint?
==========================================

Sweep the mixed actions of both players on a grid, keep the ones meeting the
constraint, and compare the convex hull of their payoffs with the folk region.
"""

import numpy as np

from vpmgame import noisy_binary_monitoring, minmax_levels, prisoners_dilemma, sweep_region

game = prisoners_dilemma()
levels = minmax_levels(game)
print("min-max levels:", levels.levels)
print("player 2 punishes player 1 with", levels.punisher_action(0, 1))

# the grid avoids pure actions (floor = step), so every point has full support
for delta in (0.2, 0.31, 0.35, 1.0):
    res = sweep_region(game, noisy_binary_monitoring(delta), grid_step=0.02, support_floor=0.02)
    print(f"delta={delta:<5} in R: {res.in_region.mean():6.1%}   "
          f"area ratio: {res.area_ratio():.4f}")

# hull vertices at full noise, counterclockwise
res = sweep_region(game, noisy_binary_monitoring(1.0), grid_step=0.02, support_floor=0.02)
print(np.round(res.ir_hull, 3))

# the same sweep as CSV, one row per grid point
print(res.region_csv().splitlines()[0])
