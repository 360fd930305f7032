"""
Repeated play with block-delayed monitoring
===========================================

Honest players draw from the target each stage.  At the end of every block
each player tests the reconstructed previous block of the others and starts
an absorbing min-max punishment on the first failure.
"""

import numpy as np

from vpmgame import DeviationSpec, ProductDistribution, pd_instance
from vpmgame.repeated_game_sim import (
    SimConfig,
    epsilon_equilibrium_check,
    run_match,
    run_matches,
    standard_deviation_library,
)

target = ProductDistribution((np.array([0.9, 0.1]), np.array([0.9, 0.1])))
game, mon = pd_instance(0.5)
cfg = SimConfig(n=200, blocks=20, target=target, epsilon_test=0.15)

traces = run_matches(game, mon, cfg, matches=20)
print("honest mean payoff:", np.mean([t.gamma for t in traces], axis=0))

# player 1 defects forever from block 3
dev = DeviationSpec.constant(0, 1, start_block=3)
tr = run_match(game, mon, SimConfig(n=200, blocks=8, target=target, epsilon_test=0.15,
                                    deviation=dev))
print(tr.to_csv())
print("first off-type block:", tr.first_offtype_block, " detected at end of block:",
      tr.detection_block(0))

# the whole library of simple deviations
rep = epsilon_equilibrium_check(game, mon, cfg, standard_deviation_library(game, target),
                                matches=10)
print(rep.to_text())
