"""
Rate constraint on the prisoner's dilemma
=========================================

Two players, binary actions, noisy binary signals and a public channel with
three symbols.  How many bits per stage does a resilient public code need?
"""

import numpy as np

from vpmgame import ProductDistribution, compute_rstar, pd_closed_form, pd_instance
from vpmgame.monitoring_graph import build_auxiliary_graph

# the target mixed action: both players cooperate with probability 0.9
target = ProductDistribution((np.array([0.9, 0.1]), np.array([0.9, 0.1])))

# delta is the probability that a private signal is replaced by a coin flip
game, mon = pd_instance(0.5)
print(game.action_labels, "|S_0| =", mon.public_alphabet_size)

# the auxiliary graph joins two actions of player 1 when player 2 cannot tell them apart
g = build_auxiliary_graph(game, mon, target, 0)
print("edges of G_1:", sorted(g.edges))

report = compute_rstar(game, mon, target)
print(report.to_text(game))

# the same number from the closed form for this game
print("closed form:", pd_closed_form(0.5, target))

# the requirement grows with the noise; at delta = 0 no coloring is needed at all
for delta in (0.0, 0.1, 0.3, 0.5, 1.0):
    g, m = pd_instance(delta)
    r = compute_rstar(g, m, target)
    print(f"delta={delta:.1f}  R*={r.rstar:.3f}  chi={r.chromatic_numbers}  ok={r.satisfied}")
