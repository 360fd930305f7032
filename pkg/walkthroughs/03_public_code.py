"""
The public code at desk scale
=============================

Encode a block of action profiles into public symbols and decode it back at
each player, who only sees a private signal and their own actions.
"""

import numpy as np

from vpmgame import DeviationSpec, ProductDistribution, pd_instance
from vpmgame.avs_codec_sim import (
    build_code,
    decode,
    encode,
    estimate_error_probability,
    rate_accounting,
    sample_block,
)

target = ProductDistribution((np.array([0.9, 0.1]), np.array([0.9, 0.1])))
game, mon = pd_instance(0.1)
code = build_code(game, mon, target, n=12, epsilon=0.2, seed=0)
print("nbar1 =", code.nbar1, " R* =", round(code.rstar, 3))

rng = np.random.default_rng(3)
actions, signals = sample_block(game, mon, target, 12, DeviationSpec.none(), rng)
msg = encode(code, actions)
print("suspect:", msg.suspect + 1, " status:", msg.status, " public:", msg.public)

for k in range(2):
    res = decode(code, k, msg.public, signals[:, k], actions[:, k])
    print(f"decoder {k + 1}: {res.status}", "match" if res.ok and (res.actions == actions).all() else "")

# where the bits go for this block
print(rate_accounting(code, actions).to_text())

# errors shrink slowly with n; at this size they are still large
for n in (8, 12, 16):
    c = build_code(game, mon, target, n=n, epsilon=0.2)
    est = estimate_error_probability(c, trials=200, master_seed=0, keep_records=False)
    print(f"n={n:2d}  {est.to_text()}")

# a deviator is found by the suspect test long before decoding gets hard
c = build_code(game, mon, target, n=200, epsilon=0.2)
est = estimate_error_probability(c, DeviationSpec.constant(1, 1), trials=500, decode=False)
print("misidentified:", est.misidentification_rate)
