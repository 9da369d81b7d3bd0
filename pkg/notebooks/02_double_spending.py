"""
Double-spending races
=====================

A k-confirmation double spend with one pre-mined block. Under Nakamoto
consensus the attacker mines freely on its branch; under Crystal it cannot
extend an uncertified private block, so phase 1 leaves it one block ahead
at most and the race reduces to gambler's ruin.
"""

from crystalsim.analytics import double_spend_prob_crystal, double_spend_prob_nc
from crystalsim.sim.experiments import double_spend_experiment

for alpha in (0.1, 0.3, 0.45):
    for k in (2, 6):
        nc = double_spend_experiment(alpha, k, "nc", trials=2 * 10 ** 5, seed=1, method="auto")
        cr = double_spend_experiment(alpha, k, "crystal", trials=2 * 10 ** 5, seed=1, method="auto")
        print(f"alpha={alpha} k={k}  nc {double_spend_prob_nc(alpha, k):.3e} mc {nc.estimate:.3e}"
              f"  crystal {double_spend_prob_crystal(alpha, k):.3e} mc {cr.estimate:.3e}")

# with a 10 s delay bound Crystal needs 2*delta per block (block plus votes)
r = double_spend_experiment(0.3, 4, "crystal", delta=10.0, trials=2 * 10 ** 5, seed=1)
print("crystal, delta=10:", r.estimate, (r.ci_low, r.ci_high))
