"""
Selfish mining revenue
======================

Crystal's certificate rule caps a selfish miner's private lead at one
block, so the Eyal-Sirer strategy degenerates and never pays more than
honest mining.
"""

import numpy as np

from crystalsim.analytics import selfish_revenue_crystal, selfish_revenue_nc
from crystalsim.sim.experiments import selfish_mining_experiment

for alpha in np.arange(0.0, 0.5, 0.05):
    sim = selfish_mining_experiment(float(alpha), "crystal", 0.5, 2 * 10 ** 5, seed=1)
    print(f"alpha={alpha:.2f}  nc={selfish_revenue_nc(alpha):.4f}"
          f"  crystal={selfish_revenue_crystal(alpha):.4f}  crystal_sim={sim.revenue:.4f}")

# node-level engine with a 10 s delay bound: ties are broken by honest nodes
r = selfish_mining_experiment(0.3, "crystal", 0.5, 3000, delta=10.0, seed=1)
print("engine, delta=10:", r.revenue, "max private lead", r.max_private_lead)
