"""
Safety on simulated traces
==========================

Run the node-level simulator against a private attacker and inspect the
quantities the safety argument relies on: converged blocks, honest progress
and k-deep commits.
"""

from crystalsim.analytics import SafetyParams, safety_condition
from crystalsim.sim import SimConfig, run
from crystalsim.sim.stats import commit_conflicts, converged_block_stats, honest_progress_violations

cfg = SimConfig(n_honest=2, alpha=0.35, delta=10.0, strategy="private", k=6,
                horizon_blocks=3000, seed=1)
print(safety_condition(SafetyParams(cfg.alpha, cfg.lam, cfg.delta, 0.2)))

tr = run(cfg)
st = converged_block_stats(tr)
print(f"converged {st.count} of {st.honest_blocks} honest blocks, bound {st.bound:.0f}")
print("commit conflicts:", commit_conflicts(tr))
print("honest progress violations:", len(honest_progress_violations(tr)))
print({k: tr.summary[k] for k in ("main_chain_length", "main_chain_adversary", "fork_heights")})
