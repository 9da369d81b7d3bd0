"""
Committee sizing
================

How large must the second-round committee be so that a block's committee
fails (adversary majority, or no honest majority) with probability at most
1e-4? Everything here is exact rational arithmetic.
"""

from crystalsim.analytics import CommitteeModel, committee_failure_prob, min_committee_size

W = 3024

# failure probability of the design point and of the smallest passing size
for m in (340, 347, 500):
    print(f"m={m:4d}  eps={committee_failure_prob(CommitteeModel(W, m, 0.35)):.3e}")

# the bound zig-zags with the parity of m: an even m admits a tie at m/2
for m in range(340, 350):
    print(m, f"{committee_failure_prob(CommitteeModel(W, m, 0.35)):.3e}")

# minimum size over the adversary's power share
for alpha in (0.1, 0.15, 0.2, 0.25, 0.3, 0.35):
    print(f"alpha={alpha:.2f}  m_min={min_committee_size(alpha, W, 1e-4)}")
