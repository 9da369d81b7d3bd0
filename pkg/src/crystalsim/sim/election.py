"""Abstract committee model for large simulations.

Running real sortition over a 3024-block window for every block is far too
slow for 10^4-block traces, so this backend assigns each participant a fixed
number of membership shares and lets the engine inject committee failures
for adversary blocks. Ballots are authenticated by the share table itself.
"""
from __future__ import annotations

from ..chain import Ballot, BlockTree, QuorumCertificate
from ..committee import VoteStatus


class InjectedElection:
    def __init__(self, m: int, shares: dict, adversary_pk: bytes | None = None,
                 bootstrap: int = 0, offline: frozenset = frozenset()):
        self.m = m
        self.shares = dict(shares)
        self.adversary_pk = adversary_pk
        self.bootstrap = bootstrap
        self.offline = frozenset(offline)
        self.failures: set[int] = set()

    def shares_for(self, pk: bytes, block_hash: int) -> int:
        if pk == self.adversary_pk and block_hash in self.failures:
            return self.m
        return self.shares.get(pk, 0)

    def needs_qc(self, tree: BlockTree, block_hash: int) -> bool:
        return tree.height(block_hash) - 1 >= self.bootstrap

    def check_vote(self, ballot, tree: BlockTree) -> VoteStatus:
        if not isinstance(ballot, Ballot):
            return VoteStatus.BAD_PROOF
        if ballot.block_hash not in tree:
            return VoteStatus.UNKNOWN_BLOCK
        if not self.needs_qc(tree, ballot.block_hash):
            return VoteStatus.BAD_INDEX
        expected = self.shares_for(ballot.voter_pk, ballot.block_hash)
        if expected == 0:
            return VoteStatus.WRONG_OWNER
        if ballot.shares != expected:
            return VoteStatus.TARGET_MISS
        return VoteStatus.ACCEPTED

    def quorum(self, shares: int) -> bool:
        return 2 * shares > self.m

    def qc_valid(self, qc: QuorumCertificate, tree: BlockTree, known=None) -> bool:
        for v in qc.votes:
            if v.block_hash != qc.block_hash:
                return False
            if known is not None and v in known:
                continue
            if self.check_vote(v, tree) is not VoteStatus.ACCEPTED:
                return False
        return self.quorum(qc.share_count)

    def cast(self, keys, block_hash: int, tree: BlockTree) -> list:
        if keys.pk in self.offline or not self.needs_qc(tree, block_hash):
            return []
        s = self.shares_for(keys.pk, block_hash)
        return [Ballot(keys.pk, block_hash, s)] if s else []


def split_shares(m: int, alpha: float, n_honest: int) -> tuple[list[int], int]:
    """Honest per-node shares and the adversary's share of an m-share committee."""
    adv = round(alpha * m)
    honest_total = m - adv
    base, extra = divmod(honest_total, n_honest)
    return [base + (1 if i < extra else 0) for i in range(n_honest)], adv
