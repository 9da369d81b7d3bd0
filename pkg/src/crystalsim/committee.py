"""Two-round committee election: sliding window, VRF sortition, votes, QCs.

Window slots are numbered from the block's parent backwards: index 1 is the
parent, index W the oldest block in the window. While a block's ancestry is
shorter than W the block has no committee and needs no certificate.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .chain import BlockTree, QuorumCertificate, Vote
from .crypto import DIGEST_SPACE, KeyPair, VrfOutput, digest_bytes, vrf_prove, vrf_value, vrf_verify


@dataclass(frozen=True)
class ElectionParams:
    W: int
    m: int
    d: int

    def __post_init__(self):
        if not 1 <= self.m <= self.W:
            raise ValueError(f"need 1 <= m <= W, got m={self.m}, W={self.W}")
        if not 0 <= self.d <= DIGEST_SPACE:
            raise ValueError("election target out of range")

    @classmethod
    def from_sizes(cls, W: int, m: int) -> "ElectionParams":
        return cls(W, m, m * DIGEST_SPACE // W)

    def quorum(self, shares: int) -> bool:
        return 2 * shares > self.m


@dataclass(frozen=True)
class SlidingWindow:
    block_hash: int
    owners: tuple
    """owners[i-1] is the election pk of window slot i."""

    def __len__(self):
        return len(self.owners)

    def owner(self, index: int) -> bytes:
        return self.owners[index - 1]

    def slots_of(self, pk: bytes) -> list[int]:
        return [i for i, o in enumerate(self.owners, 1) if o == pk]


def election_input(block_hash: int, index: int) -> bytes:
    return digest_bytes(block_hash) + index.to_bytes(4, "big")


def sliding_window(tree: BlockTree, block_hash: int, W: int) -> Optional[SlidingWindow]:
    """Committee window of ``block_hash``, or None during bootstrap.

    Results are memoized on the tree; ancestry never changes once stored.
    """
    cache = tree.memo.setdefault(("window", W), {})
    hit = cache.get(block_hash)
    if hit is not None or block_hash in cache:
        return hit
    if tree.height(block_hash) - 1 < W:
        cache[block_hash] = None
        return None
    parent = tree.parent(block_hash)
    parent_window = cache.get(parent)
    head = tree.blocks[parent].header.election_pk
    if parent_window is not None:
        owners = (head,) + parent_window.owners[:W - 1]
    else:
        owners = []
        h = parent
        for _ in range(W):
            owners.append(tree.blocks[h].header.election_pk)
            h = tree.parent(h)
        owners = tuple(owners)
    win = SlidingWindow(block_hash, owners)
    cache[block_hash] = win
    return win


def vote_for_block(block_hash: int, window: Optional[SlidingWindow], keys: KeyPair,
                   params: ElectionParams) -> list[Vote]:
    """Votes for every slot this key owns whose VRF output falls under d."""
    if window is None:
        return []
    votes = []
    for index, owner in enumerate(window.owners, 1):
        if owner != keys.pk:
            continue
        x = election_input(block_hash, index)
        if vrf_value(keys.sk, x) < params.d:
            out = vrf_prove(keys.sk, x)
            votes.append(Vote(keys.pk, block_hash, index, out.y, out.proof))
    return votes


def committee_of(block_hash: int, window: Optional[SlidingWindow], all_keys: Iterable[KeyPair],
                 params: ElectionParams) -> list[tuple[bytes, int]]:
    """Realized committee as (pk, index) pairs. Needs every secret key: oracle use only."""
    if window is None:
        return []
    sk_of = {k.pk: k.sk for k in all_keys}
    out = []
    for index, owner in enumerate(window.owners, 1):
        sk = sk_of.get(owner)
        if sk is not None and vrf_value(sk, election_input(block_hash, index)) < params.d:
            out.append((owner, index))
    return out


class VoteStatus(enum.Enum):
    ACCEPTED = "Accepted"
    DUPLICATE = "Duplicate"
    UNKNOWN_BLOCK = "UnknownBlock"
    BAD_INDEX = "BadIndex"
    TARGET_MISS = "TargetMiss"
    WRONG_OWNER = "WrongOwner"
    BAD_PROOF = "BadProof"


class VrfElection:
    """Certificate rule backed by real VRF sortition over the sliding window."""

    def __init__(self, params: ElectionParams):
        self.params = params

    def needs_qc(self, tree: BlockTree, block_hash: int) -> bool:
        return tree.height(block_hash) - 1 >= self.params.W

    def check_vote(self, vote: Vote, tree: BlockTree) -> VoteStatus:
        if not isinstance(vote, Vote):
            return VoteStatus.BAD_PROOF
        if vote.block_hash not in tree:
            return VoteStatus.UNKNOWN_BLOCK
        window = sliding_window(tree, vote.block_hash, self.params.W)
        if window is None or not 1 <= vote.window_index <= len(window):
            return VoteStatus.BAD_INDEX
        if vote.vrf_y >= self.params.d:
            return VoteStatus.TARGET_MISS
        if window.owner(vote.window_index) != vote.voter_pk:
            return VoteStatus.WRONG_OWNER
        x = election_input(vote.block_hash, vote.window_index)
        if not vrf_verify(vote.voter_pk, x, VrfOutput(vote.vrf_y, vote.vrf_proof)):
            return VoteStatus.BAD_PROOF
        return VoteStatus.ACCEPTED

    def quorum(self, shares: int) -> bool:
        return self.params.quorum(shares)

    def qc_valid(self, qc: QuorumCertificate, tree: BlockTree, known=None) -> bool:
        for v in qc.votes:
            if v.block_hash != qc.block_hash:
                return False
            if known is not None and v in known:
                continue
            if self.check_vote(v, tree) is not VoteStatus.ACCEPTED:
                return False
        return self.quorum(qc.share_count)

    def cast(self, keys: KeyPair, block_hash: int, tree: BlockTree) -> list[Vote]:
        return vote_for_block(block_hash, sliding_window(tree, block_hash, self.params.W),
                              keys, self.params)


class VoteCollector:
    """Per-node vote pool: validates votes, buffers early ones, assembles QCs."""

    def __init__(self, election, buffer_limit: int = 100_000):
        self.election = election
        self.votes: dict[int, dict] = {}
        self.shares: dict[int, int] = {}
        self.accepted: set = set()
        self.pending: dict[int, list] = {}
        self.pending_order: deque = deque()
        self.buffer_limit = buffer_limit
        self.dropped = 0

    def on_receipt_vote(self, vote, tree: BlockTree) -> VoteStatus:
        if vote in self.accepted:
            return VoteStatus.DUPLICATE
        status = self.election.check_vote(vote, tree)
        if status is VoteStatus.UNKNOWN_BLOCK:
            self._buffer(vote)
            return status
        if status is not VoteStatus.ACCEPTED:
            return status
        pool = self.votes.setdefault(vote.block_hash, {})
        if vote.key in pool:
            return VoteStatus.DUPLICATE
        pool[vote.key] = vote
        self.accepted.add(vote)
        self.shares[vote.block_hash] = self.shares.get(vote.block_hash, 0) + vote.shares
        return status

    def _buffer(self, vote):
        if len(self.pending_order) >= self.buffer_limit:
            old = self.pending_order.popleft()
            bucket = self.pending.get(old.block_hash)
            if bucket and old in bucket:
                bucket.remove(old)
            self.dropped += 1
        self.pending.setdefault(vote.block_hash, []).append(vote)
        self.pending_order.append(vote)

    def on_block(self, block_hash: int, tree: BlockTree) -> list[VoteStatus]:
        """Re-check votes that arrived before ``block_hash``."""
        bucket = self.pending.pop(block_hash, None)
        if not bucket:
            return []
        for v in bucket:
            try:
                self.pending_order.remove(v)
            except ValueError:
                pass
        return [self.on_receipt_vote(v, tree) for v in bucket]

    def has_quorum(self, block_hash: int) -> bool:
        return self.election.quorum(self.shares.get(block_hash, 0))

    def qc(self, block_hash: int) -> Optional[QuorumCertificate]:
        if not self.has_quorum(block_hash):
            return None
        return QuorumCertificate.build(block_hash, self.votes[block_hash].values())


def window_share_counts(committee: Sequence[tuple[bytes, int]], honest: set) -> tuple[int, int]:
    """(honest shares, adversary shares) of a realized committee."""
    h = sum(1 for pk, _ in committee if pk in honest)
    return h, len(committee) - h
