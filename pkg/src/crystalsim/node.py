"""Honest participant: mining, block processing, voting, rewards and retargeting."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .chain import (
    MAX_TARGET, Block, BlockTree, Payload, QuorumCertificate, Rejection,
    commit_rule, make_block, make_genesis, qc_target, validate_block,
)
from .committee import VoteCollector, VoteStatus
from .crypto import KeyPair

EPOCH_BLOCKS = 2016
TARGET_SPACING = 600.0


@dataclass(frozen=True)
class RewardConfig:
    block_reward: float = 50.0
    tx_fees: float = 0.0
    vote_reward: float = 0.01
    inclusion_reward: float = 0.001

    def __post_init__(self):
        for name in ("block_reward", "tx_fees", "vote_reward", "inclusion_reward"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class Ledger:
    balances: Counter = field(default_factory=Counter)
    escrow: float = 0.0
    unknown_voters: int = 0
    minted: float = 0.0

    def total(self) -> float:
        return sum(self.balances.values()) + self.escrow


def apply_rewards(chain: Iterable[Block], cfg: RewardConfig,
                  reward_pk_of: Mapping[bytes, bytes]) -> Ledger:
    """Pay miners and voters along a committed chain (genesis is skipped).

    Each block pays R_b plus fees to its reward key. Every share in its
    embedded QC pays R_v to the voter's reward key and R_i to the block's
    reward key. Voters with no known reward key are escrowed.
    """
    ledger = Ledger()
    for block in chain:
        hdr = block.header
        if hdr.parent_hash == 0:
            continue
        ledger.balances[hdr.reward_pk] += cfg.block_reward + cfg.tx_fees
        ledger.minted += cfg.block_reward + cfg.tx_fees
        for v in block.parent_qc.votes:
            s = v.shares
            reward_pk = reward_pk_of.get(v.voter_pk)
            if reward_pk is None:
                ledger.escrow += s * cfg.vote_reward
                ledger.unknown_voters += 1
            else:
                ledger.balances[reward_pk] += s * cfg.vote_reward
            ledger.balances[hdr.reward_pk] += s * cfg.inclusion_reward
            ledger.minted += s * (cfg.vote_reward + cfg.inclusion_reward)
    return ledger


def adjust_difficulty(timestamps: Sequence[float], target: int,
                      epoch: int = EPOCH_BLOCKS, spacing: float = TARGET_SPACING) -> int:
    """Retarget from the span of one epoch.

    ``timestamps`` holds the epoch's boundary block followed by its ``epoch``
    blocks, so ``timestamps[-1] - timestamps[0]`` spans exactly ``epoch``
    intervals. A larger target is easier; the mining rate scales with it.
    """
    if len(timestamps) < 2:
        raise ValueError("need at least two timestamps")
    elapsed = timestamps[-1] - timestamps[0]
    if elapsed <= 0:
        raise ValueError("timestamps must increase across the epoch")
    new = round(target * elapsed / (epoch * spacing))
    return max(1, min(new, MAX_TARGET))


class HonestNode:
    """Honest protocol state for one participant.

    ``election`` supplies the certificate rule (``needs_qc``, ``check_vote``,
    ``qc_valid``, ``quorum``, ``cast``). With ``election=None`` the node runs
    plain Nakamoto consensus.
    """

    def __init__(self, node_id: int, keys: KeyPair, reward_keys: KeyPair, election, rng,
                 genesis: Optional[Block] = None, target: int = MAX_TARGET,
                 qc_distance: int = 1, votes_enabled: bool = True):
        self.id = node_id
        self.keys = keys
        self.reward_keys = reward_keys
        self.election = election
        self.rng = rng
        self.target = target
        self.qc_distance = qc_distance
        self.votes_enabled = votes_enabled
        self.tree = BlockTree(genesis or make_genesis())
        self.collector = VoteCollector(election) if election is not None else None
        self.orphans: dict[int, list[Block]] = {}
        self.rejected: Counter = Counter()
        self.tip = self.tree.genesis
        self._candidates: tuple = (self.tip,)
        self._qc_rule = (None if election is None
                         else _KnownVotesRule(election, self.collector.accepted))

    # ------------------------------------------------------------------ views

    def certified(self, block_hash: int) -> bool:
        return (self.election is None or block_hash in self.tree.certified
                or not self.election.needs_qc(self.tree, block_hash))

    def extendable(self, block_hash: int) -> bool:
        if self.election is None:
            return True
        return self.certified(qc_target(self.tree, block_hash, self.qc_distance))

    def tip_height(self) -> int:
        return self.tree.height(self.tip)

    def committed(self, k: int) -> list[int]:
        return commit_rule(self.tree, self.tip, k)

    def _retip(self) -> bool:
        """Re-pick the tip uniformly when the set of best candidates changes."""
        cands = self.tree.longest_candidates(self.extendable)
        if cands == self._candidates:
            return False
        self._candidates = cands
        old = self.tip
        self.tip = cands[0] if len(cands) == 1 else cands[self.rng.randrange(len(cands))]
        return self.tip != old

    # --------------------------------------------------------------- handlers

    def on_mining_success(self, now: float, payload: Optional[Payload] = None,
                          parent: Optional[int] = None) -> Block:
        """Build a block on the current tip. The caller processes and broadcasts it."""
        if parent is None:
            parent = self.tip
        if self.election is None:
            qc = QuorumCertificate(0)
        else:
            target = qc_target(self.tree, parent, self.qc_distance)
            qc = self.tree.certified.get(target)
            if qc is None:
                if self.election.needs_qc(self.tree, target):
                    raise RuntimeError("NoQcYet: tip is not extendable")
                qc = QuorumCertificate(target)
        return make_block(parent, qc, self.reward_keys.pk, self.keys.pk, self.target, now, payload)

    def on_receive_block(self, block: Block, now: float = 0.0):
        """Validate and store ``block`` (and any orphans it unblocks).

        Returns (accepted blocks, votes cast, newly certified hashes).
        """
        accepted, votes, certified = [], [], []
        queue = [block]
        while queue:
            b = queue.pop()
            h = b.hash
            if h in self.tree:
                continue
            why = validate_block(b, self.tree, self.target, self._rule(), self.qc_distance)
            if why is Rejection.MISSING_PARENT:
                self.orphans.setdefault(b.parent_hash, []).append(b)
                continue
            if why is not None:
                self.rejected[why] += 1
                continue
            self.tree.insert(b)
            accepted.append(h)
            if self.election is not None:
                qc = b.parent_qc
                if qc.block_hash not in self.tree.certified and self.election.needs_qc(self.tree, qc.block_hash):
                    self.tree.certified[qc.block_hash] = qc
                    certified.append(qc.block_hash)
                if self.votes_enabled:
                    mine = self.election.cast(self.keys, h, self.tree)
                    votes.extend(mine)
                    for v in mine:
                        self.collector.on_receipt_vote(v, self.tree)
                self.collector.on_block(h, self.tree)
                certified.extend(self._check_quorum(h))
            queue.extend(self.orphans.pop(h, ()))
        if accepted or certified:
            self._retip()
        return accepted, votes, certified

    def on_receive_votes(self, votes: Iterable, now: float = 0.0) -> list[int]:
        """Collect votes; returns hashes that just became certified."""
        if self.collector is None:
            return []
        touched = set()
        for v in votes:
            status = self.collector.on_receipt_vote(v, self.tree)
            if status is VoteStatus.ACCEPTED:
                touched.add(v.block_hash)
            elif status is not VoteStatus.DUPLICATE and status is not VoteStatus.UNKNOWN_BLOCK:
                self.rejected[status] += 1
        certified = []
        for h in sorted(touched):
            certified.extend(self._check_quorum(h))
        if certified:
            self._retip()
        return certified

    def _check_quorum(self, h: int) -> list[int]:
        if h in self.tree.certified or not self.collector.has_quorum(h):
            return []
        self.tree.certified[h] = self.collector.qc(h)
        return [h]

    def _rule(self):
        return self._qc_rule


class _KnownVotesRule:
    """Skip re-verifying votes this node has already accepted."""

    __slots__ = ("election", "known")

    def __init__(self, election, known):
        self.election = election
        self.known = known

    def needs_qc(self, tree, block_hash):
        return self.election.needs_qc(tree, block_hash)

    def qc_valid(self, qc, tree):
        return self.election.qc_valid(qc, tree, self.known)
