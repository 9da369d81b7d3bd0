"""Adversary strategies for the node-level simulator.

The adversary is rushing: it sees every honest message the moment it is
sent. It keeps a full protocol view (an ``HonestNode`` with voting switched
off) and decides what to mine on and when to release blocks.

``honest``  behaves like an honest node.
``selfish`` follows the Eyal-Sirer policy, except that under Crystal it can
            only extend a private block that is certified, which without a
            committee failure leaves it at a private lead of one.
``private`` forks off and withholds everything, releasing only when its
            branch is strictly longer than the public chain and the public
            chain has grown k blocks past the fork, i.e. the release would
            revert a k-deep block; it abandons the branch once
            ``max_deficit`` blocks behind.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..chain import Block
from ..node import HonestNode


@dataclass
class Release:
    blocks: list = field(default_factory=list)
    votes: list = field(default_factory=list)

    def __bool__(self):
        return bool(self.blocks or self.votes)


class Adversary:
    def __init__(self, strategy: str, view: HonestNode, election, max_deficit: int = 3,
                 k: int = 6):
        self.strategy = strategy
        self.k = k
        self.fork_height = 0
        self.view = view
        self.election = election
        self.max_deficit = max_deficit
        view.votes_enabled = strategy == "honest"
        self.branch: list[int] = []
        self.unpublished: list[Block] = []
        self.ballots: dict[int, list] = {}
        self.public_height = 0
        self.racing = False
        self.max_private_lead = 0
        self.wasted = 0
        self.mined = 0
        self.released = 0
        self.abandoned = 0

    @property
    def tree(self):
        return self.view.tree

    def _reset(self):
        self.branch = []
        self.unpublished = []
        self.racing = False

    def _release(self, upto_height: int | None = None) -> Release:
        out = Release()
        keep = []
        for b in self.unpublished:
            h = b.hash
            if upto_height is None or self.tree.height(h) <= upto_height:
                out.blocks.append(b)
                out.votes.extend(self.ballots.pop(h, ()))
                self.public_height = max(self.public_height, self.tree.height(h))
            else:
                keep.append(b)
        self.released += len(out.blocks)
        self.unpublished = keep
        return out

    # ---------------------------------------------------------------- mining

    def on_mine(self, now: float, failed: bool) -> tuple[Block | None, Release]:
        """Handle an adversary mining success. Returns (new block or None, release)."""
        if self.strategy == "honest":
            blk = self.view.on_mining_success(now)
            if failed and self.election is not None:
                self.election.failures.add(blk.hash)
            _, votes, _ = self.view.on_receive_block(blk, now)
            self.mined += 1
            self.public_height = max(self.public_height, self.tree.height(blk.hash))
            return blk, Release([blk], votes)

        if self.branch:
            parent = self.branch[-1]
            if not self.view.extendable(parent):
                self.wasted += 1
                return None, Release()
        else:
            parent = self.view.tip
            self.fork_height = self.tree.height(parent)
        blk = self.view.on_mining_success(now, parent=parent)
        h = blk.hash
        if failed and self.election is not None:
            self.election.failures.add(h)
        self.view.on_receive_block(blk, now)
        if self.election is not None:
            own = self.election.cast(self.view.keys, h, self.tree)
            self.ballots[h] = own
            self.view.on_receive_votes(own, now)
        self.mined += 1
        self.branch.append(h)
        self.unpublished.append(blk)
        self.max_private_lead = max(self.max_private_lead, len(self.unpublished))

        height = self.tree.height(h)
        if self.strategy == "selfish":
            if self.racing:
                rel = self._release()
                self._reset()
                return blk, rel
            return blk, Release()
        # private
        if height > self.public_height and self.public_height - self.fork_height >= self.k:
            rel = self._release()
            self._reset()
            return blk, rel
        return blk, Release()

    # ------------------------------------------------------------- receiving

    def on_honest_message(self, blocks, votes, now: float) -> Release:
        new_height = self.public_height
        cast = []
        for b in blocks:
            accepted, mine, _ = self.view.on_receive_block(b, now)
            cast.extend(mine)
            for h in accepted:
                new_height = max(new_height, self.tree.height(h))
        if votes:
            self.view.on_receive_votes(votes, now)
        if self.strategy == "honest":
            self.public_height = new_height
            return Release([], cast)
        if new_height <= self.public_height:
            return Release()
        self.public_height = new_height
        if not self.branch:
            return Release()
        priv = self.tree.height(self.branch[-1])
        lead = priv - self.public_height
        if self.strategy == "selfish":
            if lead < 0:
                self._reset()
                return Release()
            if lead == 0:
                rel = self._release()
                self.racing = True
                return rel
            if lead == 1:
                rel = self._release()
                self._reset()
                return rel
            return self._release(upto_height=self.public_height)
        # private
        if -lead > self.max_deficit:
            self.abandoned += 1
            self._reset()
        return Release()
