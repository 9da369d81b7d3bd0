"""Discrete-event engine: Poisson mining, bounded-delay broadcast, honest nodes
and one rushing adversary.

Events are kept in a heap keyed on (time, sequence number), so simultaneous
events run in the order they were scheduled and every run is a pure function
of its config. Proof of work is abstracted to exponential inter-arrival times
(blocks still carry valid headers, mined against the trivial target).
"""
from __future__ import annotations

import heapq
import random
from typing import Optional

from ..chain import MAX_TARGET, make_genesis
from ..committee import ElectionParams, VrfElection
from ..crypto import keygen
from ..node import HonestNode
from .adversary import Adversary, Release
from .config import SimConfig
from .election import InjectedElection, split_shares
from .trace import BlockMeta, SimTrace

ADVERSARY = -1
_MINE, _DELIVER, _ADV_RECV = 0, 1, 2


class Simulation:
    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        seed = cfg.seed
        self.rng = random.Random(f"{seed}/engine")
        self.fail_rng = random.Random(f"{seed}/failures")
        genesis = make_genesis()
        n = cfg.n_honest
        ekeys = [keygen(f"{seed}/honest/{i}/election") for i in range(n)]
        rkeys = [keygen(f"{seed}/honest/{i}/reward") for i in range(n)]
        adv_e, adv_r = keygen(f"{seed}/adversary/election"), keygen(f"{seed}/adversary/reward")
        self.reward_pk_of = {k.pk: r.pk for k, r in zip(ekeys, rkeys)}
        self.reward_pk_of[adv_e.pk] = adv_r.pk

        if cfg.protocol == "nc":
            election = None
        elif cfg.election == "injected":
            honest_shares, adv_shares = split_shares(cfg.m, cfg.alpha, n)
            table = {k.pk: s for k, s in zip(ekeys, honest_shares)}
            if cfg.alpha > 0 and adv_shares:
                table[adv_e.pk] = adv_shares
            election = InjectedElection(cfg.m, table, adv_e.pk if cfg.alpha > 0 else None,
                                        bootstrap=cfg.W)
        else:
            election = VrfElection(ElectionParams.from_sizes(cfg.W, cfg.m))
        self.election = election

        n_off = round(cfg.gamma_off * n)
        self.nodes = [
            HonestNode(i, ekeys[i], rkeys[i], election, random.Random(f"{seed}/node/{i}"),
                       genesis, MAX_TARGET, cfg.qc_distance, votes_enabled=i >= n_off)
            for i in range(n)
        ]
        self.adversary: Optional[Adversary] = None
        if cfg.alpha > 0:
            view = HonestNode(ADVERSARY, adv_e, adv_r, election, random.Random(f"{seed}/node/adv"),
                              genesis, MAX_TARGET, cfg.qc_distance)
            self.adversary = Adversary(cfg.strategy, view, election, cfg.max_deficit, cfg.k)

        self.heap: list = []
        self.seq = 0
        self.trace = SimTrace(cfg.to_dict())
        self.trace.tip_log = {i: [(0.0, 0)] for i in range(n)}
        self.trace.commits = {i: {0: genesis.hash} for i in range(n)}
        self._tips = [nd.tip for nd in self.nodes]
        self._committed_height = [0] * n
        self._global_commits = {0: genesis.hash}
        self._certified_seen: set = set()
        self.mined = 0
        self.failures = 0
        self.mining_end = 0.0

    # ------------------------------------------------------------ scheduling

    def _push(self, t: float, kind: int, *payload):
        heapq.heappush(self.heap, (t, self.seq, kind, payload))
        self.seq += 1

    def _broadcast(self, sender: int, now: float, blocks: list, votes: list):
        """Honest broadcast: instantly to the adversary, within delta to peers."""
        if not blocks and not votes:
            return
        blocks, votes = tuple(blocks), tuple(votes)
        if self.adversary is not None:
            self._push(now, _ADV_RECV, blocks, votes)
        peers = [i for i in range(self.cfg.n_honest) if i != sender]
        if not peers:
            return
        delta = self.cfg.delta
        if self.cfg.delay_model == "fixed" or delta == 0:
            self._push(now + delta, _DELIVER, tuple(peers), blocks, votes)
        else:
            for i in peers:
                self._push(now + self.rng.uniform(0.0, delta), _DELIVER, (i,), blocks, votes)

    def _adversary_release(self, now: float, rel: Release):
        if not rel:
            return
        if rel.blocks:
            self.trace.events.append(("release", now, tuple(b.hash for b in rel.blocks)))
            for b in rel.blocks:
                meta = self.trace.blocks[b.hash]
                if meta.published_at is None:
                    meta.published_at = now
        self._push(now, _DELIVER, tuple(range(self.cfg.n_honest)), tuple(rel.blocks),
                   tuple(rel.votes))

    # ------------------------------------------------------------ bookkeeping

    def _record_block(self, blk, miner: int, now: float, tree, failed=False):
        h = blk.hash
        height = tree.height(blk.parent_hash) + 1
        self.trace.blocks[h] = BlockMeta(h, blk.parent_hash, height, miner,
                                         miner != ADVERSARY, now,
                                         now if miner != ADVERSARY else None,
                                         committee_failure=failed)
        self.trace.events.append(("mine", now, miner, h, height, blk.parent_hash))

    def _after_node(self, i: int, now: float, accepted, votes, certified):
        ev = self.trace.events
        node = self.nodes[i]
        for h in accepted:
            ev.append(("deliver", now, i, h))
        if votes:
            ev.append(("vote", now, i, votes[0].block_hash, sum(v.shares for v in votes)))
        for h in certified:
            ev.append(("qc", now, i, h))
            if h not in self._certified_seen:
                self._certified_seen.add(h)
                meta = self.trace.blocks.get(h)
                if meta is not None:
                    meta.certified_at = now
        if node.tip != self._tips[i]:
            self._tips[i] = node.tip
            height = node.tip_height()
            self.trace.tip_log[i].append((now, height))
            ev.append(("tip", now, i, node.tip, height))
            self._update_commits(i, now)

    def _update_commits(self, i: int, now: float):
        node, tree, k = self.nodes[i], self.nodes[i].tree, self.cfg.k
        tip = node.tip
        tip_h = tree.height(tip)
        hc = max(tip_h - (k - 1), 0)
        prev = self._committed_height[i]
        mine = self.trace.commits[i]
        h = tree.ancestor(tip, hc)
        new = []
        for height in range(hc, prev, -1):
            new.append((height, h))
            h = tree.parent(h)
        anchor_h = min(prev, hc)
        anchor = h if hc >= prev else tree.ancestor(tip, anchor_h)
        if anchor != mine[anchor_h]:
            self._conflict(i, now, anchor_h, mine[anchor_h], anchor)
        for height, h in reversed(new):
            mine[height] = h
            self.trace.events.append(("commit", now, i, h, height))
            seen = self._global_commits.setdefault(height, h)
            if seen != h:
                self._conflict(i, now, height, seen, h)
        self._committed_height[i] = max(prev, hc)

    def _conflict(self, i, now, height, old, new):
        self.trace.conflicts.append((now, i, height, old, new))
        self.trace.events.append(("conflict", now, i, height, old, new))

    # ---------------------------------------------------------------- events

    def _mine(self, now: float):
        cfg = self.cfg
        self.mined += 1
        if self.adversary is not None and self.rng.random() < cfg.alpha:
            failed = self.fail_rng.random() < cfg.epsilon
            adv = self.adversary
            blk, rel = adv.on_mine(now, failed)
            if blk is None:
                self.trace.events.append(("idle", now, ADVERSARY))
            else:
                self.failures += failed
                self._record_block(blk, ADVERSARY, now, adv.tree, failed)
            self._adversary_release(now, rel)
            return
        i = self.rng.randrange(cfg.n_honest)
        node = self.nodes[i]
        blk = node.on_mining_success(now)
        self._record_block(blk, i, now, node.tree)
        accepted, votes, certified = node.on_receive_block(blk, now)
        self._after_node(i, now, accepted, votes, certified)
        self._broadcast(i, now, [blk], votes)

    def _deliver(self, now: float, recipients, blocks, votes):
        for i in recipients:
            node = self.nodes[i]
            accepted, cast, certified = [], [], []
            for b in blocks:
                a, c, q = node.on_receive_block(b, now)
                accepted += a
                cast += c
                certified += q
            if votes:
                certified += node.on_receive_votes(votes, now)
            self._after_node(i, now, accepted, cast, certified)
            if cast:
                self._broadcast(i, now, [], cast)

    def _adv_recv(self, now: float, blocks, votes):
        rel = self.adversary.on_honest_message(blocks, votes, now)
        if self.cfg.strategy == "honest":
            if rel.votes:
                self._push(now, _DELIVER, tuple(range(self.cfg.n_honest)), (), tuple(rel.votes))
            return
        self._adversary_release(now, rel)

    def run(self) -> SimTrace:
        cfg = self.cfg
        self._push(self.rng.expovariate(cfg.lam), _MINE)
        now = 0.0
        while self.heap:
            now, _, kind, payload = heapq.heappop(self.heap)
            if kind == _MINE:
                if cfg.horizon_time is not None and now > cfg.horizon_time:
                    continue
                self.mining_end = now
                self._mine(now)
                if self.mined < cfg.horizon_blocks:
                    self._push(now + self.rng.expovariate(cfg.lam), _MINE)
            elif kind == _DELIVER:
                self._deliver(now, *payload)
            else:
                self._adv_recv(now, *payload)
        self.trace.summary = self._summary(now)
        return self.trace

    def _summary(self, end: float) -> dict:
        tr = self.trace
        honest = sum(1 for b in tr.blocks.values() if b.honest)
        adv_blocks = len(tr.blocks) - honest
        node0 = self.nodes[0]
        chain = node0.tree.chain(node0.tip)[1:]
        main_adv = sum(1 for h in chain if not tr.blocks[h].honest)
        heights: dict = {}
        for b in tr.blocks.values():
            heights[b.height] = heights.get(b.height, 0) + 1
        adv = self.adversary
        rejected = sum(sum(nd.rejected.values()) for nd in self.nodes)
        return {
            "schema": "crystalsim.summary/1",
            "seed": self.cfg.seed,
            "mining_events": self.mined,
            "honest_blocks": honest,
            "adversary_blocks": adv_blocks,
            "adversary_idle": adv.wasted if adv else 0,
            "committee_failures": self.failures,
            "max_height": max(nd.tree.max_height for nd in self.nodes),
            "main_chain_length": len(chain),
            "main_chain_adversary": main_adv,
            "fork_heights": sum(1 for c in heights.values() if c > 1),
            "max_private_lead": adv.max_private_lead if adv else 0,
            "conflicts": len(tr.conflicts),
            "rejected": rejected,
            "mining_end": self.mining_end,
            "end_time": end,
            "trace_digest": tr.event_digest(),
        }


def run(cfg: SimConfig) -> SimTrace:
    return Simulation(cfg).run()
