"""Checks and statistics computed from simulation traces."""
from __future__ import annotations

import bisect
from dataclasses import dataclass

from ..analytics import SafetyParams, converged_lower_bound
from .trace import SimTrace

_EPS = 1e-9


@dataclass
class ConvergedStats:
    honest_blocks: int
    count: int
    """Honest blocks with no other honest block mined within 2*delta."""
    shared_height: int
    """Converged blocks that share their height with another honest block."""
    matched: int
    """Converged blocks with an adversary block at the same height."""
    unmatched: int
    duration: float
    bound: float
    """(1 - slack) * eta^2 * beta * lam * duration."""

    @property
    def meets_bound(self) -> bool:
        return self.count >= self.bound


def converged_block_stats(trace: SimTrace, delta: float | None = None,
                          slack: float = 0.2) -> ConvergedStats:
    cfg = trace.config
    delta = cfg["delta"] if delta is None else delta
    honest = trace.honest_blocks()
    times = [b.mined_at for b in honest]
    honest_per_height: dict = {}
    adv_heights = set()
    for b in trace.blocks.values():
        if b.honest:
            honest_per_height[b.height] = honest_per_height.get(b.height, 0) + 1
        else:
            adv_heights.add(b.height)
    count = shared = matched = 0
    for i, b in enumerate(honest):
        before = i > 0 and times[i] - times[i - 1] <= 2 * delta
        after = i + 1 < len(honest) and times[i + 1] - times[i] <= 2 * delta
        if before or after:
            continue
        count += 1
        if honest_per_height[b.height] > 1:
            shared += 1
        if b.height in adv_heights:
            matched += 1
    duration = trace.summary.get("mining_end", times[-1] if times else 0.0)
    params = SafetyParams(cfg["alpha"], cfg["lam"], delta, slack, cfg["k"])
    bound = converged_lower_bound(params, duration)
    return ConvergedStats(len(honest), count, shared, matched, count - matched, duration, bound)


def honest_progress_violations(trace: SimTrace, delta: float | None = None) -> list[tuple]:
    """Honest blocks B (height l, mined at t) for which some honest node's tip
    is still below height l at time t + 2*delta.

    Returns (block hash, node, tip height at the deadline) per violation.
    """
    delta = trace.config["delta"] if delta is None else delta
    logs = {}
    for node, entries in trace.tip_log.items():
        logs[node] = ([t for t, _ in entries], [h for _, h in entries])
    out = []
    for b in trace.honest_blocks():
        deadline = b.mined_at + 2 * delta + _EPS
        for node, (ts, hs) in logs.items():
            j = bisect.bisect_right(ts, deadline) - 1
            if hs[j] < b.height:
                out.append((b.hash, node, hs[j]))
    return out


def commit_conflicts(trace: SimTrace) -> int:
    """Heights at which two k-deep commits disagree, across nodes and over time.

    Cross-node disagreement is re-derived from the per-node commit maps;
    a node reverting its own committed block is taken from the engine's log.
    """
    seen: dict = {}
    bad = set()
    for node in sorted(trace.commits):
        for height, h in trace.commits[node].items():
            if seen.setdefault(height, h) != h:
                bad.add(height)
    bad.update(c[2] for c in trace.conflicts)
    return len(bad)
