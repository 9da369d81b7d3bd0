from crystalsim.sim.stats import commit_conflicts, converged_block_stats, honest_progress_violations
from crystalsim.sim.trace import BlockMeta, SimTrace


def _trace(blocks, tip_log, delta=10.0):
    cfg = {"alpha": 0.0, "lam": 1 / 600, "delta": delta, "k": 6}
    tr = SimTrace(cfg, blocks={b.hash: b for b in blocks}, tip_log=tip_log)
    tr.summary = {"mining_end": max(b.mined_at for b in blocks)}
    return tr


def test_converged_counts_isolated_blocks():
    bl = [BlockMeta(1, 0, 1, 0, True, 100.0), BlockMeta(2, 0, 1, 1, True, 110.0),
          BlockMeta(3, 1, 2, 0, True, 500.0), BlockMeta(4, 3, 3, -1, False, 700.0)]
    st = converged_block_stats(_trace(bl, {0: [(0.0, 0)]}))
    assert st.honest_blocks == 3 and st.count == 1 and st.shared_height == 0


def test_progress_violation_detected():
    bl = [BlockMeta(1, 0, 1, 0, True, 100.0)]
    ok = _trace(bl, {0: [(0.0, 0), (100.0, 1)], 1: [(0.0, 0), (110.0, 1)]})
    assert honest_progress_violations(ok) == []
    late = _trace(bl, {0: [(0.0, 0), (100.0, 1)], 1: [(0.0, 0), (130.0, 1)]})
    assert honest_progress_violations(late) == [(1, 1, 0)]


def test_commit_conflicts_cross_node():
    tr = _trace([BlockMeta(1, 0, 1, 0, True, 1.0)], {})
    tr.commits = {0: {0: 0, 1: 11}, 1: {0: 0, 1: 12}}
    assert commit_conflicts(tr) == 1
    tr.commits = {0: {0: 0, 1: 11}, 1: {0: 0, 1: 11}}
    assert commit_conflicts(tr) == 0
    tr.conflicts = [(5.0, 0, 3, 1, 2)]
    assert commit_conflicts(tr) == 1
