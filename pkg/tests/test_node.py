import math
import random

import numpy as np
import pytest

from crystalsim.chain import (MAX_TARGET, Ballot, QuorumCertificate, Rejection, make_block,
                              make_genesis)
from crystalsim.crypto import keygen
from crystalsim.node import RewardConfig, HonestNode, adjust_difficulty, apply_rewards
from crystalsim.sim.election import InjectedElection


def _pair(bootstrap=0, m=10):
    g = make_genesis()
    ek = [keygen(f"e{i}") for i in range(2)]
    rk = [keygen(f"r{i}") for i in range(2)]
    el = InjectedElection(m, {ek[0].pk: 5, ek[1].pk: 5}, bootstrap=bootstrap)
    nodes = [HonestNode(i, ek[i], rk[i], el, random.Random(i), g) for i in range(2)]
    return nodes, el


def _deliver(src, dst, blk, now=0.0):
    """Full exchange: dst receives the block, both swap votes."""
    _, v1, _ = dst.on_receive_block(blk, now)
    src.on_receive_votes(v1, now)
    dst.on_receive_votes(src.collector.votes.get(blk.hash, {}).values(), now)


def test_certified_tip_extends_by_one():
    (a, b), _ = _pair()
    blk = a.on_mining_success(1.0)
    a.on_receive_block(blk)
    _deliver(a, b, blk)
    assert a.certified(blk.hash) and a.tip == blk.hash
    nxt = a.on_mining_success(2.0)
    assert nxt.parent_hash == blk.hash and nxt.parent_qc.share_count == 10


def test_uncertified_tip_mines_on_parent():
    (a, b), _ = _pair()
    b1 = a.on_mining_success(1.0)
    a.on_receive_block(b1)
    _deliver(a, b, b1)
    b2 = a.on_mining_success(2.0)
    a.on_receive_block(b2)  # a alone holds 5 of 10 shares: no quorum
    assert not a.certified(b2.hash)
    assert a.tip == b1.hash
    b3 = a.on_mining_success(3.0)
    assert b3.parent_hash == b1.hash  # sibling of b2: equal heights are possible
    with pytest.raises(RuntimeError, match="NoQcYet"):
        a.on_mining_success(3.0, parent=b2.hash)


def test_bootstrap_block_needs_no_qc():
    (a, b), _ = _pair(bootstrap=3)
    blk = a.on_mining_success(1.0)
    assert blk.parent_qc.votes == ()
    acc, votes, _ = b.on_receive_block(blk)
    assert acc == [blk.hash] and votes == []
    assert b.extendable(blk.hash)


def test_duplicate_block_is_noop():
    (a, b), _ = _pair()
    blk = a.on_mining_success(1.0)
    assert b.on_receive_block(blk)[0] == [blk.hash]
    assert b.on_receive_block(blk) == ([], [], [])


def test_votes_for_both_fork_blocks():
    (a, b), _ = _pair()
    x = a.on_mining_success(1.0)
    y = b.on_mining_success(1.5)
    _, vx, _ = b.on_receive_block(x)
    _, vy, _ = b.on_receive_block(y)
    assert vx and vy and b.tree.height(x.hash) == b.tree.height(y.hash) == 1


def test_bad_qc_dropped_tip_unchanged():
    (a, b), _ = _pair()
    g = b.tree.genesis
    b1 = a.on_mining_success(1.0)
    a.on_receive_block(b1)
    _deliver(a, b, b1)
    tip = b.tip
    fake = QuorumCertificate.build(b1.hash, [Ballot(keygen("x").pk, b1.hash, 10)])
    bad = make_block(b1.hash, fake, b"r" * 32, b"e" * 32, MAX_TARGET, 5.0)
    assert b.on_receive_block(bad)[0] == []
    assert b.rejected[Rejection.BAD_QC] == 1 and b.tip == tip


def test_orphan_connected_when_parent_arrives():
    (a, b), _ = _pair(bootstrap=5)
    b1 = a.on_mining_success(1.0)
    a.on_receive_block(b1)
    b2 = a.on_mining_success(2.0)
    a.on_receive_block(b2)
    assert b.on_receive_block(b2)[0] == []
    assert b.on_receive_block(b1)[0] == [b1.hash, b2.hash]
    assert b.tip == b2.hash


def test_commit_identical_for_identical_trees():
    (a, b), _ = _pair(bootstrap=100)
    for t in range(8):
        blk = a.on_mining_success(float(t))
        a.on_receive_block(blk)
        b.on_receive_block(blk)
    assert a.committed(6) == b.committed(6)
    assert len(a.committed(6)) == 8 + 1 - 5


def test_difficulty_identity_and_doubling():
    target = 2 ** 200
    assert adjust_difficulty([0.0, 2016 * 600.0], target) == target
    assert adjust_difficulty([0.0, 2 * 2016 * 600.0], target) == 2 * target


def test_difficulty_drift_recovers():
    rng = np.random.default_rng(5)
    target = 2 ** 220
    rate = 1.2 / 600  # hash power grew 20%
    times = np.concatenate([[0.0], np.cumsum(rng.exponential(1 / rate, 2016))])
    new = adjust_difficulty(times, target)
    rate_after = rate * new / target
    gaps = rng.exponential(1 / rate_after, 2016)
    assert abs(gaps.mean() - 600) <= 0.05 * 600


def test_rewards_direct_formula():
    cfg = RewardConfig(block_reward=50, tx_fees=2, vote_reward=0.01, inclusion_reward=0.001)
    voters = [keygen(f"v{i}") for i in range(300)]
    reward_of = {k.pk: keygen(f"rv{i}").pk for i, k in enumerate(voters)}
    g = make_genesis()
    qc = QuorumCertificate.build(g.hash, [Ballot(k.pk, g.hash, 1) for k in voters])
    miner = keygen("miner").pk
    blk = make_block(g.hash, qc, miner, miner, MAX_TARGET, 1.0)
    led = apply_rewards([g, blk], cfg, reward_of)
    assert led.balances[miner] == pytest.approx(52 + 300 * 0.001)
    assert sum(led.balances[r] for r in reward_of.values()) == pytest.approx(300 * 0.01)
    assert led.total() == pytest.approx(led.minted)


def test_rewards_empty_qc_and_escrow():
    cfg = RewardConfig()
    g = make_genesis()
    miner = keygen("m").pk
    blk = make_block(g.hash, QuorumCertificate(g.hash), miner, miner, MAX_TARGET, 1.0)
    led = apply_rewards([g, blk], cfg, {})
    assert dict(led.balances) == {miner: 50.0}
    qc = QuorumCertificate.build(blk.hash, [Ballot(b"u" * 32, blk.hash, 4)])
    blk2 = make_block(blk.hash, qc, miner, miner, MAX_TARGET, 2.0)
    led = apply_rewards([g, blk, blk2], cfg, {})
    assert led.escrow == pytest.approx(0.04) and led.unknown_voters == 1
    assert led.total() == pytest.approx(led.minted)


def test_reward_config_rejects_negative():
    with pytest.raises(ValueError):
        RewardConfig(block_reward=-1)
