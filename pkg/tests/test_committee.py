import math

import numpy as np
import pytest

from crystalsim.chain import QuorumCertificate, Vote
from crystalsim.committee import (ElectionParams, VoteCollector, VoteStatus, VrfElection,
                                  committee_of, election_input, sliding_window, vote_for_block,
                                  window_share_counts)
from crystalsim.crypto import DIGEST_SPACE, keygen, vrf_prove

from helpers import fresh_tree, grow


def _window(W, owner_keys):
    tree = fresh_tree()
    hs = grow(tree, tree.genesis, W + 1, owner_keys)
    return tree, hs[-1]


def test_window_bootstrap_and_layout():
    keys = [keygen(i) for i in range(5)]
    tree = fresh_tree()
    hs = grow(tree, tree.genesis, 6, keys)
    assert sliding_window(tree, hs[3], 5) is None  # height 4: 3 < 5
    w = sliding_window(tree, hs[5], 5)  # height 6
    assert len(w) == 5
    # slot 1 is the parent's miner, slot W the oldest
    assert w.owner(1) == tree.blocks[hs[4]].header.election_pk
    assert w.owner(5) == tree.blocks[hs[0]].header.election_pk
    assert w.slots_of(keys[0].pk) == [5]


def test_window_incremental_matches_walk():
    keys = [keygen(i) for i in range(7)]
    tree = fresh_tree()
    hs = grow(tree, tree.genesis, 40, keys)
    for h in hs:
        sliding_window(tree, h, 10)
    fresh = fresh_tree()
    for h in hs:
        fresh.insert(tree.blocks[h])
    assert sliding_window(fresh, hs[-1], 10) == sliding_window(tree, hs[-1], 10)


def test_owner_of_no_slots_gets_nothing():
    tree, tip = _window(20, [keygen("a")])
    w = sliding_window(tree, tip, 20)
    assert vote_for_block(tip, w, keygen("b"), ElectionParams(20, 10, DIGEST_SPACE)) == []


def test_owner_of_all_slots_full_target():
    k = keygen("a")
    tree, tip = _window(20, [k])
    votes = vote_for_block(tip, sliding_window(tree, tip, 20), k, ElectionParams(20, 10, DIGEST_SPACE))
    assert len(votes) == 20


def test_partial_owner_binomial():
    W, m, own = 3024, 500, 302
    me = keygen("me")
    owners = tuple([me.pk] * own + [keygen("x").pk] * (W - own))
    from crystalsim.committee import SlidingWindow
    params = ElectionParams.from_sizes(W, m)
    counts = [len(vote_for_block(i, SlidingWindow(i, owners), me, params)) for i in range(1000)]
    mean = own * m / W
    sd = math.sqrt(own * (m / W) * (1 - m / W) / 1000)
    assert abs(np.mean(counts) - mean) <= 3 * sd


def test_committee_extremes_and_size():
    from crystalsim.committee import SlidingWindow
    keys = [keygen(i) for i in range(8)]
    owners = tuple(keys[i % 8].pk for i in range(3024))
    assert committee_of(1, SlidingWindow(1, owners), keys, ElectionParams(3024, 500, 0)) == []
    assert len(committee_of(1, SlidingWindow(1, owners), keys, ElectionParams(3024, 500, DIGEST_SPACE))) == 3024
    params = ElectionParams.from_sizes(3024, 500)
    sizes = [len(committee_of(i, SlidingWindow(i, owners), keys, params)) for i in range(300)]
    sd = math.sqrt(3024 * (500 / 3024) * (1 - 500 / 3024) / 300)
    assert abs(np.mean(sizes) - 500) <= 3 * sd


def test_vote_checks():
    W = 12
    keys = [keygen(i) for i in range(3)]
    tree, tip = _window(W, keys)
    election = VrfElection(ElectionParams(W, 6, DIGEST_SPACE))
    v = election.cast(keys[0], tip, tree)[0]
    assert election.check_vote(v, tree) is VoteStatus.ACCEPTED
    x = election_input(tip, v.window_index)
    forged = vrf_prove(keygen("evil").sk, x)
    assert election.check_vote(Vote(v.voter_pk, tip, v.window_index, forged.y, forged.proof),
                               tree) is VoteStatus.BAD_PROOF
    assert election.check_vote(Vote(v.voter_pk, tip, W + 1, v.vrf_y, v.vrf_proof),
                               tree) is VoteStatus.BAD_INDEX
    assert election.check_vote(Vote(keys[1].pk, tip, v.window_index, v.vrf_y, v.vrf_proof),
                               tree) is VoteStatus.WRONG_OWNER
    assert election.check_vote(Vote(v.voter_pk, 777, 1, v.vrf_y, v.vrf_proof),
                               tree) is VoteStatus.UNKNOWN_BLOCK
    tight = VrfElection(ElectionParams(W, 6, 0))
    assert tight.check_vote(v, tree) is VoteStatus.TARGET_MISS


def test_collector_reaches_quorum_at_boundary():
    W, m = 600, 500
    keys = [keygen(f"c{i}") for i in range(W)]
    tree, tip = _window(W, keys)
    election = VrfElection(ElectionParams(W, m, DIGEST_SPACE))
    col = VoteCollector(election)
    votes = [v for k in keys for v in election.cast(k, tip, tree)]
    for i, v in enumerate(votes[:251]):
        assert col.has_quorum(tip) == (i >= 251)
        assert col.on_receipt_vote(v, tree) is VoteStatus.ACCEPTED
    assert col.has_quorum(tip)
    assert col.on_receipt_vote(votes[0], tree) is VoteStatus.DUPLICATE
    qc = col.qc(tip)
    assert qc.share_count == 251 and election.qc_valid(qc, tree)


def test_collector_buffers_early_votes():
    W = 6
    keys = [keygen(i) for i in range(2)]
    tree, tip = _window(W, keys)
    election = VrfElection(ElectionParams(W, 3, DIGEST_SPACE))
    # a child of tip exists elsewhere; its votes arrive first
    other = fresh_tree()
    for h in tree.chain(tip)[1:]:
        other.insert(tree.blocks[h])
    child = grow(other, tip, 1, keys)[0]
    votes = election.cast(keys[0], child, other)
    col = VoteCollector(election)
    assert all(col.on_receipt_vote(v, tree) is VoteStatus.UNKNOWN_BLOCK for v in votes)
    tree.insert(other.blocks[child])
    assert all(s is VoteStatus.ACCEPTED for s in col.on_block(child, tree))


def test_share_counts():
    honest = {b"h"}
    assert window_share_counts([(b"h", 1), (b"a", 2), (b"h", 3)], honest) == (2, 1)
