import io
import math
from collections import Counter

import numpy as np
import pytest

from crystalsim.sim import ConfigError, SimConfig, run
from crystalsim.sim.election import split_shares
from crystalsim.sim.stats import (commit_conflicts, converged_block_stats,
                                  honest_progress_violations)
from crystalsim.sim.trace import read_jsonl


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError, match=r"^alpha:"):
        SimConfig(alpha=0.5)
    with pytest.raises(ConfigError, match=r"^strategy:"):
        SimConfig(strategy="sneaky")
    with pytest.raises(ConfigError, match=r"^W:"):
        SimConfig(election="vrf", W=4, m=10)
    with pytest.raises(ConfigError, match=r"^bogus:"):
        SimConfig.from_dict({"bogus": 1})


def test_config_roundtrip():
    cfg = SimConfig(alpha=0.2, delta=5.0, seed=9)
    assert SimConfig.from_dict(cfg.to_dict()) == cfg


def test_split_shares():
    honest, adv = split_shares(100, 0.35, 3)
    assert adv == 35 and sum(honest) == 65 and max(honest) - min(honest) <= 1


def test_no_adversary_no_delay_single_chain():
    tr = run(SimConfig(n_honest=2, horizon_blocks=10 ** 4, seed=1))
    s = tr.summary
    assert s["fork_heights"] == 0
    assert s["main_chain_length"] == s["honest_blocks"] == 10 ** 4


def test_natural_fork_rate():
    lam, delta, n = 1 / 600, 10.0, 5000
    tr = run(SimConfig(n_honest=3, lam=lam, delta=delta, horizon_blocks=n, seed=2))
    times = [b.mined_at for b in tr.honest_blocks()]
    close = sum(1 for a, b in zip(times, times[1:]) if b - a <= 2 * delta)
    p = 1 - math.exp(-2 * lam * delta)
    sd = math.sqrt(p * (1 - p) / (n - 1))
    assert abs(close / (n - 1) - p) <= 3 * sd
    # every natural fork needs two honest blocks within 2*delta
    assert tr.summary["fork_heights"] <= close
    assert commit_conflicts(tr) == 0


def test_same_seed_same_trace():
    cfg = SimConfig(n_honest=2, alpha=0.3, delta=10.0, strategy="selfish", horizon_blocks=500,
                    delay_model="uniform", seed=4)
    a, b = run(cfg), run(cfg)
    assert a.events == b.events and a.summary_json() == b.summary_json()
    assert run(cfg.replace(seed=5)).digest() != a.digest()


def test_converged_fraction_matches_eta_squared():
    lam, delta, n = 1 / 600, 30.0, 6000  # beta = 1, lam * delta = 0.05
    tr = run(SimConfig(n_honest=2, lam=lam, delta=delta, horizon_blocks=n, seed=6))
    st = converged_block_stats(tr)
    q = math.exp(-4 * lam * delta)
    sd = math.sqrt(q * (1 - q) / n)
    assert abs(st.count / st.honest_blocks - q) <= 3 * sd
    assert st.shared_height == 0


def test_delta_zero_every_honest_block_converged():
    tr = run(SimConfig(n_honest=2, horizon_blocks=300, seed=3))
    st = converged_block_stats(tr)
    assert st.count == st.honest_blocks


def test_rewards_track_power_share():
    n = 6000
    tr = run(SimConfig(n_honest=3, horizon_blocks=n, seed=8))
    miners = Counter(b.miner for b in tr.blocks.values())
    sd = math.sqrt((1 / 3) * (2 / 3) / n)
    for i in range(3):
        assert abs(miners[i] / n - 1 / 3) <= 3 * sd


@pytest.mark.parametrize("alpha", [0.2, 0.45])
def test_crystal_selfish_lead_is_one_without_failures(alpha):
    tr = run(SimConfig(n_honest=2, alpha=alpha, strategy="selfish", horizon_blocks=3000, seed=10))
    assert tr.summary["max_private_lead"] == 1
    assert tr.summary["committee_failures"] == 0


def test_committee_failures_allow_withholding():
    tr = run(SimConfig(n_honest=2, alpha=0.45, strategy="selfish", epsilon=0.5,
                       horizon_blocks=3000, seed=11))
    assert tr.summary["committee_failures"] > 0
    assert tr.summary["max_private_lead"] > 1


def test_nc_selfish_builds_long_leads():
    tr = run(SimConfig(n_honest=2, alpha=0.4, protocol="nc", strategy="selfish",
                       horizon_blocks=3000, seed=12))
    assert tr.summary["max_private_lead"] > 2


def test_private_attacker_cannot_revert_commits():
    for seed in range(4):
        tr = run(SimConfig(n_honest=2, alpha=0.35, delta=10.0, strategy="private", k=2,
                           horizon_blocks=2000, seed=seed))
        assert commit_conflicts(tr) == 0
        assert honest_progress_violations(tr) == []


def test_offline_majority_stalls_certification():
    tr = run(SimConfig(n_honest=2, gamma_off=0.5, horizon_blocks=200, seed=13))
    # one node's 50 of 100 shares is not a quorum: nothing past height 1 is extendable
    assert tr.summary["max_height"] == 1


def test_vrf_election_mode_runs():
    tr = run(SimConfig(n_honest=3, election="vrf", W=12, m=6, horizon_blocks=150, seed=14))
    s = tr.summary
    assert s["rejected"] == 0 and s["conflicts"] == 0
    assert s["max_height"] > 12


def test_nc_runs_without_certificates():
    tr = run(SimConfig(n_honest=2, protocol="nc", delta=5.0, horizon_blocks=500, seed=15))
    assert tr.summary["main_chain_length"] > 450


def test_trace_jsonl_roundtrip():
    tr = run(SimConfig(n_honest=2, alpha=0.2, strategy="selfish", horizon_blocks=200, seed=16))
    buf = io.StringIO()
    tr.write_jsonl(buf)
    buf.seek(0)
    header, events, summary = read_jsonl(buf)
    assert header["config"]["seed"] == 16
    assert len(events) == len(tr.events)
    assert summary == tr.summary
    with pytest.raises(ValueError):
        read_jsonl(io.StringIO('{"record": "header", "schema": "other"}\n'))


def test_horizon_time_stops_mining():
    tr = run(SimConfig(n_honest=2, horizon_blocks=10 ** 6, horizon_time=6000.0, seed=17))
    assert tr.summary["mining_end"] <= 6000.0
    assert tr.summary["mining_events"] < 100
