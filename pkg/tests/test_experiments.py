import math

import numpy as np
import pytest

from crystalsim.analytics import (double_spend_prob_crystal, double_spend_prob_nc,
                                  offline_failure_prob, selfish_revenue_crystal, CommitteeModel)
from crystalsim.sim.experiments import (_race_plain_delta0, double_spend_experiment,
                                        offline_experiment, selfish_mining_experiment, wilson_ci,
                                        withholding_experiment)


def test_wilson_ci():
    lo, hi = wilson_ci(50, 100)
    assert lo < 0.5 < hi
    assert wilson_ci(0, 0) == (0.0, 1.0)
    assert wilson_ci(0, 1000)[0] == 0


def test_selfish_crystal_alpha_04():
    r = selfish_mining_experiment(0.4, "crystal", 0.5, 10 ** 6, seed=1)
    assert abs(r.revenue - 0.3143) <= 0.005
    assert r.max_private_lead == 1


def test_selfish_nc_alpha_04():
    r = selfish_mining_experiment(0.4, "nc", 0.5, 10 ** 6, seed=1)
    assert abs(r.revenue - 0.526) <= 0.01


def test_selfish_crystal_under_alpha():
    for a in (0.1, 0.25, 0.45):
        r = selfish_mining_experiment(a, "crystal", 0.5, 2 * 10 ** 5, seed=2)
        assert r.revenue <= a + 0.005
        assert abs(r.revenue - selfish_revenue_crystal(a)) <= 0.01


def test_selfish_with_delay_uses_engine():
    r = selfish_mining_experiment(0.3, "crystal", 0.5, 1000, delta=10.0, seed=3)
    assert r.events == 1000 and r.max_private_lead == 1


def test_selfish_rejects_bad_input():
    with pytest.raises(ValueError):
        selfish_mining_experiment(0.5)
    with pytest.raises(ValueError):
        selfish_mining_experiment(0.2, "pos")


def test_double_spend_nc_cell():
    r = double_spend_experiment(0.1, 2, "nc", trials=10 ** 6, seed=1)
    assert r.ci_low <= double_spend_prob_nc(0.1, 2) <= r.ci_high
    assert r.ci_low <= 0.056 <= r.ci_high


def test_double_spend_crystal_cell():
    r = double_spend_experiment(0.3, 6, "crystal", trials=10 ** 6, seed=1)
    assert r.ci_low <= double_spend_prob_crystal(0.3, 6) <= r.ci_high


def test_double_spend_importance_small_cell():
    r = double_spend_experiment(0.1, 8, "crystal", trials=10 ** 5, seed=2, method="importance")
    assert r.method == "importance"
    assert r.ci_low <= double_spend_prob_crystal(0.1, 8) <= r.ci_high
    assert r.ci_high - r.ci_low < 0.05 * r.estimate


def test_double_spend_auto_switches():
    r = double_spend_experiment(0.1, 8, "nc", trials=10 ** 4, seed=2, method="auto")
    assert r.method == "importance"
    r = double_spend_experiment(0.4, 2, "nc", trials=10 ** 4, seed=2, method="auto")
    assert r.method == "plain"


def test_double_spend_alpha_zero():
    assert double_spend_experiment(0.0, 4).estimate == 0


def test_double_spend_delay_raises_success():
    base = double_spend_experiment(0.3, 4, "nc", 0.0, 2 * 10 ** 5, seed=4).estimate
    slow = double_spend_experiment(0.3, 4, "nc", 60.0, 2 * 10 ** 5, seed=4).estimate
    assert slow > base


def test_race_matches_gamblers_ruin():
    alpha = 0.3
    rng = np.random.default_rng(5)
    lead = np.full(2 * 10 ** 5, -3)
    ok = _race_plain_delta0(lead, alpha, 300, rng)
    want = (alpha / (1 - alpha)) ** 4
    sd = math.sqrt(want * (1 - want) / lead.size)
    assert abs(ok.mean() - want) <= 4 * sd


def test_withholding_experiment():
    r = withholding_experiment(0.0, 1000, seed=1)
    assert r.max_lead == 1 and r.freq(1) == 1
    r = withholding_experiment(0.5, 10 ** 5, seed=1)
    lengths = sum(l * c for l, c in r.counts.items()) / r.runs
    assert abs(lengths - 1 / (1 - 0.5)) < 0.02
    assert abs(r.tail(2) - 0.5) < 0.01
    assert abs(r.tail(1, "text") - 0.5) < 0.01
    r = withholding_experiment(1e-2, 10 ** 6, seed=2)
    assert abs(r.tail(2) - 1e-2) < 5e-4


def test_offline_experiment_consistent():
    value = offline_failure_prob(CommitteeModel(3024, 500, 0.35), 0.1)
    r = offline_experiment(0.35, 3024, 500, 0.1, 10 ** 6, seed=0)
    assert r.ci_low <= value <= r.ci_high
    assert offline_experiment(0.35, 3024, 500, 1.0, 1000, seed=0).estimate == 1
