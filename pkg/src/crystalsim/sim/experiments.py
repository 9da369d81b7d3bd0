"""Monte Carlo experiments behind the selfish-mining, double-spending,
withholding and offline-participant results.

The selfish-mining and double-spending races at delta = 0 only depend on
the order of mining events, so they run on compact race models rather than
the node-level engine; positive delays go through the engine (selfish
mining) or through interval-based races (double spending).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, stats

from .config import SimConfig
from .engine import run

DEFAULT_LAM = 1 / 600


def wilson_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(level, method="wilson")
    return float(ci.low), float(ci.high)


# --------------------------------------------------------------------------
# selfish mining
# --------------------------------------------------------------------------

@dataclass
class SelfishResult:
    revenue: float
    attacker_blocks: int
    honest_blocks: int
    events: int
    wasted: int = 0
    max_private_lead: int = 0


def _selfish_race(alpha: float, n_events: int, gamma: float, crystal: bool,
                  epsilon: float, rng: np.random.Generator) -> SelfishResult:
    """Eyal-Sirer race over ``n_events`` mining events.

    Under Crystal the attacker can only extend its private tip when that tip
    is certified, which for a withheld block happens only on a committee
    failure (probability ``epsilon``). Blocks it publishes in a race collect
    honest votes and are always extendable.
    """
    adv_event = rng.random(n_events) < alpha
    tie_pick = rng.random(n_events) < gamma
    fail = rng.random(n_events) < epsilon
    adv = hon = 0
    lead = 0
    racing = False
    tip_certified = True
    wasted = 0
    max_lead = 0
    for i in range(n_events):
        if adv_event[i]:
            if racing:
                adv += 2
                racing = False
                lead = 0
                continue
            if crystal and lead > 0 and not tip_certified:
                wasted += 1
                continue
            lead += 1
            tip_certified = bool(fail[i]) if crystal else True
            if lead > max_lead:
                max_lead = lead
        else:
            if racing:
                if tie_pick[i]:
                    adv += 1
                else:
                    hon += 1
                hon += 1
                racing = False
            elif lead == 0:
                hon += 1
            elif lead == 1:
                racing = True
                lead = 0
            elif lead == 2:
                adv += 2
                lead = 0
            else:
                adv += 1
                lead -= 1
    total = adv + hon
    return SelfishResult(adv / total if total else 0.0, adv, hon, n_events, wasted, max_lead)


def selfish_mining_experiment(alpha: float, protocol: str = "crystal", gamma: float = 0.5,
                              n_blocks: int = 10 ** 6, delta: float = 0.0,
                              lam: float = DEFAULT_LAM, epsilon: float = 0.0,
                              seed: int = 0, n_honest: int = 2) -> SelfishResult:
    """Attacker's share of main-chain blocks under selfish mining.

    ``delta == 0`` uses the event race; ``delta > 0`` runs the node-level
    engine (where gamma emerges from honest tie-breaking and is not a knob).
    """
    if protocol not in ("crystal", "nc"):
        raise ValueError(f"unknown protocol {protocol!r}")
    if not 0 <= alpha < 0.5:
        raise ValueError("alpha must lie in [0, 0.5)")
    if delta == 0:
        rng = np.random.default_rng(seed)
        return _selfish_race(alpha, n_blocks, gamma, protocol == "crystal", epsilon, rng)
    cfg = SimConfig(n_honest=n_honest, alpha=alpha, lam=lam, delta=delta, protocol=protocol,
                    strategy="selfish" if alpha > 0 else "honest", epsilon=epsilon,
                    horizon_blocks=n_blocks, seed=seed)
    s = run(cfg).summary
    main = s["main_chain_length"]
    a = s["main_chain_adversary"]
    return SelfishResult(a / main if main else 0.0, a, main - a, s["mining_events"],
                         s["adversary_idle"], s["max_private_lead"])


# --------------------------------------------------------------------------
# double spending
# --------------------------------------------------------------------------

@dataclass
class DoubleSpendResult:
    estimate: float
    ci_low: float
    ci_high: float
    trials: int
    method: str
    successes: Optional[int] = None
    truncation: dict = field(default_factory=dict)


def _effective_delay(protocol: str, delta: float) -> float:
    # a Crystal block is extendable only after its QC arrives: one extra hop
    return 2 * delta if protocol == "crystal" else delta


def _phase1(protocol: str, alpha: float, k: int, n: int, lam: float, d_eff: float,
            epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Attacker's private chain length when the honest chain reaches k blocks."""
    beta = 1 - alpha
    if d_eff == 0:
        arrivals = rng.negative_binomial(k, beta, size=n)
    else:
        t = k * d_eff + rng.gamma(k, 1 / (beta * lam), size=n)
        arrivals = rng.poisson(alpha * lam * t)
    if protocol == "nc":
        return 1 + arrivals
    if epsilon <= 0:
        return np.ones(n, dtype=np.int64)
    extensions = rng.geometric(1 - epsilon, size=n) - 1 if epsilon < 1 else arrivals
    return 1 + np.minimum(arrivals, extensions)


def _chunk_hits(cur: np.ndarray, ups: np.ndarray, downs: np.ndarray,
                rng: np.random.Generator) -> np.ndarray:
    """Whether a uniformly random arrangement of ``ups`` +1 steps and
    ``downs`` -1 steps, started at ``cur``, ever reaches +1.

    Positions are drawn sequentially as from an urn, vectorized over trials.
    """
    level = cur.copy()
    ups, downs = ups.copy(), downs.copy()
    hit = np.zeros(cur.size, dtype=bool)
    while True:
        left = ups + downs
        live = np.flatnonzero((left > 0) & ~hit)
        if not live.size:
            return hit
        up = rng.random(live.size) * left[live] < ups[live]
        ups[live] -= up
        downs[live] -= ~up
        level[live] += np.where(up, 1, -1)
        hit[live] |= level[live] >= 1


def _race_plain_delta0(lead: np.ndarray, alpha: float, deficit: int,
                       rng: np.random.Generator, kappa: float = 0.5) -> np.ndarray:
    """Exact skip-ahead simulation of the phase-2 race at zero delay.

    One step is an honest block preceded by a Geometric number of attacker
    blocks; the attacker wins when its lead reaches +1 within a step. Below
    zero, s = kappa*(beta/alpha)*|lead| steps are taken at once: their
    attacker total N is NegativeBinomial(s, beta), and when lead + N < 1 no
    prefix of the chunk can reach +1, so the chunk is applied whole.
    Otherwise the order inside the chunk, which given N is uniform for
    i.i.d. geometric steps, is sampled to decide. The attacker abandons at
    the first chunk boundary at or below ``-deficit``.
    """
    beta = 1 - alpha
    ratio = beta / alpha
    success = lead >= 1
    idx = np.flatnonzero(~success)
    cur = lead[idx].astype(np.int64)
    while idx.size:
        s = np.maximum(1, (kappa * ratio * -cur).astype(np.int64))
        n_att = rng.negative_binomial(s, beta)
        reach = cur + n_att >= 1
        won = reach & (s == 1)
        amb = np.flatnonzero(reach & (s > 1))
        if amb.size:
            # the chunk ends on an honest block, so only the first
            # n_att + s - 1 positions are arranged
            won[amb] = _chunk_hits(cur[amb], n_att[amb], s[amb] - 1, rng)
        cur = cur + n_att - s
        lost = ~won & (cur <= -deficit)
        success[idx[won]] = True
        keep = ~(won | lost)
        idx, cur = idx[keep], cur[keep]
    return success


def _race_plain_delayed(lead: np.ndarray, alpha: float, lam: float, d_eff: float,
                        deficit: int, rng: np.random.Generator) -> np.ndarray:
    """Step-by-step race with honest intervals d_eff + Exp(beta*lam)."""
    beta = 1 - alpha
    success = lead >= 1
    idx = np.flatnonzero(~success)
    cur = lead[idx].astype(np.int64)
    while idx.size:
        t = d_eff + rng.exponential(1 / (beta * lam), size=idx.size)
        n_att = rng.poisson(alpha * lam * t)
        won = cur + n_att >= 1
        cur = cur + n_att - 1
        success[idx[won]] = True
        keep = ~won & (cur > -deficit)
        idx, cur = idx[keep], cur[keep]
    return success


def _tilt(alpha: float, lam: float, d_eff: float) -> float:
    """Positive root u = e^theta of E[u^(A-1)] = 1 for one honest interval."""
    beta = 1 - alpha
    if d_eff == 0:
        return beta / alpha

    def f(u):
        return (alpha * lam * d_eff * (u - 1) + math.log(beta / (beta - alpha * (u - 1)))
                - math.log(u))

    hi = 1 + beta / alpha
    return optimize.brentq(f, 1 + 1e-9, hi * (1 - 1e-12))


def _race_importance(lead: np.ndarray, alpha: float, lam: float, d_eff: float,
                     rng: np.random.Generator, max_steps: int = 10 ** 6) -> np.ndarray:
    """Likelihood-ratio weights of phase-2 success under an exponential tilt.

    The increment A - 1 of each honest interval is tilted by u^(A-1) with u
    the root from ``_tilt``, which flips the drift upward so that every path
    eventually succeeds. The weight of a path is u^-(sum of increments).
    """
    beta = 1 - alpha
    u = _tilt(alpha, lam, d_eff)
    weights = np.zeros(lead.size)
    weights[lead >= 1] = 1.0
    idx = np.flatnonzero(lead < 1)
    cur = lead[idx].astype(np.int64)
    log_w = np.zeros(idx.size)
    log_u = math.log(u)
    for _ in range(max_steps):
        if not idx.size:
            break
        if d_eff == 0:
            # tilted interval: attacker blocks ~ Geometric with success prob alpha
            n_att = rng.geometric(alpha, size=idx.size) - 1
        else:
            rate = beta * lam - alpha * lam * (u - 1)
            t = d_eff + rng.exponential(1 / rate, size=idx.size)
            n_att = rng.poisson(alpha * lam * u * t)
        inc = n_att - 1
        log_w -= inc * log_u
        won = cur + n_att >= 1
        cur = cur + inc
        weights[idx[won]] = np.exp(log_w[won])
        idx, cur, log_w = idx[~won], cur[~won], log_w[~won]
    return weights


def double_spend_experiment(alpha: float, k: int, protocol: str = "nc", delta: float = 0.0,
                            trials: int = 10 ** 6, seed: int = 0, method: str = "plain",
                            lam: float = DEFAULT_LAM, epsilon: float = 0.0,
                            deficit: Optional[int] = None) -> DoubleSpendResult:
    """Success probability of a k-confirmation double-spend with one pre-mined block.

    Phase 1 runs until the honest chain holds k blocks; under NC the attacker
    grows its branch freely, under Crystal it cannot extend its uncertified
    pre-mined block unless committees fail. Phase 2 is a public race that
    the attacker wins on reaching a lead of one, or abandons ``deficit``
    (default 100k) blocks behind.

    ``method="plain"`` reports the success frequency with a Wilson interval;
    ``"importance"`` tilts phase 2 and reports the weighted mean with a
    normal interval; ``"auto"`` runs plain and falls back to importance
    sampling when fewer than 100 successes were seen.
    """
    if protocol not in ("crystal", "nc"):
        raise ValueError(f"unknown protocol {protocol!r}")
    if not 0 <= alpha < 0.5:
        raise ValueError("alpha must lie in [0, 0.5)")
    if k < 1 or trials < 1:
        raise ValueError("need k >= 1 and trials >= 1")
    deficit = deficit or 100 * k
    trunc = {"abandon_deficit": deficit}
    if alpha == 0:
        return DoubleSpendResult(0.0, 0.0, 0.0, trials, "exact", 0, trunc)
    rng = np.random.default_rng([seed, k, int(alpha * 10 ** 6), protocol == "crystal"])
    d_eff = _effective_delay(protocol, delta)
    lead = _phase1(protocol, alpha, k, trials, lam, d_eff, epsilon, rng) - k

    if method == "auto":
        res = double_spend_experiment(alpha, k, protocol, delta, trials, seed, "plain",
                                      lam, epsilon, deficit)
        if res.successes >= 100:
            return res
        return double_spend_experiment(alpha, k, protocol, delta, trials, seed, "importance",
                                       lam, epsilon, deficit)
    if method == "plain":
        if d_eff == 0:
            ok = _race_plain_delta0(lead, alpha, deficit, rng)
        else:
            ok = _race_plain_delayed(lead, alpha, lam, d_eff, deficit, rng)
        s = int(ok.sum())
        lo, hi = wilson_ci(s, trials)
        trunc["max_truncation_bias"] = (alpha / (1 - alpha)) ** deficit
        return DoubleSpendResult(s / trials, lo, hi, trials, "plain", s, trunc)
    if method == "importance":
        w = _race_importance(lead, alpha, lam, d_eff, rng)
        mean = float(w.mean())
        half = 1.96 * float(w.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
        return DoubleSpendResult(mean, max(mean - half, 0.0), mean + half, trials,
                                 "importance", int((w > 0).sum()), trunc)
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# withholding and offline participants
# --------------------------------------------------------------------------

@dataclass
class WithholdingResult:
    runs: int
    counts: dict
    """l -> number of runs with exactly l withheld blocks (table convention)."""
    max_lead: int

    def freq(self, l: int, convention: str = "table") -> float:
        if convention == "text":
            l += 1
        return self.counts.get(l, 0) / self.runs

    def tail(self, l: int, convention: str = "table") -> float:
        if convention == "text":
            l += 1
        return sum(c for j, c in self.counts.items() if j >= l) / self.runs


def withholding_experiment(epsilon: float, runs: int = 10 ** 6, seed: int = 0) -> WithholdingResult:
    """Length of withheld private runs when each withheld block's committee
    fails independently with probability ``epsilon``.

    A run starts with one withheld block; the attacker can extend the run
    only while its tip is certified, i.e. its committee failed.
    """
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    lengths = np.ones(runs, dtype=np.int64)
    active = np.arange(runs)
    while active.size:
        fails = rng.random(active.size) < epsilon
        active = active[fails]
        lengths[active] += 1
    vals, cnt = np.unique(lengths, return_counts=True)
    return WithholdingResult(runs, {int(v): int(c) for v, c in zip(vals, cnt)}, int(lengths.max()))


@dataclass
class OfflineResult:
    estimate: float
    ci_low: float
    ci_high: float
    trials: int
    failures: int


def offline_experiment(alpha: float, W: int, m: int, gamma_off: float, trials: int = 10 ** 7,
                       seed: int = 0, batch: int = 10 ** 6) -> OfflineResult:
    """Certification failure rate of honest blocks with offline participants.

    Per trial: honest slots ~ Bin(W, beta), elected honest shares ~ Bin(., m/W),
    online shares ~ Bin(., 1 - gamma_off). Byzantine members abstain, so the
    block fails to certify when online honest shares <= m/2.
    """
    rng = np.random.default_rng(seed)
    p = m / W
    failures = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        honest = rng.binomial(W, 1 - alpha, size=b)
        elected = rng.binomial(honest, p)
        online = rng.binomial(elected, 1 - gamma_off)
        failures += int(np.count_nonzero(2 * online <= m))
        done += b
    lo, hi = wilson_ci(failures, trials)
    return OfflineResult(failures / trials, lo, hi, trials, failures)
