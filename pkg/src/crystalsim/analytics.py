"""Closed-form results for committee security, withholding, selfish mining and
double-spending.

Binomial tails are evaluated with exact integer arithmetic: a probability is
formed as an integer numerator over ``b**W`` and only converted to ``float``
at the very end, so tails down to 1e-20 and below are correctly rounded.
Lower/upper tails are always summed over whichever side has fewer terms, with
the complement taken exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from typing import NamedTuple, Union

from scipy import stats

Number = Union[int, float, Fraction]

SECONDS_PER_HOUR = 3600.0
SECONDS_PER_DAY = 86400.0
SECONDS_PER_WEEK = 7 * SECONDS_PER_DAY
SECONDS_PER_YEAR = 365 * SECONDS_PER_DAY


class Infeasible(ValueError):
    """No committee size up to the window size meets the failure target."""


def rational(x: Number) -> Fraction:
    """Convert ``x`` to a Fraction, reading floats by their shortest repr.

    ``rational(0.35) == Fraction(7, 20)`` rather than the binary expansion.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


# --------------------------------------------------------------------------
# exact binomial machinery
# --------------------------------------------------------------------------

def _binom_sum(n: int, p: Fraction, lo: int, hi: int) -> int:
    """Numerator of sum_{j=lo}^{hi} C(n,j) p^j (1-p)^(n-j) over denominator^n."""
    a, b = p.numerator, p.denominator
    c = b - a
    if lo > hi:
        return 0
    binom = math.comb(n, lo)
    apow = a ** lo
    cpow = c ** (n - lo)
    total = 0
    for j in range(lo, hi + 1):
        total += binom * apow * cpow
        if j == hi:
            break
        binom = binom * (n - j) // (j + 1)
        apow *= a
        cpow = cpow // c if c else 0
    return total


def binom_cdf_exact(n: int, p: Number, k: int) -> Fraction:
    """Exact Pr[Binomial(n, p) <= k] as a Fraction."""
    p = rational(p)
    if k < 0:
        return Fraction(0)
    if k >= n:
        return Fraction(1)
    if p == 0:
        return Fraction(1)
    if p == 1:
        return Fraction(0)
    denom = p.denominator ** n
    if k + 1 <= n - k:
        return Fraction(_binom_sum(n, p, 0, k), denom)
    return 1 - Fraction(_binom_sum(n, p, k + 1, n), denom)


def binom_sf_exact(n: int, p: Number, k: int) -> Fraction:
    """Exact Pr[Binomial(n, p) >= k] as a Fraction."""
    return 1 - binom_cdf_exact(n, p, k - 1)


# --------------------------------------------------------------------------
# committee security
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CommitteeModel:
    """Window size, expected committee size and adversarial power share."""

    W: int
    m: int
    alpha: Number

    def __post_init__(self):
        if not 0 <= float(self.alpha) < 0.5:
            raise ValueError(f"alpha must lie in [0, 0.5), got {self.alpha}")
        if not 1 <= self.m <= self.W:
            raise ValueError(f"need 1 <= m <= W, got m={self.m}, W={self.W}")

    @property
    def p(self) -> Fraction:
        return Fraction(self.m, self.W)


def committee_failure_exact(model: CommitteeModel) -> Fraction:
    """Union bound on the good-committee failure, as an exact Fraction.

    Adversary shares reach ceil(m/2), or honest shares stay at or below
    floor(m/2).
    """
    alpha = rational(model.alpha)
    beta = 1 - alpha
    p = model.p
    adv = binom_sf_exact(model.W, alpha * p, -(-model.m // 2))
    honest = binom_cdf_exact(model.W, beta * p, model.m // 2)
    return adv + honest


def committee_failure_prob(model: CommitteeModel) -> float:
    return float(committee_failure_exact(model))


def _failure_float(W: int, m: int, alpha: float) -> float:
    # float route used only to locate the answer; the result is re-checked exactly
    p = m / W
    return float(stats.binom.sf(-(-m // 2) - 1, W, alpha * p)
                 + stats.binom.cdf(m // 2, W, (1 - alpha) * p))


def min_committee_size(alpha: Number, W: int, eps_max: float) -> int:
    """Smallest m whose committee failure bound is at most ``eps_max``.

    The bound is not monotone in m across parities (an even m admits a tie at
    m/2 on both sides), but it is monotone within each parity class, so each
    class is bisected separately and the smaller answer wins. Candidates are
    located with floating point and then confirmed with exact arithmetic.
    """
    def ok(m: int) -> bool:
        return committee_failure_exact(CommitteeModel(W, m, alpha)) <= rational(eps_max)

    best = None
    for first in (1, 2):
        sizes = list(range(first, W + 1, 2))
        lo, hi = 0, len(sizes) - 1
        if not ok(sizes[hi]):
            continue
        while lo < hi:
            mid = (lo + hi) // 2
            if _failure_float(W, sizes[mid], float(alpha)) <= eps_max:
                hi = mid
            else:
                lo = mid + 1
        # float and exact may disagree right at the boundary
        while lo > 0 and ok(sizes[lo - 1]):
            lo -= 1
        while not ok(sizes[lo]):
            lo += 1
        if best is None or sizes[lo] < best:
            best = sizes[lo]
    if best is None:
        raise Infeasible(f"no m <= {W} reaches eps <= {eps_max} at alpha={alpha}")
    return best


def committee_size_tail(W: int, p: Number, threshold: int) -> float:
    """Pr[Binomial(W, p) >= threshold], exact."""
    if threshold <= 0:
        return 1.0
    if threshold > W:
        return 0.0
    return float(binom_sf_exact(W, p, threshold))


def offline_failure_prob(model: CommitteeModel, gamma_off: Number) -> float:
    """Probability that an honest block cannot be certified.

    Honest slots elect with probability beta*p, each elected honest voter is
    offline independently with probability ``gamma_off``, Byzantine voters
    abstain. Thinning a binomial by an independent coin is again binomial,
    so the online honest share count is Binomial(W, beta*p*(1-gamma_off)).
    """
    g = rational(gamma_off)
    if not 0 <= g <= 1:
        raise ValueError("gamma_off must lie in [0, 1]")
    beta = 1 - rational(model.alpha)
    q = beta * model.p * (1 - g)
    return float(binom_cdf_exact(model.W, q, model.m // 2))


# --------------------------------------------------------------------------
# withholding
# --------------------------------------------------------------------------

class Withholding(NamedTuple):
    p: float
    """Pr[N_A = l] under the chosen convention."""
    tail: float
    """Pr[N_A >= l]: the chance a withholding run reaches l blocks."""
    expected_failure_time: float
    """Seconds until a run of at least l withheld blocks is expected."""


def withhold_prob(eps: Number, l: int, convention: str = "table",
                  block_interval: float = 600.0, miner_share: float = 1.0) -> Withholding:
    """Distribution of the number of consecutively withheld blocks.

    ``convention="text"`` counts only certified (failed-committee) blocks:
    Pr[N=l] = eps^l (1-eps) for l >= 0. ``convention="table"`` also counts the
    final uncertified block: Pr[N=l] = eps^(l-1) (1-eps) for l >= 1.

    The expected failure time is the mean waiting time for a run of at least
    l blocks, i.e. the miner's block interval divided by the tail probability.
    """
    e = rational(eps)
    if not 0 <= e < 1:
        raise ValueError("eps must lie in [0, 1)")
    if convention == "text":
        if l < 0:
            raise ValueError("l must be >= 0 under the text convention")
        k = l
    elif convention == "table":
        if l < 1:
            raise ValueError("l must be >= 1 under the table convention")
        k = l - 1
    else:
        raise ValueError(f"unknown convention {convention!r}")
    tail = e ** k
    p = tail * (1 - e)
    interval = block_interval / miner_share
    t_f = math.inf if tail == 0 else interval / float(tail)
    return Withholding(float(p), float(tail), t_f)


def format_duration(seconds: float) -> str:
    """Render seconds in the largest of h/d/w/y that keeps the value >= 1."""
    for unit, size in (("y", SECONDS_PER_YEAR), ("w", SECONDS_PER_WEEK),
                       ("d", SECONDS_PER_DAY)):
        if seconds >= size:
            return f"{seconds / size:.1f}{unit}"
    return f"{seconds / SECONDS_PER_HOUR:.1f}h"


# --------------------------------------------------------------------------
# selfish mining
# --------------------------------------------------------------------------

def _check_alpha(alpha: float):
    if not 0 <= alpha < 0.5:
        raise ValueError(f"alpha must lie in [0, 0.5), got {alpha}")


def selfish_revenue_crystal(alpha: float, gamma: float = 0.5) -> float:
    """Attacker's share of main-chain blocks under the 3-state Crystal chain."""
    _check_alpha(alpha)
    beta = 1 - alpha
    return alpha * (2 * alpha + gamma * beta) / (beta + 2 * alpha)


def selfish_revenue_nc(alpha: float, gamma: float = 0.5) -> float:
    """Eyal-Sirer relative revenue of selfish mining under Nakamoto consensus."""
    _check_alpha(alpha)
    a = alpha
    num = a * (1 - a) ** 2 * (4 * a + gamma * (1 - 2 * a)) - a ** 3
    den = 1 - a * (1 + (2 - a) * a)
    return num / den


# --------------------------------------------------------------------------
# double spending
# --------------------------------------------------------------------------

def double_spend_prob_crystal(alpha: Number, k: int, convention: str = "table") -> float:
    """Catch-up probability when the attacker may withhold at most one block.

    ``"theorem"`` uses exponent k-1, ``"table"`` exponent k.
    """
    _check_alpha(float(alpha))
    if k < 1:
        raise ValueError("k must be >= 1")
    a = rational(alpha)
    ratio = a / (1 - a)
    if convention == "theorem":
        return float(ratio ** (k - 1))
    if convention == "table":
        return float(ratio ** k)
    raise ValueError(f"unknown convention {convention!r}")


def double_spend_exact_nc(alpha: Number, k: int) -> Fraction:
    """Rosenfeld's success probability with one pre-mined block, exactly."""
    _check_alpha(float(alpha))
    if k < 1:
        raise ValueError("k must be >= 1")
    q = rational(alpha)
    p = 1 - q
    s = sum(math.comb(k + j - 1, j) * (p ** k * q ** j - p ** j * q ** k)
            for j in range(k + 1))
    return 1 - s


def double_spend_prob_nc(alpha: Number, k: int) -> float:
    return float(double_spend_exact_nc(alpha, k))


def round_sig(x: Number, digits: int) -> Decimal:
    """Round to ``digits`` significant figures, halves away from zero.

    Exact for Fractions: 0.8505 rounds to 0.851, never to 0.850 through a
    binary representation error.
    """
    x = rational(x)
    if x == 0:
        return Decimal(0)
    with localcontext() as ctx:
        ctx.prec = 60
        d = Decimal(x.numerator) / Decimal(x.denominator)
        exp = d.adjusted() - digits + 1
        return d.quantize(Decimal(1).scaleb(exp), rounding=ROUND_HALF_UP)


# --------------------------------------------------------------------------
# safety
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SafetyParams:
    alpha: float
    lam: float
    """Total mining rate (blocks/s)."""
    delta: float
    """Network delay bound (s)."""
    slack: float = 0.1
    k: int = 6

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    @property
    def eta(self) -> float:
        return math.exp(-2 * self.beta * self.lam * self.delta)


class SafetyReport(NamedTuple):
    holds: bool
    margin: float
    eta: float
    converged_rate: float
    """eta^2 * beta * lam, the expected converged blocks per second."""


def safety_condition(params: SafetyParams) -> SafetyReport:
    if not 0 < params.slack < 1:
        raise ValueError("slack must lie in (0, 1)")
    eta = params.eta
    margin = eta ** 2 * params.beta - (1 + params.slack) * params.alpha
    return SafetyReport(margin > 0, margin, eta, eta ** 2 * params.beta * params.lam)


def converged_lower_bound(params: SafetyParams, duration: float) -> float:
    """(1 - slack) * eta^2 * beta * lam * t."""
    return (1 - params.slack) * safety_condition(params).converged_rate * duration
