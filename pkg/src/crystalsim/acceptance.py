"""Acceptance checks C1-C10, shared by ``crystalsim verify`` and the test suite.

Each check returns a :class:`Criterion` made of named parts; a criterion
passes only when every part does. Checks run at full acceptance sample
sizes and a fixed seed, so their details are reproducible.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from decimal import Decimal
from functools import lru_cache
from importlib import resources

from .analytics import (CommitteeModel, committee_failure_prob, committee_size_tail,
                        double_spend_exact_nc, double_spend_prob_crystal, min_committee_size,
                        offline_failure_prob, round_sig, selfish_revenue_crystal, withhold_prob)
from .chain import qc_byte_size
from .sim.config import SimConfig
from .sim.engine import run
from .sim.experiments import (double_spend_experiment, offline_experiment,
                              selfish_mining_experiment)
from .sim.stats import commit_conflicts, converged_block_stats, honest_progress_violations

SEED = 2026
ALPHAS = (0.1, 0.2, 0.3, 0.4, 0.45)
KS = (2, 4, 6, 8)
DURATION_UNITS = {"h": 3600.0, "d": 86400.0, "w": 7 * 86400.0, "y": 365 * 86400.0}


@dataclass
class Part:
    name: str
    passed: bool
    detail: str


@dataclass
class Criterion:
    number: int
    title: str
    parts: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.parts)

    def part(self, name: str) -> Part:
        return next(p for p in self.parts if p.name == name)

    def line(self) -> str:
        failed = [p.name for p in self.parts if not p.passed]
        status = "PASS" if self.passed else "FAIL"
        extra = f" (failed: {', '.join(failed)})" if failed else ""
        return f"[{status}] C{self.number} {self.title}{extra} [{self.seconds:.1f}s]"


def published() -> dict:
    text = resources.files("crystalsim").joinpath("data/published.json").read_text()
    return json.loads(text)


def parse_duration(text: str) -> float:
    return float(text[:-1]) * DURATION_UNITS[text[-1]]


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        crit = fn(*args, **kwargs)
        crit.seconds = time.perf_counter() - t0
        return crit
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# --------------------------------------------------------------------------
# analytic criteria
# --------------------------------------------------------------------------

@_timed
def check_c1() -> Criterion:
    c = Criterion(1, "committee sizing")
    t0 = time.perf_counter()
    eps = committee_failure_prob(CommitteeModel(3024, 340, 0.35))
    c.parts.append(Part("eps_m340", eps <= 1e-4, f"eps(W=3024, m=340, a=0.35) = {eps:.4g}"))
    m_min = min_committee_size(0.35, 3024, 1e-4)
    c.parts.append(Part("m_min", m_min <= 500, f"min m = {m_min}"))
    dt = time.perf_counter() - t0
    c.parts.append(Part("runtime", dt < 10, f"{dt:.2f}s"))
    return c


@_timed
def check_c2() -> Criterion:
    c = Criterion(2, "withholding table")
    cells = published()["table2"]["cells"]
    interval = published()["table2"]["block_interval_s"]
    p_bad, t_bad, t_detail = [], [], []
    for cell in cells:
        eps, l = cell["epsilon"], cell["l"]
        w = withhold_prob(eps, l, "table", interval)
        # the published P column is the run-length tail eps^(l-1); the
        # point mass eps^(l-1)(1-eps) agrees with it at one significant figure
        if w.tail != cell["P"] or float(round_sig(w.p, 1)) != cell["P"]:
            p_bad.append((eps, l))
        want = parse_duration(cell["T_f"])
        rel = abs(w.expected_failure_time - want) / want
        t_detail.append(f"({eps:g},{l}) {w.expected_failure_time / DURATION_UNITS[cell['T_f'][-1]]:.1f}"
                        f"{cell['T_f'][-1]} vs {cell['T_f']}")
        if rel > 0.01:
            t_bad.append((eps, l))
    c.parts.append(Part("P_cells", not p_bad, f"mismatches {p_bad}" if p_bad else "6/6 exact"))
    c.parts.append(Part("T_f_cells", not t_bad, "; ".join(t_detail)))
    return c


def _nc_cells():
    pub = published()["table3"]["0"]["nc"]
    for a in ALPHAS:
        for k in KS:
            yield a, k, pub[str(a)][str(k)]


def _crystal_cells():
    pub = published()["table3"]["0"]["crystal"]
    for a in ALPHAS:
        for k in KS:
            yield a, k, pub[str(a)][str(k)]


def table3_mc_plan(trials: int = 10 ** 6):
    """Per-cell Monte Carlo method and trial count.

    Cells whose analytic value is at least 1e-3 use plain sampling with
    ``trials`` draws; smaller cells use importance sampling with trials/10.
    """
    plan = []
    for proto, fn in (("nc", lambda a, k: float(double_spend_exact_nc(a, k))),
                      ("crystal", lambda a, k: double_spend_prob_crystal(a, k, "table"))):
        for a in ALPHAS:
            for k in KS:
                value = fn(a, k)
                if value >= 1e-3:
                    plan.append((proto, a, k, value, "plain", trials))
                else:
                    plan.append((proto, a, k, value, "importance", max(trials // 10, 1)))
    return plan


@lru_cache(maxsize=4)
def table3_mc(seed: int = SEED, trials: int = 10 ** 6):
    rows = []
    for proto, a, k, value, method, n in table3_mc_plan(trials):
        r = double_spend_experiment(a, k, proto, 0.0, n, seed, method)
        rows.append((proto, a, k, value, r))
    return tuple(rows)


@_timed
def check_c3(seed: int = SEED, trials: int = 10 ** 6) -> Criterion:
    c = Criterion(3, "double-spend table, delta = 0")
    bad = []
    for a, k, want in _nc_cells():
        got = round_sig(double_spend_exact_nc(a, k), 3)
        if got != round_sig(Decimal(repr(want)), 3):
            bad.append(f"({a},{k}) {got:.3g} vs {want:.3g}")
    c.parts.append(Part("nc_3sf", not bad, "; ".join(bad) or "20/20"))
    bad = []
    for a, k, want in _crystal_cells():
        got = double_spend_prob_crystal(a, k, "table")
        rel = abs(got - want) / want
        if rel > 0.02:
            bad.append(f"({a},{k}) {got:.3g} vs {want:.3g} ({100 * rel:.1f}%)")
    c.parts.append(Part("crystal_2pct", not bad, "; ".join(bad) or "20/20"))
    t0 = time.perf_counter()
    rows = table3_mc(seed, trials)
    dt = time.perf_counter() - t0
    miss = [f"{p} ({a},{k}) {v:.3g} not in [{r.ci_low:.3g}, {r.ci_high:.3g}]"
            for p, a, k, v, r in rows if not r.ci_low <= v <= r.ci_high]
    c.parts.append(Part("mc_coverage", not miss, "; ".join(miss) or f"{len(rows)}/{len(rows)} covered"))
    c.parts.append(Part("runtime", dt <= 1800, f"monte carlo {dt:.0f}s"))
    return c


@_timed
def check_c4(seed: int = SEED, blocks: int = 10 ** 6) -> Criterion:
    c = Criterion(4, "selfish mining revenue")
    t0 = time.perf_counter()
    off, over = [], []
    detail = []
    for a in ALPHAS:
        r = selfish_mining_experiment(a, "crystal", 0.5, blocks, seed=seed)
        want = selfish_revenue_crystal(a, 0.5)
        detail.append(f"{a}: {r.revenue:.4f} vs {want:.4f}")
        if abs(r.revenue - want) > 0.005:
            off.append(a)
        if r.revenue > a:
            over.append(a)
    c.parts.append(Part("crystal_eq", not off, "; ".join(detail)))
    c.parts.append(Part("crystal_le_alpha", not over, f"above alpha at {over}" if over else "ok"))
    nc = selfish_mining_experiment(0.4, "nc", 0.5, blocks, seed=seed).revenue
    c.parts.append(Part("nc_0.4", abs(nc - 0.526) <= 0.01, f"{nc:.4f} vs 0.526"))
    dt = time.perf_counter() - t0
    c.parts.append(Part("runtime", dt <= 600, f"{dt:.0f}s"))
    return c


@_timed
def check_c8(seed: int = SEED, trials: int = 10 ** 7) -> Criterion:
    c = Criterion(8, "offline participants")
    value = offline_failure_prob(CommitteeModel(3024, 500, 0.35), 0.10)
    c.parts.append(Part("bound", value < 1e-3, f"{value:.3g} vs < 1e-3"))
    r = offline_experiment(0.35, 3024, 500, 0.10, trials, seed)
    c.parts.append(Part("mc_consistent", r.ci_low <= value <= r.ci_high,
                        f"mc {r.estimate:.3g} [{r.ci_low:.3g}, {r.ci_high:.3g}] over {trials}"))
    return c


@_timed
def check_c9() -> Criterion:
    c = Criterion(9, "certificate overhead")
    size = qc_byte_size(500, 3024)
    bitmap = -(-3024 // 8)
    c.parts.append(Part("qc_bytes", size == 48000 + bitmap, f"{size} = 48000 + {size - 48000}"))
    tail = committee_size_tail(3024, 500 / 3024, 700)
    rel = abs(tail - 1.33e-12) / 1.33e-12
    c.parts.append(Part("tail_700", rel <= 0.05, f"{tail:.3g} vs 1.33e-12"))
    return c


# --------------------------------------------------------------------------
# trace criteria
# --------------------------------------------------------------------------

def c5_configs(seed: int = SEED, runs: int = 100, blocks: int = 10 ** 4):
    # n_honest = 2 keeps the suite inside a desk budget; see the README
    return [SimConfig(n_honest=2, alpha=ALPHAS[i % len(ALPHAS)], delta=0.0, protocol="crystal",
                      strategy="selfish", epsilon=0.0, horizon_blocks=blocks,
                      seed=seed * 100000 + i)
            for i in range(runs)]


def c6_configs(seed: int = SEED, runs: int = 200, blocks: int = 5000):
    alphas = (0.1, 0.2, 0.3, 0.35)
    out = []
    for i in range(runs):
        delta = (0.0, 10.0)[i % 2]
        out.append(SimConfig(n_honest=2, alpha=alphas[(i // 2) % len(alphas)], lam=1 / 600,
                             delta=delta, delay_model=("fixed", "uniform")[(i // 8) % 2],
                             protocol="crystal", strategy=("selfish", "private")[(i // 4) % 2],
                             k=6, horizon_blocks=blocks, seed=seed * 100000 + 50000 + i))
    return out


@dataclass
class TraceCheck:
    seed: int
    alpha: float
    delta: float
    strategy: str
    max_private_lead: int
    conflicts: int
    converged: int
    bound: float
    violations: int
    digest: str


def check_trace(cfg: SimConfig) -> TraceCheck:
    tr = run(cfg)
    conv = converged_block_stats(tr, slack=0.2)
    return TraceCheck(cfg.seed, cfg.alpha, cfg.delta, cfg.strategy,
                      tr.summary["max_private_lead"], commit_conflicts(tr), conv.count,
                      conv.bound, len(honest_progress_violations(tr)), tr.digest())


@lru_cache(maxsize=4)
def trace_suite(seed: int = SEED, c5_runs: int = 100, c5_blocks: int = 10 ** 4,
                c6_runs: int = 200, c6_blocks: int = 5000):
    c5 = tuple(check_trace(cfg) for cfg in c5_configs(seed, c5_runs, c5_blocks))
    c6 = tuple(check_trace(cfg) for cfg in c6_configs(seed, c6_runs, c6_blocks))
    return c5, c6


@_timed
def check_c5(seed: int = SEED, **sizes) -> Criterion:
    c = Criterion(5, "withholding impossibility")
    c5, _ = trace_suite(seed, **sizes)
    leads = sorted({t.max_private_lead for t in c5})
    bad = [t.seed for t in c5 if t.max_private_lead != 1]
    c.parts.append(Part("max_lead_1", not bad, f"{len(c5)} runs, leads seen {leads}"))
    return c


@_timed
def check_c6(seed: int = SEED, **sizes) -> Criterion:
    c = Criterion(6, "safety")
    _, c6 = trace_suite(seed, **sizes)
    conflicts = sum(t.conflicts for t in c6)
    c.parts.append(Part("no_conflicts", conflicts == 0, f"{conflicts} conflicting heights over {len(c6)} runs"))
    meets = sum(t.converged >= t.bound for t in c6)
    c.parts.append(Part("converged_bound", meets >= 0.95 * len(c6), f"{meets}/{len(c6)} runs meet the bound"))
    return c


@_timed
def check_c7(seed: int = SEED, **sizes) -> Criterion:
    c = Criterion(7, "honest progress")
    c5, c6 = trace_suite(seed, **sizes)
    v = sum(t.violations for t in c5 + c6)
    c.parts.append(Part("no_violations", v == 0, f"{v} violations over {len(c5) + len(c6)} traces"))
    return c


# --------------------------------------------------------------------------
# determinism
# --------------------------------------------------------------------------

def summary_artifact(seed: int = SEED) -> bytes:
    """A small acceptance artifact spanning every randomized component."""
    cfg = c6_configs(seed, 2, 500)[1]
    tr = run(cfg)
    ds = double_spend_experiment(0.3, 4, "crystal", 0.0, 10 ** 4, seed)
    ds_is = double_spend_experiment(0.1, 8, "nc", 0.0, 10 ** 4, seed, "importance")
    sm = selfish_mining_experiment(0.3, "crystal", 0.5, 10 ** 4, seed=seed)
    off = offline_experiment(0.35, 3024, 500, 0.1, 10 ** 5, seed)
    doc = {"config": cfg.to_dict(), "summary": tr.summary, "trace_digest": tr.digest(),
           "double_spend": [ds.estimate, ds.ci_low, ds.ci_high, ds_is.estimate],
           "selfish": sm.revenue, "offline": off.estimate}
    return json.dumps(doc, sort_keys=True, default=str).encode()


@_timed
def check_c10(seed: int = SEED) -> Criterion:
    c = Criterion(10, "determinism")
    a, b = summary_artifact(seed), summary_artifact(seed)
    c.parts.append(Part("rerun_identical", a == b, f"{len(a)} bytes"))
    tr1 = run(c5_configs(seed, 1, 2000)[0])
    tr2 = run(c5_configs(seed, 1, 2000)[0])
    c.parts.append(Part("trace_identical", tr1.summary_json() == tr2.summary_json(),
                        tr1.summary["trace_digest"][:16]))
    return c


CHECKS = {1: check_c1, 2: check_c2, 3: check_c3, 4: check_c4, 5: check_c5, 6: check_c6,
          7: check_c7, 8: check_c8, 9: check_c9, 10: check_c10}


def run_all(seed: int = SEED, only=None, report=print) -> list[Criterion]:
    out = []
    for n, fn in CHECKS.items():
        if only and n not in only:
            continue
        crit = fn() if n in (1, 2, 9) else fn(seed)
        out.append(crit)
        if report:
            report(crit.line())
            for p in crit.parts:
                report(f"    {'ok ' if p.passed else 'BAD'} {p.name}: {p.detail}")
    return out
