"""Self-check suites behind the `verify` command.

Three suites: "lemmas" exercises the exact walk combinatorics against
enumeration oracles, "losses" re-derives the loss-kernel assumptions on
dense grids, and "aggregation" stresses the weight and regret machinery
on random data.  Every check reduces to a margin that must be
nonnegative, so the printed table shows how far each property is from
failing, not just that it passed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import walks
from .aggregation import (
    build_trace,
    erm_select,
    gibbs_mean_regret_batch,
    gibbs_weights,
    pm_predict,
    two_expert_weight,
)
from .losses import LOSS_NAMES, make_loss, verify_assumptions

SUITES = ("lemmas", "losses", "aggregation")


@dataclass(frozen=True)
class CheckRow:
    suite: str
    name: str
    passed: bool
    margin: float  # distance to the failing boundary; >= 0 when passing
    detail: str


@dataclass
class SuiteReport:
    rows: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]


def _suite_lemmas() -> list:
    rows = []

    worst = 0.0
    where = ""
    for n in range(2, 13):
        for t in range(1, 4):
            for m in range(1, 4):
                lhs, rhs = walks.reflection_identity(n, t, m)
                diff = abs(float(lhs - rhs))
                if diff > worst:
                    worst, where = diff, f"n={n} t={t} m={m}"
    rows.append(CheckRow("lemmas", "reflection_identity", worst == 0.0, -worst,
                         where or "exact over the full grid"))

    rng = np.random.default_rng(20240901)
    worst = math.inf
    where = ""
    for n in (8, 10):
        _, final, _ = walks._enum_stats(n)
        for gamma in (0.1, 0.5, 0.9):
            for m in (2, 4, n):
                allowed = np.abs(final) <= m
                for _ in range(20):
                    mask = allowed & (rng.random(1 << n) < 0.5)
                    lhs, rhs, _ = walks.change_of_measure_check(n, m, gamma, mask)
                    slack = lhs - rhs + 1e-15
                    if slack < worst:
                        worst, where = slack, f"n={n} m={m} gamma={gamma}"
    rows.append(CheckRow("lemmas", "change_of_measure", worst >= 0.0, worst, where))

    worst = math.inf
    where = ""
    for n in range(1, 21):
        lo, hi = walks.stirling_bounds(n)
        exact = float(math.factorial(n))
        slack = min(exact - lo, hi - exact) / exact
        if slack < worst:
            worst, where = slack, f"n={n}"
    rows.append(CheckRow("lemmas", "stirling_bounds", worst > 0.0, worst,
                         f"relative strict slack, worst at {where}"))

    worst = math.inf
    where = ""
    for n in range(2, 101):
        for s in range(-n + 2, n - 1, 2):
            if (n - s) % 2:
                continue
            exact, lo, hi = walks.binomial_point(n, s)
            slack = min(exact - lo, hi - exact)
            if slack < worst:
                worst, where = slack, f"n={n} s={s}"
    rows.append(CheckRow("lemmas", "binomial_point_envelope", worst >= 0.0, worst, where))

    worst = math.inf
    where = ""
    for n in (8, 12, 14):
        for barrier in (2, 4):
            if (n - barrier) % 2:
                continue
            for gamma in (0.0, 0.3):
                dp = walks.excursion_probability_exact(n, barrier, gamma)
                enum = walks.excursion_probability_enum(n, barrier, gamma)
                slack = 1e-14 - abs(dp - enum)
                if slack < worst:
                    worst, where = slack, f"n={n} barrier={barrier} gamma={gamma}"
    rows.append(CheckRow("lemmas", "excursion_dp_vs_enum", worst >= 0.0, worst, where))

    worst = math.inf
    where = ""
    for n in (1000, 2000):
        gamma = walks.gamma_schedule(n, 1.0)
        rep = walks.lower_bound_chain(n, gamma)
        slack = rep.exact - rep.bound_coarse
        if slack < worst:
            worst, where = slack, f"n={n}"
    rows.append(CheckRow("lemmas", "lower_bound_chain_coarse", worst >= -1e-15, worst, where))

    return rows


def _suite_losses() -> list:
    rows = []
    for name in LOSS_NAMES:
        loss = make_loss(name)
        report = verify_assumptions(loss)
        margin = min(c.tolerance - c.worst for c in report.checks.values())
        detail = "; ".join(f"{k}:{c.worst:.3g}" for k, c in report.checks.items())
        rows.append(CheckRow("losses", f"assumptions_{name}", report.passed, margin, detail))
    return rows


def _random_values(rng, loss, count):
    pad = 0.05 * (loss.y_hi - loss.y_lo)
    return rng.uniform(loss.y_lo + pad, loss.y_hi - pad, size=count)


def _suite_aggregation() -> list:
    rows = []
    rng = np.random.default_rng(20240902)

    worst = math.inf
    where = ""
    for name in LOSS_NAMES:
        loss = make_loss(name)
        for g in (2, 8):
            values = _random_values(rng, loss, g)
            y = rng.uniform(loss.y_lo, loss.y_hi, size=(500, 100))
            regret, bound = gibbs_mean_regret_batch(loss, loss.lam, values, y)
            slack = bound + 1e-9 - float(regret.max())
            if slack < worst:
                worst, where = slack, f"{name} G={g}"
    rows.append(CheckRow("aggregation", "regret_pathwise_gibbs_mean", worst >= 0.0,
                         worst, where))

    worst = math.inf
    where = ""
    for name in ("square", "entropy"):
        loss = make_loss(name)
        for selector in ("midpoint", "lower", "upper"):
            values = _random_values(rng, loss, 2)
            y = rng.uniform(loss.y_lo, loss.y_hi, size=40)
            trace = build_trace(loss, loss.lam, values, y,
                                substitution="feasible_interval", selector=selector)
            regret, bound = trace.regret(), trace.regret_bound()
            slack = bound + 1e-9 - regret
            if slack < worst:
                worst, where = slack, f"{name} {selector}"
    rows.append(CheckRow("aggregation", "regret_pathwise_feasible", worst >= 0.0,
                         worst, where))

    sigma = rng.uniform(0.0, 50.0, size=(200, 6))
    w1 = gibbs_weights(sigma, 0.7)
    w2 = gibbs_weights(sigma + 123.456, 0.7)
    diff = float(np.abs(w1 - w2).max())
    rows.append(CheckRow("aggregation", "gibbs_shift_invariance", diff <= 1e-12,
                         1e-12 - diff, f"max weight change {diff:.3g}"))

    s = np.arange(-300, 301)
    lam, delta = 0.5, 0.6
    direct = two_expert_weight(s, lam, delta)
    table = gibbs_weights(np.stack([np.zeros_like(s, dtype=float), delta * s], axis=-1), lam)[:, 0]
    diff = float(np.abs(direct - table).max())
    rows.append(CheckRow("aggregation", "two_expert_weight_consistency", diff <= 1e-12,
                         1e-12 - diff, "closed form vs normalized weights"))

    wgrid = rng.random((500, 2))
    wgrid /= wgrid.sum(axis=1, keepdims=True)
    vals = np.array([0.8, 0.2])
    preds = np.array([pm_predict(w, vals) for w in wgrid])
    slack = float(min(preds.min() - 0.2, 0.8 - preds.max()))
    rows.append(CheckRow("aggregation", "pm_bracket", slack >= 0.0, slack,
                         "mixtures stay between the expert values"))

    tie = erm_select(np.array([0.25, 0.25]))
    rows.append(CheckRow("aggregation", "erm_tie_break", tie == 0, 0.0 if tie == 0 else -1.0,
                         "ties go to the first expert"))

    return rows


def run_suite(suite: str = "all") -> SuiteReport:
    if suite not in SUITES + ("all",):
        raise ValueError(f"unknown suite {suite!r}")
    rows = []
    if suite in ("lemmas", "all"):
        rows.extend(_suite_lemmas())
    if suite in ("losses", "all"):
        rows.extend(_suite_losses())
    if suite in ("aggregation", "all"):
        rows.extend(_suite_aggregation())
    return SuiteReport(rows)


def format_report(report: SuiteReport) -> str:
    lines = [f"{'suite':<12} {'check':<32} {'status':<6} {'margin':>12}  detail"]
    for r in report.rows:
        status = "pass" if r.passed else "FAIL"
        lines.append(f"{r.suite:<12} {r.name:<32} {status:<6} {r.margin:>12.3e}  {r.detail}")
    lines.append(f"{'overall: pass' if report.passed else 'overall: FAIL'}")
    return "\n".join(lines)
