"""Bounded-output loss kernels and their aggregation constants.

Each loss is defined on a symmetric output interval [y_lo, y_hi] with
center a = (y_lo + y_hi) / 2 and carries the largest exponential-weighting
temperature lam for which v -> exp(-lam * loss(y, v)) stays concave on the
interval, plus the worst-case loss spread B used by empirical-risk bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

LOSS_NAMES = ("square", "entropy", "exponential", "logit")

CONCAVITY_TOL = 1e-9
SYMMETRY_TOL = 1e-12


def _as_array(x):
    return np.asarray(x, dtype=np.float64)


def _square(y, v):
    return (y - v) ** 2


def _entropy(y, v):
    # y log(y/v) + (1-y) log((1-y)/(1-v)), with 0 log 0 = 0; predictions
    # outside [0, 1] and wrong-boundary predictions cost +inf.
    y = _as_array(y)
    v = _as_array(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = xlogy(y, y) - xlogy(y, v) + xlogy(1 - y, 1 - y) - xlogy(1 - y, 1 - v)
    out = np.asarray(out, dtype=np.float64).copy()
    np.copyto(out, np.inf, where=np.broadcast_to((v < 0) | (v > 1), out.shape))
    return out


def _exponential(y, v):
    return np.exp(-y * v)


def _logit(y, v):
    return np.logaddexp(0.0, -y * v)


_EVAL = {
    "square": _square,
    "entropy": _entropy,
    "exponential": _exponential,
    "logit": _logit,
}


@dataclass(frozen=True)
class LossSpec:
    """A loss on a bounded output interval.

    lam defaults to the canonical exponential-concavity temperature:
    1 / (2 (y_hi - y_lo)^2) for square, 1 for entropy, exp(-y_hi^2) for
    exponential and logit.  Passing a larger lam is allowed (for probing
    where concavity breaks) and is reported by verify_assumptions.
    """

    name: str
    y_lo: float = 0.0
    y_hi: float = 1.0
    lam: float | None = None
    a: float = field(init=False)
    range_bound: float = field(init=False)

    def __post_init__(self):
        if self.name not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.name!r}")
        if not self.y_lo < self.y_hi:
            raise ValueError("empty output interval")
        if self.name == "entropy" and (self.y_lo, self.y_hi) != (0.0, 1.0):
            raise ValueError("entropy loss requires the interval [0, 1]")
        if self.name in ("exponential", "logit") and self.y_lo != -self.y_hi:
            raise ValueError(f"{self.name} loss requires an interval symmetric about 0")
        object.__setattr__(self, "a", 0.5 * (self.y_lo + self.y_hi))
        if self.lam is None:
            object.__setattr__(self, "lam", exp_concavity_parameter(self.name, self.y_lo, self.y_hi))
        object.__setattr__(self, "range_bound", _range_bound(self.name, self.y_lo, self.y_hi))

    @property
    def width(self) -> float:
        return self.y_hi - self.y_lo

    def evaluate(self, y, y_pred):
        """loss(y, y_pred); y must lie in the output interval."""
        y = _as_array(y)
        if np.any(y < self.y_lo) or np.any(y > self.y_hi):
            raise ValueError(f"observed output outside [{self.y_lo}, {self.y_hi}]")
        out = _EVAL[self.name](y, _as_array(y_pred))
        return float(out) if out.ndim == 0 else out

    def derivatives(self, y, y_pred):
        """Analytic (d/dv, d2/dv2) of loss(y, v) at v = y_pred.

        y_pred must be interior to the finiteness interval.
        """
        y = _as_array(y)
        v = _as_array(y_pred)
        if self.name == "square":
            d1 = 2.0 * (v - y)
            d2 = np.full(d1.shape, 2.0)
        elif self.name == "entropy":
            if np.any(v <= 0) or np.any(v >= 1):
                raise ValueError("entropy derivatives need y_pred in (0, 1)")
            d1 = -y / v + (1 - y) / (1 - v)
            d2 = y / v**2 + (1 - y) / (1 - v) ** 2
        else:
            u = np.exp(-y * v)
            if self.name == "exponential":
                d1, d2 = -y * u, y**2 * u
            else:
                d1, d2 = -y * u / (1 + u), y**2 * u / (1 + u) ** 2
        if d1.ndim == 0:
            return float(d1), float(d2)
        return d1, d2

def minimize_section(loss: LossSpec, y: float, arg_tol: float = 1e-10, max_iter: int = 200):
    """Minimize v -> loss(y, v) over the output interval by ternary search.

    Every supported loss is convex in v, so ternary search converges;
    boundary minima are fine.  Returns (argmin, min value).
    """
    lo, hi = loss.y_lo, loss.y_hi
    it = 0
    while hi - lo > arg_tol and it < max_iter:
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if loss.evaluate(y, m1) <= loss.evaluate(y, m2):
            hi = m2
        else:
            lo = m1
        it += 1
    v = 0.5 * (lo + hi)
    return v, float(loss.evaluate(y, v))


def exp_concavity_parameter(name: str, y_lo: float = 0.0, y_hi: float = 1.0) -> float:
    """Canonical temperature making exp(-lam * loss) concave in the prediction."""
    if name == "square":
        return 1.0 / (2.0 * (y_hi - y_lo) ** 2)
    if name == "entropy":
        return 1.0
    if name in ("exponential", "logit"):
        return math.exp(-y_hi**2)
    raise ValueError(f"unknown loss {name!r}")


def _range_bound(name: str, y_lo: float, y_hi: float) -> float:
    if name == "square":
        return (y_hi - y_lo) ** 2
    if name == "entropy":
        return math.inf
    m2 = y_hi**2
    if name == "exponential":
        return math.exp(m2) - math.exp(-m2)
    return float(np.logaddexp(0.0, m2) - np.logaddexp(0.0, -m2))


def make_loss(name: str, y_lo: float | None = None, y_hi: float | None = None, lam: float | None = None) -> LossSpec:
    """LossSpec with the usual interval for the name: [0,1] or [-1,1]."""
    if y_hi is None:
        y_hi = 1.0
    if y_lo is None:
        y_lo = -y_hi if name in ("exponential", "logit") else 0.0
    return LossSpec(name, y_lo, y_hi, lam)


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    worst: float
    tolerance: float
    where: tuple | None = None


@dataclass(frozen=True)
class AssumptionReport:
    loss: str
    lam: float
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


def verify_assumptions(loss: LossSpec, grid_points: int = 101) -> AssumptionReport:
    """Grid-check exp-concavity, output symmetry, and admissibility.

    Never raises on a violation; each check reports pass/fail with the worst
    margin found.  Exp-concavity: second differences of exp(-lam * loss(y, .))
    must stay <= CONCAVITY_TOL.  Symmetry: loss(y, v) == loss(2a-y, 2a-v) to
    SYMMETRY_TOL.  Admissibility: loss(y, 2a-v) > loss(y, v) for y, v > a.
    """
    grid = np.linspace(loss.y_lo, loss.y_hi, grid_points)

    worst_cc, where_cc = -math.inf, None
    for y in grid:
        f = np.exp(-loss.lam * loss.evaluate(np.full_like(grid, y), grid))
        d2 = f[2:] - 2 * f[1:-1] + f[:-2]
        k = int(np.argmax(d2))
        if d2[k] > worst_cc:
            worst_cc, where_cc = float(d2[k]), (float(y), float(grid[k + 1]))
    concave = CheckResult(worst_cc <= CONCAVITY_TOL, worst_cc, CONCAVITY_TOL, where_cc)

    yy, vv = np.meshgrid(grid, grid)
    left = loss.evaluate(yy, vv)
    right = loss.evaluate(2 * loss.a - yy, 2 * loss.a - vv)
    with np.errstate(invalid="ignore"):
        gap = np.abs(left - right)
    gap[np.isinf(left) & np.isinf(right)] = 0.0
    k = int(np.nanargmax(gap))
    symmetric = CheckResult(
        float(gap.flat[k]) <= SYMMETRY_TOL,
        float(gap.flat[k]),
        SYMMETRY_TOL,
        (float(yy.flat[k]), float(vv.flat[k])),
    )

    upper = grid[grid > loss.a]
    margin, where_ad = math.inf, None
    if upper.size:
        yy, vv = np.meshgrid(upper, upper)
        with np.errstate(invalid="ignore"):
            diff = loss.evaluate(yy, 2 * loss.a - vv) - loss.evaluate(yy, vv)
        # both sides infinite: the comparison is vacuous, not a violation
        diff[np.isnan(diff)] = math.inf
        k = int(np.argmin(diff))
        margin, where_ad = float(diff.flat[k]), (float(yy.flat[k]), float(vv.flat[k]))
    admissible = CheckResult(margin > 0.0, margin, 0.0, where_ad)

    return AssumptionReport(
        loss=loss.name,
        lam=loss.lam,
        checks={"exp_concavity": concave, "symmetry": symmetric, "admissibility": admissible},
    )
