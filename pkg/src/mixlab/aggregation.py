"""Sequential aggregation rules built on Gibbs posterior weights.

Three prediction rules over a finite set of experts:

* time-averaged mixture (pm): average the Gibbs weights over time, then mix
  the expert predictions linearly;
* per-step substituted mixture (pim): at each step substitute a single
  prediction whose loss is no worse than the Gibbs mixture bound, either the
  Gibbs mean of the expert predictions or a point chosen from the feasible
  interval;
* empirical risk minimization (erm): follow the expert with the smallest
  cumulative loss.

All routines work on arrays of expert prediction values rather than on
callables; evaluate the experts first and pass the values in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .losses import LossSpec, minimize_section

SUBSTITUTIONS = ("gibbs_mean", "feasible_interval")
SELECTORS = ("midpoint", "lower", "upper")

# Feasible-set endpoints are located to this width by bisection.
BISECT_TOL = 1e-10


def cumulative_losses(loss: LossSpec, values, y) -> np.ndarray:
    """Running loss totals per expert.

    values: shape (G,) for constant experts or (G, N) for per-step
    prediction values.  y: the N realized outputs.  Returns a (G, N + 1)
    table whose column i holds the loss summed over the first i pairs;
    column 0 is zero and infinite losses propagate forward.
    """
    values = np.asarray(values, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("y must be one-dimensional")
    n = y.shape[0]
    if values.ndim == 1:
        step = loss.evaluate(y[None, :], values[:, None])
    elif values.ndim == 2:
        if values.shape[1] != n:
            raise ValueError("values and y disagree on the number of steps")
        step = loss.evaluate(y[None, :], values)
    else:
        raise ValueError("values must have 1 or 2 dimensions")
    table = np.zeros((values.shape[0], n + 1))
    np.cumsum(step, axis=1, out=table[:, 1:])
    return table


def gibbs_weights(sigma, lam: float, prior=None) -> np.ndarray:
    """Posterior weights proportional to prior * exp(-lam * sigma).

    Accepts any shape with experts on the last axis.  Computed after
    subtracting the row minimum, so the result is exactly invariant to
    shifting all totals by a constant.  An infinite total gives that expert
    weight zero; if a whole row is infinite there is nothing to normalize
    and a ValueError is raised.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if not lam > 0:
        raise ValueError("need lam > 0")
    low = np.min(sigma, axis=-1, keepdims=True)
    if np.isinf(low).any():
        raise ValueError("all experts have infinite cumulative loss")
    w = np.exp(-lam * (sigma - low))
    if prior is not None:
        prior = np.asarray(prior, dtype=np.float64)
        if (prior < 0).any():
            raise ValueError("prior weights must be nonnegative")
        w = w * prior
    norm = w.sum(axis=-1, keepdims=True)
    if (norm <= 0).any():
        raise ValueError("prior assigns no mass to any finite-loss expert")
    return w / norm


def two_expert_weight(s, lam: float, delta: float):
    """Gibbs weight of the first expert when losses differ by delta per step.

    s counts the first expert's lead: the second expert's cumulative loss
    minus the first's, in units of delta.  Equals a logistic curve in s and
    is evaluated through expit for stability at large |s|.
    """
    return expit(lam * delta * np.asarray(s, dtype=np.float64))


def mix_bound(loss: LossSpec, lam: float, weights, values, y) -> float:
    """Loss level the substituted prediction must not exceed for output y.

    Returns -(1/lam) * log sum_g w_g exp(-lam * loss(y, v_g)), computed in
    log space.  Infinite when every positively weighted expert has infinite
    loss at y, in which case the constraint is vacuous.
    """
    weights = np.asarray(weights, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    ell = np.asarray(loss.evaluate(y, values), dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_mix = logsumexp(-lam * ell, b=weights)
    return float(-log_mix / lam)


def _bisect_edge(feasible, good: float, bad: float, tol: float) -> float:
    """Shrink [good, bad] to width tol keeping the invariant; return the
    feasible end, so the caller's constraint holds at the result exactly."""
    while abs(bad - good) > tol:
        mid = 0.5 * (good + bad)
        if feasible(mid):
            good = mid
        else:
            bad = mid
    return good


def feasible_interval(loss: LossSpec, lam: float, weights, values, probes,
                      tol: float = BISECT_TOL) -> tuple[float, float]:
    """Predictions whose loss meets the mixture bound at every probe output.

    Each probe contributes an interval (the loss section is convex in the
    prediction); the result is the intersection.  Raises ValueError when a
    single probe admits no prediction or when the intersection is empty,
    which can happen if lam exceeds the exp-concavity level of the loss.
    """
    lo_acc, hi_acc = loss.y_lo, loss.y_hi
    for y in probes:
        b = mix_bound(loss, lam, weights, values, y)
        if math.isinf(b):
            continue

        def feasible(v, y=y, b=b):
            return float(loss.evaluate(y, v)) <= b

        vmin, fmin = minimize_section(loss, y)
        if not feasible(vmin):
            if fmin <= b + 1e-12 * max(1.0, abs(b)):
                lo_y = hi_y = vmin
            else:
                raise ValueError(f"no prediction meets the bound at output {y}")
        else:
            lo_y = loss.y_lo if feasible(loss.y_lo) else _bisect_edge(feasible, vmin, loss.y_lo, tol)
            hi_y = loss.y_hi if feasible(loss.y_hi) else _bisect_edge(feasible, vmin, loss.y_hi, tol)
        lo_acc = max(lo_acc, lo_y)
        hi_acc = min(hi_acc, hi_y)
    if lo_acc > hi_acc:
        raise ValueError("empty feasible set: probe constraints are incompatible")
    return lo_acc, hi_acc


def pim_predict(loss: LossSpec, lam: float, weights, values, probes=None,
                substitution: str = "gibbs_mean", selector: str = "midpoint") -> float:
    """One substituted prediction from the current posterior weights.

    substitution "gibbs_mean" mixes the expert values linearly, which meets
    every probe constraint whenever lam is at most the exp-concavity level.
    substitution "feasible_interval" intersects the probe constraints
    explicitly and picks a point via selector (midpoint, lower, upper);
    probes are required in that case.
    """
    weights = np.asarray(weights, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if substitution == "gibbs_mean":
        return float(np.dot(weights, values))
    if substitution != "feasible_interval":
        raise ValueError(f"unknown substitution: {substitution!r}")
    if probes is None:
        raise ValueError("feasible_interval substitution needs probe outputs")
    lo, hi = feasible_interval(loss, lam, weights, values, probes)
    if selector == "midpoint":
        return 0.5 * (lo + hi)
    if selector == "lower":
        return lo
    if selector == "upper":
        return hi
    raise ValueError(f"unknown selector: {selector!r}")


def pm_predict(weights, values) -> float:
    """Time-averaged mixture prediction: mean weights mixed linearly.

    weights may be a single weight vector or a (steps, G) stack, in which
    case it is averaged over the first axis.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim == 2:
        weights = weights.mean(axis=0)
    return float(np.dot(weights, np.asarray(values, dtype=np.float64)))


def erm_select(sigma) -> int:
    """Index of the smallest cumulative loss; ties go to the lowest index."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 1:
        raise ValueError("sigma must be one-dimensional")
    return int(np.argmin(sigma))


@dataclass
class AggregatorTrace:
    """Step-by-step record of a prequential rule on one output sequence."""

    lam: float
    substitution: str
    selector: str
    table: np.ndarray        # (G, N + 1) cumulative losses
    weights: np.ndarray      # (N, G) posterior before each step
    predictions: np.ndarray  # (N,) substituted predictions
    incurred: np.ndarray     # (N,) losses of the predictions

    def regret(self) -> float:
        """Total incurred loss minus the best expert's final total."""
        return float(self.incurred.sum() - self.table[:, -1].min())

    def regret_bound(self) -> float:
        """log(G) / lam, which the regret never exceeds."""
        return math.log(self.table.shape[0]) / self.lam


def build_trace(loss: LossSpec, lam: float, values, y,
                substitution: str = "gibbs_mean", selector: str = "midpoint",
                probes=None) -> AggregatorTrace:
    """Run a prequential rule over the outputs y and record every step.

    The weights used at step i depend only on the first i pairs, and the
    incurred loss at step i is taken against y[i].  For the
    feasible_interval substitution the probe set defaults to the distinct
    realized outputs, so the recorded sequence satisfies the mixture bound
    at every step.
    """
    values = np.asarray(values, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    table = cumulative_losses(loss, values, y)
    n = y.shape[0]
    if probes is None and substitution == "feasible_interval":
        probes = np.unique(y)
    weights = np.empty((n, table.shape[0]))
    predictions = np.empty(n)
    for i in range(n):
        weights[i] = gibbs_weights(table[:, i], lam)
        step_values = values if values.ndim == 1 else values[:, i]
        predictions[i] = pim_predict(loss, lam, weights[i], step_values,
                                     probes=probes, substitution=substitution,
                                     selector=selector)
    incurred = np.asarray(loss.evaluate(y, predictions), dtype=np.float64)
    return AggregatorTrace(lam=lam, substitution=substitution, selector=selector,
                           table=table, weights=weights, predictions=predictions,
                           incurred=incurred)


def per_sequence_regret(incurred, table, lam: float) -> tuple[float, float]:
    """Regret of an incurred-loss sequence against the best expert, with
    its distribution-free ceiling log(G) / lam."""
    table = np.asarray(table, dtype=np.float64)
    regret = float(np.asarray(incurred, dtype=np.float64).sum() - table[:, -1].min())
    return regret, math.log(table.shape[0]) / lam


def gibbs_mean_regret_batch(loss: LossSpec, lam: float, values, y_batch) -> tuple[np.ndarray, float]:
    """Regrets of the Gibbs-mean rule on a batch of output sequences.

    values: (G,) constant expert predictions.  y_batch: (B, N) outputs.
    Returns the (B,) regrets and the shared bound log(G) / lam.  Same
    protocol as build_trace, vectorized over the batch.
    """
    values = np.asarray(values, dtype=np.float64)
    y_batch = np.asarray(y_batch, dtype=np.float64)
    if y_batch.ndim != 2:
        raise ValueError("y_batch must have shape (B, N)")
    nb, n = y_batch.shape
    sigma = np.zeros((nb, values.shape[0]))
    total = np.zeros(nb)
    for i in range(n):
        w = np.exp(-lam * (sigma - sigma.min(axis=1, keepdims=True)))
        w /= w.sum(axis=1, keepdims=True)
        pred = w @ values
        yi = y_batch[:, i]
        total += loss.evaluate(yi, pred)
        sigma += loss.evaluate(yi[:, None], values[None, :])
    regret = total - sigma.min(axis=1)
    return regret, math.log(values.shape[0]) / lam
