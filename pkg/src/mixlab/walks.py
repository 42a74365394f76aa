"""Exact combinatorics for biased +-1 random walks.

Covers the reflection identity, the biased-vs-symmetric change of measure,
Stirling sandwiches with binomial point envelopes, and barrier-hitting
(excursion) probabilities computed by exact dynamic programming with
enumeration oracles for small lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels
from .constructions import big_m, gamma_schedule, tau

_ENUM_LIMIT = 24
_CHUNK_BITS = 18

STIRLING_TWELVE = 12.0  # perturbing this must trip the verification suite

#: sqrt(2/pi) * (1 - exp(-1/2)); limit of sqrt(n) [P(s_N=tau) - P(s_N=M)]
WALK_GAP_LIMIT = math.sqrt(2.0 / math.pi) * (1.0 - math.exp(-0.5))


def _chunks(n):
    total = 1 << n
    step = min(total, 1 << _CHUNK_BITS)
    for start in range(0, total, step):
        idx = np.arange(start, min(start + step, total), dtype=np.int64)
        bits = ((idx[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1).astype(np.int8)
        yield 2 * bits - 1


@lru_cache(maxsize=24)
def _enum_stats(n):
    """(n_plus, final, maxpref) over all 2^n sequences, index bit j = step j+1."""
    n_plus = np.empty(1 << n, dtype=np.int16)
    final = np.empty(1 << n, dtype=np.int16)
    maxpref = np.empty(1 << n, dtype=np.int16)
    pos = 0
    for steps in _chunks(n):
        rows = steps.shape[0]
        s = np.cumsum(steps, axis=1, dtype=np.int16)
        n_plus[pos : pos + rows] = (steps > 0).sum(axis=1)
        final[pos : pos + rows] = s[:, -1]
        maxpref[pos : pos + rows] = s.max(axis=1)
        pos += rows
    return n_plus, final, maxpref


def _bias_pmf(n, gamma):
    """Probability of a sequence with k plus-steps, for k = 0..n."""
    k = np.arange(n + 1)
    return (0.5 * (1.0 + gamma)) ** k * (0.5 * (1.0 - gamma)) ** (n - k)


def excursion_holds(positions, barrier: int) -> bool:
    """True when S_i <= -barrier for every i in [barrier, n].

    positions holds S_1..S_n.  An empty index range (barrier > n) is
    vacuously true; barrier 0 checks every step against 0.
    """
    positions = np.asarray(positions)
    n = positions.shape[0]
    if barrier > n:
        return True
    start = max(barrier, 1)
    return bool(np.all(positions[start - 1 :] <= -barrier))


def reflection_identity(n: int, t: int, m: int):
    """Both sides of the mirror identity for symmetric walks, as exact rationals.

    lhs = P(max_{1<=k<=n} s_k >= t, s_n != t, |s_n - t| <= m), counted by
    enumeration over all 2^n sign sequences; rhs = 2 P(t < s_n <= t + m)
    from binomial coefficients.  Returns (lhs, rhs).
    """
    if not (n >= 1 and t >= 1 and m >= 0):
        raise ValueError("need n >= 1, t >= 1, m >= 0")
    if n > _ENUM_LIMIT:
        raise ValueError(f"enumeration capped at n = {_ENUM_LIMIT}")
    if n <= 20:
        _, final, maxpref = _enum_stats(n)
        hit = (maxpref >= t) & (final != t) & (np.abs(final - t) <= m)
        count = int(np.count_nonzero(hit))
    else:
        count = 0
        for steps in _chunks(n):
            s = np.cumsum(steps, axis=1, dtype=np.int16)
            final = s[:, -1]
            hit = (s.max(axis=1) >= t) & (final != t) & (np.abs(final - t) <= m)
            count += int(np.count_nonzero(hit))
    lhs = Fraction(count, 1 << n)
    rhs_count = sum(
        math.comb(n, (n + s) // 2) for s in range(t + 1, t + m + 1) if s <= n and (n + s) % 2 == 0
    )
    rhs = Fraction(2 * rhs_count, 1 << n)
    return lhs, rhs


def change_of_measure_check(n: int, m: int, gamma: float, event):
    """Compare both sides of the biased-walk change of measure on an event.

    event: boolean mask over the 2^n sequences (bit j of the index is step
    j+1, set bit = +1) or a callable mapping a (chunk, n) step matrix to a
    boolean mask.  Every event sequence must satisfy |s_n| <= m.  Returns
    (lhs, rhs, holds) where lhs = P(biased walk in event), rhs =
    ((1-gamma)/(1+gamma))^(m/2) (1-gamma^2)^(n/2) P(symmetric walk in event)
    and holds allows float slack 1e-15.
    """
    if n > _ENUM_LIMIT:
        raise ValueError(f"enumeration capped at n = {_ENUM_LIMIT}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    mask = None if callable(event) else np.asarray(event, dtype=bool)
    if mask is not None and mask.shape != (1 << n,):
        raise ValueError(f"event mask must have length 2^{n}")
    pmf = _bias_pmf(n, gamma)
    lhs = 0.0
    count = 0
    if mask is not None and n <= 20:
        n_plus, final, _ = _enum_stats(n)
        if np.any(np.abs(final[mask]) > m):
            raise ValueError("event contains a path with |s_n| > m")
        lhs = float(np.bincount(n_plus[mask], minlength=n + 1) @ pmf)
        count = int(np.count_nonzero(mask))
    else:
        offset = 0
        for steps in _chunks(n):
            rows = steps.shape[0]
            sel = event(steps) if mask is None else mask[offset : offset + rows]
            offset += rows
            if not np.any(sel):
                continue
            final = steps.sum(axis=1, dtype=np.int16)
            if np.any(np.abs(final[sel]) > m):
                raise ValueError("event contains a path with |s_n| > m")
            n_plus = (steps[sel] > 0).sum(axis=1)
            lhs += float(np.bincount(n_plus, minlength=n + 1) @ pmf)
            count += int(np.count_nonzero(sel))
    factor = ((1.0 - gamma) / (1.0 + gamma)) ** (m / 2.0) * (1.0 - gamma**2) ** (n / 2.0)
    rhs = factor * count / (1 << n)
    return lhs, rhs, lhs >= rhs - 1e-15


def stirling_log_bounds(n: int) -> tuple[float, float]:
    """(log lower, log upper) of the factorial sandwich for n >= 1."""
    if n < 1:
        raise ValueError("need n >= 1")
    base = n * math.log(n) - n + 0.5 * math.log(2.0 * math.pi * n)
    return base + 1.0 / (STIRLING_TWELVE * n + 1.0), base + 1.0 / (STIRLING_TWELVE * n)


def stirling_bounds(n: int) -> tuple[float, float]:
    """Strict sandwich lower < n! < upper; overflows to inf past n ~ 170."""
    lo, hi = stirling_log_bounds(n)
    return math.exp(lo), math.exp(hi)


def binomial_point(n: int, s: int):
    """P(s_n = s) for the symmetric walk with its two-sided envelope.

    Returns (exact, lower, upper).  The lower envelope is
    sqrt(2/(pi n)) (1-s^2/n^2)^(-n/2) ((1-s/n)/(1+s/n))^(s/2)
    exp(-1/(6(n+s)) - 1/(6(n-s))); the upper keeps the exact prefactor
    sqrt(2n/(pi (n^2-s^2))) with exponent 1/(12n) - 1/(6(n+s)+1)
    - 1/(6(n-s)+1), which is valid for every |s| < n (the simplified
    prefactor would fail once s^2 is comparable to n).  At |s| = n the
    envelope degenerates and (exact, 0, inf) is returned.
    """
    if n < 1 or abs(s) > n:
        raise ValueError("need n >= 1 and |s| <= n")
    if (n - s) % 2:
        raise ValueError(f"parity violation: n - s = {n - s} is odd")
    k = (n + s) // 2
    if n <= 1000:
        exact = float(Fraction(math.comb(n, k), 1 << n))
    else:
        exact = math.exp(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1) - n * math.log(2.0))
    sa = abs(s)
    if sa == n:
        return exact, 0.0, math.inf
    x = sa / n
    log_main = -0.5 * n * math.log1p(-x * x) + 0.5 * sa * (math.log1p(-x) - math.log1p(x))
    log_lo = 0.5 * math.log(2.0 / (math.pi * n)) + log_main - 1.0 / (6.0 * (n + sa)) - 1.0 / (6.0 * (n - sa))
    log_hi = (
        0.5 * math.log(2.0 * n / (math.pi * (n * n - sa * sa)))
        + log_main
        + 1.0 / (STIRLING_TWELVE * n)
        - 1.0 / (6.0 * (n + sa) + 1.0)
        - 1.0 / (6.0 * (n - sa) + 1.0)
    )
    return exact, math.exp(log_lo), math.exp(log_hi)


def excursion_probability_exact(n: int, barrier: int, gamma: float) -> float:
    """P(S_i <= -barrier for all i in [barrier, n]) by exact DP, O(n^2)."""
    if n < 1 or n > 100_000:
        raise ValueError("need 1 <= n <= 100000")
    if barrier < 0:
        raise ValueError("barrier must be >= 0")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if barrier <= n and (n - barrier) % 2:
        raise ValueError(f"parity violation: n - barrier = {n - barrier} is odd")
    if barrier > n:
        return 1.0
    return float(kernels.excursion_dp(n, barrier, gamma))


def excursion_probability_enum(n: int, barrier: int, gamma: float) -> float:
    """Enumeration oracle for excursion_probability_exact, n <= 24."""
    if n > _ENUM_LIMIT:
        raise ValueError(f"enumeration capped at n = {_ENUM_LIMIT}")
    if barrier > n:
        return 1.0
    start = max(barrier, 1)
    pmf = _bias_pmf(n, gamma)
    total = 0.0
    for steps in _chunks(n):
        s = np.cumsum(steps, axis=1, dtype=np.int16)
        ok = np.all(s[:, start - 1 :] <= -barrier, axis=1)
        if not np.any(ok):
            continue
        n_plus = (steps[ok] > 0).sum(axis=1)
        total += float(np.bincount(n_plus, minlength=n + 1) @ pmf)
    return total


@lru_cache(maxsize=None)
def _walk_profile(n: int, lam: float, delta: float, c0: float):
    g = gamma_schedule(n, c0)
    t = tau(n, lam, delta)
    return g, t, excursion_probability_exact(n, t, g)


@dataclass(frozen=True)
class ExcursionFloorReport:
    c0: float
    lam: float
    delta: float
    rows: tuple  # (n, gamma, tau, p_exact, floor, holds)
    n0: int | None  # smallest grid n from which every later point holds
    fitted_exponent: float  # slope of -log P against log n over the grid

    @property
    def top_half_holds(self) -> bool:
        tail = self.rows[len(self.rows) // 2 :]
        return all(r[5] for r in tail)


def excursion_floor_check(c0: float, n_grid, lam: float = 0.5,
                          delta: float = 0.6) -> ExcursionFloorReport:
    """Exact excursion probabilities against the n^(-c0) floor on a grid.

    Records the smallest grid point from which P >= n^(-c0) holds through
    the end of the grid (None when the floor is never reached) and the
    empirically fitted decay exponent of P.
    """
    ns = sorted(int(n) for n in n_grid)
    rows = []
    for n in ns:
        g, t, p = _walk_profile(n, lam, delta, c0)
        floor = n ** (-c0)
        rows.append((n, g, t, p, floor, p >= floor))
    n0 = None
    for i in range(len(rows)):
        if all(r[5] for r in rows[i:]):
            n0 = rows[i][0]
            break
    logs_n = np.log([r[0] for r in rows])
    logs_p = np.log([max(r[3], 1e-300) for r in rows])
    slope = float(np.polyfit(logs_n, logs_p, 1)[0]) if len(rows) > 1 else math.nan
    return ExcursionFloorReport(c0, lam, delta, tuple(rows), n0, -slope)


@dataclass(frozen=True)
class ChainReport:
    n: int
    gamma: float
    tau: int
    m: int
    walk_len: int  # n - 2 tau
    exact: float
    bound_coarse: float  # keeps the exact binomial bracket
    bound_limit: float  # bracket replaced by its sqrt(n) limit value
    coarse_holds: bool
    limit_holds: bool


def lower_bound_chain(n: int, gamma: float, lam: float = 0.5, delta: float = 0.6) -> ChainReport:
    """Excursion probability against its two closed-form lower bounds.

    bound_coarse <= exact holds for every admissible n; bound_limit
    substitutes the limiting value of sqrt(n) [P(s_N=tau) - P(s_N=M)] and
    only holds past some n, so callers compare and record the threshold.
    """
    t = tau(n, lam, delta)
    m = big_m(n)
    walk_len = n - 2 * t
    if walk_len < 1 or m < t or m > walk_len:
        raise ValueError(f"chain inapplicable at n = {n}: tau = {t}, M = {m}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    shared = (
        ((1.0 - gamma) / 2.0) ** (2 * t)
        * ((1.0 - gamma) / (1.0 + gamma)) ** (m / 2.0)
        * (1.0 - gamma**2) ** (walk_len / 2.0)
    )
    bracket = binomial_point(walk_len, t)[0] - binomial_point(walk_len, m)[0]
    bound_coarse = t * shared * bracket
    bound_limit = t * shared * WALK_GAP_LIMIT / math.sqrt(n)
    exact = excursion_probability_exact(n, t, gamma)
    return ChainReport(
        n=n,
        gamma=gamma,
        tau=t,
        m=m,
        walk_len=walk_len,
        exact=exact,
        bound_coarse=bound_coarse,
        bound_limit=bound_limit,
        coarse_holds=exact >= bound_coarse - 1e-15,
        limit_holds=exact >= bound_limit - 1e-15,
    )
