"""Two-point data distributions with a pair of constant experts.

Outputs take the two values y1 and y2 = 2a - y1 (mirror images through the
interval center), with P(Y = y1) = (1 + gamma) / 2.  The expert pair predicts
the constants ytilde1 and ytilde2 = 2a - ytilde1, so the first expert is the
better of the two by exactly gamma * delta in risk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .losses import LossSpec, minimize_section


class ConstructionError(ValueError):
    """Raised when requested parameters cannot form a valid construction."""


@dataclass(frozen=True)
class ConstantExpert:
    """Prediction function that ignores its input."""

    value: float

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self.value
        return np.full(np.shape(x), self.value)


def kappa(loss: LossSpec, y1: float) -> float:
    """Worst-case improvement of the best constant over the center prediction.

    kappa = loss(y1, a) - min_v loss(y1, v) > 0 whenever y1 != a.
    """
    _, best = minimize_section(loss, y1)
    return float(loss.evaluate(y1, loss.a)) - best


@dataclass(frozen=True)
class TwoPointConstruction:
    loss: LossSpec
    y1: float
    gamma: float
    ytilde1: float
    y2: float = field(init=False)
    ytilde2: float = field(init=False)
    delta: float = field(init=False)
    kappa: float = field(init=False)

    def __post_init__(self):
        a = self.loss.a
        if not (self.loss.y_lo <= self.y1 <= self.loss.y_hi) or self.y1 <= a:
            raise ConstructionError(f"y1 must lie in ({a}, {self.loss.y_hi}]")
        if not a < self.ytilde1 <= self.loss.y_hi:
            raise ConstructionError(f"ytilde1 must lie in ({a}, {self.loss.y_hi}]")
        if not 0.0 <= self.gamma < 1.0:
            raise ConstructionError("gamma must lie in [0, 1)")
        object.__setattr__(self, "y2", 2 * a - self.y1)
        object.__setattr__(self, "ytilde2", 2 * a - self.ytilde1)
        delta = float(self.loss.evaluate(self.y1, self.ytilde2) - self.loss.evaluate(self.y1, self.ytilde1))
        if not delta > 0.0:
            raise ConstructionError("experts must be risk-separated (delta <= 0)")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "kappa", kappa(self.loss, self.y1))

    @property
    def experts(self) -> tuple[ConstantExpert, ConstantExpert]:
        """Better expert first; ties in empirical risk resolve to index 0."""
        return (ConstantExpert(self.ytilde1), ConstantExpert(self.ytilde2))

    def exact_risk(self, v):
        """Expected loss of the constant prediction v under the two-point law."""
        p = 0.5 * (1.0 + self.gamma)
        return p * self.loss.evaluate(self.y1, v) + (1.0 - p) * self.loss.evaluate(self.y2, v)

    def risk_gap(self) -> float:
        """exact_risk(ytilde2) - exact_risk(ytilde1); equals gamma * delta."""
        return self.gamma * self.delta

    def sample_dataset(self, n: int, rng: np.random.Generator):
        """n i.i.d. pairs; labels consume the first n uniforms of the stream.

        Inputs are uniform on [0, 1] and carry no signal; they are drawn
        after the labels so that label sequences agree with any consumer
        that only draws labels from the same substream.
        """
        u = rng.random(n)
        y = np.where(u < 0.5 * (1.0 + self.gamma), self.y1, self.y2)
        x = rng.random(n)
        return x, y


def gamma_schedule(n: int, c0: float) -> float:
    """Bias sqrt(c0 log(n) / n), clamped into [0, 1)."""
    if n < 1 or c0 < 0:
        raise ValueError("need n >= 1 and c0 >= 0")
    g = math.sqrt(c0 * math.log(n) / n) if n > 1 else 0.0
    return min(g, math.nextafter(1.0, 0.0))


def tau(n: int, lam: float, delta: float) -> int:
    """Smallest integer >= log(n) / (lam * delta) with n - tau even."""
    if n < 1:
        raise ValueError("need n >= 1")
    ld = lam * delta
    if not ld > 0:
        raise ValueError("need lam * delta > 0")
    t0 = math.log(n) / ld
    k = math.ceil(t0)
    if (n - k) % 2:
        k += 1
    return k


def big_m(n: int) -> int:
    """Smallest integer > sqrt(n) with n - M even."""
    if n < 1:
        raise ValueError("need n >= 1")
    m = math.isqrt(n) + 1
    if (n - m) % 2:
        m += 1
    return m


def erm_gamma(n: int) -> float:
    """Bias min(sqrt(1 / (4n)), 1) used by the selector lower bound."""
    if n < 1:
        raise ValueError("need n >= 1")
    return min(math.sqrt(1.0 / (4.0 * n)), 1.0)
