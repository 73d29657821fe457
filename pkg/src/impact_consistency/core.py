"""Logarithmic price impact and the multiplicative order-book feedback state.

Prices live in log space. A market order of ``n`` shares moves the mid
log-price by ``m * gamma * ln(n)``, where ``m`` is the multiplier of the side
being hit. Each order contracts the multiplier of its own side by ``kappa``
and divides the multiplier of the opposite side by ``theta``.

All functions accept numpy arrays wherever a size or a coefficient is
expected, so a whole parameter grid can be pushed through one order sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np

BUY = 1
SELL = -1

CUMULATIVE = "cumulative"
RUN = "run"
FEEDBACK_RULES = (CUMULATIVE, RUN)

KAPPA_MAX = 1.2


def _check_positive(name, value, upper=None):
    arr = np.asarray(value, dtype=float)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")
    if upper is not None and np.any(arr > upper):
        raise ValueError(f"{name} must be <= {upper}, got {value!r}")


@dataclass(frozen=True)
class ImpactParams:
    """Stock-level parameters of the impact model.

    ``gamma`` may be a numpy array (vectorised scans); the feedback factors
    are scalars. ``kappa2`` defaults to ``kappa1``. With ``staged=False`` the
    effective ``kappa = (kappa1 + kappa2) / 2`` is applied after every
    same-side order; with ``staged=True`` the first contraction uses
    ``kappa1`` and every later one ``kappa2``.
    """

    gamma: float | np.ndarray
    kappa1: float = 1.0
    kappa2: float | None = None
    theta: float = 1.0
    spread: float = 0.0
    capital: float = math.inf
    staged: bool = False
    rule: str = CUMULATIVE

    def __post_init__(self):
        if self.kappa2 is None:
            object.__setattr__(self, "kappa2", self.kappa1)
        _check_positive("gamma", self.gamma)
        _check_positive("kappa1", self.kappa1, KAPPA_MAX)
        _check_positive("kappa2", self.kappa2, KAPPA_MAX)
        _check_positive("theta", self.theta, KAPPA_MAX)
        if not (self.spread >= 0 and math.isfinite(self.spread)):
            raise ValueError(f"spread must be finite and >= 0, got {self.spread!r}")
        if not self.capital > 0:
            raise ValueError(f"capital must be > 0 (or inf), got {self.capital!r}")
        if self.rule not in FEEDBACK_RULES:
            raise ValueError(f"rule must be one of {FEEDBACK_RULES}, got {self.rule!r}")

    @classmethod
    def from_kappa(cls, gamma, kappa, theta=1.0, spread=0.0, **kw) -> "ImpactParams":
        return cls(gamma=gamma, kappa1=kappa, kappa2=kappa, theta=theta, spread=spread, **kw)

    @property
    def kappa(self) -> float:
        return 0.5 * (self.kappa1 + self.kappa2)

    def contraction(self, count: int) -> float:
        """Factor applied to a side's multiplier after its ``count``-th order."""
        if not self.staged:
            return self.kappa
        return self.kappa1 if count <= 1 else self.kappa2

    def replace(self, **changes) -> "ImpactParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class BookState:
    """Feedback state of the book: mid log-price and one multiplier per side.

    ``last_side``/``run`` track the current run of same-side orders and
    ``n_buy``/``n_sell`` the sequence totals; which counter drives the
    staged contraction depends on the feedback rule.
    """

    mid: float | np.ndarray = 0.0
    m_buy: float = 1.0
    m_sell: float = 1.0
    last_side: int = 0
    run: int = 0
    n_buy: int = 0
    n_sell: int = 0

    def __post_init__(self):
        if not (self.m_buy > 0 and self.m_sell > 0):
            raise ValueError("book multipliers must be > 0")


def fresh_book(p0=0.0) -> BookState:
    return BookState(mid=p0)


@dataclass(frozen=True)
class MarketOrder:
    side: int
    size: float | np.ndarray = field(default=1.0)

    def __post_init__(self):
        if self.side not in (BUY, SELL):
            raise ValueError(f"side must be BUY (+1) or SELL (-1), got {self.side!r}")
        if not np.all(np.asarray(self.size, dtype=float) >= 1):
            raise ValueError(f"order size must be >= 1, got {self.size!r}")


def impact(size, gamma):
    """Log-return caused by ``size`` shares on a fresh book: ``gamma * ln(size)``."""
    size = np.asarray(size, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if not np.all(size >= 1):
        raise ValueError(f"size must be >= 1, got {size!r}")
    if not np.all(gamma > 0):
        raise ValueError(f"gamma must be > 0, got {gamma!r}")
    out = gamma * np.log(size)
    return float(out) if out.ndim == 0 else out


def inverse_impact(r, gamma):
    """Share count whose fresh-book impact is ``r``."""
    gamma = np.asarray(gamma, dtype=float)
    if not np.all(gamma > 0):
        raise ValueError(f"gamma must be > 0, got {gamma!r}")
    out = np.exp(np.asarray(r, dtype=float) / gamma)
    return float(out) if out.ndim == 0 else out


def apply_order(state: BookState, order: MarketOrder, params: ImpactParams):
    """Execute one market order.

    Returns ``(new_state, realized_impact, price)`` where ``realized_impact``
    is the unsigned log move of the mid and ``price`` is the transaction
    price ``exp(mid_after +/- spread/2)``.
    """
    side = order.side
    base = params.gamma * np.log(np.asarray(order.size, dtype=float))
    flipped = state.last_side not in (0, side)
    run = state.run + 1 if state.last_side == side else 1
    if side == BUY:
        delta = state.m_buy * base
        mid = state.mid + delta
        n_buy, n_sell = state.n_buy + 1, state.n_sell
        count = n_buy if params.rule == CUMULATIVE else run
        m_buy = state.m_buy * params.contraction(count)
        m_sell = state.m_sell
        if params.rule == RUN and flipped:
            m_sell = 1.0
        m_sell = m_sell / params.theta
        price = np.exp(mid + 0.5 * params.spread)
    else:
        delta = state.m_sell * base
        mid = state.mid - delta
        n_buy, n_sell = state.n_buy, state.n_sell + 1
        count = n_sell if params.rule == CUMULATIVE else run
        m_sell = state.m_sell * params.contraction(count)
        m_buy = state.m_buy
        if params.rule == RUN and flipped:
            m_buy = 1.0
        m_buy = m_buy / params.theta
        price = np.exp(mid - 0.5 * params.spread)
    new = BookState(mid=mid, m_buy=m_buy, m_sell=m_sell, last_side=side, run=run,
                    n_buy=n_buy, n_sell=n_sell)
    return new, delta, price
