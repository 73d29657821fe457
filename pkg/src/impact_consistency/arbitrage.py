"""The trader-0/1/2 chain-arbitrage game.

Trader 0 buys ``n0`` shares regardless of price. Trader 1 knows it and wraps
the order in a round trip (buy before, sell after). Trader 2 wraps trader 1
in turn and compensates trader 1 for the gain his presence destroys. The
mechanistic game (``run_game``) is the reference semantics; the closed forms
below are cross-checks valid for ``theta == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from impact_consistency.core import BUY, SELL, BookState, ImpactParams, MarketOrder, apply_order
from impact_consistency.optimize import maximize_log


class GameValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Leg:
    trader: int
    side: int
    size: float | np.ndarray


@dataclass
class GameScript:
    legs: Sequence[Leg]
    params: ImpactParams
    p0: float = 0.0

    def validate(self) -> None:
        opened: dict[int, int] = {}
        intervals: dict[int, tuple[int, int]] = {}
        for i, leg in enumerate(self.legs):
            if leg.side not in (BUY, SELL):
                raise GameValidationError(f"leg {i}: bad side {leg.side!r}")
            if not np.all(np.asarray(leg.size, dtype=float) >= 1):
                raise GameValidationError(f"leg {i}: size must be >= 1")
            if leg.trader == 0:
                continue
            if leg.trader in intervals:
                raise GameValidationError(f"trader {leg.trader} trades after closing")
            if leg.trader not in opened:
                opened[leg.trader] = i
                continue
            j = opened.pop(leg.trader)
            first = self.legs[j]
            if first.side == leg.side or not np.allclose(first.size, leg.size, rtol=1e-12, atol=0):
                raise GameValidationError(f"trader {leg.trader} does not close the position opened at leg {j}")
            intervals[leg.trader] = (j, i)
        if opened:
            raise GameValidationError(f"positions never closed: traders {sorted(opened)}")

        for a, (oa, ca) in intervals.items():
            for b, (ob, cb) in intervals.items():
                if a == b:
                    continue
                if oa < ob < ca < cb:
                    raise GameValidationError(f"traders {a} and {b} interleave instead of nesting")
                if ob < oa and ca < cb and b < a:
                    raise GameValidationError(f"trader {b} is nested outside trader {a}; outer traders open first")
        if 1 in intervals:
            o1, c1 = intervals[1]
            for i, leg in enumerate(self.legs):
                if leg.trader == 0 and not o1 < i < c1:
                    raise GameValidationError("trader 0 must trade between trader 1's open and close")


@dataclass
class GameResult:
    gains: dict
    mids: list
    prices: list
    impacts: list = field(default_factory=list)


def _play(legs, params: ImpactParams, p0=0.0) -> GameResult:
    state = BookState(mid=p0)
    gains: dict = {}
    mids, prices, impacts = [], [], []
    for leg in legs:
        state, delta, price = apply_order(state, MarketOrder(leg.side, leg.size), params)
        flow = -leg.side * np.asarray(leg.size, dtype=float) * price
        gains[leg.trader] = gains.get(leg.trader, 0.0) + flow
        mids.append(state.mid)
        prices.append(price)
        impacts.append(delta)
    return GameResult(gains=gains, mids=mids, prices=prices, impacts=impacts)


def run_game(script: GameScript) -> GameResult:
    """Play a validated leg list; gains are signed cash flows per trader."""
    script.validate()
    return _play(script.legs, script.params, script.p0)


def solo_legs(n1, n0):
    return [Leg(1, BUY, n1), Leg(0, BUY, n0), Leg(1, SELL, n1)]


def chain_legs(n2, n1, n0):
    return [Leg(2, BUY, n2), Leg(1, BUY, n1), Leg(0, BUY, n0), Leg(1, SELL, n1), Leg(2, SELL, n2)]


# -- closed forms (theta == 1) ------------------------------------------------

def closed_n1(n0, gamma, kappa, spread=0.0):
    return np.exp(-spread / gamma) * np.power(n0, kappa) / np.power(1.0 + gamma, 1.0 / gamma)


def closed_g1(n1, n0, gamma, kappa, spread=0.0, p0=0.0):
    """Trader 1's solo round-trip gain at size ``n1``."""
    return np.exp(p0) * n1 * (np.power(n0, kappa * gamma) * np.exp(-0.5 * spread)
                              - np.power(n1, gamma) * np.exp(0.5 * spread))


def closed_g1_star(n0, gamma, kappa, spread=0.0, p0=0.0):
    return (np.exp(p0 - 0.5 * spread - spread / gamma) * np.power(n0, kappa * (gamma + 1))
            * gamma / np.power(gamma + 1, 1 + 1 / gamma))


def closed_delta_g1(n2, n0, gamma, kappa, p0=0.0):
    """Loss of trader 1 (sitting at his solo optimum) caused by trader 2."""
    lead = np.power(n0, kappa * (1 + kappa * gamma)) / np.power(gamma + 1, 1 / gamma + kappa)
    bracket = np.power(n0, -gamma * kappa * (1 - kappa)) * (gamma + 1) - 1
    return closed_g1_star(n0, gamma, kappa, 0.0, p0) - np.exp(p0) * np.power(n2, gamma) * lead * bracket


def closed_g2(n2, n0, gamma, kappa, p0=0.0):
    """Trader 2's net gain after paying trader 1's loss."""
    c = np.power(n0, kappa * gamma * (2 * kappa - 1)) * np.power(1 + gamma, 1 - kappa)
    gross = np.exp(p0) * np.power(n2, gamma + 1) * (np.power(n2, -kappa * gamma) * c - 1)
    return gross - closed_delta_g1(n2, n0, gamma, kappa, p0)


def _closed_trader1_ok(params: ImpactParams) -> bool:
    return params.theta == 1.0


def _closed_trader2_ok(params: ImpactParams) -> bool:
    return (params.theta == 1.0 and params.spread == 0.0 and np.isinf(params.capital)
            and params.kappa1 == params.kappa2)


# -- optimisation -------------------------------------------------------------

class Trader1(NamedTuple):
    n1_star: float | np.ndarray
    g1_star: float | np.ndarray


class Trader2(NamedTuple):
    n2_star: float | np.ndarray
    G2_star: float | np.ndarray
    unbracketed: bool | np.ndarray


@dataclass
class ChainOutcome:
    n1_star: float | np.ndarray
    g1_star: float | np.ndarray
    n2_star: float | np.ndarray
    G2_star: float | np.ndarray
    delta_g1: float | np.ndarray
    n2_unbracketed: bool | np.ndarray = False
    method: str = "game"


def _expand(params: ImpactParams, x):
    g = np.asarray(params.gamma, dtype=float)
    return params.replace(gamma=g[..., None]) if g.ndim else params


def capital_cap(params: ImpactParams, p0=0.0):
    """Largest size a trader opening the sequence can pay for."""
    cap = np.power(params.capital * np.exp(-p0 - 0.5 * params.spread), 1.0 / (1.0 + np.asarray(params.gamma)))
    return np.maximum(cap, 1.0)


def _size_hi(n0, kappa):
    return 10.0 * np.maximum(n0, np.power(n0, max(kappa, 1.0))) + 10.0


def game_trader1(n0, params: ImpactParams, p0=0.0, polish=False) -> Trader1:
    """Trader 1's optimum found by maximising the mechanistic solo game."""
    n0 = np.asarray(n0, dtype=float)
    shape = np.broadcast(n0, np.asarray(params.gamma)).shape
    n0b = np.broadcast_to(n0, shape)
    pe = params.replace(gamma=np.broadcast_to(np.asarray(params.gamma, dtype=float), shape)) if shape else params
    pe = _expand(pe, None)
    n0e = n0b[..., None]

    def gain(x):
        return _play(solo_legs(x, n0e), pe, p0).gains[1]

    hi = np.minimum(_size_hi(n0b, params.kappa1), np.broadcast_to(capital_cap(params, p0), shape))
    res = maximize_log(gain, np.ones(shape), hi, polish=polish)
    return Trader1(res.x, res.fx)


def optimal_trader1(n0, params: ImpactParams, p0=0.0, method="auto", polish=False) -> Trader1:
    """Trader 1's optimal size and gain; closed form whenever theta == 1."""
    if np.any(np.asarray(n0) < 1):
        raise ValueError("n0 must be >= 1")
    if method == "auto":
        method = "closed" if _closed_trader1_ok(params) else "game"
    if method == "game":
        return game_trader1(n0, params, p0, polish)
    if not _closed_trader1_ok(params):
        raise ValueError("closed form requires theta == 1")
    kappa = params.contraction(1)
    g, s = params.gamma, params.spread
    n1 = closed_n1(n0, g, kappa, s)
    if np.isfinite(params.capital):
        n1 = np.minimum(n1, capital_cap(params, p0))
    return Trader1(n1, closed_g1(n1, n0, g, kappa, s, p0))


def trader2_gain(n2, n0, params: ImpactParams, p0=0.0, method="auto", n1=None, g1_star=None):
    """``(delta_g1, G2)`` for trader 2 of size ``n2`` wrapping trader 1.

    Trader 1 stays at his solo optimum ``n1`` (computed if not given).
    """
    if method == "auto":
        method = "closed" if _closed_trader2_ok(params) else "game"
    if method == "closed":
        if not _closed_trader2_ok(params):
            raise ValueError("closed form requires theta == 1, spread == 0, unbounded capital, kappa1 == kappa2")
        k = params.kappa
        return (closed_delta_g1(n2, n0, params.gamma, k, p0), closed_g2(n2, n0, params.gamma, k, p0))
    if n1 is None or g1_star is None:
        n1, g1_star = game_trader1(n0, params, p0)
    res = _play(chain_legs(n2, n1, n0), params, p0)
    dg1 = g1_star - res.gains[1]
    return dg1, res.gains[2] - dg1


def chain_outcome(n0, params: ImpactParams, p0=0.0, method="game", n2_max=None, polish=False) -> ChainOutcome:
    """Full trader-1 / trader-2 solution, vectorised over ``n0`` and ``gamma``."""
    n0 = np.asarray(n0, dtype=float)
    if np.any(n0 < 1):
        raise ValueError("n0 must be >= 1")
    shape = np.broadcast(n0, np.asarray(params.gamma)).shape
    n0b = np.broadcast_to(n0, shape)
    if shape:
        params = params.replace(gamma=np.broadcast_to(np.asarray(params.gamma, dtype=float), shape))
    n1, g1s = optimal_trader1(n0b, params, p0, method=method, polish=polish)
    n1, g1s = np.broadcast_to(n1, shape), np.broadcast_to(g1s, shape)

    pe = _expand(params, None)
    n0e, n1e, g1e = n0b[..., None], n1[..., None], g1s[..., None]

    if method == "closed":
        def objective(x):
            return closed_g2(x, n0e, pe.gamma, params.kappa, p0)
    else:
        def objective(x):
            return trader2_gain(x, n0e, pe, p0, method="game", n1=n1e, g1_star=g1e)[1]

    hi = 10.0 * n0b if n2_max is None else np.broadcast_to(np.asarray(n2_max, dtype=float), shape)
    hi = np.minimum(hi, np.broadcast_to(capital_cap(params, p0), shape))
    res = maximize_log(objective, np.ones(shape), np.maximum(hi, 1.0), polish=polish)
    if method == "closed":
        dg1 = closed_delta_g1(res.x, n0b, params.gamma, params.kappa, p0)
    else:
        dg1 = trader2_gain(res.x, n0b, params, p0, method="game", n1=n1, g1_star=g1s)[0]
    out = ChainOutcome(n1_star=n1, g1_star=g1s, n2_star=res.x, G2_star=res.fx, delta_g1=dg1,
                       n2_unbracketed=res.at_upper, method=method)
    if not shape:
        for name in ("n1_star", "g1_star", "n2_star", "G2_star", "delta_g1", "n2_unbracketed"):
            setattr(out, name, np.asarray(getattr(out, name)).item())
    return out


def optimal_trader2(n0, params: ImpactParams, p0=0.0, n2_max=None, method="auto") -> Trader2:
    """Maximise trader 2's net gain over ``n2`` in ``[1, n2_max]`` (default ``10 * n0``).

    ``unbracketed`` flags maxima sitting on ``n2_max``.
    """
    if method == "auto":
        method = "closed" if _closed_trader2_ok(params) else "game"
    out = chain_outcome(n0, params, p0, method=method, n2_max=n2_max)
    return Trader2(out.n2_star, out.G2_star, out.n2_unbracketed)
