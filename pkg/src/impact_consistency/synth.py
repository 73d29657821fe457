"""Synthetic trade streams driven by the feedback book.

Signs follow a two-state Markov chain (repeat the previous sign with
probability ``persistence``). Each trade moves the mid through
:func:`apply_order` under the run rule, so a side's multiplier is
``kappa**k * theta**-J`` with ``k`` the position in the current run and ``J``
the length of the previous one. With ``normalize=True`` the impact is scaled
by ``1 / E[multiplier]`` so that ``R(1) = gamma * <ln n>`` holds in the
stationary state and ``R+/R = R++/R+ = kappa``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from impact_consistency.core import BUY, RUN, SELL, BookState, ImpactParams, MarketOrder, apply_order
from impact_consistency.estimation import Trades

CLAMP = (1e-6, 1e6)


@dataclass(frozen=True)
class GeneratorConfig:
    gamma: float
    kappa: float = 1.0
    theta: float = 1.0
    kappa1: float | None = None
    kappa2: float | None = None
    staged: bool = False
    spread: float = 0.0
    n_trades: int = 10_000
    persistence: float = 0.5
    volume: str = "constant"
    volume_min: float = 100.0
    volume_max: float = 100.0
    noise: float = 0.0
    trades_per_day: int = 1000
    p0: float = math.log(100.0)
    seed: int = 0
    normalize: bool = True
    first_sign: int = 0
    rule: str = RUN

    def __post_init__(self):
        if self.n_trades < 0:
            raise ValueError("n_trades must be >= 0")
        if not 0 <= self.persistence <= 1:
            raise ValueError("persistence must lie in [0, 1]")
        if self.volume not in ("constant", "loguniform"):
            raise ValueError("volume must be 'constant' or 'loguniform'")
        if not 1 <= self.volume_min <= self.volume_max:
            raise ValueError("need 1 <= volume_min <= volume_max")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.trades_per_day < 1:
            raise ValueError("trades_per_day must be >= 1")
        if self.first_sign not in (0, BUY, SELL):
            raise ValueError("first_sign must be 0 (random), +1 or -1")
        self.params()

    def params(self) -> ImpactParams:
        k1 = self.kappa if self.kappa1 is None else self.kappa1
        k2 = k1 if self.kappa2 is None else self.kappa2
        return ImpactParams(gamma=self.gamma, kappa1=k1, kappa2=k2, theta=self.theta,
                            spread=self.spread, staged=self.staged, rule=self.rule)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown generator fields: {sorted(unknown)}")
        return cls(**d)


def mean_multiplier(params: ImpactParams, q: float) -> float:
    """Stationary mean of the run-rule multiplier for Markov signs with persistence ``q``."""
    if q >= 1:
        return 1.0
    if params.staged:
        e_k = (1 - q) * (1 + params.kappa1 * q / (1 - q * params.kappa2))
    else:
        e_k = (1 - q) / (1 - q * params.kappa)
    if q >= params.theta:
        raise ValueError("persistence must be < theta for a finite mean multiplier")
    e_j = (1 - q) / (params.theta - q)
    return e_k * e_j


def _signs(rng, n, q, first):
    u = rng.random(n)
    s = np.empty(n, dtype=np.int8)
    if n == 0:
        return s
    s[0] = first if first else (BUY if u[0] < 0.5 else SELL)
    flips = u[1:] >= q
    s[1:] = s[0] * np.cumprod(np.where(flips, -1, 1))
    return s


def _volumes(rng, cfg: GeneratorConfig, n):
    if cfg.volume == "constant":
        return np.full(n, float(cfg.volume_min))
    lo, hi = math.log(cfg.volume_min), math.log(cfg.volume_max)
    return np.exp(rng.uniform(lo, hi, n))


def generate(cfg: GeneratorConfig) -> Trades:
    """Draw a trade stream. ``meta`` carries the clamp-event count and normalisation."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    params = cfg.params()
    n = cfg.n_trades
    signs = _signs(rng, n, cfg.persistence, cfg.first_sign)
    vols = _volumes(rng, cfg, n)
    noise = rng.normal(0.0, cfg.noise, n) if cfg.noise > 0 else np.zeros(n)
    norm = 1.0 / mean_multiplier(params, cfg.persistence) if cfg.normalize else 1.0
    book_params = params.replace(gamma=params.gamma * norm)

    half = 0.5 * cfg.spread
    mids = np.empty(n)
    pre = np.empty(n)
    state = BookState(mid=cfg.p0)
    clamps = 0
    lo, hi = CLAMP
    with np.errstate(over="ignore"):
        for i in range(n):
            pre[i] = state.mid
            state, _, _ = apply_order(state, MarketOrder(int(signs[i]), vols[i]), book_params)
            mb, ms = state.m_buy, state.m_sell
            if not lo <= mb <= hi or not lo <= ms <= hi:
                clamps += 1
                mb, ms = min(max(mb, lo), hi), min(max(ms, lo), hi)
            state = BookState(mid=float(state.mid) + noise[i], m_buy=mb, m_sell=ms,
                              last_side=state.last_side, run=state.run,
                              n_buy=state.n_buy, n_sell=state.n_sell)
            mids[i] = state.mid

    idx = np.arange(n)
    day = np.array([str(d) for d in idx // cfg.trades_per_day], dtype=object)
    return Trades(day=day, index=idx.astype(np.int64), sign=signs, volume=vols,
                  log_price=mids, log_bid=pre - half, log_ask=pre + half,
                  meta={"clamp_events": clamps, "normalization": norm, "seed": cfg.seed})
