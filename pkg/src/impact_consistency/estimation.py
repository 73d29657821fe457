"""Response functions and model parameters from a stream of signed trades.

``R(dt)`` is the sign-weighted log-price move ``dt`` trades after a trade,
measured from the mid prevailing just before it. ``R+`` and ``R++`` restrict
to trades continuing a run of two or three same-sign trades. Lags never
cross a day boundary.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np


class TradeFormatError(ValueError):
    pass


class EmptyEstimateError(ValueError):
    pass


@dataclass(frozen=True)
class TradeRecord:
    day: str
    index: int
    sign: int
    volume: float
    price: float
    bid: float | None = None
    ask: float | None = None

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign!r}")
        if not self.volume >= 1:
            raise ValueError(f"volume must be >= 1, got {self.volume!r}")
        if not self.price > 0:
            raise ValueError(f"price must be > 0, got {self.price!r}")
        if (self.bid is None) != (self.ask is None):
            raise ValueError("bid and ask must be given together")
        if self.bid is not None and not (0 < self.bid <= self.ask):
            raise ValueError(f"need 0 < bid <= ask, got bid={self.bid!r} ask={self.ask!r}")

    @property
    def log_price(self) -> float:
        return math.log(self.price)


@dataclass
class Trades:
    """Column store of a trade stream, sorted by day then index.

    Prices are held as logs. ``raw`` keeps the decimal (price, bid, ask)
    columns exactly as parsed or drawn, so a file written back out is
    byte-identical.
    """

    day: np.ndarray
    index: np.ndarray
    sign: np.ndarray
    volume: np.ndarray
    log_price: np.ndarray
    log_bid: np.ndarray
    log_ask: np.ndarray
    meta: dict = field(default_factory=dict)
    raw: tuple | None = None

    def __len__(self):
        return len(self.sign)

    @property
    def has_quotes(self):
        return ~np.isnan(self.log_bid)

    def decimals(self):
        if self.raw is not None:
            return self.raw
        with np.errstate(over="ignore"):
            return np.exp(self.log_price), np.exp(self.log_bid), np.exp(self.log_ask)

    @property
    def day_codes(self):
        _, first, inv = np.unique(self.day, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return order[inv]

    @classmethod
    def from_records(cls, records: Iterable[TradeRecord]) -> "Trades":
        recs = list(records)
        nan = float("nan")
        price = np.array([r.price for r in recs], dtype=float)
        bid = np.array([nan if r.bid is None else r.bid for r in recs], dtype=float)
        ask = np.array([nan if r.ask is None else r.ask for r in recs], dtype=float)
        return cls(
            day=np.array([str(r.day) for r in recs], dtype=object),
            index=np.array([r.index for r in recs], dtype=np.int64),
            sign=np.array([r.sign for r in recs], dtype=np.int8),
            volume=np.array([r.volume for r in recs], dtype=float),
            log_price=np.log(price), log_bid=np.log(bid), log_ask=np.log(ask),
            raw=(price, bid, ask),
        )

    def records(self) -> list[TradeRecord]:
        price, bid, ask = self.decimals()
        out = []
        for i in range(len(self)):
            q = not math.isnan(bid[i])
            out.append(TradeRecord(str(self.day[i]), int(self.index[i]), int(self.sign[i]),
                                   float(self.volume[i]), float(price[i]),
                                   float(bid[i]) if q else None, float(ask[i]) if q else None))
        return out

    def subset(self, mask) -> "Trades":
        raw = None if self.raw is None else tuple(c[mask] for c in self.raw)
        return Trades(self.day[mask], self.index[mask], self.sign[mask], self.volume[mask],
                      self.log_price[mask], self.log_bid[mask], self.log_ask[mask],
                      dict(self.meta), raw)

    def transformed(self, scale=1.0, negate=False) -> "Trades":
        """Log-prices mapped to ``ref + c*(p - ref)`` about the first trade; ``negate`` also flips signs."""
        ref = self.log_price[0] if len(self) else 0.0
        c = -scale if negate else scale
        f = lambda x: ref + c * (x - ref)
        lb, la = f(self.log_bid), f(self.log_ask)
        if negate:
            lb, la = la, lb
        sign = -self.sign if negate else self.sign
        return Trades(self.day, self.index, sign, self.volume, f(self.log_price), lb, la, dict(self.meta))


def as_trades(trades) -> Trades:
    return trades if isinstance(trades, Trades) else Trades.from_records(trades)


# -- CSV ----------------------------------------------------------------------

HEADER = ["day", "index", "sign", "volume", "price", "bid", "ask"]


def _num(token, name, lineno):
    try:
        v = float(token)
    except ValueError:
        raise TradeFormatError(f"line {lineno}: {name} is not a number: {token!r}") from None
    if not math.isfinite(v):
        raise TradeFormatError(f"line {lineno}: {name} is not finite")
    return v


def parse_trades(lines: Iterable[str]) -> Trades:
    recs = []
    last: dict[str, int] = {}
    days_seen: list[str] = []
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        row = [c.strip() for c in row]
        if lineno == 1 and row[0].lower() == "day":
            continue
        if len(row) not in (5, 7):
            raise TradeFormatError(f"line {lineno}: expected 5 or 7 fields, got {len(row)}")
        day = row[0]
        try:
            index = int(row[1])
        except ValueError:
            raise TradeFormatError(f"line {lineno}: index is not an integer: {row[1]!r}") from None
        sign_v = _num(row[2], "sign", lineno)
        if sign_v not in (1.0, -1.0):
            raise TradeFormatError(f"line {lineno}: sign must be +1 or -1, got {row[2]!r}")
        volume = _num(row[3], "volume", lineno)
        price = _num(row[4], "price", lineno)
        bid = ask = None
        if len(row) == 7 and (row[5] or row[6]):
            bid, ask = _num(row[5], "bid", lineno), _num(row[6], "ask", lineno)
        if day in last:
            if days_seen[-1] != day:
                raise TradeFormatError(f"line {lineno}: day {day!r} resumes after another day")
            if index <= last[day]:
                raise TradeFormatError(f"line {lineno}: index {index} not increasing within day {day!r}")
        else:
            days_seen.append(day)
        last[day] = index
        try:
            recs.append(TradeRecord(day, index, int(sign_v), volume, price, bid, ask))
        except ValueError as exc:
            raise TradeFormatError(f"line {lineno}: {exc}") from None
    return Trades.from_records(recs)


def read_trades_csv(path) -> Trades:
    with open(path, newline="") as fh:
        return parse_trades(fh)


def format_trades(trades) -> str:
    t = as_trades(trades)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    quoted = t.has_quotes
    price, bid, ask = t.decimals()
    if not (np.all(np.isfinite(price)) and np.all(price > 0)):
        raise ValueError("log-prices outside the range representable as decimal prices")
    for i in range(len(t)):
        row = [t.day[i], int(t.index[i]), int(t.sign[i]), repr(float(t.volume[i])), repr(float(price[i]))]
        row += [repr(float(bid[i])), repr(float(ask[i]))] if quoted[i] else ["", ""]
        w.writerow(row)
    return buf.getvalue()


def write_trades_csv(trades, path) -> None:
    Path(path).write_text(format_trades(trades))


# -- response functions -------------------------------------------------------

@dataclass
class Response:
    value: float
    count: int
    stderr: float


def _pre_trade_mid(t: Trades, codes):
    logp = t.log_price
    mid = np.full(len(t), np.nan)
    prev_same_day = np.zeros(len(t), dtype=bool)
    prev_same_day[1:] = codes[1:] == codes[:-1]
    mid[1:] = np.where(prev_same_day[1:], logp[:-1], np.nan)
    q = t.has_quotes
    mid[q] = 0.5 * (t.log_bid[q] + t.log_ask[q])
    return mid


def response_samples(trades, delta_t=1, run_length=1) -> np.ndarray:
    t = as_trades(trades)
    if delta_t < 1 or int(delta_t) != delta_t:
        raise ValueError("delta_t must be an integer >= 1")
    if run_length not in (1, 2, 3):
        raise ValueError("run_length must be 1, 2 or 3")
    n = len(t)
    if n == 0:
        return np.empty(0)
    codes = t.day_codes
    mid = _pre_trade_mid(t, codes)
    lag = delta_t - 1
    ok = ~np.isnan(mid)
    later = np.full(n, np.nan)
    if lag < n:
        same = codes[lag:] == codes[:n - lag]
        later[:n - lag] = np.where(same, t.log_price[lag:], np.nan)
    ok &= ~np.isnan(later)
    sign = t.sign.astype(float)
    for r in range(1, run_length):
        back = np.zeros(n, dtype=bool)
        back[r:] = (codes[r:] == codes[:-r]) & (t.sign[r:] == t.sign[:-r])
        ok &= back
    return (sign * (later - mid))[ok]


def response(trades, delta_t=1, run_length=1) -> Response:
    """Mean sign-weighted price change ``delta_t`` trades on; ``run_length`` 1/2/3 gives R, R+, R++."""
    x = response_samples(trades, delta_t, run_length)
    if x.size == 0:
        name = {1: "R", 2: "R+", 3: "R++"}[run_length]
        raise EmptyEstimateError(f"no qualifying samples for {name}({delta_t})")
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
    return Response(float(x.mean()), int(x.size), se)


# -- parameter estimates ------------------------------------------------------

@dataclass
class ResponseEstimates:
    R1: float
    Rp1: float | None
    Rpp1: float | None
    kappa1_hat: float | None
    kappa2_hat: float | None
    kappa_hat: float | None
    gamma_hat: float | None
    spread_hat: float | None
    mean_log_volume: float
    avg_daily_volume: float
    n_trades: int
    n_days: int
    counts: dict
    stderr: dict
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d.get(k) for k in cls.__dataclass_fields__})


def estimate_params(trades, min_samples=100) -> ResponseEstimates:
    t = as_trades(trades)
    if len(t) == 0:
        raise EmptyEstimateError("empty trade stream")
    warnings = []
    vals, counts, errs = {}, {}, {}
    for key, run in (("R1", 1), ("Rp1", 2), ("Rpp1", 3)):
        try:
            r = response(t, 1, run)
        except EmptyEstimateError as exc:
            if run == 1:
                raise
            warnings.append(str(exc))
            vals[key], counts[key], errs[key] = None, 0, None
            continue
        vals[key], counts[key], errs[key] = r.value, r.count, r.stderr
        if r.count < min_samples:
            warnings.append(f"low sample count for {key}: {r.count} < {min_samples}")

    ratio = lambda a, b: a / b if a is not None and b not in (None, 0.0) else None
    k1 = ratio(vals["Rp1"], vals["R1"])
    k2 = ratio(vals["Rpp1"], vals["Rp1"])
    kappa = 0.5 * (k1 + k2) if k1 is not None and k2 is not None else None

    mlv = float(np.mean(np.log(t.volume)))
    gamma = vals["R1"] / mlv if mlv > 0 else None
    if gamma is not None and gamma <= 0:
        warnings.append("non-positive R(1); gamma_hat not meaningful")
    q = t.has_quotes
    spread = float(np.mean(t.log_ask[q] - t.log_bid[q])) if q.any() else None
    if spread is None:
        warnings.append("no quotes: spread_hat absent")

    codes = t.day_codes
    daily = np.bincount(codes, weights=t.volume)
    return ResponseEstimates(
        R1=vals["R1"], Rp1=vals["Rp1"], Rpp1=vals["Rpp1"],
        kappa1_hat=k1, kappa2_hat=k2, kappa_hat=kappa, gamma_hat=gamma, spread_hat=spread,
        mean_log_volume=mlv, avg_daily_volume=float(daily.mean()),
        n_trades=len(t), n_days=int(daily.size), counts=counts, stderr=errs, warnings=warnings,
    )
