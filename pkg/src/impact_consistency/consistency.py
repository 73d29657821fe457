"""Exploitability of impact functions, phase diagrams, critical feedback and n0_min.

An impact function is inconsistent at ``n0`` when trader 2 can profitably
wrap trader 1 (``G2* > 0``) while both actually trade (``n1* > 1`` and
``n2* > 1``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from impact_consistency.arbitrage import _play, chain_outcome, optimal_trader1, solo_legs, trader2_gain
from impact_consistency.core import ImpactParams

SINGLE = "single"
DOUBLE = "double"
SPREAD_ONLY = "spread-only"
SPREAD_SINGLE = "spread+single"
SPREAD_DOUBLE = "spread+double"
N0_MIN_MODES = (SPREAD_ONLY, SINGLE, DOUBLE, SPREAD_SINGLE, SPREAD_DOUBLE)

# Empirical impact coefficients gamma = R(1)/<ln n> sit well below 0.1.
DEFAULT_GAMMA_RANGE = (1e-4, 0.1)
DEFAULT_N0_RANGE = (1.0, 1e6)
DEFAULT_RESOLUTION = (200, 400)
DEFAULT_CEILING = 1e10
KAPPA_BRACKET = (0.05, 1.2)

G2_RTOL = 1e-9


class NonMonotoneError(ValueError):
    def __init__(self, message, samples):
        super().__init__(message)
        self.samples = samples


@dataclass
class ExploitabilityVerdict:
    exploitable: bool
    witness: tuple | None = None
    n1_star: float = float("nan")
    n2_star: float = float("nan")
    G2_star: float = float("nan")


def mode_params(params: ImpactParams, mode: str) -> ImpactParams:
    """Parameters seen by one of the ``n0_min`` modes (or ``single``/``double`` scans)."""
    k = params.kappa
    if mode == SPREAD_ONLY:
        return params.replace(kappa1=1.0, kappa2=1.0, theta=1.0, staged=False)
    if mode == SINGLE:
        return params.replace(theta=1.0, spread=0.0)
    if mode == DOUBLE:
        return params.replace(theta=k, spread=0.0)
    if mode == SPREAD_SINGLE:
        return params.replace(theta=1.0)
    if mode == SPREAD_DOUBLE:
        return params.replace(theta=k)
    raise ValueError(f"unknown mode {mode!r}; expected one of {N0_MIN_MODES}")


def _integer_best(values_at, x):
    """Better of floor/ceil of ``x`` (never below 2) for an objective ``values_at``."""
    cands = sorted({max(2.0, math.floor(x)), max(2.0, math.ceil(x))})
    vals = [float(values_at(c)) for c in cands]
    i = int(np.argmax(vals))
    return cands[i], vals[i]


def exploitable_mask(n0, params: ImpactParams, p0=0.0, n2_max=None):
    """Vectorised exploitability over ``n0`` and ``params.gamma``; returns ``(mask, outcome)``."""
    out = chain_outcome(n0, params, p0, method="game", n2_max=n2_max)
    scale = np.abs(out.g1_star) + np.abs(out.delta_g1)
    mask = (out.G2_star > G2_RTOL * scale) & (out.G2_star > 0) & (out.n1_star > 1) & (out.n2_star > 1)
    return mask, out


def exploitable(n0, params: ImpactParams, p0=0.0, integer=False) -> ExploitabilityVerdict:
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    mask, out = exploitable_mask(float(n0), params, p0)
    if not integer:
        ok = bool(mask)
        return ExploitabilityVerdict(ok, (n0, out.n1_star, out.n2_star, out.G2_star) if ok else None,
                                     out.n1_star, out.n2_star, out.G2_star)

    n0 = float(n0)
    solo = lambda n1: _play(solo_legs(n1, n0), params, p0).gains[1]
    n1, g1 = _integer_best(solo, out.n1_star)
    if not g1 > 0:
        return ExploitabilityVerdict(False, None, n1, out.n2_star, out.G2_star)
    g1_star = solo(out.n1_star)
    g2 = lambda n2: trader2_gain(n2, n0, params, p0, method="game", n1=n1, g1_star=g1_star)[1]
    n2, G2 = _integer_best(g2, out.n2_star)
    ok = G2 > 0
    return ExploitabilityVerdict(ok, (n0, n1, n2, G2) if ok else None, n1, n2, G2)


# -- phase diagrams -----------------------------------------------------------

def _axis(lo, hi, n, integers=False):
    if not (lo > 0 and hi > 0 and math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"bad range [{lo}, {hi}]")
    if n < 2:
        raise ValueError("resolution must be >= 2 per axis")
    pts = np.geomspace(lo, hi, n)
    if integers:
        ints = np.arange(math.ceil(lo), min(64, math.floor(hi)) + 1, dtype=float)
        pts = np.concatenate([pts, ints])
    return np.unique(pts)


def n0_axis(n0_range=DEFAULT_N0_RANGE, resolution=DEFAULT_RESOLUTION[1]):
    return _axis(n0_range[0], n0_range[1], resolution, integers=True)


def gamma_axis(gamma_range=DEFAULT_GAMMA_RANGE, resolution=DEFAULT_RESOLUTION[0]):
    return _axis(gamma_range[0], gamma_range[1], resolution)


@dataclass
class PhaseDiagram:
    gammas: np.ndarray
    n0s: np.ndarray
    exploitable: np.ndarray
    g2_star: np.ndarray
    kappa: float
    theta: float
    spread: float

    @property
    def empty(self) -> bool:
        return not bool(self.exploitable.any())

    @property
    def bbox(self):
        """``(n0_lo, n0_hi, gamma_lo, gamma_hi)`` of the inconsistent cells, or None."""
        if self.empty:
            return None
        cols = np.flatnonzero(self.exploitable.any(axis=0))
        rows = np.flatnonzero(self.exploitable.any(axis=1))
        return (float(self.n0s[cols[0]]), float(self.n0s[cols[-1]]),
                float(self.gammas[rows[0]]), float(self.gammas[rows[-1]]))

    def rows(self):
        for i, g in enumerate(self.gammas):
            for j, n0 in enumerate(self.n0s):
                yield g, n0, bool(self.exploitable[i, j]), self.g2_star[i, j]

    def to_csv(self, fh=None) -> str | None:
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gamma", "n0", "exploitable", "g2_star"])
        for g, n0, ex, g2 in self.rows():
            w.writerow([repr(float(g)), repr(float(n0)), int(ex), repr(float(g2))])
        return fh.getvalue() if own else None


def scan_plane(gamma_range=DEFAULT_GAMMA_RANGE, n0_range=DEFAULT_N0_RANGE, params: ImpactParams | None = None,
               resolution=DEFAULT_RESOLUTION, p0=0.0) -> PhaseDiagram:
    if params is None:
        raise ValueError("params required")
    gammas = gamma_axis(gamma_range, resolution[0])
    n0s = n0_axis(n0_range, resolution[1])
    G, N = np.meshgrid(gammas, n0s, indexing="ij")
    mask, out = exploitable_mask(N, params.replace(gamma=G), p0)
    return PhaseDiagram(gammas, n0s, mask, np.asarray(out.G2_star), params.kappa, params.theta, params.spread)


def _region_nonempty(params, gammas, n0s, chunk=16) -> bool:
    for i in range(0, len(gammas), chunk):
        G, N = np.meshgrid(gammas[i:i + chunk], n0s, indexing="ij")
        mask, _ = exploitable_mask(N, params.replace(gamma=G))
        if mask.any():
            return True
    return False


def feedback_params(kappa, mode, spread=0.0, theta=None) -> ImpactParams:
    """Scan parameters for ``single`` (theta = 1) or ``double`` (theta = kappa) feedback."""
    if mode == SINGLE:
        th = 1.0
    elif mode == DOUBLE:
        th = kappa
    elif mode == "value":
        th = theta
    else:
        raise ValueError(f"mode must be 'single' or 'double', got {mode!r}")
    return ImpactParams.from_kappa(1.0, kappa, theta=th, spread=spread)


@dataclass
class CriticalKappa:
    mode: str
    kappa_c: float | None
    status: str
    samples: list = field(default_factory=list)
    bracket: tuple | None = None

    def to_dict(self):
        return {"mode": self.mode, "kappa_c": self.kappa_c, "status": self.status,
                "bracket": self.bracket, "samples": [[k, v] for k, v in self.samples]}


def critical_kappa(mode=SINGLE, gamma_range=DEFAULT_GAMMA_RANGE, n0_range=DEFAULT_N0_RANGE,
                   resolution=DEFAULT_RESOLUTION, spread=0.0, bracket=KAPPA_BRACKET, tol=1e-3,
                   n_samples=12) -> CriticalKappa:
    """Smallest feedback factor at which the scanned plane holds an inconsistent cell."""
    gammas = gamma_axis(gamma_range, resolution[0])
    n0s = n0_axis(n0_range, resolution[1])
    pred = lambda k: _region_nonempty(feedback_params(k, mode, spread), gammas, n0s)

    ks = np.linspace(bracket[0], bracket[1], n_samples)
    samples = [(float(k), pred(k)) for k in ks]
    flags = [v for _, v in samples]
    if not any(flags):
        return CriticalKappa(mode, None, "no inconsistency in range", samples)
    if all(flags):
        return CriticalKappa(mode, None, "inconsistent across the whole bracket", samples)
    first = flags.index(True)
    if not all(flags[first:]):
        raise NonMonotoneError("inconsistency predicate is not monotone in kappa", samples)

    lo, hi = samples[first - 1][0], samples[first][0]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return CriticalKappa(mode, 0.5 * (lo + hi), "ok", samples, (lo, hi))


# -- minimal exploitable size -------------------------------------------------

def _simple_round_trip(n0, params, p0=0.0):
    n1, g1 = optimal_trader1(n0, mode_params(params, SPREAD_ONLY), p0, method="closed")
    return bool(n1 >= 1 - 1e-12 and g1 > 0)


def _first_integer(pred, lo, hi):
    """Smallest integer in ``(lo, hi]`` with ``pred`` true; ``pred`` monotone, ``pred(hi)`` true."""
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return int(hi)


def _boundary_integer(pred, a, b, span=4):
    """First integer at or after the false->true boundary in ``(a, b]``, if one lies within ``span``."""
    for _ in range(200):
        if b - a <= 1e-9 * b:
            break
        m = 0.5 * (a + b)
        if pred(m):
            b = m
        else:
            a = m
    k = math.ceil(b - 1e-9 * b)
    for cand in range(max(k, 1), k + span):
        if cand > a and pred(cand):
            return cand
    return None


def n0_min(params: ImpactParams, mode=SPREAD_ONLY, ceiling=DEFAULT_CEILING, p0=0.0, per_decade=40):
    """Smallest integer trade size leaving an exploitable arbitrage, or None up to ``ceiling``."""
    if mode not in N0_MIN_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == SPREAD_ONLY:
        pred = lambda n: _simple_round_trip(float(n), params, p0)
        if pred(1):
            return 1
        if not pred(ceiling):
            return None
        lo, hi = 1, 2
        while not pred(hi):
            lo, hi = hi, min(2 * hi, int(ceiling))
        return _first_integer(pred, lo, hi)

    mp = mode_params(params, mode)
    decades = max(math.log10(ceiling), 1.0)
    grid = np.unique(np.concatenate([np.geomspace(1.0, ceiling, int(per_decade * decades) + 1),
                                     np.arange(1.0, min(64.0, ceiling) + 1)]))
    mask, _ = exploitable_mask(grid, mp.replace(gamma=np.full_like(grid, float(mp.gamma))), p0)
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return None
    j = hits[0]
    if j == 0:
        return 1
    pred = lambda n: exploitable(float(n), mp, p0).exploitable
    starts = [j for j in hits if j == 0 or not mask[j - 1]]
    for j in starts:
        if j == 0:
            return 1
        k = _boundary_integer(pred, float(grid[j - 1]), float(grid[j]))
        if k is None:
            ints = [n for n in grid[j:] if n == int(n)]
            end = np.flatnonzero(~mask[j:])
            last = grid[j + end[0] - 1] if end.size else grid[-1]
            k = next((int(n) for n in ints if n <= last and pred(n)), None)
        if k is not None and k <= ceiling:
            return k
    return None


# -- per-stock classification -------------------------------------------------

CONSISTENT = "consistent"
INCONSISTENT = "inconsistent"


@dataclass
class StockReport:
    gamma: float
    kappa: float
    spread: float
    avg_daily_volume: float
    threshold: float
    mode: str
    modes: dict
    verdict: str

    def to_dict(self):
        return {"gamma": self.gamma, "kappa": self.kappa, "spread": self.spread,
                "avg_daily_volume": self.avg_daily_volume, "threshold": self.threshold,
                "mode": self.mode, "verdict": self.verdict, "modes": self.modes}


def classify_stock(estimates, threshold=1.0, mode=SPREAD_DOUBLE, ceiling=DEFAULT_CEILING,
                   gamma=None, kappa=None, spread=None, capital=math.inf) -> StockReport:
    """Compare ``n0_min`` in every mode with the stock's average daily volume.

    A mode's verdict is consistent iff ``n0_min / avg_daily_volume > threshold``
    (or no exploitable size exists below ``ceiling``).
    """
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    if mode not in N0_MIN_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    g = gamma if gamma is not None else getattr(estimates, "gamma_hat", None)
    k = kappa if kappa is not None else getattr(estimates, "kappa_hat", None)
    s = spread if spread is not None else getattr(estimates, "spread_hat", None)
    v = getattr(estimates, "avg_daily_volume", None)
    for name, val in (("gamma_hat", g), ("kappa_hat", k), ("spread_hat", s), ("avg_daily_volume", v)):
        if val is None or not math.isfinite(val):
            raise ValueError(f"missing field: {name}")
    if not v > 0:
        raise ValueError("missing field: avg_daily_volume (must be > 0)")
    k = min(max(k, 1e-6), 1.2)
    params = ImpactParams.from_kappa(g, k, spread=max(s, 0.0), capital=capital)

    modes = {}
    for m in N0_MIN_MODES:
        n = n0_min(params, m, ceiling=ceiling)
        if n is None:
            modes[m] = {"n0_min": None, "fraction": None, "verdict": CONSISTENT,
                        "note": "consistent at all sizes"}
        else:
            frac = n / v
            modes[m] = {"n0_min": n, "fraction": frac,
                        "verdict": CONSISTENT if frac > threshold else INCONSISTENT}
    return StockReport(g, k, s, v, threshold, mode, modes, modes[mode]["verdict"])
