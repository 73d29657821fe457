"""Closed-form optimum against numerically optimised game traces.

Each row compares trader 1's ``n1*``/``g1*``, trader 2's ``delta_g1``/``G2``
at a fixed ``n2`` and the optimum ``(n2*, G2*)``. Differences of gains are
compared relative to the size of the gains they are built from, not to the
(possibly tiny) difference itself.
"""

from __future__ import annotations

import math

import numpy as np

from impact_consistency.arbitrage import chain_outcome, closed_n1, trader2_gain
from impact_consistency.core import ImpactParams

NA = "n/a (θ≠1)"

DRAW_RANGES = {"gamma": (0.1, 3.0), "kappa": (0.3, 1.1), "n0": (2.0, 1e6)}

COLUMNS = ["draw", "gamma", "kappa", "theta", "n0", "n2",
           "n1_closed", "n1_game", "g1_closed", "g1_game",
           "dg1_closed", "dg1_game", "G2_closed", "G2_game",
           "n2star_closed", "n2star_game", "G2star_closed", "G2star_game", "max_rel_err"]


def _rel(a, b, scale=None):
    scale = max(abs(a), abs(b)) if scale is None else scale
    return abs(a - b) / scale if scale > 0 else 0.0


def compare(gamma, kappa, n0, n2, theta=1.0, p0=0.0) -> dict:
    params = ImpactParams.from_kappa(gamma, kappa, theta=theta)
    game = chain_outcome(n0, params, p0, method="game", polish=True)
    gd, gG = trader2_gain(n2, n0, params, p0, method="game", n1=game.n1_star, g1_star=game.g1_star)
    row = {"gamma": gamma, "kappa": kappa, "theta": theta, "n0": n0, "n2": n2,
           "n1_game": game.n1_star, "g1_game": game.g1_star, "dg1_game": float(gd), "G2_game": float(gG),
           "n2star_game": game.n2_star, "G2star_game": game.G2_star}
    if theta != 1.0:
        for k in ("n1", "g1", "dg1", "G2", "n2star", "G2star"):
            row[f"{k}_closed"] = NA
        row["max_rel_err"] = NA
        return row
    closed = chain_outcome(n0, params, p0, method="closed", polish=True)
    cd, cG = trader2_gain(n2, n0, params, p0, method="closed")
    cd, cG = float(cd), float(cG)
    row.update(n1_closed=closed.n1_star, g1_closed=closed.g1_star, dg1_closed=cd, G2_closed=cG,
               n2star_closed=closed.n2_star, G2star_closed=closed.G2_star)

    g1c = closed.g1_star
    errs = [
        _rel(closed.n1_star, game.n1_star),
        _rel(g1c, game.g1_star),
        _rel(cd, gd, abs(g1c) + abs(g1c - cd)),
        _rel(cG, gG, abs(cG + cd) + abs(cd)),
        _rel(closed.G2_star, game.G2_star, abs(closed.G2_star + closed.delta_g1) + abs(closed.delta_g1)),
    ]
    row["max_rel_err"] = max(errs)
    return row


def random_draws(n, seed=0, ranges=DRAW_RANGES):
    """``n`` parameter draws with a closed-form ``n1* > 1``; ``n0`` and ``n2`` log-uniform."""
    rng = np.random.Generator(np.random.PCG64(seed))
    (glo, ghi), (klo, khi), (nlo, nhi) = ranges["gamma"], ranges["kappa"], ranges["n0"]
    out = []
    while len(out) < n:
        g = float(rng.uniform(glo, ghi))
        k = float(rng.uniform(klo, khi))
        n0 = float(math.exp(rng.uniform(math.log(nlo), math.log(nhi))))
        n2 = float(math.exp(rng.uniform(0.0, math.log(10 * n0))))
        if closed_n1(n0, g, k) <= 1:
            continue
        out.append((g, k, n0, n2))
    return out


def oracle_table(n_draws=1000, seed=0, theta=1.0):
    rows = []
    for i, (g, k, n0, n2) in enumerate(random_draws(n_draws, seed)):
        row = compare(g, k, n0, n2, theta=theta)
        row["draw"] = i
        rows.append(row)
    return rows
