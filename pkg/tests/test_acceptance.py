"""One test per acceptance criterion; each records a PASS/FAIL line for the terminal summary."""

import csv
import io
import json
import math
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from impact_consistency import consistency as cons
from impact_consistency.arbitrage import GameScript, Leg, chain_legs, optimal_trader1, run_game, solo_legs
from impact_consistency.cli import main
from impact_consistency.core import BUY, SELL, ImpactParams, MarketOrder, apply_order, fresh_book
from impact_consistency.estimation import TradeRecord, Trades, estimate_params, response
from impact_consistency.oracle import oracle_table
from impact_consistency.synth import GeneratorConfig, generate

from conftest import record

PROPERTY = settings(max_examples=120, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def _cli_json(capsys, *argv):
    assert main(list(argv)) == 0
    return json.loads(capsys.readouterr().out)


def test_c1_critical_kappa_single(capsys):
    t = time.perf_counter()
    res = _cli_json(capsys, "critical-kappa", "--mode", "single")
    dt = time.perf_counter() - t
    ok = res["kappa_c"] is not None and 0.45 <= res["kappa_c"] <= 0.55 and dt < 60
    record(1, ok, f"kappa_c={res['kappa_c']:.4f} in [0.45, 0.55], {dt:.1f}s < 60s")
    assert ok


def test_c2_critical_kappa_double(capsys):
    t = time.perf_counter()
    res = _cli_json(capsys, "critical-kappa", "--mode", "double")
    dt = time.perf_counter() - t
    ok = res["kappa_c"] is not None and 0.78 <= res["kappa_c"] <= 0.88 and dt < 120
    record(2, ok, f"kappa_c={res['kappa_c']:.4f} in [0.78, 0.88], {dt:.1f}s < 120s")
    assert ok


def test_c3_residual_region(capsys):
    assert main(["scan", "--kappa", "0.83", "--theta-mode", "kappa"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    n0s = sorted({float(r["n0"]) for r in rows if r["exploitable"] == "1"})
    if not n0s:
        record(3, False, "no inconsistent cells at kappa = theta = 0.83")
        pytest.fail("empty region")
    lo, hi = n0s[0], n0s[-1]
    ints = [n for n in n0s if n == int(n)]
    ok = lo <= 1.5 <= hi and not ints
    record(3, ok, f"region n0 in [{lo:.3g}, {hi:.3g}]; contains 1.5: {lo <= 1.5 <= hi}; "
                  f"integers inside: {len(ints)}")
    assert ok


def test_c4_oracle_equivalence():
    rows = oracle_table(1000, seed=0)
    worst = max(r["max_rel_err"] for r in rows)
    ok = len(rows) >= 1000 and worst <= 1e-6
    record(4, ok, f"{len(rows)} draws, max relative error {worst:.2e} <= 1e-6")
    assert ok


def test_c5_spread_scaling():
    bad, notes = [], []
    for gamma in (0.5, 1.0, 2.0):
        base = cons.n0_min(ImpactParams(gamma=gamma))
        for ratio in (1, 5, 10):
            n = cons.n0_min(ImpactParams(gamma=gamma, spread=ratio * gamma))
            factor = math.exp(ratio)
            # ceil(a*F) / ceil(a) brackets F within integer rounding of both thresholds
            if not (n - 1) / base <= factor <= n / (base - 1):
                bad.append((gamma, ratio, n, base))
            if ratio == 10:
                notes.append(f"gamma={gamma}: {n}/{base}")
    unit = cons.n0_min(ImpactParams(gamma=1.0, spread=10.0)) / cons.n0_min(ImpactParams(gamma=1.0))
    ok = not bad and unit == pytest.approx(2.2e4, rel=0.01)
    record(5, ok, f"all 9 ratios bracket e^(s/gamma); s/gamma=10: {', '.join(notes)} (gamma=1 factor {unit:.0f})")
    assert ok


def _recover(kappa, seeds=range(10)):
    ks, gs = [], []
    for seed in seeds:
        t = generate(GeneratorConfig(gamma=0.8, kappa=kappa, theta=kappa, noise=0.0, n_trades=100_000,
                                     volume="loguniform", volume_min=10, volume_max=1000, seed=seed))
        est = estimate_params(t)
        ks.append(est.kappa1_hat)
        gs.append(est.gamma_hat)
    return np.array(ks), np.array(gs)


def test_c6_estimator_recovery():
    k9, g9 = _recover(0.9)
    k97, _ = _recover(0.97, seeds=range(100, 110))
    dev = float(np.mean(np.abs(k9 - 0.9)))
    gerr = abs(float(g9.mean()) - 0.8) / 0.8
    ok = dev <= 0.02 and gerr <= 0.05 and 0.93 <= k97.mean() <= 1.01
    record(6, ok, f"mean|k1-0.9|={dev:.4f}, gamma rel err={gerr:.4f}, kappa=0.97 mean k1={k97.mean():.4f}")
    assert ok


DESK = (0.86, 0.90, 0.94, 0.98, 1.02)


def _desk_stock(kappa, seed, trades_per_day=100, gamma=0.01):
    # ln n uniform on [4, 6]: R(1) = 5 gamma, spread 10 gamma
    t = generate(GeneratorConfig(gamma=gamma, kappa=kappa, theta=kappa, spread=10 * gamma, n_trades=20_000,
                                 volume="loguniform", volume_min=math.exp(4), volume_max=math.exp(6),
                                 trades_per_day=trades_per_day, seed=seed))
    return estimate_params(t)


def test_c7_consistency_end_to_end():
    lines, ok = [], True
    for i, kappa in enumerate(DESK):
        est = _desk_stock(kappa, seed=700 + i)
        rep = cons.classify_stock(est)
        v = {m: rep.modes[m]["verdict"] for m in (cons.SINGLE, cons.DOUBLE, cons.SPREAD_DOUBLE)}
        high = est.kappa_hat > 0.83
        stock_ok = v[cons.SPREAD_DOUBLE] == cons.CONSISTENT and (
            not high or (v[cons.SINGLE] == v[cons.DOUBLE] == cons.INCONSISTENT))
        ok &= stock_ok
        lines.append(f"k={kappa}: single={v[cons.SINGLE][:3]} double={v[cons.DOUBLE][:3]} "
                     f"spread+double={v[cons.SPREAD_DOUBLE][:3]}")
    record(7, ok, "; ".join(lines))
    assert ok


def test_c8_paradox():
    worst = math.inf
    for gamma in (0.3, 1.0, 2.0):
        for n0 in (10.0, 1e3, 1e5):
            p = ImpactParams(gamma=gamma)
            n1 = float(optimal_trader1(n0, p).n1_star)
            chained = run_game(GameScript(chain_legs(n1, n1, n0), p)).gains
            single = run_game(GameScript(solo_legs(2 * n1, n0), p)).gains[1]
            worst = min(worst, (chained[1] + chained[2]) - single)
    ok = worst > 0
    record(8, ok, f"min over 9 cases of (two chained n1* trips - one 2n1* trip) = {worst:.4g} > 0")
    assert ok


# -- criterion 9: property suites ----------------------------------------------

orders = st.lists(st.tuples(st.sampled_from([BUY, SELL]), st.floats(1.0, 1e5)), min_size=1, max_size=12)


@PROPERTY
@given(orders, st.floats(0.01, 2.0), st.floats(-5.0, 5.0), st.floats(0.0, 0.5))
def _round_trip(seq, gamma, p0, spread):
    p = ImpactParams(gamma=gamma)
    s = fresh_book(p0)
    for side, n in seq + [(-side, n) for side, n in reversed(seq)]:
        s, _, _ = apply_order(s, MarketOrder(side, n), p)
    assert s.mid == pytest.approx(p0, abs=1e-9 * (1 + sum(gamma * math.log(n) for _, n in seq)))
    q = p.replace(spread=spread)
    n = seq[0][1]
    legs = [Leg(1, BUY, n), Leg(1, SELL, n)]
    res = run_game(GameScript(legs, q, p0))
    assert res.gains[1] <= 0
    assert res.gains[1] == pytest.approx(-n * (res.prices[0] - res.prices[1]))


def _trades(draw_signs, moves, day_breaks, quoted):
    mid, recs, day = math.log(50.0), [], 0
    for i, (e, d) in enumerate(zip(draw_signs, moves)):
        if i in day_breaks:
            day += 1
        q = math.exp(mid) if quoted else None
        mid += e * d
        recs.append(TradeRecord(str(day), i, e, 10.0, math.exp(mid), q, q))
    return Trades.from_records(recs)


streams = st.integers(4, 40).flatmap(lambda n: st.tuples(
    st.lists(st.sampled_from([1, -1]), min_size=n, max_size=n),
    st.lists(st.floats(1e-4, 0.05), min_size=n, max_size=n),
    st.sets(st.integers(1, n - 1), max_size=3),
    st.booleans()))


def _responses(t):
    out = {}
    for dt in (1, 2):
        for run in (1, 2, 3):
            try:
                out[dt, run] = response(t, dt, run).value
            except ValueError:
                out[dt, run] = None
    return out


@PROPERTY
@given(streams)
def _sign_flip(data):
    t = _trades(*data)
    a, b = _responses(t), _responses(t.transformed(negate=True))
    for key in a:
        assert (a[key] is None) == (b[key] is None)
        if a[key] is not None:
            assert b[key] == pytest.approx(a[key], rel=1e-9, abs=1e-12)


@PROPERTY
@given(streams, st.floats(0.01, 100.0))
def _scale_free(data, c):
    signs, moves, breaks, quoted = data
    t = _trades(signs, [m + 1e-3 for m in moves], breaks, quoted)
    a, b = _responses(t), _responses(t.transformed(scale=c))
    for key in a:
        if a[key] is not None:
            assert b[key] == pytest.approx(c * a[key], rel=1e-9, abs=1e-12)
    if a[1, 2] is not None and a[1, 1]:
        assert b[1, 2] / b[1, 1] == pytest.approx(a[1, 2] / a[1, 1], rel=1e-9)
    if a[1, 3] is not None and a[1, 2]:
        assert b[1, 3] / b[1, 2] == pytest.approx(a[1, 3] / a[1, 2], rel=1e-9)


@PROPERTY
@given(st.floats(0.005, 2.0), st.floats(0.3, 1.1), st.booleans(), st.floats(1.0, 1e6), st.floats(-8.0, 8.0))
def _p0_invariance(gamma, kappa, double, n0, p0):
    p = ImpactParams.from_kappa(gamma, kappa, theta=kappa if double else 1.0)
    assert cons.exploitable(n0, p, p0).exploitable == cons.exploitable(n0, p, 0.0).exploitable


def test_c9_invariant_suites():
    results = {}
    for name, fn in (("round-trip neutrality", _round_trip), ("sign-flip symmetry", _sign_flip),
                     ("scale-free kappa", _scale_free), ("p0-invariance", _p0_invariance)):
        try:
            fn()
            results[name] = "pass"
        except Exception as exc:
            results[name] = f"FAIL ({type(exc).__name__})"
    ok = all(v == "pass" for v in results.values())
    record(9, ok, f"{PROPERTY.max_examples} cases each: " + ", ".join(f"{k} {v}" for k, v in results.items()))
    assert ok, results
