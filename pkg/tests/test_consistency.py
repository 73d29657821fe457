import json
import math

import numpy as np
import pytest

from impact_consistency import consistency as cons
from impact_consistency.core import ImpactParams
from impact_consistency.estimation import ResponseEstimates


def _estimates(gamma, kappa, spread, volume):
    return ResponseEstimates(R1=gamma * 5, Rp1=None, Rpp1=None, kappa1_hat=kappa, kappa2_hat=kappa,
                             kappa_hat=kappa, gamma_hat=gamma, spread_hat=spread, mean_log_volume=5.0,
                             avg_daily_volume=volume, n_trades=1000, n_days=10, counts={}, stderr={})


def test_exploitable_examples():
    assert cons.exploitable(1e4, ImpactParams(gamma=1.0)).exploitable
    for k in (1.0, 0.9, 0.4):
        assert not cons.exploitable(1.0, ImpactParams.from_kappa(0.5, k)).exploitable


def test_low_kappa_never_exploitable():
    p = ImpactParams.from_kappa(1.0, 0.4)
    diagram = cons.scan_plane(cons.DEFAULT_GAMMA_RANGE, (1.0, 1e6), p, resolution=(40, 80))
    assert diagram.empty and diagram.bbox is None


def test_large_gamma_corner_at_low_kappa():
    # far above empirical gamma a sliver with n1* just above 1 survives
    p = ImpactParams.from_kappa(3.5085191433519127, 0.4)
    v = cons.exploitable(3.0, p)
    assert v.exploitable and 1 < v.n1_star < 1.02


def test_integer_variant_is_stricter():
    p = ImpactParams(gamma=1.0)
    v = cons.exploitable(1e4, p, integer=True)
    assert v.exploitable and v.witness[1] == int(v.witness[1])


def test_scan_is_deterministic_and_matches_predicate():
    p = ImpactParams.from_kappa(1.0, 0.9, theta=0.9)
    a = cons.scan_plane((0.01, 0.1), (1.0, 1e3), p, resolution=(6, 12))
    b = cons.scan_plane((0.01, 0.1), (1.0, 1e3), p, resolution=(6, 12))
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "gamma,n0,exploitable,g2_star"
    for i in (0, 3, 5):
        for j in (0, 10, 20, 40):
            v = cons.exploitable(float(a.n0s[j]), p.replace(gamma=float(a.gammas[i])))
            assert v.exploitable == bool(a.exploitable[i, j])


@pytest.mark.parametrize("bad", [(0.0, 1.0), (2.0, 1.0), (1.0, math.inf)])
def test_scan_rejects_bad_ranges(bad):
    with pytest.raises(ValueError):
        cons.scan_plane(bad, (1.0, 10.0), ImpactParams(gamma=1.0), resolution=(4, 4))


def test_critical_kappa_degenerate_range():
    res = cons.critical_kappa(cons.SINGLE, n0_range=(1.0, 1.0), resolution=(10, 2))
    assert res.kappa_c is None and res.status == "no inconsistency in range"


def test_critical_kappa_double_exceeds_single():
    kw = dict(gamma_range=(1e-3, 0.1), n0_range=(1.0, 1e5), resolution=(20, 60), tol=1e-2)
    single = cons.critical_kappa(cons.SINGLE, **kw)
    double = cons.critical_kappa(cons.DOUBLE, **kw)
    assert single.status == double.status == "ok"
    assert double.kappa_c > single.kappa_c
    json.dumps(single.to_dict())


def test_n0_min_spread_only_examples():
    assert cons.n0_min(ImpactParams(gamma=1.0)) == 2
    assert cons.n0_min(ImpactParams(gamma=1.0, spread=math.log(2))) == 4


def test_n0_min_ceiling_sentinel():
    assert cons.n0_min(ImpactParams(gamma=0.5, spread=10.0), ceiling=1e6) is None
    assert cons.n0_min(ImpactParams.from_kappa(0.05, 0.6, spread=0.5), cons.SPREAD_DOUBLE) is None


def test_n0_min_is_the_first_exploitable_integer():
    p = ImpactParams.from_kappa(0.05, 0.95, spread=0.2)
    for mode in (cons.SPREAD_SINGLE, cons.SPREAD_DOUBLE):
        n = cons.n0_min(p, mode)
        mp = cons.mode_params(p, mode)
        assert cons.exploitable(float(n), mp).exploitable
        assert not cons.exploitable(float(n - 1), mp).exploitable


def test_n0_min_mode_ordering():
    for kappa in (0.9, 0.95, 0.98):
        p = ImpactParams.from_kappa(0.01, kappa, spread=0.1)
        n = {m: cons.n0_min(p, m) for m in (cons.SPREAD_ONLY, cons.SPREAD_SINGLE, cons.SPREAD_DOUBLE)}
        big = lambda v: math.inf if v is None else v
        assert big(n[cons.SPREAD_DOUBLE]) >= big(n[cons.SPREAD_SINGLE]) >= big(n[cons.SPREAD_ONLY])


def test_classify_volume_below_simple_threshold_is_consistent():
    rep = cons.classify_stock(_estimates(0.01, 0.9, 0.1, 1000.0), mode=cons.SPREAD_ONLY)
    assert rep.modes[cons.SPREAD_ONLY]["n0_min"] > 1000
    assert rep.verdict == cons.CONSISTENT


def test_classify_threshold_rule():
    # spread-only n0_min is 402 here, so the fraction of a 1000-share day is 0.402
    est = _estimates(0.01, 0.9, 0.05, 1000.0)
    frac = cons.classify_stock(est, mode=cons.SPREAD_ONLY).modes[cons.SPREAD_ONLY]["fraction"]
    assert frac == pytest.approx(0.402)
    assert cons.classify_stock(est, threshold=0.1, mode=cons.SPREAD_ONLY).verdict == cons.CONSISTENT
    assert cons.classify_stock(est, threshold=0.5, mode=cons.SPREAD_ONLY).verdict == cons.INCONSISTENT


def test_classify_low_kappa_double_consistent_regardless_of_spread():
    for s in (0.0, 0.02, 0.1):
        rep = cons.classify_stock(_estimates(0.01, 0.75, s, 1e5), mode=cons.DOUBLE)
        assert rep.verdict == cons.CONSISTENT
        assert rep.modes[cons.DOUBLE]["note"] == "consistent at all sizes"


def test_classify_reports_every_mode():
    rep = cons.classify_stock(_estimates(0.01, 0.95, 0.1, 2e4)).to_dict()
    assert set(rep["modes"]) == set(cons.N0_MIN_MODES)
    json.dumps(rep)


def test_classify_missing_field():
    est = _estimates(0.01, 0.9, None, 1e4)
    with pytest.raises(ValueError, match="spread_hat"):
        cons.classify_stock(est)


def test_verdict_depends_on_daily_volume():
    from impact_consistency.estimation import estimate_params
    from impact_consistency.synth import GeneratorConfig, generate

    verdicts = []
    for per_day in (100, 1000):
        t = generate(GeneratorConfig(gamma=0.01, kappa=1.02, theta=1.02, spread=0.1, n_trades=20_000,
                                     volume="loguniform", volume_min=math.exp(4), volume_max=math.exp(6),
                                     trades_per_day=per_day, seed=704))
        verdicts.append(cons.classify_stock(estimate_params(t)).verdict)
    assert verdicts == [cons.CONSISTENT, cons.INCONSISTENT]
