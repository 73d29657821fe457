"""Command-line front end: scans, critical feedback, estimation, checks, simulation, oracle.

Every result goes out as CSV or JSON, to ``--output`` (written atomically)
or stdout. Exit codes: 0 success, 1 internal invariant failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from impact_consistency import consistency as cons
from impact_consistency.core import ImpactParams
from impact_consistency.estimation import ResponseEstimates, estimate_params, format_trades, read_trades_csv
from impact_consistency.oracle import COLUMNS, compare, oracle_table
from impact_consistency.synth import GeneratorConfig, generate


class UsageError(ValueError):
    pass


def _pair(text, cast=float):
    try:
        parts = [cast(x) for x in text.replace(":", ",").split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return tuple(parts)


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def emit(text: str, output):
    if output in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(output)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def impact_params(args, gamma=1.0) -> ImpactParams:
    k1 = args.kappa1 if args.kappa1 is not None else args.kappa
    k2 = args.kappa2 if args.kappa2 is not None else k1
    kappa = 0.5 * (k1 + k2)
    mode = args.theta_mode
    if args.theta is not None and mode == "one":
        mode = "value"
    theta = {"one": 1.0, "kappa": kappa, "value": args.theta}[mode]
    if theta is None:
        raise UsageError("--theta-mode value needs --theta")
    return ImpactParams(gamma=gamma, kappa1=k1, kappa2=k2, theta=theta, spread=args.spread,
                        capital=args.capital)


# -- subcommands --------------------------------------------------------------

def cmd_scan(args):
    params = impact_params(args)
    diagram = cons.scan_plane(args.gamma_range, (1.0, args.n0_max), params, args.resolution)
    emit(diagram.to_csv(), args.output)
    return 0


def cmd_critical_kappa(args):
    res = cons.critical_kappa(args.mode, args.gamma_range, (1.0, args.n0_max), args.resolution,
                              spread=args.spread)
    emit(dumps(res.to_dict()), args.output)
    return 0


def _estimate_file(path, min_samples):
    est = estimate_params(read_trades_csv(path), min_samples=min_samples)
    return est


def cmd_estimate(args):
    out = {}
    for path in args.input:
        out[str(path)] = _estimate_file(path, args.min_samples).to_dict()
    emit(dumps(out), args.output)
    return 0


def _load_estimates(path, min_samples):
    if str(path).endswith(".json"):
        data = json.loads(Path(path).read_text())
        return ResponseEstimates.from_dict(data)
    return _estimate_file(path, min_samples)


def cmd_check(args):
    out = {}
    for path in args.input:
        est = _load_estimates(path, args.min_samples)
        rep = cons.classify_stock(est, threshold=args.threshold, mode=args.mode, ceiling=args.ceiling,
                                  gamma=args.gamma, kappa=args.kappa, spread=args.spread,
                                  capital=args.capital)
        out[str(path)] = rep.to_dict()
    emit(dumps(out), args.output)
    return 0


def _generator_config(args) -> GeneratorConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    cli = {"gamma": args.gamma, "kappa": args.kappa, "theta": args.theta, "kappa1": args.kappa1,
           "kappa2": args.kappa2, "spread": args.spread, "n_trades": args.n_trades,
           "persistence": args.persistence, "volume": args.volume, "volume_min": args.volume_min,
           "volume_max": args.volume_max, "noise": args.noise, "trades_per_day": args.trades_per_day,
           "seed": args.seed, "first_sign": args.first_sign}
    base.update({k: v for k, v in cli.items() if v is not None})
    if "volume_min" in base and "volume_max" not in base:
        base["volume_max"] = base["volume_min"]
    if args.no_normalize:
        base["normalize"] = False
    if "gamma" not in base:
        raise UsageError("simulate needs --gamma (or a config file with gamma)")
    return GeneratorConfig.from_dict(base)


def cmd_simulate(args):
    cfg = _generator_config(args)
    trades = generate(cfg)
    emit(format_trades(trades), args.output)
    if trades.meta["clamp_events"]:
        print(f"clamp events: {trades.meta['clamp_events']}", file=sys.stderr)
    return 0


def cmd_oracle(args):
    theta = 1.0 if args.theta is None else args.theta
    if args.n0 is not None:
        if args.gamma is None or args.kappa is None:
            raise UsageError("a single oracle row needs --gamma, --kappa and --n0")
        row = compare(args.gamma, args.kappa, args.n0, args.n2, theta=theta)
        row["draw"] = 0
        rows = [row]
    else:
        rows = oracle_table(args.draws, seed=args.seed, theta=theta)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) or hasattr(v, "item") else v)
                    for k, v in r.items()})
    emit(buf.getvalue(), args.output)
    return 0


# -- parser -------------------------------------------------------------------

def _add_impact(p, kappa_default=1.0):
    p.add_argument("--kappa", type=float, default=kappa_default)
    p.add_argument("--kappa1", type=float)
    p.add_argument("--kappa2", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--theta-mode", choices=("one", "kappa", "value"), default="one")
    p.add_argument("--spread", type=float, default=0.0)
    p.add_argument("--capital", type=float, default=math.inf)


def _add_scan(p):
    p.add_argument("--gamma-range", type=_pair, default=cons.DEFAULT_GAMMA_RANGE)
    p.add_argument("--n0-max", type=float, default=cons.DEFAULT_N0_RANGE[1])
    p.add_argument("--resolution", type=lambda t: _pair(t, int), default=cons.DEFAULT_RESOLUTION)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="impact-consistency", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="phase diagram of exploitable (gamma, n0) cells as CSV")
    _add_impact(p)
    _add_scan(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("critical-kappa", help="smallest feedback factor with an inconsistent cell")
    p.add_argument("--mode", choices=(cons.SINGLE, cons.DOUBLE), default=cons.SINGLE)
    p.add_argument("--spread", type=float, default=0.0)
    _add_scan(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_critical_kappa)

    p = sub.add_parser("estimate", help="response functions and parameters from trade CSVs")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--min-samples", type=int, default=100)
    p.add_argument("--output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("check", help="per-stock consistency report")
    p.add_argument("--input", nargs="+", required=True, help="trade CSVs or estimate JSON files")
    p.add_argument("--mode", choices=cons.N0_MIN_MODES, default=cons.SPREAD_DOUBLE)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--ceiling", type=float, default=cons.DEFAULT_CEILING)
    p.add_argument("--gamma", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--spread", type=float)
    p.add_argument("--capital", type=float, default=math.inf)
    p.add_argument("--min-samples", type=int, default=100)
    p.add_argument("--output")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="synthetic trade stream as CSV")
    p.add_argument("--config", help="generator config JSON; flags override it")
    for name in ("gamma", "kappa", "theta", "kappa1", "kappa2", "spread", "persistence", "noise",
                 "volume-min", "volume-max"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--n-trades", type=int)
    p.add_argument("--trades-per-day", type=int)
    p.add_argument("--volume", choices=("constant", "loguniform"))
    p.add_argument("--first-sign", type=int, choices=(-1, 0, 1))
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="closed-form against game-trace optimisation")
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--n0", type=float)
    p.add_argument("--n2", type=float, default=2.0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except cons.NonMonotoneError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything else is a broken invariant
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
