"""Command-line front end.

Exit codes: 0 ok, 1 internal error, 2 input validation, 3 clustering,
4 unknown day, 5 convergence. Errors are reported on stderr as one JSON
object.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import assess as assess_mod
from .cluster import ClusterModel, fit_dataset
from .core import HOURS
from .equilibrium import load_scenario, simulate
from .errors import SchemaMismatch, TariffLensError, ValidationError
from .impact import FeatureSpec, impact_csv, impact_table
from .ingest import atomic_write_text, build_dataset, dataset_to_csv, parse_readings, read_dataset
from .synth import generate, ground_truth_json, optimal_schemes, spec_from_dict
from .tariff import load_scheme, scheme_to_dict

log = logging.getLogger("tarifflens")

PRICES_HEADER = ["date"] + [f"h{h:02d}" for h in range(1, HOURS + 1)]


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _window(text):
    try:
        lo, hi = (int(x) for x in str(text).split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like 5-12, got {text!r}") from None
    return lo, hi


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(","))


def _date(text):
    return dt.date.fromisoformat(str(text))


def _dates(text):
    if isinstance(text, (list, tuple)):
        return [_date(x) for x in text]
    return [_date(x) for x in str(text).split(",") if x]


def read_prices(path) -> dict:
    """Per-day hourly prices from ``date,h01..h24`` CSV or a JSON object."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        data = data.get("prices", data)
        return {_date(k): np.asarray(v, dtype=np.float64) for k, v in data.items()}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != PRICES_HEADER:
        raise SchemaMismatch(f"{path}: expected header date,h01..h24")
    out = {}
    for row in rows[1:]:
        if row:
            out[_date(row[0])] = np.asarray([float(v) for v in row[1:]], dtype=np.float64)
    return out


def prices_csv(prices: dict) -> str:
    lines = [",".join(PRICES_HEADER)]
    for day, lam in sorted(prices.items()):
        lines.append(",".join([day.isoformat()] + [repr(float(v)) for v in lam]))
    return "\n".join(lines) + "\n"


def _feature_spec(args):
    morning, evening = args.morning, args.evening
    if args.windows:
        parts = args.windows if isinstance(args.windows, (list, tuple)) else str(args.windows).split(",")
        if len(parts) != 2:
            raise ValidationError(f"--windows needs two ranges like 5-12,16-22, got {args.windows!r}")
        morning, evening = (_window(x) if isinstance(x, str) else tuple(x) for x in parts)
    return FeatureSpec(morning, evening, args.mu)


def cmd_ingest(args):
    with open(args.readings, "rb") as fh:
        readings = parse_readings(fh)
    d, report = build_dataset(readings, args.gap_policy)
    out = Path(args.out)
    atomic_write_text(out, dataset_to_csv(d))
    report_path = Path(args.report) if args.report else out.with_name("ingest_report.json")
    atomic_write_text(report_path, _dump_json(report.to_dict()))
    log.info("wrote %s (%d profiles, %d dropped)", out, report.accepted_days, report.dropped_days)
    return 0


def cmd_cluster(args):
    d = read_dataset(args.dataset)
    model = fit_dataset(d, radius_fraction=args.radius, k_min=args.k_min, k_max=args.k_max, seed=args.seed)
    out = Path(args.out)
    atomic_write_text(out, model.to_json() + "\n")
    curve = Path(args.curve) if args.curve else out.with_name(out.stem + "_inertia.csv")
    atomic_write_text(curve, model.inertia_curve_csv())
    if model.radius_unmet:
        print(
            json.dumps({"warning": "radius_unmet", "k": model.k, "radius_fraction": args.radius}),
            file=sys.stderr,
        )
    return 0


def _load_model(path):
    try:
        return ClusterModel.from_json(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read model {path}: {exc}") from None


def cmd_impact(args):
    d = read_dataset(args.dataset)
    model = _load_model(args.model) if args.model else None
    days = _dates(args.day) if args.day else d.days
    prices = read_prices(args.prices) if args.prices else None
    spec = _feature_spec(args)
    records = []
    for day in days:
        lam = None
        if prices is not None:
            if day not in prices:
                raise ValidationError(f"no prices for day {day}")
            lam = prices[day]
        records.extend(impact_table(d, day, spec, prices=lam, model=model))
    atomic_write_text(args.out, impact_csv(records))
    return 0


def cmd_assess(args):
    d = read_dataset(args.dataset)
    model = _load_model(args.model)
    scheme = load_scheme(args.scheme)
    days = _dates(args.days) if args.days else None
    prices = read_prices(args.prices) if args.prices else None
    rate_range = args.rate_range
    if rate_range not in (None, "global"):
        rate_range = _floats(rate_range)
    report = assess_mod.assess_scheme(
        d, model, scheme, _feature_spec(args), days=days, bins=args.bins, prices=prices,
        rate_range=rate_range, epsilon=args.epsilon,
    )
    out = Path(args.out)
    ledger_path = None
    if prices is not None:
        ledger_path = out.with_name(out.stem + "_ledger.csv")
        atomic_write_text(ledger_path, report.ledger_csv())
    atomic_write_text(out.with_name(out.stem + "_daily.csv"), report.plot_csv())
    payload = report.to_dict(ledger_path=ledger_path.name if ledger_path else None)
    atomic_write_text(out, _dump_json(payload))
    return 0


def cmd_simulate(args):
    consumers, supply, pricing, tol = load_scenario(args.scenario)
    mode = args.mode or pricing
    result = simulate(consumers, supply, mode=mode, tol=args.tol if args.tol is not None else tol)
    atomic_write_text(args.out, _dump_json(result))
    if not (result["equivalence"]["passed"] and result["bill_check"]["passed"]):
        log.warning("equivalence checks failed; see %s", args.out)
    return 0


def cmd_synth(args):
    try:
        data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaMismatch(f"cannot read synth spec {args.spec}: {exc}") from None
    spec = spec_from_dict(data)
    d, gt = generate(spec)
    out = Path(args.out)
    atomic_write_text(out / "dataset.csv", dataset_to_csv(d))
    atomic_write_text(out / "ground_truth.json", ground_truth_json(gt) + "\n")
    atomic_write_text(out / "prices.csv", prices_csv(gt.prices))
    atomic_write_text(out / "ppm_scheme.json", _dump_json(scheme_to_dict(optimal_schemes(gt))))
    return 0


def _add_feature_flags(p):
    p.add_argument("--morning", type=_window, default=(5, 12), help="morning ramp window, e.g. 5-12")
    p.add_argument("--evening", type=_window, default=(16, 22), help="evening ramp window, e.g. 16-22")
    p.add_argument("--windows", default=None, help="both windows at once, e.g. 5-12,16-22")
    p.add_argument("--mu", type=_floats, default=(1.0, 1.0, 1.0), help="feature weights mr,er,pd")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tarifflens", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file whose keys supply defaults for any flag")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="meter readings CSV -> canonical dataset")
    p.add_argument("readings", nargs="?")
    p.add_argument("--gap-policy", default="drop", choices=["drop", "interpolate"])
    p.add_argument("--out")
    p.add_argument("--report", help="ingest report path (default: ingest_report.json next to --out)")
    p.set_defaults(func=cmd_ingest, required=("readings", "out"))

    p = sub.add_parser("cluster", help="adaptive k-means over all consumer-days")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--curve", help="inertia curve CSV (default: <out>_inertia.csv)")
    p.set_defaults(func=cmd_cluster, required=("dataset", "out"))

    p = sub.add_parser("impact", help="per-consumer MFI / MCI table")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--model")
    p.add_argument("--prices", help="date,h01..h24 CSV or JSON of per-day prices")
    p.add_argument("--day", help="comma-separated ISO dates (default: all days)")
    p.add_argument("--out")
    _add_feature_flags(p)
    p.set_defaults(func=cmd_impact, required=("dataset", "out"))

    p = sub.add_parser("assess", help="DOC / Dt / subsidy ledger of a price scheme")
    p.add_argument("dataset", nargs="?")
    p.add_argument("model", nargs="?")
    p.add_argument("scheme", nargs="?")
    p.add_argument("--bins", type=int, default=None, help="rate bins (default: model k)")
    p.add_argument("--days", help="comma-separated ISO dates (default: all days)")
    p.add_argument("--prices", help="per-day hourly prices; enables the subsidy ledger")
    p.add_argument("--rate-range", default=None, help="'global' or lo,hi (default: per-day min/max)")
    p.add_argument("--epsilon", type=float, default=1e-12, help="tie tolerance for Dt")
    p.add_argument("--out")
    _add_feature_flags(p)
    p.set_defaults(func=cmd_assess, required=("dataset", "model", "scheme", "out"))

    p = sub.add_parser("simulate", help="market equilibrium under rtp and/or ppm")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--mode", choices=["rtp", "ppm", "both"], default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate, required=("scenario", "out"))

    p = sub.add_parser("synth", help="synthetic dataset with ground truth")
    p.add_argument("spec", nargs="?")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth, required=("spec", "out"))
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        config = json.loads(Path(known.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaMismatch(f"cannot read config {known.config}: {exc}") from None
    config = {k.replace("-", "_"): v for k, v in config.items()}
    for k in ("morning", "evening"):
        if k in config:
            config[k] = _window(config[k]) if isinstance(config[k], str) else tuple(config[k])
    if "mu" in config:
        config["mu"] = _floats(config["mu"])
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**config)


def _thread_cap():
    raw = os.environ.get("TARIFFLENS_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"TARIFFLENS_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"TARIFFLENS_THREADS must be a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        missing = [name for name in args.required if getattr(args, name, None) in (None, "")]
        if missing:
            raise ValidationError(f"missing required arguments: {', '.join(missing)}")
        with threadpool_limits(limits=_thread_cap()):
            return args.func(args)
    except TariffLensError as exc:
        print(json.dumps(exc.to_dict(), default=str), file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "IoFailure", "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": "InternalError", "message": repr(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
