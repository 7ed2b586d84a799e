"""Command-line entry point: ``madp {motivate,sweep,adversarial,coupon}``."""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from madp.experiments import (
    COUPON_COLUMNS,
    CSV_COLUMNS,
    SUMMARY_COLUMNS,
    ConfigError,
    config_dict,
    coupon_rows,
    make_config,
    run_adversarial,
    run_motivate,
    run_sweep,
)
from madp.workloads import NoFeasibleD

EXIT_OK, EXIT_CONFIG = 0, 2
COMMANDS = ("motivate", "sweep", "adversarial", "coupon")


def format_value(v):
    """Stable text form of a CSV cell (floats to 10 significant digits)."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return f"{v:.10g}"
    return str(v)


def write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
    return path


def read_csv(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n",
                          encoding="utf-8")


def load_config_file(path):
    """Read a YAML mapping of RunConfig field names to values."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a key/value mapping")
    return data


def build_parser():
    parser = argparse.ArgumentParser(
        prog="madp", description="Online multi-analyst differential privacy simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "motivate": "two analysts, PMW and split-Laplace, over the ordering-skew grid",
        "sweep": "ten analysts, all sharing mechanisms, fairness measures",
        "adversarial": "greedy pooled budget versus SCR on shared-prefix sequences",
        "coupon": "coupon-collector table: exact, Monte Carlo, asymptotic",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="YAML file whose keys are RunConfig fields")
        p.add_argument("--seed", type=int, help="base seed (trial t uses seed + t)")
        p.add_argument("--trials", type=int,
                       help="trials per scenario (coupon: Monte Carlo repetitions)")
        p.add_argument("--jobs", type=int, help="worker processes for trials")
        p.add_argument("--out", help=f"output directory (default results/{name})")
    return parser


def resolve_config(args):
    overrides = load_config_file(args.config) if args.config else {}
    for key in ("seed", "trials", "jobs", "out"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    return make_config(args.command, overrides)


def _out_dir(cfg, command):
    return Path(cfg.out or Path("results") / command)


def cmd_motivate(cfg):
    res = run_motivate(cfg)
    out = _out_dir(cfg, "motivate")
    write_csv(out / "trials.csv", CSV_COLUMNS, res.trials)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, res.summary)
    write_json(out / "meta.json", res.meta)
    return res


def cmd_sweep(cfg):
    res = run_sweep(cfg)
    out = _out_dir(cfg, "sweep")
    write_csv(out / "trials.csv", CSV_COLUMNS, res.trials)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, res.summary)
    write_json(out / "meta.json", res.meta)
    return res


def cmd_adversarial(cfg):
    res = run_adversarial(cfg)
    out = _out_dir(cfg, "adversarial")
    write_csv(out / "trials.csv", CSV_COLUMNS, res.trials)
    (out / "verdict.txt").write_text(res.verdict, encoding="utf-8")
    write_json(out / "meta.json", res.meta)
    sys.stdout.write(res.verdict)
    return res


def cmd_coupon(cfg):
    rows = coupon_rows(cfg)
    out = _out_dir(cfg, "coupon")
    write_csv(out / "coupon.csv", COUPON_COLUMNS, rows)
    write_json(out / "meta.json", dict(config=config_dict(cfg)))
    return rows


HANDLERS = {"motivate": cmd_motivate, "sweep": cmd_sweep, "adversarial": cmd_adversarial,
            "coupon": cmd_coupon}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        HANDLERS[args.command](cfg)
    except (ConfigError, NoFeasibleD) as exc:
        print(f"madp {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"madp {args.command}: wrote {_out_dir(cfg, args.command)}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
