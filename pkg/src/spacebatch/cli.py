"""Command-line front end.

Exit codes: 0 success, 1 a point failed or a comparison missed its
tolerance, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from . import errors, experiments, scenarios
from .config import config_to_dict, load_config, with_ideal_channel

log = logging.getLogger("spacebatch")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"1,2,5"`` or ranges such as ``"0-9"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return tuple(seeds)


def parse_values(text: str) -> tuple[float, ...]:
    """Comma list, or ``start:stop:step`` with ``stop`` included."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("step must be positive")
        n = int(round((stop - start) / step)) + 1
        return tuple(start + k * step for k in range(n))
    return tuple(float(x) for x in text.split(",") if x.strip())


def _add_common(p: argparse.ArgumentParser, sim: bool) -> None:
    p.add_argument("--config", required=True, help="JSON scenario file")
    p.add_argument("--out", help="write results as CSV to this path")
    p.add_argument("--ideal-channel", action="store_true",
                   help="always use the top rate and no packet errors")
    p.add_argument("--with-runtime", action="store_true",
                   help="add a runtime_s column to the CSV (breaks byte-for-byte reruns)")
    if sim:
        p.add_argument("--seed", type=parse_seeds, default=(1,), help="e.g. 1,2,3 or 0-9")
        p.add_argument("--duration", type=float, default=1000.0, help="simulated seconds per seed")
        p.add_argument("--warmup", type=float, default=None,
                       help="seconds excluded from statistics (default: 5%% of duration)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spacebatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("solve", help="analytic metrics for one scenario"), sim=False)
    _add_common(sub.add_parser("simulate", help="simulated metrics for one scenario"), sim=True)
    _add_common(sub.add_parser("compare", help="analytic vs simulated metrics"), sim=True)

    sw = sub.add_parser("sweep", help="vary one parameter")
    _add_common(sw, sim=True)
    sw.add_argument("--axis", required=True, choices=experiments.AXES)
    sw.add_argument("--values", required=True, type=parse_values,
                    help="comma list or start:stop:step (load in Mbit/s)")
    sw.add_argument("--mode", default="analytic", choices=experiments.MODES)

    ini = sub.add_parser("init-config", help="write a reference scenario file")
    ini.add_argument("preset", choices=("baseline", "het-snr"))
    ini.add_argument("--n-nodes", type=int, default=16)
    ini.add_argument("--buffer", type=int, default=50)
    ini.add_argument("--s-max", type=int, default=8)
    ini.add_argument("--load", type=float, default=80.0, help="Mbit/s")
    ini.add_argument("--out", required=True)
    return parser


def _print_rows(rows) -> None:
    for row in rows:
        label = f"{row.axis}={row.axis_value:g}" if row.axis != "none" else "result"
        if row.error:
            print(f"{label}: ERROR {row.error}")
            continue
        parts = []
        for k in experiments.METRICS:
            if row.analytic:
                parts.append(f"{k}={row.analytic[k]:.6g}")
            if row.sim_mean:
                parts.append(f"{k}_sim={row.sim_mean[k]:.6g}±{row.sim_stderr[k]:.2g}")
        status = "" if row.compare_pass is None else (" pass" if row.compare_pass else " FAIL")
        notes = "".join(f" [{n}]" for n in row.notes)
        print(f"{label}: " + " ".join(parts) + status + notes)


def _single(args, mode: str):
    # A one-point sweep along the load axis reuses the sweep machinery.
    cfg = args.cfg
    spec = experiments.SweepSpec(
        base=cfg, axis="load", values=(cfg.load_bps / 1e6,), mode=mode,
        seeds=getattr(args, "seed", (1,)), duration=getattr(args, "duration", 1000.0),
        warmup=getattr(args, "warmup", None), jobs=getattr(args, "jobs", 1))
    rows = experiments.run_sweep(spec)
    for r in rows:
        r.axis = "none"
        r.axis_value = float("nan")
    return rows


def _finish(rows, args) -> int:
    _print_rows(rows)
    if args.out:
        experiments.emit_csv(rows, args.out, with_runtime=args.with_runtime)
    return EXIT_OK if all(r.ok for r in rows) else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "init-config":
        if args.preset == "baseline":
            cfg = scenarios.baseline(args.n_nodes, args.buffer, args.s_max, args.load,
                                     ideal_channel=True)
        else:
            cfg = scenarios.het_snr(args.s_max, args.load, buffer_size=args.buffer)
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(config_to_dict(cfg), fh, indent=2)
            fh.write("\n")
        return EXIT_OK

    try:
        cfg = load_config(args.config)
        if args.ideal_channel:
            cfg = with_ideal_channel(cfg)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, errors.ConfigError) as exc:
        print(f"spacebatch: cannot load config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args.cfg = cfg

    try:
        if args.command == "solve":
            return _finish(_single(args, "analytic"), args)
        if args.command == "simulate":
            return _finish(_single(args, "simulate"), args)
        if args.command == "sweep":
            spec = experiments.SweepSpec(cfg, args.axis, args.values, args.mode, args.seed,
                                         args.duration, args.warmup, args.jobs)
            return _finish(experiments.run_sweep(spec), args)
        if args.command == "compare":
            report = experiments.compare(cfg, args.seed, args.duration, args.warmup, args.jobs)
            print(report.format())
            if args.out:
                _write_report_csv(report, args.out)
            return EXIT_OK if report.passed else EXIT_FAIL
    except errors.SpecError as exc:
        print(f"spacebatch: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except errors.InvalidDuration as exc:
        print(f"spacebatch: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


def _write_report_csv(report: experiments.CompareReport, path: str) -> None:
    cols = ["metric", "analytic", "sim_mean", "sim_stderr", "abs_gap", "rel_gap",
            "tolerance", "passed", "note"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for r in report.rows:
            writer.writerow([r.metric] + [experiments.fmt_value(getattr(r, c)) for c in cols[1:-1]]
                            + [r.note])


if __name__ == "__main__":
    sys.exit(main())
