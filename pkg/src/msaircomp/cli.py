"""Command-line front end.

    msaircomp optimize  [--config PATH] [--pth LIST] [--beta REAL] ...
    msaircomp simulate  [--config PATH] [--policy LIST] [--runs INT] [--seed INT] ...
    msaircomp reproduce {fig3,...,fig11,table2} [--runs INT] ...

Exit status: 0 on success, 1 on runtime failure, 2 on usage or validation
errors.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys

from . import __version__
from .experiments import FIGURES, analytic_table, reproduce, simulation_table
from .report import write_csv
from .scenarios import Config, ConfigError, generate_profiles, read_config, split_config

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


def _float_list(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _name_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _slot_range(text):
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            raise ValueError
        return int(lo), int(hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from exc


def _common(p):
    p.add_argument("--config", metavar="PATH", help="YAML/JSON configuration file")
    p.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int, help="Monte Carlo realizations per row")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--beta", type=float, help="noise floor used by the optimizer")
    p.add_argument("--policy", type=_name_list, metavar="LIST", help="e.g. aircomp,selfirst,optsel")
    p.add_argument("--pth", type=_float_list, metavar="LIST", help="e.g. 0.9,0.95,0.98")
    p.add_argument("--nslots-range", type=_slot_range, metavar="A..B")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msaircomp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("optimize", help="closed-form optimal parameters per P_th"))
    _common(sub.add_parser("simulate", help="Monte Carlo evaluation per policy and P_th"))
    rep = sub.add_parser("reproduce", help="dataset behind a figure or table")
    rep.add_argument("figure", metavar="FIGURE", help=f"one of: {', '.join(FIGURES)}")
    _common(rep)
    return parser


def _config(args) -> Config:
    cfg = read_config(args.config) if args.config else Config()
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.runs is not None:
        update["n_runs"] = args.runs
    if args.beta is not None:
        update["beta"] = args.beta
    if args.pth is not None:
        if not args.pth:
            raise UsageError("--pth needs at least one value")
        update["p_th"] = args.pth
    if args.policy is not None:
        if not args.policy:
            raise UsageError("--policy needs at least one value")
        update["policies"] = args.policy
    if args.nslots_range is not None:
        update["n_slots_range"] = args.nslots_range
    if not update:
        return cfg
    try:
        return Config.model_validate({**cfg.model_dump(), **update})
    except Exception as exc:  # pydantic ValidationError
        raise ConfigError(str(exc)) from exc


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def run(args) -> int:
    cfg = _config(args)
    meta = {"command": args.command, "seed": cfg.seed, "config_hash": cfg.digest()}
    threads = max(1, args.threads)
    columns = None
    if args.command == "reproduce":
        if args.figure not in FIGURES:
            raise UsageError(f"unknown figure id {args.figure!r}; valid ids: {', '.join(FIGURES)}")
        meta["figure"] = args.figure
        rows, columns = reproduce(args.figure, cfg, threads)
    else:
        scenario, sim, opt = split_config(cfg)
        profiles = generate_profiles(scenario)
        if args.command == "optimize":
            policies = [p for p in sim.policies if p != "aircomp"] if args.policy else ["selfirst"]
            if not policies:
                raise UsageError("optimize covers selfirst and optsel only")
            rows = analytic_table(profiles, opt, policies)
        else:
            rows = simulation_table(profiles, opt, sim, threads)
    with _output(args.out) as fh:
        write_csv(rows, fh, columns, meta)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except (UsageError, ConfigError) as exc:
        print(f"msaircomp: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"msaircomp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
