"""Command-line interface.

Exit codes: 0 on success, 1 on validation or usage errors, 2 on runtime
failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .distill import distill_chain, unpack_bits
from .drg import DrgParams, DrgState, drg_audit, drg_next
from .harness import ExperimentConfig, canonical_json, emit_report, run_experiment
from .oracle import JointDistribution, check_degradation, check_indistinguishability
from .rng import stream


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    p.add_argument("--config", default=None, help="JSON experiment config")
    p.add_argument("--out", default=None, help="write the JSON result here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deeprand", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="protocol runs scored against the opponent suite (no distillation)")
    _common(p)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--csv", default=None, help="also write the strategy table as CSV")

    p = sub.add_parser("check-degradation", help="exact MSE(omega_T) / MMSE on a uniform grid prior")
    _common(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=float, default=2.0)
    p.add_argument("--grid", type=int, default=5, help="grid points per coordinate")

    p = sub.add_parser("check-indist", help="indistinguishability ratio of a family of joint priors")
    _common(p)
    p.add_argument("--family", default=None, help="JSON list of joint distributions")
    p.add_argument("--k", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--width", type=float, default=0.5, help="box width of the built-in orbit family")

    p = sub.add_parser("drg-audit", help="replay a generator state, or generate one with --steps")
    _common(p)
    p.add_argument("--state", default=None, help="DRG state JSON to audit")
    p.add_argument("--steps", type=int, default=None, help="generate a fresh state with this many steps")
    p.add_argument("--save-state", default=None, help="write the generated state here")
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--alpha-gap", type=float, default=None)

    p = sub.add_parser("distill", help="distillation chain on given or synthetic bit strings")
    _common(p)
    p.add_argument("--bits", default=None, help='JSON {"a": packed, "b": packed, "eve": {name: packed}}')
    p.add_argument("--eps-ab", type=float, default=0.1)
    p.add_argument("--eps-ae", type=float, default=0.25)
    p.add_argument("--length", type=int, default=20000, help="synthetic string length")
    p.add_argument("--L", type=int, default=3)
    p.add_argument("--block", type=int, default=16)
    p.add_argument("--passes", type=int, default=4)
    p.add_argument("--out-len", type=int, default=64)

    p = sub.add_parser("pipeline", help="full experiment: runs, opponents, distillation")
    _common(p)
    p.add_argument("--csv", default=None, help="also write the strategy table as CSV")
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _emit(doc, args):
    text = canonical_json(doc)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    cfg = _load_config(args)
    doc = cfg.to_json()
    if args.runs is not None:
        doc["runs"] = args.runs
    if args.n is not None:
        doc["protocol"]["n"] = args.n
    if args.k is not None:
        doc["protocol"]["k"] = args.k
    cfg = ExperimentConfig.from_json(doc)
    report = run_experiment(cfg, distill=False)
    if args.csv:
        emit_report(report, args.csv, "csv")
    _emit(report.to_json(), args)


def cmd_check_degradation(args):
    if args.n > 4:
        raise ValueError("exhaustive oracle limited to n <= 4")
    J = JointDistribution.grid_uniform(args.n, args.grid)
    _emit(check_degradation(J, args.k).to_json(), args)


def orbit_family(width: float) -> list:
    """The pair ``x = y = (1, 0)`` widened to boxes, and its coordinate swap (n = 2)."""
    x = y = np.array([1.0, 0.0])
    return [JointDistribution.box_pair(x, y, width), JointDistribution.box_pair(x[::-1], y[::-1], width)]


def cmd_check_indist(args):
    if args.family:
        with open(args.family) as fh:
            family = [JointDistribution.from_json(d) for d in json.load(fh)]
    else:
        family = orbit_family(args.width)
    _emit(check_indistinguishability(family, args.k, alpha=args.alpha).to_json(), args)


def cmd_drg_audit(args):
    kw = {}
    if args.k is not None:
        kw["k"] = args.k
    if args.alpha_gap is not None:
        kw["alpha_gap"] = args.alpha_gap
    params = DrgParams(**kw)
    if args.state:
        with open(args.state) as fh:
            doc = json.load(fh)
        if "params" in doc:
            params = DrgParams.from_json(doc["params"])
            doc = doc["state"]
        state = DrgState.from_json(doc)
    elif args.steps is not None:
        state = DrgState.fresh(args.seed or 0, params)
        for _ in range(args.steps):
            _, state = drg_next(state, params)
        if args.save_state:
            with open(args.save_state, "w") as fh:
                fh.write(canonical_json({"params": params.to_json(), "state": state.to_json()}))
    else:
        raise ValueError("drg-audit needs --state or --steps")
    _emit(drg_audit(state, params).to_json(), args)


def cmd_distill(args):
    seed = args.seed or 0
    if args.bits:
        with open(args.bits) as fh:
            doc = json.load(fh)
        a, b = unpack_bits(doc["a"]), unpack_bits(doc["b"])
        eve = {name: unpack_bits(v) for name, v in doc.get("eve", {}).items()}
    else:
        rng = stream(seed, "synthetic")
        a = rng.integers(0, 2, size=args.length, dtype=np.uint8)
        b = a ^ (rng.random(args.length) < args.eps_ab).astype(np.uint8)
        eve = {"bsc": a ^ (rng.random(args.length) < args.eps_ae).astype(np.uint8)}
    rep = distill_chain(a, b, args.L, args.block, args.passes, args.out_len, seed, eve)
    _emit(rep.to_json(), args)


def cmd_pipeline(args):
    cfg = _load_config(args)
    report = run_experiment(cfg)
    if args.csv:
        emit_report(report, args.csv, "csv")
    _emit(report.to_json(), args)


COMMANDS = {
    "simulate": cmd_simulate,
    "check-degradation": cmd_check_degradation,
    "check-indist": cmd_check_indist,
    "drg-audit": cmd_drg_audit,
    "distill": cmd_distill,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(str(exc) + ("\n" if not str(exc).endswith("\n") else ""))
        return 1
    except (ValueError, KeyError, TypeError, FileNotFoundError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        sys.stderr.write(f"runtime error: {type(exc).__name__}: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
