"""Command-line entry point: ``mfmsbo run|transfer|gen-surface|gen-log|validate``."""

import argparse
import json
import sys

import numpy as np

from mfmsbo.errors import (
    BudgetExhaustedError,
    ConfigError,
    InvalidArgumentError,
    NumericFailureError,
    ParseError,
    SimulatorError,
    ValidationError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_NUMERIC = 4


def _cmd_run(args):
    from mfmsbo.harness import StudyConfig, run_study

    config = StudyConfig.load(args.config)
    report = run_study(config)
    print(f"metric {config.metric_name}, budget {config.budget_cost_units:g} cost units")
    for method, per_seed in report.curves.items():
        vals = [c.terminal for c in per_seed.values()]
        print(f"  {method:<18s} median terminal best {np.median(vals):.6g}")
    for b in report.speedups:
        print(f"  speedup over {b:<14s} median {report.median_speedup(b):.3g}x")
    print(f"outputs written to {config.resolve(config.output_dir)}")


def _cmd_transfer(args):
    from mfmsbo.simulator.runlog import ingest_runlog
    from mfmsbo.transfer import run_transfer_experiments

    log = ingest_runlog(args.log)
    seeds = tuple(range(args.seeds))
    res = run_transfer_experiments(log, args.design, seeds=seeds)
    table = {
        "design": args.design,
        "seeds": list(seeds),
        "mean_r2": {m: float(v) for m, v in zip(res.metrics, res.mean_r2)},
        "median_r2": res.median,
    }
    text = json.dumps(table, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    for m, v in table["mean_r2"].items():
        print(f"{m:<20s} {v:.4f}")
    print(f"{'median':<20s} {res.median:.4f}")


def _cmd_gen_surface(args):
    from mfmsbo.simulator.surface import acceptance_surface

    spec = acceptance_surface(args.seed, noise_sigma=args.noise)
    spec.save(args.out)
    print(f"surface seed {args.seed} written to {args.out}")


def _cmd_gen_log(args):
    from mfmsbo.simulator.runlog import emit_runlog
    from mfmsbo.simulator.surface import SurfaceSpec
    from mfmsbo.transfer import transfer_log

    spec = SurfaceSpec.load(args.surface)
    log = transfer_log(spec, n_rows=args.rows, seed=args.seed)
    emit_runlog(log, args.out)
    print(f"{len(log)} rows written to {args.out}")


def _cmd_validate(args):
    from mfmsbo.simulator.runlog import ingest_runlog

    log = ingest_runlog(args.log)
    runs = len(set(log.run_ids())) if len(log) else 0
    scales = sorted(set(int(m) for m in log.model_scale))
    print(f"ok: {len(log)} rows, {runs} runs, scales {scales}")


def build_parser():
    p = argparse.ArgumentParser(prog="mfmsbo", description="Multi-fidelity multi-scale mixture optimization")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a study from a JSON config")
    r.add_argument("--config", required=True)
    r.set_defaults(func=_cmd_run)

    t = sub.add_parser("transfer", help="predictor transfer experiment on a run log")
    t.add_argument("--design", required=True, choices=[f"E{i}" for i in range(1, 9)])
    t.add_argument("--log", required=True)
    t.add_argument("--seeds", type=int, default=5, help="number of seeds (0..k-1)")
    t.add_argument("--out", help="write the R^2 table as JSON")
    t.set_defaults(func=_cmd_transfer)

    g = sub.add_parser("gen-surface", help="mint an acceptance surface")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--noise", type=float, default=0.01)
    g.set_defaults(func=_cmd_gen_surface)

    gl = sub.add_parser("gen-log", help="sample a run log from a surface")
    gl.add_argument("--surface", required=True)
    gl.add_argument("--out", required=True)
    gl.add_argument("--rows", type=int, default=2000)
    gl.add_argument("--seed", type=int, default=0)
    gl.set_defaults(func=_cmd_gen_log)

    v = sub.add_parser("validate", help="schema check of a run log")
    v.add_argument("--log", required=True)
    v.set_defaults(func=_cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, ParseError, ValidationError, InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExhaustedError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (NumericFailureError, SimulatorError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
