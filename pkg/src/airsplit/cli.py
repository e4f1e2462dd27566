"""Command line entry point.

Subcommands: run (train a configured sweep), cost (accounting tables),
regret (noisy online-optimization study), gen-data (write a dataset),
verify (built-in consistency checks).  Failures print a one-line JSON error
record to stderr and exit nonzero (2 for bad configuration, 1 otherwise).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .bench import (ConfigError, DataConfig, LayerSpec, PRESET_NAMES,
                    apply_overrides, config_from_dict, config_to_dict,
                    cost_comparison, cost_report, generate_dataset, preset,
                    save_dataset)
from .runtime import RegretConfig, regret_experiment
from .verify import verify_all

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airsplit",
        description="Split learning over reciprocal MIMO channels, simulated.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one configured sweep")
    p_run.add_argument("config",
                       help=f"preset name ({', '.join(PRESET_NAMES)}) or a JSON file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="replace the config's seed list with this one seed")
    p_run.add_argument("--out-dir", default=None,
                       help="artifact directory (default out/<config name>)")
    p_run.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="config override, repeatable")

    p_cost = sub.add_parser("cost", help="per-design cost accounting")
    p_cost.add_argument("sizes", nargs="+", metavar="KEY=VALUE",
                        help="layer sizes, e.g. n_i=6 n_o=6 n_t=4 n_r=4 r=3")
    p_cost.add_argument("--out-dir", default=None,
                        help="also write cost.csv and comparison.csv here")

    p_reg = sub.add_parser("regret", help="average-regret decay under noisy steps")
    p_reg.add_argument("--seed", type=int, default=None)
    p_reg.add_argument("--out-dir", default=None,
                       help="write regret_curves.csv and regret_summary.json here")
    p_reg.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="RegretConfig field override, repeatable")

    p_gen = sub.add_parser("gen-data", help="generate and store a dataset")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--out-dir", default="data",
                       help="directory for dataset.npz (default data/)")
    p_gen.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="DataConfig field override, repeatable")

    sub.add_parser("verify", help="run the built-in consistency checks")
    return parser


def _parse_kv(pairs, cls, path: str):
    """key=value strings onto a flat dataclass, JSON-parsing each value."""
    values = {}
    fields = {f.name for f in dataclasses.fields(cls)}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"{path}: expected key=value, got {item!r}")
        key, raw = item.split("=", 1)
        if key not in fields:
            raise ConfigError(f"{path}.{key}: unknown field")
        try:
            values[key] = json.loads(raw)
        except json.JSONDecodeError:
            values[key] = raw
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _load_run_config(args):
    if args.config in PRESET_NAMES:
        record = config_to_dict(preset(args.config))
    else:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(
                f"config: {args.config!r} is neither a preset nor a file")
        with open(path) as fh:
            record = json.load(fh)
    record = apply_overrides(record, args.override)
    cfg = config_from_dict(record)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    return cfg


def _cmd_run(args) -> int:
    from .bench import run_experiment
    cfg = _load_run_config(args)
    out_dir = Path(args.out_dir) if args.out_dir else Path("out") / cfg.name
    summary = run_experiment(cfg, out_dir)
    ok = [row for row in summary if row["status"] == "ok"]
    failed = [row for row in summary if row["status"] != "ok"]
    print(f"{len(ok)} runs finished, {len(failed)} failed; artifacts in {out_dir}")
    for row in ok:
        print(f"  r={row['r']} snr={row['snr_db']} seed={row['seed']}: "
              f"eval accuracy {row['eval_accuracy']:.4f}")
    for row in failed:
        print(f"  r={row['r']} snr={row['snr_db']} seed={row['seed']}: "
              f"{row['status']}")
    return 0 if not failed else 1


def _cmd_cost(args) -> int:
    spec = _parse_kv(args.sizes, LayerSpec, "sizes")
    rows = cost_report(spec)
    comp = cost_comparison(spec.r)
    width = max(len(f"{row.kind} {row.side}/{row.form}") for row in rows)
    print(f"{'design'.ljust(width)}  parameters        macs  transmissions")
    for row in rows:
        name = f"{row.kind} {row.side}/{row.form}"
        print(f"{name.ljust(width)}  {row.parameters:10d}  {row.macs:10d}  "
              f"{row.transmissions:13d}")
    print()
    print("algorithm     transmission      channel estimation")
    for row in comp:
        bound = "<= " if row.transmission_bound else "   "
        ebound = "<= " if row.estimation_bound else "   "
        print(f"{row.algorithm:12s}  {bound}{row.transmission_factor:<12.6g}  "
              f"{ebound}{row.estimation_factor:<.6g}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "cost.csv", "w") as fh:
            fh.write("kind,side,form,parameters,macs,transmissions\n")
            for row in rows:
                fh.write(f"{row.kind},{row.side},{row.form},{row.parameters},"
                         f"{row.macs},{row.transmissions}\n")
        with open(out / "comparison.csv", "w") as fh:
            fh.write("algorithm,transmission_factor,transmission_bound,"
                     "estimation_factor,estimation_bound\n")
            for row in comp:
                fh.write(f"{row.algorithm},{row.transmission_factor!r},"
                         f"{row.transmission_bound},{row.estimation_factor!r},"
                         f"{row.estimation_bound}\n")
    return 0


def _cmd_regret(args) -> int:
    cfg = _parse_kv(args.override, RegretConfig, "regret")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if isinstance(cfg.sigmas, list):
        cfg = dataclasses.replace(cfg, sigmas=tuple(float(s) for s in cfg.sigmas))
    result = regret_experiment(cfg)
    for i, sigma in enumerate(cfg.sigmas):
        print(f"sigma={sigma}: slope {result.slopes[i]:+.3f}, "
              f"final avg regret {result.final[i]:.6g}")
    print(f"ratio (largest vs smallest positive sigma): "
          f"measured {result.measured_ratio:.3f}, "
          f"predicted {result.predicted_ratio:.3f}")
    if result.diverged:
        print("warning: the iterates diverged; results are unreliable")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        mean_curve = result.avg_regret.mean(axis=1)
        with open(out / "regret_curves.csv", "w") as fh:
            names = ",".join(f"sigma_{s}" for s in cfg.sigmas)
            fh.write(f"t,{names}\n")
            for j, t in enumerate(result.ts):
                vals = ",".join(repr(float(mean_curve[i, j]))
                                for i in range(len(cfg.sigmas)))
                fh.write(f"{int(t)},{vals}\n")
        summary = {
            "sigmas": list(cfg.sigmas),
            "slopes": [float(s) for s in result.slopes],
            "final": [float(v) for v in result.final],
            "measured_ratio": result.measured_ratio,
            "predicted_ratio": result.predicted_ratio,
            "c0": result.c0,
            "c1": result.c1,
            "diameter": result.diameter,
            "grad_bound": result.grad_bound,
            "diverged": result.diverged,
        }
        with open(out / "regret_summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"artifacts in {out}")
    return 1 if result.diverged else 0


def _cmd_gen_data(args) -> int:
    cfg = _parse_kv(args.override, DataConfig, "data")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    ds = generate_dataset(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out / "dataset.npz")
    with open(out / "dataset.json", "w") as fh:
        json.dump(dataclasses.asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out / 'dataset.npz'}: "
          f"{ds.train_y.size} train / {ds.test_y.size} test samples, "
          f"{ds.train_x.shape[0]} features, {int(ds.train_y.max()) + 1} classes")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "cost":
            return _cmd_cost(args)
        if args.command == "regret":
            return _cmd_regret(args)
        if args.command == "gen-data":
            return _cmd_gen_data(args)
        if args.command == "verify":
            failures = verify_all()
            return 0 if failures == 0 else 1
    except ConfigError as exc:
        record = {"error": "config", "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 2
    except Exception as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
