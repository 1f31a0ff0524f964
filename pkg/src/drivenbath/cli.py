"""Command-line interface.

Subcommands: run, run-all, list-scenarios, compare, classify.
Exit codes: 0 success, 2 config error, 3 solver refusal, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import catalog
from .errors import ConfigError, NumericalFailure, SolverRefusal
from .harness import ScenarioConfig, classify_regime, export_results, run_scenario


def _load_config(arg: str) -> ScenarioConfig:
    path = Path(arg)
    if path.exists():
        return ScenarioConfig.from_file(path)
    return catalog.get_scenario(arg)


def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    raw = json.loads(config.canonical_json())
    if getattr(args, "dt", None):
        raw["grid"]["dt"] = args.dt
    cfg = ScenarioConfig(raw)
    if getattr(args, "quick", False):
        cfg = catalog.make_quick(cfg)
    return cfg


def _cmd_run(args) -> int:
    config = _apply_overrides(_load_config(args.config), args)
    bundle = run_scenario(config)
    manifest = export_results(bundle, args.out)
    print(f"{config.scenario_id}: wrote {manifest}")
    return 0


def _cmd_run_all(args) -> int:
    out = Path(args.out)
    for sid in catalog.scenario_ids():
        config = _apply_overrides(catalog.get_scenario(sid), args)
        bundle = run_scenario(config)
        manifest = export_results(bundle, out)
        print(f"{config.scenario_id}: wrote {manifest}")
    return 0


def _cmd_list(_args) -> int:
    for sid in catalog.scenario_ids():
        print(sid)
    return 0


def _read_csv(path: str):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(x) for x in line.strip().split(",")]
                for line in fh if line.strip()]
    cols = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    return header, cols


def _cmd_compare(args) -> int:
    head_a, cols_a = _read_csv(args.a)
    head_b, cols_b = _read_csv(args.b)
    shared = [c for c in head_a if c in head_b and c != "t"]
    if not shared:
        raise ConfigError("the two CSV files share no data columns")
    if len(cols_a["t"]) != len(cols_b["t"]):
        raise ConfigError("the two CSV files have different lengths")
    print(f"{'column':<28}{'max |diff|':>14}{'mean |diff|':>14}")
    for name in shared:
        diffs = [abs(x - y) for x, y in zip(cols_a[name], cols_b[name])]
        print(f"{name:<28}{max(diffs):>14.3e}{sum(diffs) / len(diffs):>14.3e}")
    return 0


def _cmd_classify(args) -> int:
    config = _load_config(args.config)
    print(json.dumps(classify_regime(config), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drivenbath",
                                description="driven open-system scenario runner")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario (config path or catalog id)")
    run.add_argument("config")
    run.add_argument("--out", default="out")
    run.add_argument("--dt", type=float, default=None)
    run.add_argument("--seed", type=int, default=None,
                     help="reserved; all solvers are deterministic")
    run.add_argument("--quick", action="store_true")
    run.set_defaults(func=_cmd_run)

    runall = sub.add_parser("run-all", help="run the full catalog")
    runall.add_argument("--out", default="out")
    runall.add_argument("--dt", type=float, default=None)
    runall.add_argument("--quick", action="store_true")
    runall.set_defaults(func=_cmd_run_all)

    ls = sub.add_parser("list-scenarios", help="list catalog scenario ids")
    ls.set_defaults(func=_cmd_list)

    cmp_ = sub.add_parser("compare", help="compare two exported CSV series")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.set_defaults(func=_cmd_compare)

    cls = sub.add_parser("classify", help="report the dynamical regime")
    cls.add_argument("config")
    cls.set_defaults(func=_cmd_classify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverRefusal as exc:
        print(f"solver refusal: {exc}", file=sys.stderr)
        return 3
    except NumericalFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
