"""Experiment driver.

Subcommands::

    mfgsolve print-default-config
    mfgsolve solve-exact -c CONFIG [--out DIR] [--threads N]
    mfgsolve solve-rl    -c CONFIG [--out DIR] [--threads N]
    mfgsolve evaluate NAME -c CONFIG [--out DIR]
    mfgsolve compare NAME_A NAME_B -c CONFIG [--out DIR]
    mfgsolve export --atlas SRC --to DST

Solvers write ``atlas.csv``, ``values.csv`` and ``diagnostics.csv`` under
``<root>/exact/`` or ``<root>/rl/``; ``evaluate NAME`` reads
``<root>/NAME/atlas.csv`` and writes ``exploitability.csv`` and
``trajectory.csv`` under ``<root>/evaluate-NAME/``; ``compare A B`` writes
``<root>/compare-A-B.csv``.  The output root is ``--out`` if given, else
the config's ``output_dir``, else ``$MFGSOLVE_OUTPUT_DIR``, else ``./out``.

Exit codes: 0 success; 1 a solver stage did not converge or a configured
acceptance threshold was violated; 2 config error; 3 unknown environment;
4 unwritable output.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts, evaluation
from . import rng as rngmod
from .config import DEFAULT_CONFIG, ConfigError, load_config
from .core import build_grid
from .envs import KernelUnavailableError, UnknownEnvironmentError
from .exact import backward_solve
from .rl import rl_backward_solve

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_CONFIG = 2
EXIT_UNKNOWN_ENV = 3
EXIT_OUTPUT = 4


class OutputError(OSError):
    pass


def _output_root(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get("MFGSOLVE_OUTPUT_DIR", "out"))


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {path} is not writable: {exc}")
    return path


def _run_solver(args, which: str) -> int:
    cfg = load_config(args.config)
    env = cfg.build_env()
    grid = build_grid(env.n_types, cfg.resolution)
    out = _ensure_dir(_output_root(args, cfg) / which)

    if which == "exact":
        atlas, tables, diag = backward_solve(env, grid, cfg.fixed_point,
                                             seed=cfg.seed,
                                             threads=args.threads)
    else:
        atlas, tables, diag = rl_backward_solve(env, grid, cfg.rl,
                                                threads=args.threads)

    artifacts.write_atlas_csv(out / "atlas.csv", atlas)
    artifacts.write_values_csv(out / "values.csv", tables)
    artifacts.write_diagnostics_csv(out / "diagnostics.csv", diag.rows)

    bad = [r for r in diag.rows if not r.converged]
    if bad:
        first = bad[0]
        print(f"{which}: {len(bad)} stage points did not converge "
              f"(first: stage {first.stage + 1}, z_index {first.z_index})",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    print(f"{which}: wrote {out}/atlas.csv, values.csv, diagnostics.csv")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    env = cfg.build_env()
    root = _output_root(args, cfg)
    atlas = artifacts.read_atlas_csv(root / args.name / "atlas.csv")
    out = _ensure_dir(root / f"evaluate-{args.name}")

    report = evaluation.exploitability(atlas, env, atlas.grid)
    artifacts.write_exploitability_csv(out / "exploitability.csv", report)

    z1 = cfg.evaluate.initial_z(env.n_types)
    pop = evaluation.rollout_population(
        cfg.evaluate.population, z1, atlas, env,
        rngmod.stream(cfg.seed, rngmod.POPULATION, 0))
    artifacts.write_trajectory_csv(out / "trajectory.csv",
                                   pop.statistical_z, pop.empirical_z)
    print(f"evaluate {args.name}: max exploitability gap "
          f"{report.max_gap:.6g}; mean return {pop.mean_return:.6g} "
          f"+/- {pop.return_ci99:.2g}")

    limit = cfg.acceptance.get("max_exploitability")
    if limit is not None and report.max_gap > float(limit):
        print(f"exploitability {report.max_gap:g} exceeds configured "
              f"threshold {float(limit):g}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = load_config(args.config)
    root = _output_root(args, cfg)
    atlas_a = artifacts.read_atlas_csv(root / args.name_a / "atlas.csv")
    atlas_b = artifacts.read_atlas_csv(root / args.name_b / "atlas.csv")
    values_a = artifacts.read_values_csv(root / args.name_a / "values.csv")
    values_b = artifacts.read_values_csv(root / args.name_b / "values.csv")
    if atlas_a.probs.shape != atlas_b.probs.shape:
        raise ConfigError(f"atlases have different shapes: "
                          f"{atlas_a.probs.shape} vs {atlas_b.probs.shape}")

    horizon = atlas_a.horizon
    tv = np.array([evaluation.atlas_distance(atlas_a, atlas_b, t)
                   for t in range(horizon)])
    vdiff = np.abs(values_a - values_b).max(axis=(1, 2))
    _ensure_dir(root)
    out_path = root / f"compare-{args.name_a}-{args.name_b}.csv"
    artifacts.write_compare_csv(out_path, tv, vdiff)
    print(f"compare: stage-1 atlas TV {tv[0]:.6g}, "
          f"stage-1 max |value diff| {vdiff[0]:.6g} -> {out_path}")

    status = EXIT_OK
    tv_limit = cfg.acceptance.get("stage1_atlas_tv")
    if tv_limit is not None and tv[0] > float(tv_limit):
        print(f"stage-1 atlas TV {tv[0]:g} exceeds {float(tv_limit):g}",
              file=sys.stderr)
        status = EXIT_NOT_CONVERGED
    v_limit = cfg.acceptance.get("stage1_value_diff")
    if v_limit is not None and vdiff[0] > float(v_limit):
        print(f"stage-1 value difference {vdiff[0]:g} exceeds "
              f"{float(v_limit):g}", file=sys.stderr)
        status = EXIT_NOT_CONVERGED
    return status


def _cmd_export(args) -> int:
    atlas = artifacts.read_atlas_csv(args.atlas)
    dest = Path(args.to)
    _ensure_dir(dest.parent if dest.parent != Path("") else Path("."))
    artifacts.write_atlas_csv(dest, atlas)
    print(f"export: {args.atlas} -> {dest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfgsolve",
        description="Mean-field game equilibrium solvers and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("print-default-config",
                   help="emit the shipped malware experiment config")

    def common(p):
        p.add_argument("-c", "--config", required=True,
                       help="YAML experiment config")
        p.add_argument("--out", help="output root directory")

    p = sub.add_parser("solve-exact", help="backward-recursion solver")
    common(p)
    p.add_argument("--threads", type=int, default=1,
                   help="workers per stage (grid points are independent)")

    p = sub.add_parser("solve-rl", help="Expected-Sarsa + policy-gradient solver")
    common(p)
    p.add_argument("--threads", type=int, default=1,
                   help="workers per stage (grid points are independent)")

    p = sub.add_parser("evaluate",
                       help="exploitability and trajectories for an atlas")
    p.add_argument("name", help="artifact subdirectory, e.g. 'exact' or 'rl'")
    common(p)

    p = sub.add_parser("compare", help="per-stage distance between two atlases")
    p.add_argument("name_a")
    p.add_argument("name_b")
    common(p)

    p = sub.add_parser("export", help="re-serialize an atlas CSV")
    p.add_argument("--atlas", required=True, help="source atlas.csv")
    p.add_argument("--to", required=True, help="destination path")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "print-default-config":
            print(DEFAULT_CONFIG, end="")
            return EXIT_OK
        if args.command == "solve-exact":
            return _run_solver(args, "exact")
        if args.command == "solve-rl":
            return _run_solver(args, "rl")
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "export":
            return _cmd_export(args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnknownEnvironmentError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_UNKNOWN_ENV
    except artifacts.SchemaError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KernelUnavailableError as exc:
        print(f"error: {exc} (this command needs the exact kernel)",
              file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
