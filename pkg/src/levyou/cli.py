"""Command-line entry point: simulate / verify / converge.

All three subcommands read the shared JSON config; `--seed` overrides the
config seed, `--out` the artifact directory.  Exit status is 0 exactly when
every check row passed (simulate has no check rows beyond artifact emission).
Artifacts are written atomically and are byte-identical across reruns with the
same config and seed.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .config import RunConfig, build_scenario, load_config
from .convergence import (
    characteristics_conditions,
    fdd_distances,
    generator_convergence,
    skorokhod_distance,
)
from .errors import ConfigError, ContractError
from .levy import simulate_path
from .ou import mild_solution
from .report import CheckRow, Report, write_csv, write_json
from .rng import derive_seed, substream
from .verify import run_identity_suite


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levyou",
        description="Simulate and verify Levy-driven Ornstein-Uhlenbeck dynamics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("simulate", "simulate an ensemble and emit trajectory CSV"),
        ("verify", "run the identity suite and emit a JSON report"),
        ("converge", "run the weak-convergence scenario"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for ensembles")
        p.add_argument("--format", choices=("csv", "json"), default=None, help="artifact format")
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if cfg.command is not None and cfg.command != args.command:
        raise ConfigError(
            [f"config requests command {cfg.command!r} but {args.command!r} was invoked"]
        )
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output_dir"] = args.out
    if args.format is not None:
        updates["output_format"] = args.format
    return replace(cfg, **updates) if updates else cfg


def _simulate(cfg: RunConfig, threads: int, report: Report) -> None:
    eta_rng = substream(cfg.seed, "simulate/initial")
    etas = [cfg.problem.resolve_initial(eta_rng) for _ in range(cfg.ensemble)]

    def one(r: int):
        path = simulate_path(cfg.chars, cfg.horizon, cfg.grid, derive_seed(cfg.seed, f"simulate/{r}"))
        sol = mild_solution(cfg.problem, path, eta=etas[r], subpanels=cfg.subpanels)
        return r, sol

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solutions = sorted(pool.map(one, range(cfg.ensemble)), key=lambda x: x[0])
    else:
        solutions = [one(r) for r in range(cfg.ensemble)]

    rows = []
    for r, sol in solutions:
        for i, t in enumerate(sol.times):
            for k in range(cfg.dimension):
                rows.append((r, float(t), k, float(sol.values[i, k])))
    if cfg.output_format == "json":
        path = os.path.join(cfg.output_dir, "trajectory.json")
        write_json(path, {"columns": ["replica", "t", "k", "value"], "rows": rows})
    else:
        path = os.path.join(cfg.output_dir, "trajectory.csv")
        write_csv(path, ("replica", "t", "k", "value"), rows)
    report.artifacts.append(path)
    meta_path = os.path.join(cfg.output_dir, "trajectory.meta.json")
    write_json(meta_path, {"config_hash": cfg.hash, "seed": cfg.seed, "rows": len(rows)})
    report.artifacts.append(meta_path)


def _verify(cfg: RunConfig, report: Report) -> None:
    report.rows.extend(run_identity_suite(cfg))


def _converge(cfg: RunConfig, report: Report) -> None:
    sc = cfg.scenario_cfg
    if sc is None:
        raise ConfigError(["converge needs a `scenario` block in the config"])
    scenario = build_scenario(cfg)
    ts = np.linspace(0.0, cfg.horizon, 7)
    st_pairs = [(float(s), float(t)) for i, s in enumerate(ts) for t in ts[i:]]
    sup_norms = generator_convergence(scenario, st_pairs, cfg.probes[0])
    ns = scenario.indices
    ratio_ok = True
    for a, b in zip(ns, ns[1:]):
        if sup_norms[a] > 0 and b == 2 * a:
            r = sup_norms[a] / sup_norms[b]
            ratio_ok = ratio_ok and (1.6 <= r <= 2.4)
    vals = [sup_norms[n] for n in ns]
    report.rows.append(
        CheckRow("generator_convergence_rate", max(vals), max(vals) + 1.0, ratio_ok,
                 ",".join(f"{n}:{sup_norms[n]:.3e}" for n in ns))
    )

    dists = fdd_distances(scenario, max(cfg.ensemble, 1000), cfg.seed)
    mono = True
    for a, b in zip(ns, ns[1:]):
        da, sa = dists[a]
        db, sb = dists[b]
        mono = mono and db <= da + cfg.tolerances["se_sigma"] * (sa + sb)
    report.rows.append(
        CheckRow("fdd_distance_monotone", dists[ns[-1]][0], dists[ns[0]][0] + 1.0, mono,
                 ",".join(f"{n}:{dists[n][0]:.3e}+-{dists[n][1]:.1e}" for n in ns))
    )

    rows = characteristics_conditions(scenario, sc["q_level"])
    bounded = all(r.dominated for r in rows)
    peak = max(max(r.drift_bound, r.hs_embedding, r.jump_integral) for r in rows)
    report.rows.append(
        CheckRow("characteristics_conditions", peak, peak + 1.0, bounded,
                 ";".join(f"n={r.index} m'={r.drift_bound:.3e} hs={r.hs_embedding:.3e} nu={r.jump_integral:.3e}" for r in rows))
    )

    # diagnostic Skorokhod samples: one solved path per index against the limit
    limit_path = simulate_path(cfg.chars, cfg.horizon, cfg.grid, derive_seed(cfg.seed, "skorokhod/0"))
    limit_sol = mild_solution(scenario.problem(0), limit_path, subpanels=cfg.subpanels)
    sk_rows = []
    for n in ns:
        p = simulate_path(scenario.problem(n).chars, cfg.horizon, cfg.grid, derive_seed(cfg.seed, f"skorokhod/{n}"))
        sol = mild_solution(scenario.problem(n), p, subpanels=cfg.subpanels)
        sk_rows.append((n, skorokhod_distance(sol, limit_sol, cfg.family, 0, cfg.horizon)))
    report.extra["skorokhod_samples"] = {str(n): d for n, d in sk_rows}

    header = ("n", "generator_sup", "fdd_distance", "fdd_se", "drift_bound", "hs_embedding", "jump_integral")
    table = [
        (
            n,
            float(sup_norms[n]),
            float(dists[n][0]),
            float(dists[n][1]),
            float(next(r.drift_bound for r in rows if r.index == n)),
            float(next(r.hs_embedding for r in rows if r.index == n)),
            float(next(r.jump_integral for r in rows if r.index == n)),
        )
        for n in ns
    ]
    if cfg.output_format == "json":
        path = os.path.join(cfg.output_dir, "convergence.json")
        write_json(path, {"columns": list(header), "rows": table})
    else:
        path = os.path.join(cfg.output_dir, "convergence.csv")
        write_csv(path, header, table)
    report.artifacts.append(path)


def main(argv=None) -> int:
    args = _make_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2

    report = Report(
        command=args.command,
        config_hash=cfg.hash,
        seed=cfg.seed,
        version=__version__,
        approximate=cfg.chars.approximate,
    )
    start = time.perf_counter()
    try:
        if args.command == "simulate":
            _simulate(cfg, args.threads, report)
        elif args.command == "verify":
            _verify(cfg, report)
        else:
            _converge(cfg, report)
    except (ConfigError, ContractError) as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return 2
    report.elapsed_seconds = time.perf_counter() - start

    report_path = os.path.join(cfg.output_dir, f"{args.command}_report.json")
    write_json(report_path, report.as_dict())
    for row in report.rows:
        status = "PASS" if row.passed else "FAIL"
        print(f"[{status}] {row.check_id}: value={row.value:.6e} tolerance={row.tolerance:.6e} {row.detail}")
    print(f"report: {report_path}")
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
