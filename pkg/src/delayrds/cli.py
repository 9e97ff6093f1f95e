"""Command-line entry point: simulate, attractor, lyapunov, dimension, verify."""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
from pathlib import Path

import numpy as np

from .attractor import absorbing_radius, box_counting_dim, pullback_evolve
from .config import SCHEMA_VERSION, ExperimentConfig
from .dynamics import simulate
from .errors import DelayRDSError
from .tangent import dimension_bounds, estimate_q
from .verify import run_checks, semidistance_ladder


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _header(cfg: ExperimentConfig, command: str) -> list[str]:
    return [f"# schema_version: {SCHEMA_VERSION}", f"# command: {command}",
            f"# config: {cfg.echo()}"]


def write_csv(path, cfg: ExperimentConfig, command: str, columns, rows):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in _header(cfg, command):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_json(path, cfg: ExperimentConfig, command: str, payload: dict):
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "config": cfg.data, **payload}
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out(cfg: ExperimentConfig, name: str) -> Path:
    return Path(cfg["output"]["dir"]) / name


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    if args.t_final is not None:
        cfg["run"]["t_final"] = float(args.t_final)
    system = cfg.system()
    traj = simulate(system, system.path(cfg.seed), cfg["run"]["t_final"])
    psi = traj.psi_states()
    norms = traj.h_norms()
    columns = ["t"] + [f"head_{k}" for k in range(1, system.N + 1)] + ["h_norm"]
    rows = ([t, *state[-1], nrm] for t, state, nrm in zip(traj.times, psi, norms))
    write_csv(args.out or _out(cfg, "trajectory.csv"), cfg, "simulate", columns, rows)
    return 0


def _parse_times(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_attractor(args, cfg: ExperimentConfig) -> int:
    if args.pullback:
        cfg["run"]["pullback"] = _parse_times(args.pullback)
    if args.ensemble is not None:
        cfg["run"]["ensemble"] = int(args.ensemble)
    cfg.check_types()
    system = cfg.system(attractor=True)
    path = system.path(cfg.seed)
    n = cfg["run"]["ensemble"]
    est = absorbing_radius(system, path, ensemble=n, scan_max=float(cfg["run"]["absorb_scan"]),
                           seed=cfg.seed)
    samples = pullback_evolve(system, path, cfg["run"]["pullback"], n, est.radius_analytic, cfg.seed)
    final = samples[-1]
    norms = final.norms()
    columns = ["member"] + [f"head_{k}" for k in range(1, system.N + 1)] + ["h_norm"]
    rows = ([i, *state[-1], nrm] for i, (state, nrm) in enumerate(zip(final.states, norms)))
    write_csv(args.out or _out(cfg, "cloud.csv"), cfg, "attractor", columns, rows)
    if args.report:
        ladder = semidistance_ladder(samples)
        write_json(args.report, cfg, "attractor", {
            "radius_analytic": est.radius_analytic,
            "radius_empirical": est.radius_empirical,
            "T_absorb": est.T_absorb,
            "violations": est.violations,
            "r_hat": est.r_hat,
            "noise_constant": est.c,
            "R0": est.R0,
            "pullback_times": [s.pullback_time for s in samples],
            "semidistance_ladder": ladder.tolist(),
            "diameters": [s.diameter() for s in samples],
        })
    return 0


def _lyapunov_settings(args, cfg: ExperimentConfig) -> dict:
    ly = cfg["run"]["lyapunov"]
    for key in ("m", "intervals", "paths"):
        value = getattr(args, key, None)
        if value is not None:
            ly[key] = int(value)
    if getattr(args, "workers", None) is not None:
        cfg["run"]["workers"] = int(args.workers)
    return ly


def _stats(cfg: ExperimentConfig, system, ly: dict):
    seeds = np.random.SeedSequence(cfg.seed).generate_state(int(ly["paths"]), np.uint64)
    return estimate_q(system, [int(s) for s in seeds], int(ly["m"]), int(ly["intervals"]),
                      n_base=int(ly["n_base"]), warmup=int(ly["warmup"]),
                      workers=int(cfg["run"]["workers"]))


def cmd_lyapunov(args, cfg: ExperimentConfig) -> int:
    ly = _lyapunov_settings(args, cfg)
    system = cfg.system(attractor=True)
    stats = _stats(cfg, system, ly)
    q = stats.q_paths()
    rows = ([p, j + 1, q[p, j]] for p in range(q.shape[0]) for j in range(q.shape[1]))
    write_csv(args.out or _out(cfg, "q.csv"), cfg, "lyapunov", ["path", "j", "q_hat"], rows)
    return 0


def cmd_dimension(args, cfg: ExperimentConfig) -> int:
    ly = _lyapunov_settings(args, cfg)
    system = cfg.system(attractor=True)
    stats = _stats(cfg, system, ly)
    box_cfg = cfg["run"]["box"]
    path = system.path(cfg.seed)
    cloud = pullback_evolve(system, path, [cfg["run"]["pullback"][-1]], cfg["run"]["ensemble"],
                            1.0, cfg.seed)[0]
    box = box_counting_dim(cloud, box_cfg["eps"], k=int(box_cfg["k"]))
    report = dimension_bounds(stats, box_estimate=box.dimension)
    report.diagnostics["box_degenerate"] = box.degenerate
    report.diagnostics["box_counts"] = box.counts.tolist()
    write_json(args.report or _out(cfg, "dim.json"), cfg, "dimension", report.to_dict())
    return 0


def cmd_verify(args, cfg: ExperimentConfig) -> int:
    only = set(args.only.split(",")) if args.only else None
    results = run_checks(cfg.seed, only=only, echo=print)
    width = max(len(r.name) for r in results) if results else 0
    print()
    for r in results:
        print(f"{r.key:<4} {r.name:<{width}}  {'pass' if r.passed else 'FAIL'}  {r.seconds:7.1f}s")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delayrds", description=__doc__)
    parser.add_argument("--config", help="YAML config file (blocks: model, discretization, "
                                         "noise, run, output)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="record one trajectory")
    p.add_argument("--t-final", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attractor", help="absorbing radius and pullback clouds")
    p.add_argument("--pullback", help="comma-separated pullback times")
    p.add_argument("--ensemble", type=int)
    p.add_argument("--out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_attractor)

    for name, func in (("lyapunov", cmd_lyapunov), ("dimension", cmd_dimension)):
        p = sub.add_parser(name, help="q_j statistics" if name == "lyapunov" else "dimension bounds")
        p.add_argument("--m", type=int)
        p.add_argument("--intervals", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--workers", type=int)
        if name == "lyapunov":
            p.add_argument("--out")
        else:
            p.add_argument("--report")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--only", help="comma-separated check keys, e.g. C1,C3")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        return args.func(args, cfg)
    except DelayRDSError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    except OSError as exc:
        print(exc, file=_sys.stderr)
        return 1


if __name__ == "__main__":
    _sys.exit(main())
