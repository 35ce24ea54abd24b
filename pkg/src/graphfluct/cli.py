"""Command-line entry points.

``graph-fluct <experiment> --config <path> [--replicas M] [--seed S]
[--workers W] [--out DIR]`` drives the experiment pipelines; the
companion tools ``graphgen``, ``simulate``, ``limit-pde``, ``spde`` and
``concentration`` expose the individual modules.  Exit codes: 0 success,
2 config error, 3 replica/runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import initcond
from .dynamics import ParticleState, SimConfig, simulate
from .experiments import ConfigError, EXPERIMENTS, run, validate_config
from .graph import Graph, gen_erdos_renyi, gen_sbm
from .kernels import kernel_from_config
from .limits import (
    InitialLawSpec,
    sample_initial,
    solve_coupled,
    solve_fokker_planck,
    solve_limit_eta,
    solve_local_system,
)
from .measures import AtomicMeasure, fourier_coeffs, uniform_field

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="graph-fluct",
        description="experiment runner for interacting diffusions on random graphs")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--replicas", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--force", action="store_true",
                        help="recompute even if the config hash already has results")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        cfg["experiment"] = args.experiment
        for key in ("replicas", "seed", "workers", "out"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
        cfg = validate_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out_dir = run(cfg, force=args.force)
    except Exception as exc:  # replica failure
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(out_dir)
    return EXIT_OK


def graphgen_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="graphgen",
                                     description="generate a Bernoulli interaction graph")
    parser.add_argument("--n", type=int, required=True)
    parser.add_argument("--p", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--symmetric", action="store_true")
    parser.add_argument("--zero-diagonal", action="store_true")
    parser.add_argument("--sbm", nargs=2, type=float, metavar=("P_INTRA", "Q_INTER"))
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        if args.sbm:
            g = gen_sbm(args.n, args.sbm[0], args.sbm[1], args.seed,
                        symmetric=args.symmetric, zero_diagonal=args.zero_diagonal)
        else:
            g = gen_erdos_renyi(args.n, args.p, args.seed, symmetric=args.symmetric,
                                zero_diagonal=args.zero_diagonal)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    g.save(args.out)
    print(args.out)
    return EXIT_OK


def simulate_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="simulate",
                                     description="integrate one particle trajectory")
    parser.add_argument("--config", required=True)
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        gcfg = cfg.get("graph", {})
        if "file" in gcfg:
            graph = Graph.load(gcfg["file"])
        elif gcfg.get("sbm"):
            graph = gen_sbm(gcfg["n"], gcfg["sbm"][0], gcfg["sbm"][1],
                            gcfg.get("seed", 0), symmetric=gcfg.get("symmetric", False))
        else:
            graph = gen_erdos_renyi(gcfg["n"], gcfg.get("p", 0.5), gcfg.get("seed", 0),
                                    symmetric=gcfg.get("symmetric", False))
        kernel = kernel_from_config(cfg.get("kernel", {"type": "kuramoto", "K": 1.0}))
        sim = cfg.get("sim", {})
        sim_cfg = SimConfig(
            dt=sim.get("dt", 1e-3), t_final=sim.get("t_final", 1.0),
            snapshot_times=sim.get("snapshot_times"), renorm=sim.get("renorm", "expected"),
            seed=sim.get("seed", 0), replica_id=sim.get("replica_id", 0))
        icfg = cfg.get("init", {"kind": "iid_uniform"})
        state = initcond.sample(initcond.InitSpec(icfg.get("kind", "iid_uniform")),
                                graph, graph.n, sim_cfg.seed, sim_cfg.replica_id)
        store = cfg.get("store", "phases")
        a_max = cfg.get("a_max", 16)
        out_path = cfg.get("out", "trajectory.jsonl")
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        traj = simulate(graph, state, kernel, sim_cfg)
    except Exception as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    with open(out_path, "w") as fh:
        fh.write(json.dumps({"config": cfg, "provenance": traj.provenance,
                             "zero_degree_events": traj.zero_degree_events},
                            sort_keys=True) + "\n")
        for t, phases in traj.samples:
            if store == "moments":
                coeffs = fourier_coeffs(
                    AtomicMeasure(1, phases, np.full(len(phases), 1.0 / len(phases))),
                    a_max)
                rec = {"t": t, "replica": sim_cfg.replica_id,
                       "moments": coeffs.to_json()}
            else:
                rec = {"t": t, "replica": sim_cfg.replica_id,
                       "phases": np.asarray(phases).tolist()}
            fh.write(json.dumps(rec) + "\n")
    print(out_path)
    return EXIT_OK


def limit_pde_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="limit-pde",
                                     description="solve the mean-field density equation")
    parser.add_argument("--K", type=float, default=2.0, help="Kuramoto coupling")
    parser.add_argument("--init", choices=["uniform", "two_point"], default="two_point")
    parser.add_argument("--t-final", type=float, default=1.0)
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--a-max", type=int, default=64)
    parser.add_argument("--snapshots", type=int, default=11)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    kernel = kernel_from_config({"type": "kuramoto", "K": args.K})
    mu0 = uniform_field(args.a_max) if args.init == "uniform" else initcond.TWO_POINT_ATOMS
    try:
        traj = solve_fokker_planck(mu0, kernel, args.t_final, dt=args.dt, a_max=args.a_max)
    except Exception as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    r, psi = traj.order_parameter_series()
    ks = np.linspace(0, traj.n_steps, args.snapshots).astype(int)
    payload = {
        "times": (traj.dt * ks).tolist(),
        "fields": [traj.field(int(k)).to_json() for k in ks],
        "order_parameter": {"t": traj.times().tolist(), "r": r.tolist(),
                            "psi": psi.tolist()},
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh)
    print(args.out)
    return EXIT_OK


def spde_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spde",
                                     description="integrate the limiting fluctuation SPDEs")
    parser.add_argument("--system", choices=["eta", "coupled", "local"], required=True)
    parser.add_argument("--K", type=float, default=2.0)
    parser.add_argument("--init", choices=["zero", "gaussian_clt", "explicit_atoms"],
                        default="gaussian_clt")
    parser.add_argument("--hat-preset", choices=["prop26", "sec35"], default="prop26")
    parser.add_argument("--mu0", choices=["uniform", "two_point"], default="uniform")
    parser.add_argument("--p", type=float, default=0.5)
    parser.add_argument("--t-final", type=float, default=1.0)
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--a-max", type=int, default=32)
    parser.add_argument("--replicas", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    kernel = kernel_from_config({"type": "kuramoto", "K": args.K})
    mu0 = uniform_field(args.a_max) if args.mu0 == "uniform" else initcond.TWO_POINT_ATOMS
    try:
        mu_traj = solve_fokker_planck(mu0, kernel, args.t_final, dt=args.dt,
                                      a_max=args.a_max)
        if args.system == "local":
            spec = InitialLawSpec("local_joint" if args.init != "zero" else "zero",
                                  mu0=mu0, p=args.p)
            draws = sample_initial(spec, args.a_max, args.seed, m=args.replicas)
            trajs = solve_local_system(draws, args.p, mu_traj, kernel, seed=args.seed)
            payload = {name: np.mean(np.abs(tr.final()) ** 2, axis=0).tolist()
                       for name, tr in trajs.items()}
        else:
            spec = InitialLawSpec(args.init, mu0=mu0, p=args.p,
                                  hat_preset=args.hat_preset)
            draws = sample_initial(spec, args.a_max, args.seed, m=args.replicas)
            hat0 = draws.get("hat_eta0") if args.system == "coupled" else None
            if args.system == "coupled" and hat0 is None:
                from .limits import hat_eta0_preset
                hat0 = hat_eta0_preset(args.hat_preset, args.a_max)
            if args.system == "coupled":
                traj = solve_coupled(draws["eta0"], hat0, mu_traj, kernel, seed=args.seed)
            else:
                traj = solve_limit_eta(draws["eta0"], mu_traj, kernel, seed=args.seed)
            payload = {"eta_second_moment": np.mean(np.abs(traj.final()) ** 2,
                                                    axis=0).tolist()}
    except Exception as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    payload["meta"] = {k: v for k, v in vars(args).items() if k != "out"}
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    print(args.out)
    return EXIT_OK


def concentration_main(argv=None) -> int:
    from .concentration import ALL_PATTERNS, best_value, tail_study

    parser = argparse.ArgumentParser(prog="concentration",
                                     description="sign-vector suprema of centered graphs")
    parser.add_argument("--pattern", choices=list(ALL_PATTERNS), required=True)
    parser.add_argument("--n", type=int, nargs="+", required=True)
    parser.add_argument("--p", type=float, default=0.5)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--method", choices=["exact", "bounds", "tail"], default="tail")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="-")
    args = parser.parse_args(argv)
    try:
        if args.method == "tail":
            rows = tail_study(args.pattern, args.n, args.p, args.trials, args.seed)
        else:
            rows = []
            for n in args.n:
                for trial in range(args.trials):
                    g = gen_erdos_renyi(n, args.p,
                                        seed=(args.seed * 7919 + n * 31 + trial))
                    A = g.centered().dense()
                    lo, hi, method = best_value(A, args.pattern, seed=args.seed + trial)
                    rows.append({"pattern": args.pattern, "n": n, "p": args.p,
                                 "trial": trial, "lower": lo, "upper": hi,
                                 "method": method})
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        writer = csv.DictWriter(out, fieldnames=sorted({k for r in rows for k in r}))
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
