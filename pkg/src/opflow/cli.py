"""Command-line front end: generate graphs, simulate, solve, run experiments.

Exit codes: 0 success (simulate: converged), 2 config/validation error,
3 numerical failure (solver/integrator errors, non-convergence).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import equilibrium as eq
from .config import (
    ExperimentConfig,
    build_model,
    build_network,
    build_x0,
    config_to_dict,
    group_mask,
    load_config,
)
from .dynamics import (
    integrate,
    iterate_discrete,
    monitor_bounds,
    write_summary_csv,
    write_trajectory_csv,
)
from .errors import ConfigError, NashViolation, OpflowError
from .experiments import compute_group_stats, run_experiment, write_group_stats_csv
from .graph import (
    complete_graph,
    core_periphery,
    degree_data,
    erdos_renyi,
    save_edge_list,
    stochastic_block_model,
)
from .models import ModifiedFjModel, NfjModel, TaylorModel, discrete_step_fj, vector_field_taylor

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _cmd_generate(args) -> int:
    if args.generator == "er":
        net = erdos_renyi(args.n, args.p, args.seed)
    elif args.generator == "sbm":
        sizes = [int(s) for s in args.sizes.split(",")]
        net = stochastic_block_model(sizes, args.pin, args.pout, args.seed)
    elif args.generator == "core":
        net = core_periphery(args.n, args.p, args.seed)
    else:
        net = complete_graph(args.n)
    save_edge_list(net, args.out)
    dd = degree_data(net)
    print(f"n={net.n} edges={net.edge_count()} fiedler={dd.fiedler:.6g}")
    return EXIT_OK


def _apply_overrides(data: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = value
    return data


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.set:
        from .config import parse_config

        return parse_config(_apply_overrides(cfg.raw, args.set))
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    net = build_network(cfg)
    mask = group_mask(cfg, net.n)
    model, _ = build_model(cfg, net.n, mask)
    x0 = build_x0(cfg, model, net.n, mask)
    if cfg.mode == "discrete":
        traj = iterate_discrete(net, model, x0, cfg.steps)
    else:
        traj = integrate(net, model, x0, cfg.integrator)
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_trajectory_csv(traj, os.path.join(cfg.output_dir, "trajectory.csv"))
    write_summary_csv(traj, os.path.join(cfg.output_dir, "summary.csv"))
    if mask is not None:
        write_group_stats_csv(compute_group_stats(traj, mask), os.path.join(cfg.output_dir, "groups.csv"))
    meta = {
        "converged": bool(traj.converged),
        "t_final": float(traj.times[-1]),
        "spread_final": float(traj.spread[-1]),
        "samples": int(traj.n_samples),
    }
    if isinstance(model, NfjModel):
        report = monitor_bounds(traj, model.params)
        meta["box_transgression"] = max(report.worst, 0.0)
    with open(os.path.join(cfg.output_dir, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"converged={traj.converged} t_final={meta['t_final']:.6g} spread={meta['spread_final']:.6g}")
    return EXIT_OK if traj.converged or cfg.mode == "discrete" else EXIT_NUMERICAL


def _solve_taylor(net, model: TaylorModel, cfg: ExperimentConfig) -> dict:
    params = model.params
    x_star = eq.taylor_equilibrium(net, params)
    residual = float(np.max(np.abs(vector_field_taylor(net, params, x_star))))
    # Independent route: the discrete protocol is a linear contraction.
    x = np.where(params.lam < 1.0, params.u, 1.0).astype(float)
    for _ in range(200000):
        x_next = discrete_step_fj(net, params, x)
        if float(np.max(np.abs(x_next - x))) < 1e-14:
            x = x_next
            break
        x = x_next
    discrepancy = float(np.max(np.abs(x - x_star)))
    jac_min_eig = eq.taylor_jacobian_check(net, params)
    return {
        "x_star": [float(v) for v in x_star],
        "residual": residual,
        "jac_min_eig": jac_min_eig,
        "m_matrix_ok": bool(jac_min_eig > 0),
        "nash_ok": None,
        "multistart_agreement": None,
        "closed_form_discrepancy": discrepancy,
        "seed": cfg.seed,
    }


def _cmd_solve(args) -> int:
    cfg = _load(args)
    net = build_network(cfg)
    mask = group_mask(cfg, net.n)
    model, echo = build_model(cfg, net.n, mask)
    os.makedirs(cfg.output_dir, exist_ok=True)
    out_path = os.path.join(cfg.output_dir, "certificate.json")
    code = EXIT_OK
    if isinstance(model, TaylorModel):
        payload = _solve_taylor(net, model, cfg)
        payload["params_echo"] = echo
    elif isinstance(model, ModifiedFjModel):
        x_star = eq.modified_fj_equilibrium(net, model.u, model.sigma)
        residual = float(np.max(np.abs(model.field(net, x_star))))
        payload = {
            "x_star": [float(v) for v in x_star],
            "residual": residual,
            "jac_min_eig": None,
            "m_matrix_ok": None,
            "nash_ok": None,
            "multistart_agreement": None,
            "params_echo": echo,
            "seed": cfg.seed,
        }
    elif isinstance(model, NfjModel):
        params = model.params
        cert = eq.multistart_uniqueness(net, params, cfg=cfg.solver, seed=cfg.seed)
        try:
            nash_ok = eq.verify_nash(net, params, cert.x_star)
        except NashViolation:
            nash_ok = False
            code = EXIT_NUMERICAL
        from dataclasses import replace

        cert = replace(cert, nash_ok=nash_ok)
        payload = cert.to_json_dict(params_echo=echo)
    else:
        raise ConfigError("model 'abelson' has a consensus family; nothing to solve")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out_path} residual={payload['residual']:.3e}")
    return code


def _cmd_experiment(args) -> int:
    datasets = {}
    for item in args.dataset or []:
        if "=" not in item:
            raise ConfigError(f"--dataset expects name=path, got {item!r}")
        name, _, path = item.partition("=")
        datasets[name] = path
    manifest = run_experiment(
        args.preset,
        args.out,
        seed=args.seed,
        n=args.n,
        er_p=args.er_p,
        datasets=datasets,
        t_end=args.t_end,
        dt=args.dt,
        x0_kind=args.x0,
        threads=args.threads,
    )
    print(f"wrote {manifest}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    cfg = _load(args)
    net = build_network(cfg)
    mask = group_mask(cfg, net.n)
    model, _ = build_model(cfg, net.n, mask)
    x0 = build_x0(cfg, model, net.n, mask)
    checks: list[tuple[str, bool, str]] = []

    traj = integrate(net, model, x0, cfg.integrator)
    if isinstance(model, NfjModel):
        report = monitor_bounds(traj, model.params)
        checks.append(("box_invariance", report.worst <= cfg.integrator.box_tol,
                       f"worst transgression {report.worst:.3e}"))
    if traj.energy is not None:
        e = traj.energy
        slack = 1e-9 * (1.0 + np.abs(e[:-1]))
        ok = bool(np.all(e[1:] <= e[:-1] + slack))
        checks.append(("energy_descent", ok, f"max rise {float(np.max(e[1:] - e[:-1])):.3e}"))

    if isinstance(model, NfjModel):
        params = model.params
        cert = eq.multistart_uniqueness(net, params, cfg=cfg.solver, seed=cfg.seed)
        checks.append(("residual", cert.residual < cfg.solver.tol, f"{cert.residual:.3e}"))
        xp = cert.x_star**params.p
        ok = bool(np.all(xp >= params.u.min() - 1e-9) and np.all(xp <= params.u.max() + 1e-9))
        checks.append(("steady_state_bounds", ok, "min u <= x*^p <= max u"))
        checks.append(("m_matrix", bool(cert.m_matrix_ok), f"min eig {cert.jac_min_eig:.3e}"))
        checks.append(("multistart_agreement",
                       cert.multistart_agreement <= 1e-6 * float(np.max(np.abs(cert.x_star))),
                       f"{cert.multistart_agreement:.3e}"))
        try:
            eq.verify_nash(net, params, cert.x_star)
            checks.append(("nash", True, "no profitable deviation"))
        except NashViolation as err:
            checks.append(("nash", False, str(err)))
    elif isinstance(model, TaylorModel):
        x_star = eq.taylor_equilibrium(net, model.params)
        residual = float(np.max(np.abs(vector_field_taylor(net, model.params, x_star))))
        checks.append(("residual", residual < 1e-10, f"{residual:.3e}"))
        jmin = eq.taylor_jacobian_check(net, model.params)
        checks.append(("jacobian_positive", jmin > 0, f"min eig {jmin:.3e}"))

    all_ok = True
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        all_ok &= ok
    return EXIT_OK if all_ok else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a graph and write its edge list")
    gsub = gen.add_subparsers(dest="generator", required=True)
    g_er = gsub.add_parser("er")
    g_er.add_argument("--n", type=int, required=True)
    g_er.add_argument("--p", type=float, required=True)
    g_sbm = gsub.add_parser("sbm")
    g_sbm.add_argument("--sizes", type=str, required=True, help="comma-separated block sizes")
    g_sbm.add_argument("--pin", type=float, required=True)
    g_sbm.add_argument("--pout", type=float, required=True)
    g_core = gsub.add_parser("core")
    g_core.add_argument("--n", type=int, required=True)
    g_core.add_argument("--p", type=float, required=True)
    g_complete = gsub.add_parser("complete")
    g_complete.add_argument("--n", type=int, required=True)
    for g in (g_er, g_sbm, g_core, g_complete):
        g.add_argument("--seed", type=int, default=0)
        g.add_argument("--out", type=str, required=True)

    for name, fn in (("simulate", _cmd_simulate), ("solve", _cmd_solve), ("verify", _cmd_verify)):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, required=True)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field (dotted path, JSON value)")
        p.set_defaults(fn=fn)

    exp = sub.add_parser("experiment", help="run a figure preset")
    exp.add_argument("preset", choices=["fig1", "fig2", "fig3"])
    exp.add_argument("--out", type=str, required=True)
    exp.add_argument("--seed", type=int, default=1)
    exp.add_argument("--n", type=int, default=None, help="scale node counts to this total")
    exp.add_argument("--er-p", type=float, default=None, dest="er_p")
    exp.add_argument("--t-end", type=float, default=100.0, dest="t_end")
    exp.add_argument("--dt", type=float, default=0.01)
    exp.add_argument("--x0", choices=["constant", "convictions"], default="constant")
    exp.add_argument("--threads", type=int, default=None,
                     help="panel parallelism (default: OPFLOW_THREADS or 1)")
    exp.add_argument("--dataset", action="append", metavar="NAME=PATH",
                     help="fig3 edge-list paths (jazz=..., collegemsg=...)")
    exp.set_defaults(fn=_cmd_experiment)

    gen.set_defaults(fn=_cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OpflowError as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
