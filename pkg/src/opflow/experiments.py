"""Figure experiment presets: parameter sweeps over graphs and models.

Each preset runs the linear comparison model (``fj``) and the nonlinear model
(``nfj``, p = 1) on two graphs, sweeping the two-group conviction/stubbornness
assignment over (kappa, delta) in {10, 100} x {1/2, 2}: the first group gets
(kappa, delta), the remainder (1, 1). Panels are integrated over t in
[0, 100] and reduced to per-group mean/std trajectories. All artifacts are
computed first and written only when every panel succeeded; the manifest is
written last.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, config_to_dict, parse_config
from .dynamics import IntegratorConfig, Trajectory, integrate, suggest_dt
from .errors import ConfigError
from .graph import Network, degree_data, save_edge_list
from .models import ModifiedFjModel, NfjModel, NfjParams
from .config import build_network, group_mask

KAPPAS = (10.0, 100.0)
DELTAS = (0.5, 2.0)
MODELS = ("fj", "nfj")
PRESETS = ("fig1", "fig2", "fig3")
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class GroupStats:
    """Per-group mean and standard deviation over the recorded samples."""

    group: int
    times: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def compute_group_stats(traj: Trajectory, mask: np.ndarray) -> list[GroupStats]:
    stats = []
    for gid, members in ((1, mask), (2, ~mask)):
        if not members.any():
            continue
        block = traj.states[:, members]
        stats.append(
            GroupStats(group=gid, times=traj.times, mean=block.mean(axis=1), std=block.std(axis=1))
        )
    return stats


def write_group_stats_csv(stats: list[GroupStats], path) -> None:
    """CSV schema ``t,group,mean,std``, time-major with groups interleaved."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,group,mean,std\n")
        n_samples = stats[0].times.size
        for k in range(n_samples):
            for g in stats:
                fh.write(
                    f"{float(g.times[k])!r},{g.group},{float(g.mean[k])!r},{float(g.std[k])!r}\n"
                )


def read_group_stats_csv(path) -> list[GroupStats]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = []
    for gid in sorted(set(int(g) for g in data[:, 1])):
        rows = data[data[:, 1] == gid]
        out.append(GroupStats(group=gid, times=rows[:, 0], mean=rows[:, 2], std=rows[:, 3]))
    return out


def _fmt_value(v: float) -> str:
    return f"{v:g}"


@dataclass
class _PanelJob:
    graph_name: str
    model_kind: str
    kappa: float
    delta: float
    config: ExperimentConfig


@dataclass
class _PanelResult:
    job: _PanelJob
    stats: list[GroupStats]
    converged: bool

    @property
    def csv_name(self) -> str:
        j = self.job
        return f"{j.graph_name}_{j.model_kind}_k{_fmt_value(j.kappa)}_d{_fmt_value(j.delta)}.csv"


def _preset_graph_specs(preset: str, n: int | None, er_p: float | None, datasets: dict) -> list[tuple[str, dict]]:
    if preset == "fig1":
        total = n or 150
        split = max(1, total // 3)
        er = {"kind": "er", "n": total, "p": er_p if er_p is not None else 0.08}
        sbm = {"kind": "sbm", "sizes": [split, total - split], "p_in": 0.2, "p_out": 0.02}
        return [("er", er), ("sbm", sbm)]
    if preset == "fig2":
        total = n or 150
        core = {"kind": "core", "n": total, "p": er_p if er_p is not None else 0.01}
        comp = {"kind": "complete", "n": total}
        return [("core", core), ("complete", comp)]
    missing = [k for k in ("jazz", "collegemsg") if k not in datasets]
    if missing:
        raise ConfigError(f"fig3 needs --dataset paths for: {', '.join(missing)}")
    return [
        (name, {"kind": "edge_list", "path": datasets[name], "indexing": "zero", "symmetrize": True})
        for name in ("jazz", "collegemsg")
    ]


def _panel_config(
    preset: str,
    graph_spec: dict,
    model_kind: str,
    kappa: float,
    delta: float,
    split: int,
    assign: str,
    seed: int,
    t_end: float,
    dt: float,
    x0_kind: str,
) -> ExperimentConfig:
    model = {"kind": "modified_fj"} if model_kind == "fj" else {"kind": "nfj", "p": 1.0}
    data = {
        "schema": 1,
        "graph": graph_spec,
        "model": model,
        "u": {"kind": "two_group", "value": kappa, "other": 1.0},
        "sigma": {"kind": "two_group", "value": delta, "other": 1.0},
        "x0": {"kind": x0_kind} if x0_kind == "convictions" else {"kind": "constant", "value": 1.0},
        "mode": "ode",
        "integrator": {
            "dt": dt,
            "t_end": t_end,
            "method": "rk4_adaptive",
            # The figure window is fixed; never stop early.
            "stop_tol": 1e-300,
            "record_stride": 10,
            "box_tol": 1e-9,
        },
        "groups": {"split": split, "assign": assign},
        "seed": seed,
        # Panel artifacts live next to the manifest; keep the embedded config
        # location-independent so reruns in other directories are byte-equal.
        "output_dir": ".",
    }
    return parse_config(data)


def _run_panel(job: _PanelJob, net: Network, mask: np.ndarray) -> _PanelResult:
    cfg = job.config
    u = np.where(mask, job.kappa, 1.0)
    sigma = np.where(mask, job.delta, 1.0)
    if job.model_kind == "fj":
        model = ModifiedFjModel(u=u, sigma=sigma)
    else:
        model = NfjModel(NfjParams(u=u, sigma=sigma, p=1.0))
    if cfg.x0["kind"] == "convictions":
        x0 = u.copy()
    else:
        x0 = np.full(net.n, float(cfg.x0["value"]))
    # Cap dt by the stiffness bound: kappa = 100 on a dense graph puts the
    # nominal 0.01 outside the RK4 stability region, where the box guard
    # would bound but not damp the stiff modes.
    integ = cfg.integrator
    dt = min(integ.dt, suggest_dt(net, model, x0))
    if dt < integ.dt:
        integ = IntegratorConfig(dt=dt, t_end=integ.t_end, method=integ.method,
                                 stop_tol=integ.stop_tol, record_stride=integ.record_stride,
                                 box_tol=integ.box_tol)
    traj = integrate(net, model, x0, integ)
    return _PanelResult(job=job, stats=compute_group_stats(traj, mask), converged=traj.converged)


def run_experiment(
    preset: str,
    out_dir: str,
    seed: int = 1,
    n: int | None = None,
    er_p: float | None = None,
    datasets: dict | None = None,
    t_end: float = 100.0,
    dt: float = 0.01,
    x0_kind: str = "constant",
    threads: int | None = None,
) -> str:
    """Run a figure preset and return the manifest path.

    Emits one edge-list file per graph, one group-stats CSV per
    (graph, model, kappa, delta) panel, and a manifest describing the grid.
    """
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {PRESETS}")
    datasets = datasets or {}
    graph_specs = _preset_graph_specs(preset, n, er_p, datasets)
    assign = "random" if preset == "fig3" else "block"

    if threads is None:
        threads = int(os.environ.get("OPFLOW_THREADS", "1") or 1)
    threads = max(1, threads)

    # Build graphs once per preset; panels reuse them.
    jobs: list[tuple[_PanelJob, Network, np.ndarray]] = []
    graph_entries = []
    for name, spec in graph_specs:
        probe = _panel_config(preset, spec, "fj", KAPPAS[0], DELTAS[0], 1, assign, seed, t_end, dt, x0_kind)
        net = build_network(probe)
        split = net.n // 3 if preset in ("fig1", "fig2") else net.n // 2
        if preset == "fig1" and spec["kind"] == "sbm":
            split = spec["sizes"][0]  # group 1 is the first block
        cfg_mask = parse_config({**probe.raw, "groups": {"split": split, "assign": assign}})
        mask = group_mask(cfg_mask, net.n)
        panels = []
        for kappa in KAPPAS:
            for delta in DELTAS:
                for model_kind in MODELS:
                    cfg = _panel_config(preset, spec, model_kind, kappa, delta, split, assign,
                                        seed, t_end, dt, x0_kind)
                    jobs.append((_PanelJob(name, model_kind, kappa, delta, cfg), net, mask))
        graph_entries.append((name, spec, net, mask, split))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda args: _run_panel(*args), jobs))
    else:
        results = [_run_panel(*args) for args in jobs]

    # All panels succeeded: write artifacts, manifest last.
    os.makedirs(out_dir, exist_ok=True)
    by_key = {(r.job.graph_name, r.job.model_kind, r.job.kappa, r.job.delta): r for r in results}
    manifest: dict = {
        "schema": 1,
        "preset": preset,
        "seed": seed,
        "t_end": t_end,
        "assign": assign,
        "kappas": list(KAPPAS),
        "deltas": list(DELTAS),
        "models": list(MODELS),
        "graphs": [],
    }
    for name, spec, net, mask, split in graph_entries:
        edge_name = f"{name}.edges"
        save_edge_list(net, os.path.join(out_dir, edge_name))
        panels = []
        for kappa in KAPPAS:
            for delta in DELTAS:
                entry = {"kappa": kappa, "delta": delta, "models": {}}
                for model_kind in MODELS:
                    r = by_key[(name, model_kind, kappa, delta)]
                    write_group_stats_csv(r.stats, os.path.join(out_dir, r.csv_name))
                    entry["models"][model_kind] = {
                        "group_stats": r.csv_name,
                        "config": config_to_dict(r.job.config),
                    }
                panels.append(entry)
        manifest["graphs"].append({
            "name": name,
            "n": net.n,
            "edges": net.edge_count(),
            "fiedler": degree_data(net).fiedler,
            "split": split,
            "edge_list": edge_name,
            "panels": panels,
        })
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest_path, "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
