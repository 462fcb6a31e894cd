"""Render experiment manifests into paper-style multi-panel figures.

Input is the manifest JSON written by the experiment runner plus its CSV
artifacts: an edge list per graph and one group-stats CSV per
(graph, model, kappa, delta) panel with schema ``t,group,mean,std``. The
figure has one row per graph: a spy plot of the coupling matrix followed by
one dynamics panel per (kappa, delta) combination, each showing the
mean +/- std band of both groups for both models. Rendering is read-only
over its inputs.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class RenderError(Exception):
    """Base class for rendering failures."""


class MissingCSV(RenderError):
    """A file referenced by the manifest does not exist."""

    def __init__(self, path):
        super().__init__(f"referenced file not found: {path}")
        self.path = path


class SchemaMismatch(RenderError):
    """Manifest or CSV does not match the expected schema."""


GROUP_STATS_HEADER = ["t", "group", "mean", "std"]
MODEL_STYLE = {"fj": "--", "nfj": "-"}
GROUP_COLOR = {1: "tab:blue", 2: "tab:orange"}


@dataclass(frozen=True)
class RenderInfo:
    """What was drawn: panel count and per-panel axis ranges."""

    out_path: str
    panel_count: int
    spy_panels: int
    dynamics_panels: int
    axis_ranges: tuple


def load_manifest(path) -> dict:
    """Read and validate a manifest; all referenced files must exist."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise MissingCSV(path) from None
    except json.JSONDecodeError as err:
        raise SchemaMismatch(f"manifest is not valid JSON: {err}") from None
    if not isinstance(manifest, dict):
        raise SchemaMismatch("manifest must be a JSON object")
    for key in ("preset", "graphs", "kappas", "deltas", "models"):
        if key not in manifest:
            raise SchemaMismatch(f"manifest missing key {key!r}")
    graphs = manifest["graphs"]
    if not isinstance(graphs, list) or not graphs:
        raise SchemaMismatch("manifest lists no graphs")
    panels_expected = len(manifest["kappas"]) * len(manifest["deltas"])
    base = os.path.dirname(os.path.abspath(path))
    for g in graphs:
        for key in ("name", "edge_list", "panels"):
            if key not in g:
                raise SchemaMismatch(f"graph entry missing key {key!r}")
        edge_path = os.path.join(base, g["edge_list"])
        if not os.path.exists(edge_path):
            raise MissingCSV(edge_path)
        if len(g["panels"]) != panels_expected:
            raise SchemaMismatch(
                f"graph {g['name']!r} has {len(g['panels'])} panels, expected {panels_expected}"
            )
        for panel in g["panels"]:
            models = panel.get("models", {})
            if set(models) != set(manifest["models"]):
                raise SchemaMismatch(f"panel models {sorted(models)} != {sorted(manifest['models'])}")
            for entry in models.values():
                csv_path = os.path.join(base, entry["group_stats"])
                if not os.path.exists(csv_path):
                    raise MissingCSV(csv_path)
    return manifest


def read_group_stats(path) -> dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Parse a ``t,group,mean,std`` CSV into per-group (t, mean, std) arrays."""
    rows: dict[int, list[tuple[float, float, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GROUP_STATS_HEADER:
            raise SchemaMismatch(f"{path}: header {header} != {GROUP_STATS_HEADER}")
        for line in reader:
            if len(line) != 4:
                raise SchemaMismatch(f"{path}: expected 4 fields, got {len(line)}")
            try:
                t, g, m, s = float(line[0]), int(line[1]), float(line[2]), float(line[3])
            except ValueError as err:
                raise SchemaMismatch(f"{path}: {err}") from None
            rows.setdefault(g, []).append((t, m, s))
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    out = {}
    for g, triples in rows.items():
        arr = np.array(triples)
        out[g] = (arr[:, 0], arr[:, 1], arr[:, 2])
    return out


def read_edge_coords(path) -> tuple[np.ndarray, np.ndarray, int]:
    """Nonzero coupling coordinates (both orientations) for the spy panel."""
    ii, jj = [], []
    n = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            s = raw.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            try:
                a, b = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) >= 3 else 1.0
            except (ValueError, IndexError) as err:
                raise SchemaMismatch(f"{path}:{lineno}: bad edge line ({err})") from None
            n = max(n, a + 1, b + 1)
            if w == 0.0:
                continue  # placement anchors carry no coupling
            ii.extend((a, b))
            jj.extend((b, a))
    return np.array(ii), np.array(jj), n


def _draw_spy(ax, edge_path, name: str) -> None:
    ii, jj, n = read_edge_coords(edge_path)
    if ii.size:
        ax.scatter(jj, ii, s=max(0.2, 40.0 / max(n, 1)), c="black", marker="s", linewidths=0)
    ax.set_xlim(-0.5, n - 0.5)
    ax.set_ylim(n - 0.5, -0.5)
    ax.set_aspect("equal")
    ax.set_title(f"{name} (n={n})", fontsize=9)
    ax.tick_params(labelsize=6)


def _draw_dynamics(ax, base: str, panel: dict, models: list[str], show_legend: bool) -> None:
    max_mean, min_mean = -np.inf, np.inf
    for kind in models:
        stats = read_group_stats(os.path.join(base, panel["models"][kind]["group_stats"]))
        for g, (t, mean, std) in sorted(stats.items()):
            color = GROUP_COLOR.get(g, f"C{g}")
            style = MODEL_STYLE.get(kind, "-")
            ax.plot(t, mean, style, color=color, lw=1.2, label=f"{kind} g{g}")
            ax.fill_between(t, mean - std, mean + std, color=color, alpha=0.18, lw=0)
            max_mean = max(max_mean, float(np.max(mean)))
            min_mean = min(min_mean, float(np.min(mean[mean > 0], initial=np.inf)))
    if np.isfinite(min_mean) and min_mean > 0 and max_mean > 10.0 * min_mean:
        ax.set_yscale("log")
    ax.set_title(f"$\\kappa$={panel['kappa']:g}, $\\delta$={panel['delta']:g}", fontsize=9)
    ax.tick_params(labelsize=6)
    if show_legend:
        ax.legend(fontsize=5, ncol=2, frameon=False)


def render_figure(manifest_path, out_path, fmt: str | None = None) -> RenderInfo:
    """Render the manifest's full panel grid into one image file.

    Rows are graphs; the leftmost column is the adjacency spy plot, the
    remaining columns one dynamics panel per (kappa, delta) combination with
    mean +/- std bands per group per model. Returns panel counts and the
    axis ranges actually drawn.
    """
    manifest = load_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    graphs = manifest["graphs"]
    models = list(manifest["models"])
    n_rows = len(graphs)
    panels_per_row = len(graphs[0]["panels"])
    n_cols = 1 + panels_per_row

    fig, axes = plt.subplots(n_rows, n_cols, figsize=(2.6 * n_cols, 2.4 * n_rows), squeeze=False)
    for r, g in enumerate(graphs):
        _draw_spy(axes[r][0], os.path.join(base, g["edge_list"]), g["name"])
        for c, panel in enumerate(g["panels"], start=1):
            _draw_dynamics(axes[r][c], base, panel, models, show_legend=(r == 0 and c == 1))
            if r == n_rows - 1:
                axes[r][c].set_xlabel("t", fontsize=8)
    fig.tight_layout()
    if fmt is None:
        fmt = os.path.splitext(str(out_path))[1].lstrip(".") or "png"
    fig.savefig(out_path, format=fmt, dpi=150)
    ranges = tuple(
        (tuple(np.round(ax.get_xlim(), 12)), tuple(np.round(ax.get_ylim(), 12)))
        for row in axes
        for ax in row
    )
    plt.close(fig)
    return RenderInfo(
        out_path=str(out_path),
        panel_count=n_rows * n_cols,
        spy_panels=n_rows,
        dynamics_panels=n_rows * panels_per_row,
        axis_ranges=ranges,
    )
