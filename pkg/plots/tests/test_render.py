"""Rendering the experiment manifests: panel grid, schema errors, stability."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from opflow_plots.render import (
    MissingCSV,
    SchemaMismatch,
    load_manifest,
    read_group_stats,
    render_figure,
)


@pytest.fixture(scope="module")
def fig1_manifest(tmp_path_factory):
    """Desk-scale fig1 preset produced through the primary CLI."""
    out = tmp_path_factory.mktemp("fig1")
    cmd = [
        sys.executable, "-m", "opflow.cli", "experiment", "fig1",
        "--out", str(out), "--n", "12", "--er-p", "0.5", "--seed", "1", "--t-end", "5.0",
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return out / "manifest.json"


def write_stats_csv(path, rows):
    lines = ["t,group,mean,std"] + [f"{t!r},{g},{m!r},{s!r}" for t, g, m, s in rows]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture()
def synthetic_manifest(tmp_path):
    """Minimal single-graph manifest with one (kappa, delta) panel."""
    (tmp_path / "g.edges").write_text("0 1\n1 2\n2 0\n")
    write_stats_csv(tmp_path / "fj.csv", [(0.0, 1, 1.0, 0.1), (0.0, 2, 1.0, 0.1),
                                          (1.0, 1, 2.0, 0.2), (1.0, 2, 1.5, 0.1)])
    write_stats_csv(tmp_path / "nfj.csv", [(0.0, 1, 1.0, 0.1), (0.0, 2, 1.0, 0.1),
                                           (1.0, 1, 3.0, 0.2), (1.0, 2, 1.6, 0.1)])
    manifest = {
        "preset": "custom",
        "kappas": [10.0],
        "deltas": [2.0],
        "models": ["fj", "nfj"],
        "graphs": [{
            "name": "triangle",
            "edge_list": "g.edges",
            "panels": [{"kappa": 10.0, "delta": 2.0,
                        "models": {"fj": {"group_stats": "fj.csv"},
                                   "nfj": {"group_stats": "nfj.csv"}}}],
        }],
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


class TestAcceptanceFig1Grid:
    def test_complete_panel_grid(self, fig1_manifest, tmp_path):
        out = tmp_path / "fig1.png"
        info = render_figure(fig1_manifest, out)
        assert out.exists() and out.stat().st_size > 0
        # One spy panel per graph plus four dynamics panels (each carrying
        # both models) per graph row.
        assert info.spy_panels == 2
        assert info.dynamics_panels == 2 * 4
        assert info.panel_count == 2 * 5

    def test_rerun_stable_panels_and_ranges(self, fig1_manifest, tmp_path):
        a = render_figure(fig1_manifest, tmp_path / "a.png")
        b = render_figure(fig1_manifest, tmp_path / "b.png")
        assert a.panel_count == b.panel_count
        assert a.axis_ranges == b.axis_ranges

    def test_svg_format(self, fig1_manifest, tmp_path):
        out = tmp_path / "fig1.svg"
        render_figure(fig1_manifest, out, fmt="svg")
        assert out.read_bytes().lstrip().startswith(b"<?xml")


class TestSyntheticManifest:
    def test_renders_single_panel_row(self, synthetic_manifest, tmp_path):
        info = render_figure(synthetic_manifest, tmp_path / "s.png")
        assert info.panel_count == 2  # spy + one dynamics panel

    def test_log_scale_when_ratio_large(self, synthetic_manifest, tmp_path):
        # Rewrite one CSV with a 100x mean ratio; the opinion axis goes log.
        base = synthetic_manifest.parent
        write_stats_csv(base / "nfj.csv", [(0.0, 1, 1.0, 0.1), (0.0, 2, 1.0, 0.1),
                                           (1.0, 1, 100.0, 1.0), (1.0, 2, 1.5, 0.1)])
        info = render_figure(synthetic_manifest, tmp_path / "log.png")
        (_, ylim) = info.axis_ranges[1]
        assert ylim[0] > 0  # log axis cannot include zero


class TestSchemaErrors:
    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("{}")
        with pytest.raises(SchemaMismatch):
            load_manifest(path)

    def test_missing_csv(self, synthetic_manifest):
        (synthetic_manifest.parent / "nfj.csv").unlink()
        with pytest.raises(MissingCSV):
            load_manifest(synthetic_manifest)

    def test_wrong_panel_count(self, synthetic_manifest):
        data = json.loads(synthetic_manifest.read_text())
        data["kappas"] = [10.0, 100.0]  # now expects 2 panels, has 1
        synthetic_manifest.write_text(json.dumps(data))
        with pytest.raises(SchemaMismatch):
            load_manifest(synthetic_manifest)

    def test_bad_csv_header(self, synthetic_manifest):
        (synthetic_manifest.parent / "nfj.csv").write_text("time,grp,avg,sd\n0,1,1,0\n")
        with pytest.raises(SchemaMismatch):
            read_group_stats(synthetic_manifest.parent / "nfj.csv")

    def test_cli_exit_codes(self, synthetic_manifest, tmp_path):
        from opflow_plots.cli import main

        assert main(["--manifest", str(synthetic_manifest), "--out", str(tmp_path / "x.png")]) == 0
        bad = tmp_path / "nope.json"
        assert main(["--manifest", str(bad), "--out", str(tmp_path / "y.png")]) == 2
