from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from helpers import write_oracle_bundle
from scenereplica.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def bundle_dir(tmp_path):
    path = tmp_path / "demo"
    write_oracle_bundle(path, seed=0, n_points=80)
    return path


def _ok(result):
    assert result.exit_code == 0, result.output
    return result


def test_ingest_prints_summary(runner, bundle_dir):
    result = _ok(runner.invoke(main, ["ingest", str(bundle_dir)]))
    assert "scene demo: 2 objects" in result.output
    assert "demo_o0 (chair): 3 candidates" in result.output


def test_ingest_reports_corruption(runner, bundle_dir):
    (bundle_dir / "scene.json").write_text("{broken")
    result = runner.invoke(main, ["ingest", str(bundle_dir)])
    assert result.exit_code != 0
    assert "E_SCHEMA" in result.output


def test_staged_flow(runner, bundle_dir, tmp_path):
    rankings = tmp_path / "rankings.json"
    layout = tmp_path / "layout.json"
    graph = tmp_path / "graph.json"
    opt = tmp_path / "opt.json"
    trace = tmp_path / "trace.csv"

    _ok(runner.invoke(main, ["match", str(bundle_dir), "--out", str(rankings)]))
    data = json.loads(rankings.read_text())
    assert data["scene_id"] == "demo"
    assert data["rankings"]["demo_o0"][0] == "demo_o0_asset"

    _ok(runner.invoke(main, [
        "align", str(bundle_dir), "--rankings", str(rankings), "--out", str(layout),
    ]))
    layout_data = json.loads(layout.read_text())
    assert [o["id"] for o in layout_data["objects"]] == ["demo_o0", "demo_o1"]
    assert all(o["asset_id"].endswith("_asset") for o in layout_data["objects"])

    _ok(runner.invoke(main, ["scenegraph", "--layout", str(layout), "--out", str(graph)]))
    graph_data = json.loads(graph.read_text())
    kinds = {(r["kind"], r["parent_id"]) for r in graph_data["relations"]}
    assert kinds == {("support", "floor")}

    result = _ok(runner.invoke(main, [
        "optimize", "--layout", str(layout), "--graph", str(graph),
        "--out", str(opt), "--trace", str(trace),
    ]))
    assert "in 0 steps" in result.output
    opt_data = json.loads(opt.read_text())
    assert opt_data["loss_trace"] == [0.0]
    assert [o["box"] for o in opt_data["objects"]] == [o["box"] for o in layout_data["objects"]]
    assert trace.read_text().startswith("step,object_id,dx,dy,accepted,loss")

    micro = tmp_path / "micro.json"
    _ok(runner.invoke(main, ["microscene", "--layout", str(opt), "--graph", str(graph), "--out", str(micro)]))
    assert json.loads(micro.read_text())["microscenes"] == []


def test_align_requires_complete_rankings(runner, bundle_dir, tmp_path):
    rankings = tmp_path / "rankings.json"
    rankings.write_text(json.dumps({"v": 1, "rankings": {"demo_o0": ["demo_o0_asset"]}}))
    result = runner.invoke(main, [
        "align", str(bundle_dir), "--rankings", str(rankings), "--out", str(tmp_path / "x.json"),
    ])
    assert result.exit_code != 0
    assert "no ranking" in result.output


def test_export_and_eval(runner, tmp_path):
    gt_root = tmp_path / "gt"
    pred_root = tmp_path / "pred"
    for i in range(2):
        sid = f"scene{i}"
        write_oracle_bundle(gt_root / sid, scene_id=sid, seed=i, n_points=80)
        result = _ok(runner.invoke(main, [
            "export", str(gt_root / sid), "--out", str(pred_root / sid),
        ]))
        assert f"exported scene {sid}" in result.output
        names = sorted(p.name for p in (pred_root / sid).iterdir())
        assert names == ["metrics.csv", "metrics.json", "nodes.json", "scene.json", "trace.csv"]

    out_json = tmp_path / "metrics.json"
    out_csv = tmp_path / "metrics.csv"
    _ok(runner.invoke(main, [
        "eval", "--pred", str(pred_root), "--gt", str(gt_root),
        "--out-json", str(out_json), "--out-csv", str(out_csv),
    ]))
    report = json.loads(out_json.read_text())
    assert report["per_scene"]["top1"] == 1.0
    assert out_csv.read_text().startswith("object_id,cd,ecd,iou,color_hist_kl,size_err_m3")

    stdout_result = _ok(runner.invoke(main, ["eval", "--pred", str(pred_root), "--gt", str(gt_root)]))
    assert json.loads(stdout_result.output)["per_scene"]["top1"] == 1.0


def test_eval_rejects_missing_roots(runner, tmp_path):
    result = runner.invoke(main, ["eval", "--pred", str(tmp_path / "none"), "--gt", str(tmp_path)])
    assert result.exit_code != 0


def test_optimize_needs_a_floor(runner, tmp_path):
    layout = tmp_path / "layout.json"
    graph = tmp_path / "graph.json"
    layout.write_text(json.dumps({"scene_id": "s", "objects": []}))
    graph.write_text(json.dumps({"nodes": [], "relations": []}))
    result = runner.invoke(main, [
        "optimize", "--layout", str(layout), "--graph", str(graph), "--out", str(tmp_path / "o.json"),
    ])
    assert result.exit_code != 0
    assert "floor" in result.output


def test_augment_command(runner, bundle_dir, tmp_path):
    rankings = tmp_path / "rankings.json"
    _ok(runner.invoke(main, ["match", str(bundle_dir), "--out", str(rankings)]))
    out = tmp_path / "aug.json"
    _ok(runner.invoke(main, [
        "augment", str(bundle_dir), "--rankings", str(rankings),
        "-k", "1", "--seed", "0", "--out", str(out),
    ]))
    data = json.loads(out.read_text())
    ranks = json.loads(rankings.read_text())["rankings"]
    for obj in data["objects"]:
        assert obj["asset_id"] == ranks[obj["id"]][1]


def test_data_root_resolution(runner, bundle_dir):
    parent = bundle_dir.parent
    result = runner.invoke(main, ["ingest", "demo"], env={"S2S_DATA_ROOT": str(parent)})
    assert result.exit_code == 0, result.output

    result = runner.invoke(main, ["ingest", "demo"], env={"S2S_DATA_ROOT": None})
    assert result.exit_code != 0
    assert "not found" in result.output


def test_config_file_is_honoured(runner, bundle_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3, "optimizer": {"max_steps": 5}}))
    out = tmp_path / "exp"
    _ok(runner.invoke(main, [
        "export", str(bundle_dir), "--out", str(out), "--config", str(cfg),
    ]))
    assert (out / "scene.json").is_file()

    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps({"thresholds": {"metric_point_budget": 0}}))
    result = runner.invoke(main, [
        "export", str(bundle_dir), "--out", str(tmp_path / "exp2"), "--config", str(bad_cfg),
    ])
    assert result.exit_code != 0
