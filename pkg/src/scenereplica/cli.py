"""Command-line entry points for the scene replica pipeline.

Bundle path arguments resolve against the S2S_DATA_ROOT environment
variable when they do not exist as given, so scripted runs can pass
bare bundle names.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional

import click

from . import pipeline as pl
from .bundle import ingest as ingest_bundle
from .errors import SceneReplicaError
from .geometry import Aabb
from .layout import optimize_layout
from .pipeline import PipelineConfig
from .pose import align_pose
from .scene import PlacedObject, SceneLayout
from .scenegraph import SceneGraph, build_scene_graph
from .categories import default_category_map

DATA_ROOT_ENV = "S2S_DATA_ROOT"


def _resolve_bundle_path(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    root = os.environ.get(DATA_ROOT_ENV)
    if root:
        candidate = Path(root) / path
        if candidate.exists():
            return candidate
    raise click.ClickException(f"bundle path {path!r} not found (looked in . and ${DATA_ROOT_ENV})")


def _load_config(config_path: Optional[str], seed: Optional[int]) -> PipelineConfig:
    cfg = PipelineConfig.load(config_path) if config_path else PipelineConfig()
    if seed is not None:
        cfg.seed = seed
    return cfg


def _write_json(path: str, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


@click.group()
def main():
    """Real-to-sim scene replica tools."""


@main.command("ingest")
@click.argument("bundle_path")
def ingest_cmd(bundle_path: str):
    """Validate a scene bundle and print a summary."""
    try:
        bundle = ingest_bundle(_resolve_bundle_path(bundle_path))
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"scene {bundle.scene_id}: {len(bundle.objects)} objects")
    for obj in sorted(bundle.objects, key=lambda o: o.object_id):
        click.echo(f"  {obj.object_id} ({obj.category}): {len(obj.candidates)} candidates")


@main.command("match")
@click.argument("bundle_path")
@click.option("--out", required=True, help="Output rankings JSON file.")
@click.option("--config", "config_path", default=None, help="Pipeline config JSON.")
@click.option("--seed", type=int, default=None)
def match_cmd(bundle_path: str, out: str, config_path: Optional[str], seed: Optional[int]):
    """Rank each object's candidates by fused embedding score."""
    cfg = _load_config(config_path, seed)
    try:
        bundle = ingest_bundle(_resolve_bundle_path(bundle_path))
        rankings = pl.rank_bundle(bundle, cfg)
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))
    _write_json(out, {"v": 1, "scene_id": bundle.scene_id, "rankings": rankings})
    click.echo(f"ranked {len(rankings)} objects -> {out}")


@main.command("align")
@click.argument("bundle_path")
@click.option("--rankings", "rankings_path", required=True, help="Rankings JSON from `match`.")
@click.option("--out", required=True, help="Output layout JSON file.")
def align_cmd(bundle_path: str, rankings_path: str, out: str):
    """Align the top-ranked candidate of each object onto its scan."""
    try:
        bundle = ingest_bundle(_resolve_bundle_path(bundle_path))
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))
    rankings = _read_json(rankings_path).get("rankings", {})
    cmap = default_category_map()
    placed = []
    for obj in sorted(bundle.objects, key=lambda o: o.object_id):
        ranking = rankings.get(obj.object_id)
        if not ranking:
            raise click.ClickException(f"no ranking for object {obj.object_id!r}")
        candidate = obj.candidate_by_id(ranking[0])
        try:
            result = align_pose(obj.scan_cloud, candidate.cloud)
        except SceneReplicaError as exc:
            raise click.ClickException(f"{obj.object_id}: {exc}")
        placed_points = result.transform.apply(candidate.cloud.points)
        placed.append(
            PlacedObject(
                object_id=obj.object_id,
                box=Aabb.from_points(placed_points),
                category=cmap.merge(obj.category),
                asset_id=candidate.asset_id,
                transform=result.transform,
            )
        )
    layout = SceneLayout(scene_id=bundle.scene_id, objects=placed, floor=bundle.floor)
    payload = layout.to_dict()
    payload["v"] = 1
    _write_json(out, payload)
    click.echo(f"aligned {len(placed)} objects -> {out}")


@main.command("scenegraph")
@click.option("--layout", "layout_path", required=True, help="Layout JSON from `align`.")
@click.option("--out", required=True, help="Output graph JSON file.")
def scenegraph_cmd(layout_path: str, out: str):
    """Build the support/containment/embedding graph for a layout."""
    layout = SceneLayout.from_dict(_read_json(layout_path))
    try:
        graph = build_scene_graph(layout)
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))
    payload = graph.to_dict()
    payload["v"] = 1
    _write_json(out, payload)
    click.echo(f"{len(graph.relations)} relations -> {out}")


@main.command("optimize")
@click.option("--layout", "layout_path", required=True)
@click.option("--graph", "graph_path", required=True)
@click.option("--out", required=True, help="Output optimized layout JSON.")
@click.option("--trace", "trace_path", default=None, help="Optional move-trace CSV.")
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def optimize_cmd(
    layout_path: str,
    graph_path: str,
    out: str,
    trace_path: Optional[str],
    config_path: Optional[str],
    seed: Optional[int],
):
    """Walk objects along the floor until the collision loss reaches zero."""
    cfg = _load_config(config_path, seed)
    layout = SceneLayout.from_dict(_read_json(layout_path))
    graph = SceneGraph.from_dict(_read_json(graph_path))
    if layout.floor is None:
        raise click.ClickException("layout has no floor polygon to bound the optimizer")
    try:
        result = optimize_layout(layout, graph, cfg.optimizer.build(layout.floor, cfg.seed))
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))
    payload = result.scene.to_dict()
    payload["v"] = 1
    payload["loss_trace"] = result.trace
    _write_json(out, payload)
    if trace_path:
        Path(trace_path).write_text(result.trace_csv())
    click.echo(f"loss {result.trace[0]:.6g} -> {result.final_loss:.6g} in {len(result.trace) - 1} steps")


@main.command("export")
@click.argument("bundle_path")
@click.option("--out", required=True, help="Output directory for the scene export.")
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def export_cmd(bundle_path: str, out: str, config_path: Optional[str], seed: Optional[int]):
    """Run the full pipeline on a bundle and export all artifacts."""
    cfg = _load_config(config_path, seed)
    try:
        bundle = ingest_bundle(_resolve_bundle_path(bundle_path))
        result = pl.run_pipeline(bundle, cfg)
        out_dir = pl.export_scene(result, out)
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"exported scene {bundle.scene_id} -> {out_dir}")


@main.command("augment")
@click.argument("bundle_path")
@click.option("--rankings", "rankings_path", required=True)
@click.option("-k", "top_k", type=int, default=5, show_default=True, help="Alternative pool depth.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, help="Output augmented layout JSON.")
def augment_cmd(bundle_path: str, rankings_path: str, top_k: int, seed: int, out: str):
    """Swap each object to one of its top-k alternates and re-align."""
    try:
        bundle = ingest_bundle(_resolve_bundle_path(bundle_path))
        rankings = _read_json(rankings_path).get("rankings", {})
        layout = pl.augment_scene(bundle, rankings, k=top_k, seed=seed)
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))
    payload = layout.to_dict()
    payload["v"] = 1
    _write_json(out, payload)
    click.echo(f"augmented {len(layout.objects)} objects -> {out}")


@main.command("microscene")
@click.option("--layout", "layout_path", required=True)
@click.option("--graph", "graph_path", required=True)
@click.option("--out", required=True, help="Output micro-scene JSON.")
def microscene_cmd(layout_path: str, graph_path: str, out: str):
    """Extract large-furniture micro-scenes from an optimized layout."""
    layout = SceneLayout.from_dict(_read_json(layout_path))
    graph = SceneGraph.from_dict(_read_json(graph_path))
    try:
        micros = pl.extract_microscenes(layout, graph)
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))
    _write_json(out, {"v": 1, "microscenes": [m.to_dict() for m in micros]})
    click.echo(f"{len(micros)} micro-scenes -> {out}")


@main.command("eval")
@click.option("--pred", "pred_root", required=True, help="Directory of exported scenes.")
@click.option("--gt", "gt_root", required=True, help="Directory of ground-truth bundles.")
@click.option("--out-json", "out_json", default=None)
@click.option("--out-csv", "out_csv", default=None)
def eval_cmd(pred_root: str, gt_root: str, out_json: Optional[str], out_csv: Optional[str]):
    """Score predicted scenes against their source bundles."""
    try:
        report = pl.evaluate(pred_root, gt_root)
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))
    if out_json:
        Path(out_json).write_text(report.to_json())
    if out_csv:
        Path(out_csv).write_text(report.to_csv())
    if not out_json and not out_csv:
        click.echo(report.to_json(), nl=False)
    else:
        click.echo(f"metrics written ({len(report.per_object)} object rows)")


@main.command("serve")
@click.argument("root")
@click.option("--port", type=int, default=8400, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve_cmd(root: str, port: int, host: str):
    """Serve the annotation API over the bundles under ROOT."""
    from .service import serve

    try:
        serve(_resolve_bundle_path(root), port=port, host=host)
    except SceneReplicaError as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    main(prog_name="scenereplica")
