"""Acceptance gate: every release-blocking invariant in one file.

Each test prints a single [PASS]/[FAIL] line on the terminal so a full
run reads as a checklist. Oracles here are deliberately naive (full
distance matrices, pure-Python loops, interval arithmetic) and share no
code with the package internals they check.
"""

from __future__ import annotations

import filecmp
import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from helpers import layout_of, make_box, oracle_bundle, square_floor, write_oracle_bundle
from scenereplica.bundle import ingest
from scenereplica.errors import PreconditionError
from scenereplica.geometry import Aabb, PointCloud, PoseTransform
from scenereplica.layout import OptimizerConfig, collision_loss, optimize_layout
from scenereplica.matching import (
    Candidate,
    CandidateSet,
    ScoreVector,
    auxiliary_loss,
    matching_loss,
    rank_candidates,
)
from scenereplica.metrics import (
    bbox_iou,
    category_kl,
    chamfer_distance,
    color_histogram_kl,
    enhanced_chamfer_distance,
    topk_accuracy,
)
from scenereplica.pipeline import evaluate, export_scene, run_pipeline
from scenereplica.pose import YAW_GRID, align_pose
from scenereplica.scene import PlacedObject
from scenereplica.scenegraph import build_scene_graph, validate_graph
from scenereplica.service import qc_report, qc_sample


@contextmanager
def criterion(capsys, label):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"[FAIL] {label}")
        raise
    with capsys.disabled():
        print(f"[PASS] {label} ({time.monotonic() - start:.1f}s)")


def _close(got, want, rel=1e-9):
    assert abs(got - want) <= rel * max(1.0, abs(want)), f"{got} vs {want}"


# --- naive re-implementations used as oracles ----------------------------

def _cd_oracle(pa, pb):
    dist = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(-1))
    return 0.5 * (dist.min(axis=1).mean() + dist.min(axis=0).mean())


def _curvature_oracle(points, k):
    dist = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    curv = np.empty(len(points))
    for i in range(len(points)):
        nb = points[np.argsort(dist[i], kind="stable")[: k + 1]]
        centered = nb - nb.mean(axis=0)
        lam = np.linalg.eigvalsh(centered.T @ centered / len(nb))
        total = lam.sum()
        curv[i] = 0.0 if total <= 0 else min(max(lam[0] / total, 0.0), 1.0 / 3.0)
    return curv


def _weights_oracle(points, k):
    n = len(points)
    if n < 4 or min(k, n - 1) < 3:
        return np.ones(n)
    curv = _curvature_oracle(points, min(k, n - 1))
    cmax = curv.max()
    if cmax < 1e-9:
        return np.ones(n)
    return 1.0 + curv / cmax


def _ecd_oracle(pa, pb, k=16):
    dist = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(-1))
    d_ab = dist.min(axis=1) * _weights_oracle(pa, k)
    d_ba = dist.min(axis=0) * _weights_oracle(pb, k)
    return 0.5 * (d_ab.mean() + d_ba.mean())


def _iou_oracle(a, b):
    inter = va = vb = 1.0
    for ax in range(3):
        inter *= max(0.0, min(float(a.max[ax]), float(b.max[ax])) - max(float(a.min[ax]), float(b.min[ax])))
        va *= float(a.max[ax]) - float(a.min[ax])
        vb *= float(b.max[ax]) - float(b.min[ax])
    return inter / (va + vb - inter)


def _hist_oracle(colors, bins=8):
    counts = [0.0] * (bins ** 3)
    for r, g, b in colors:
        i = min(int(r * bins), bins - 1)
        j = min(int(g * bins), bins - 1)
        l = min(int(b * bins), bins - 1)
        counts[(i * bins + j) * bins + l] += 1.0
    return counts


def _kl_oracle(counts_p, counts_q):
    p = [c + 1.0 for c in counts_p]
    q = [c + 1.0 for c in counts_q]
    sp, sq = sum(p), sum(q)
    total = 0.0
    for cp, cq in zip(p, q):
        if cp > 0:
            total += (cp / sp) * math.log((cp / sp) / (cq / sq))
    return total


# --- criteria ------------------------------------------------------------

def test_metric_brute_force_equivalence(capsys):
    with criterion(capsys, "metric oracles: CD/ECD/IoU/collision/KL/top-k, 100 instances, 1e-9 rel"):
        start = time.monotonic()
        for i in range(100):
            rng = np.random.default_rng(1000 + i)

            na, nb = rng.integers(40, 201, 2)
            pa = rng.uniform(-1, 1, (na, 3))
            pb = rng.uniform(-0.8, 1.2, (nb, 3))
            ca = rng.uniform(0, 1, (na, 3))
            cb = rng.uniform(0, 1, (nb, 3))
            cloud_a = PointCloud(points=pa, colors=ca)
            cloud_b = PointCloud(points=pb, colors=cb)

            _close(chamfer_distance(cloud_a, cloud_b), _cd_oracle(pa, pb))
            _close(enhanced_chamfer_distance(cloud_a, cloud_b), _ecd_oracle(pa, pb))
            _close(color_histogram_kl(cloud_a, cloud_b), _kl_oracle(_hist_oracle(ca), _hist_oracle(cb)))

            lo_a = rng.uniform(-1, 1, 3)
            lo_b = lo_a + rng.uniform(-0.5, 0.5, 3)
            box_a = Aabb(lo_a, lo_a + rng.uniform(0.2, 1.5, 3))
            box_b = Aabb(lo_b, lo_b + rng.uniform(0.2, 1.5, 3))
            _close(bbox_iou(box_a, box_b), _iou_oracle(box_a, box_b))

            n_boxes = int(rng.integers(2, 31))
            objs = []
            for j in range(n_boxes):
                lo = rng.uniform(-2, 2, 3)
                objs.append(PlacedObject(f"o{j:02d}", Aabb(lo, lo + rng.uniform(0.1, 1.2, 3))))
            want = sum(
                _iou_oracle(x.box, y.box) if _iou_oracle(x.box, y.box) > 0 else 0.0
                for x, y in itertools.combinations(objs, 2)
            )
            _close(collision_loss(layout_of(objs)), want)

            cats = [f"c{j}" for j in range(int(rng.integers(2, 6)))]
            gen = {c: float(rng.integers(0, 9)) for c in cats}
            ref = {c: float(rng.integers(0, 9)) for c in cats}
            order = sorted(cats)
            _close(
                category_kl(gen, ref),
                _kl_oracle([gen[c] for c in order], [ref[c] for c in order]),
            )

            m = int(rng.integers(3, 11))
            ids = [f"a{j}" for j in range(8)]
            rankings = [list(rng.permutation(ids)) for _ in range(m)]
            truths = [r[int(rng.integers(8))] for r in rankings]
            k = int(rng.integers(1, 6))
            hits = sum(1 for r, t in zip(rankings, truths) if t in r[:k])
            _close(topk_accuracy(rankings, truths, k=k), hits / m)
        assert time.monotonic() - start < 60.0


def test_closed_form_spot_checks(capsys):
    with criterion(capsys, "closed forms: cube IoU 1/3, two-bin KL ln 2, point CD 1.0, sigmoid(0) loss ln 2"):
        cube = Aabb([0, 0, 0], [1, 1, 1])
        shifted = Aabb([0.5, 0, 0], [1.5, 1, 1])
        assert abs(bbox_iou(cube, shifted) - 1.0 / 3.0) < 1e-12

        kl = category_kl({"a": 1.0, "b": 0.0}, {"a": 1.0, "b": 1.0}, smoothing=False)
        assert abs(kl - math.log(2.0)) < 1e-12

        cd = chamfer_distance(
            PointCloud(points=np.array([[0.0, 0.0, 0.0]])),
            PointCloud(points=np.array([[1.0, 0.0, 0.0]])),
        )
        assert abs(cd - 1.0) < 1e-12

        loss, _ = matching_loss(ScoreVector(q_image=np.zeros(3)), truth_index=0)
        assert abs(loss - math.log(2.0)) < 1e-12


def test_gradient_finite_differences(capsys):
    with criterion(capsys, "gradients: matching + auxiliary vs central differences, 100 instances, 1e-6 rel"):
        h = 1e-5
        worst = 0.0
        rng = np.random.default_rng(77)
        for i in range(100):
            n = int(rng.integers(3, 13))
            truth = int(rng.integers(n))
            mode = "logistic" if i % 2 == 0 else "softmax"
            q_image = rng.normal(0.0, 1.0, n)
            q_text = rng.normal(0.0, 1.0, n)

            for use_aux in (False, True):
                if use_aux:
                    fn = lambda qi: auxiliary_loss(
                        ScoreVector(q_image=qi, q_text=q_text), truth, mode=mode
                    )
                else:
                    fn = lambda qi: matching_loss(ScoreVector(q_image=qi), truth, mode=mode)
                _, grad = fn(q_image)
                fd = np.empty(n)
                for j in range(n):
                    plus, minus = q_image.copy(), q_image.copy()
                    plus[j] += h
                    minus[j] -= h
                    fd[j] = (fn(plus)[0] - fn(minus)[0]) / (2 * h)
                rel = np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-12)
                worst = max(worst, rel)
        assert worst < 1e-6, f"max relative gradient error {worst}"


def test_pose_recovery_grid(capsys):
    with criterion(capsys, "pose recovery: 50 fixtures, yaw exact, scale/translation 1e-6, <30s"):
        start = time.monotonic()
        rng = np.random.default_rng(5)
        for i in range(50):
            asset_points = rng.uniform(-0.5, 0.5, (300, 3)) * np.array([0.6, 0.8, 2.0])
            asset = PointCloud(points=asset_points)
            true_yaw = YAW_GRID[int(rng.integers(len(YAW_GRID)))]
            true_scale = float(rng.uniform(0.5, 2.0))
            true_t = rng.uniform(-2.0, 2.0, 3)
            true_tf = PoseTransform(translation=true_t, scale=true_scale, yaw=true_yaw)
            scan = PointCloud(points=true_tf.apply(asset_points))

            result = align_pose(scan, asset)
            assert result.transform.yaw == true_yaw, f"fixture {i}: yaw {result.transform.yaw} != {true_yaw}"
            assert abs(result.transform.scale - true_scale) <= 1e-6 * true_scale
            assert np.abs(result.transform.translation - true_t).max() <= 1e-6
        assert time.monotonic() - start < 30.0


def _inside_frac(host: Aabb, box: Aabb) -> float:
    inter = vol = 1.0
    for ax in range(3):
        inter *= max(0.0, min(float(host.max[ax]), float(box.max[ax])) - max(float(host.min[ax]), float(box.min[ax])))
        vol *= float(box.max[ax]) - float(box.min[ax])
    return inter / vol


def _cluttered_scene(seed: int):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 16))
    half = 0.55 * math.sqrt(n)
    objs = []
    attempts = 0
    while len(objs) < n:
        attempts += 1
        if attempts > 4000:
            half *= 1.2
            attempts = 0
        w, d = rng.uniform(0.4, 0.9, 2)
        h = rng.uniform(0.3, 0.8)
        x, y = rng.uniform(-half, half, 2)
        box = make_box(x, y, 0.0, x + w, y + d, h)
        # Shallow overlaps only, so the graph pins nothing together.
        if all(
            _inside_frac(o.box, box) <= 0.08 and _inside_frac(box, o.box) <= 0.08
            for o in objs
        ):
            objs.append(PlacedObject(f"b{len(objs):02d}", box))
    scene = layout_of(objs)
    scene.floor = square_floor(half + 5.0)
    return scene


def test_optimizer_feasibility(capsys):
    with criterion(capsys, "optimizer: 20 cluttered scenes, >=18 reach loss 0, all monotone, zero violations, <2min"):
        start = time.monotonic()
        solved = 0
        cluttered = 0
        for seed in range(20):
            scene = _cluttered_scene(seed)
            graph = build_scene_graph(scene)
            cfg = OptimizerConfig(boundary=scene.floor, max_steps=1000, seed=seed)
            result = optimize_layout(scene, graph, cfg)
            if result.trace[0] > 0.0:
                cluttered += 1
            if result.converged:
                solved += 1
            assert (np.diff(result.trace) <= 0).all(), f"seed {seed}: trace not monotone"
            assert validate_graph(graph, result.scene) == [], f"seed {seed}: graph violations"
            assert collision_loss(result.scene) == result.final_loss
        assert solved >= 18, f"only {solved}/20 scenes reached zero collision loss"
        assert cluttered >= 15, f"only {cluttered}/20 scenes started with collisions"
        assert time.monotonic() - start < 120.0


def test_random_ranking_calibration(capsys):
    with criterion(capsys, "ranking calibration: top-1 of 10 uniform candidates = 0.10 +/- 0.01 over 10k trials"):
        eye = np.eye(10)
        candidates = [Candidate(asset_id=f"a{i}", embedding=eye[i]) for i in range(10)]
        rng = np.random.default_rng(123)
        rankings = []
        for _ in range(10_000):
            query = rng.uniform(0.0, 1.0, 10)
            query /= np.linalg.norm(query)
            cset = CandidateSet(
                object_id="calib", candidates=candidates, image_query=query, truth_index=0
            )
            ids, _ = rank_candidates(cset)
            rankings.append(ids)
        accuracy = topk_accuracy(rankings, ["a0"] * len(rankings), k=1)
        assert abs(accuracy - 0.10) <= 0.01, f"top-1 {accuracy}"


def test_oracle_pipeline_end_to_end(capsys, tmp_path):
    with criterion(capsys, "oracle pipeline: top-1 = 1.0, per-object CD < 1e-6, eval size/scale errors = 0"):
        gt_root = tmp_path / "gt"
        pred_root = tmp_path / "pred"
        write_oracle_bundle(gt_root / "demo", seed=8)
        bundle = ingest(gt_root / "demo")

        result = run_pipeline(bundle)
        assert result.report.per_scene["top1"] == 1.0
        for row in result.report.per_object.values():
            assert row["cd"] < 1e-6

        export_scene(result, pred_root / "demo")
        report = evaluate(pred_root, gt_root)
        assert report.per_scene["top1"] == 1.0
        assert report.per_scene["scale_err_m"] == 0.0
        for row in report.per_object.values():
            assert row["size_err_m3"] == 0.0


def test_pipeline_determinism(capsys, tmp_path):
    with criterion(capsys, "determinism: rerun from scratch is byte-identical (manifests + reports)"):
        for name in ("first", "second"):
            write_oracle_bundle(tmp_path / name / "bundle", seed=31)
            bundle = ingest(tmp_path / name / "bundle")
            export_scene(run_pipeline(bundle), tmp_path / name / "out")
        for fname in ("scene.json", "nodes.json", "metrics.json", "metrics.csv", "trace.csv"):
            assert filecmp.cmp(
                tmp_path / "first" / "out" / fname,
                tmp_path / "second" / "out" / fname,
                shallow=False,
            ), f"{fname} differs between reruns"


def test_qc_sampling_arithmetic(capsys):
    with criterion(capsys, "QC: sample sizes {5,100,101}->{1,10,11}, strict 98% acceptance boundary"):
        for batch_size, expected in ((5, 1), (100, 10), (101, 11)):
            batch = [f"b{i:03d}" for i in range(batch_size)]
            assert len(qc_sample(batch, seed=0)) == expected

        batch = [f"b{i:03d}" for i in range(500)]
        sampled = qc_sample(batch, seed=2)
        assert len(sampled) == 50
        verdicts = {oid: True for oid in sampled}
        assert qc_report("batch", batch, 2, verdicts).accepted
        verdicts[sampled[-1]] = False
        boundary = qc_report("batch", batch, 2, verdicts)
        assert boundary.pass_rate == 0.98
        assert not boundary.accepted
