from __future__ import annotations

import json

import numpy as np
import pytest

from helpers import EMBED_DIM, oracle_bundle, write_oracle_bundle
from scenereplica.bundle import ingest, write_bundle
from scenereplica.errors import (
    E_BAD_EMBEDDING,
    E_DIM,
    E_DUP_ID,
    E_FEW_CANDIDATES,
    E_MISSING_FILE,
    E_SCHEMA,
    IngestError,
)
from scenereplica.matching import write_embeddings


def _mutate_manifest(root, fn):
    manifest = json.loads((root / "scene.json").read_text())
    fn(manifest)
    (root / "scene.json").write_text(json.dumps(manifest))


def _expect(root, code):
    with pytest.raises(IngestError) as excinfo:
        ingest(root)
    assert excinfo.value.code == code
    return excinfo.value


# --- round trip ----------------------------------------------------------

def test_write_then_ingest_round_trip(tmp_path):
    original = oracle_bundle(seed=4)
    write_bundle(original, tmp_path)
    loaded = ingest(tmp_path)

    assert loaded.scene_id == original.scene_id
    assert np.allclose(loaded.floor.vertices, original.floor.vertices)
    assert [o.object_id for o in loaded.objects] == [o.object_id for o in original.objects]
    for got, want in zip(loaded.objects, original.objects):
        assert got.category == want.category
        assert got.caption == want.caption
        assert got.truth_asset_id == want.truth_asset_id
        # Cloud payloads are stored as 32-bit floats.
        assert np.array_equal(got.scan_cloud.points, want.scan_cloud.points.astype(np.float32))
        assert [c.asset_id for c in got.candidates] == [c.asset_id for c in want.candidates]
        for gc, wc in zip(got.candidates, want.candidates):
            assert np.array_equal(gc.embedding, wc.embedding.astype(np.float32))
            assert gc.provenance == wc.provenance
        assert np.array_equal(got.image_embedding, want.image_embedding.astype(np.float32))
        assert np.array_equal(got.text_embedding, want.text_embedding.astype(np.float32))


def test_round_trip_is_stable(tmp_path):
    write_oracle_bundle(tmp_path / "one", seed=9)
    loaded = ingest(tmp_path / "one")
    write_bundle(loaded, tmp_path / "two")
    first = (tmp_path / "one" / "scene.json").read_bytes()
    second = (tmp_path / "two" / "scene.json").read_bytes()
    assert first == second


def test_candidate_set_carries_truth_index(tmp_path):
    write_oracle_bundle(tmp_path)
    loaded = ingest(tmp_path)
    obj = loaded.objects[0]
    cands = obj.candidate_set()
    assert cands.truth_index == [c.asset_id for c in obj.candidates].index(obj.truth_asset_id)

    def drop_truth(m):
        for entry in m["objects"]:
            entry.pop("truth_asset_id", None)

    _mutate_manifest(tmp_path, drop_truth)
    anon = ingest(tmp_path)
    assert anon.objects[0].truth_asset_id is None
    assert anon.objects[0].candidate_set().truth_index is None


def test_annotations_optional_and_loaded(tmp_path):
    write_oracle_bundle(tmp_path)
    assert ingest(tmp_path).annotations == []
    records = [{"object_id": "demo_o0", "best": "demo_o0_asset"}]
    (tmp_path / "annotations.json").write_text(json.dumps({"v": 1, "records": records}))
    assert ingest(tmp_path).annotations == records


# --- structural failures -------------------------------------------------

def test_missing_root_and_manifest(tmp_path):
    _expect(tmp_path / "nowhere", E_MISSING_FILE)
    write_oracle_bundle(tmp_path)
    (tmp_path / "scene.json").unlink()
    _expect(tmp_path, E_MISSING_FILE)


def test_malformed_manifest_json(tmp_path):
    write_oracle_bundle(tmp_path)
    (tmp_path / "scene.json").write_text("{not json")
    _expect(tmp_path, E_SCHEMA)
    (tmp_path / "scene.json").write_text(json.dumps([1, 2, 3]))
    _expect(tmp_path, E_SCHEMA)


def test_missing_scene_id(tmp_path):
    write_oracle_bundle(tmp_path)
    _mutate_manifest(tmp_path, lambda m: m.pop("scene_id"))
    _expect(tmp_path, E_SCHEMA)


def test_bad_floor_polygon(tmp_path):
    write_oracle_bundle(tmp_path)
    _mutate_manifest(tmp_path, lambda m: m.pop("floor_polygon"))
    _expect(tmp_path, E_SCHEMA)
    write_oracle_bundle(tmp_path / "short")
    _mutate_manifest(tmp_path / "short", lambda m: m.update(floor_polygon=[[0, 0], [1, 0]]))
    _expect(tmp_path / "short", E_SCHEMA)


def test_duplicate_object_id(tmp_path):
    write_oracle_bundle(tmp_path)
    _mutate_manifest(tmp_path, lambda m: m["objects"].append(m["objects"][0]))
    _expect(tmp_path, E_DUP_ID)


def test_object_without_id(tmp_path):
    write_oracle_bundle(tmp_path)

    def strip_id(m):
        del m["objects"][0]["id"]

    _mutate_manifest(tmp_path, strip_id)
    _expect(tmp_path, E_SCHEMA)


def test_missing_scan_cloud_file(tmp_path):
    write_oracle_bundle(tmp_path)
    (tmp_path / "clouds" / "demo_o0_scan.ply").unlink()
    _expect(tmp_path, E_MISSING_FILE)


def test_corrupt_scan_cloud(tmp_path):
    write_oracle_bundle(tmp_path)
    ply = tmp_path / "clouds" / "demo_o0_scan.ply"
    ply.write_bytes(ply.read_bytes()[:-40])
    err = _expect(tmp_path, E_SCHEMA)
    assert "unreadable cloud" in str(err)


def test_too_few_candidates(tmp_path):
    write_oracle_bundle(tmp_path)

    def keep_one(m):
        m["objects"][0]["candidates"] = m["objects"][0]["candidates"][:1]

    _mutate_manifest(tmp_path, keep_one)
    _expect(tmp_path, E_FEW_CANDIDATES)


def test_duplicate_candidate_id(tmp_path):
    write_oracle_bundle(tmp_path)

    def duplicate(m):
        cands = m["objects"][0]["candidates"]
        cands[1] = dict(cands[0])

    _mutate_manifest(tmp_path, duplicate)
    _expect(tmp_path, E_DUP_ID)


def test_embedding_row_count_mismatch(tmp_path):
    write_oracle_bundle(tmp_path)

    def add_candidate(m):
        cands = m["objects"][0]["candidates"]
        extra = dict(cands[0])
        extra["asset_id"] = "surprise"
        cands.append(extra)

    _mutate_manifest(tmp_path, add_candidate)
    _expect(tmp_path, E_BAD_EMBEDDING)


def test_embedding_row_order_mismatch(tmp_path):
    write_oracle_bundle(tmp_path)

    def swap(m):
        cands = m["objects"][0]["candidates"]
        cands[0], cands[1] = cands[1], cands[0]

    _mutate_manifest(tmp_path, swap)
    _expect(tmp_path, E_BAD_EMBEDDING)


def test_embedding_bad_magic(tmp_path):
    write_oracle_bundle(tmp_path)
    bin_path = tmp_path / "embeddings" / "demo_o0_candidates.bin"
    data = bytearray(bin_path.read_bytes())
    data[:4] = b"WHAT"
    bin_path.write_bytes(bytes(data))
    _expect(tmp_path, E_BAD_EMBEDDING)


def test_embedding_missing_sidecar(tmp_path):
    write_oracle_bundle(tmp_path)
    (tmp_path / "embeddings" / "demo_o0_candidates.bin.json").unlink()
    _expect(tmp_path, E_MISSING_FILE)


def test_query_ids_must_be_image_or_text(tmp_path):
    write_oracle_bundle(tmp_path)
    q_path = tmp_path / "embeddings" / "demo_o0_queries.bin"
    rows = np.zeros((2, EMBED_DIM), dtype=np.float32)
    write_embeddings(q_path, ["image", "smell"], rows)
    _expect(tmp_path, E_BAD_EMBEDDING)


def test_query_dimension_must_match_candidates(tmp_path):
    write_oracle_bundle(tmp_path)
    q_path = tmp_path / "embeddings" / "demo_o0_queries.bin"
    write_embeddings(q_path, ["image"], np.zeros((1, EMBED_DIM + 3), dtype=np.float32))
    _expect(tmp_path, E_DIM)


def test_declared_image_must_exist(tmp_path):
    write_oracle_bundle(tmp_path)

    def add_image(m):
        m["objects"][0]["image"] = "images/o0.png"

    _mutate_manifest(tmp_path, add_image)
    _expect(tmp_path, E_MISSING_FILE)
    (tmp_path / "images").mkdir()
    (tmp_path / "images" / "o0.png").write_bytes(b"\x89PNG\r\n\x1a\n")
    assert ingest(tmp_path).objects[0].image_path == "images/o0.png"


def test_caption_must_be_string(tmp_path):
    write_oracle_bundle(tmp_path)

    def numeric_caption(m):
        m["objects"][0]["caption"] = 42

    _mutate_manifest(tmp_path, numeric_caption)
    _expect(tmp_path, E_SCHEMA)


def test_truth_must_be_a_candidate(tmp_path):
    write_oracle_bundle(tmp_path)

    def bogus_truth(m):
        m["objects"][0]["truth_asset_id"] = "missing_asset"

    _mutate_manifest(tmp_path, bogus_truth)
    _expect(tmp_path, E_SCHEMA)


def test_malformed_annotations(tmp_path):
    write_oracle_bundle(tmp_path)
    (tmp_path / "annotations.json").write_text("[broken")
    _expect(tmp_path, E_SCHEMA)
    (tmp_path / "annotations.json").write_text(json.dumps([1, 2]))
    _expect(tmp_path, E_SCHEMA)


def test_ingest_error_exposes_code(tmp_path):
    err = _expect(tmp_path / "gone", E_MISSING_FILE)
    assert str(err).startswith(E_MISSING_FILE)
