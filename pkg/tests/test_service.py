import dataclasses
import email
import email.policy
import json
import threading

import pytest
from fastapi.testclient import TestClient

from anno3d.config import ReconstructionConfig
from anno3d.document import RelativeNormalRelation, serialize
from anno3d.io_formats import decode_glb, encode_glb
from anno3d.pipeline import reconstruct_document
from anno3d.service import create_app
from anno3d.synthetic import fold_wedge, frontal_square, occlusion_step, parallel_relation


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def parse_multipart(response):
    raw = b"Content-Type: " + response.headers["content-type"].encode() + b"\r\n\r\n" + response.content
    msg = email.message_from_bytes(raw, policy=email.policy.HTTP)
    parts = {p.get_filename() or p.get_param("name", header="content-disposition"): p for p in msg.iter_parts()}
    report = json.loads(parts["report"].get_payload(decode=True))
    glb = parts["preview.glb"].get_payload(decode=True)
    return report, glb


def test_health(client):
    res = client.get("/v1/health")
    assert res.status_code == 200
    assert res.json()["status"] == "ok"


def test_validate_endpoint(client):
    res = client.post("/v1/validate", content=serialize(frontal_square()))
    assert res.status_code == 200
    assert res.json() == {"valid": True, "violations": [], "warnings": []}

    doc = json.loads(serialize(frontal_square()))
    doc["region"] = doc["region"][:2]
    res = client.post("/v1/validate", json=doc)
    assert res.status_code == 200
    assert res.json()["valid"] is False
    assert res.json()["violations"][0]["code"] == "polygon_too_small"

    res = client.post("/v1/validate", content=b"{nope")
    assert res.status_code == 400
    assert res.json()["error"] == "bad_json"


def test_reconstruct_returns_report_and_glb(client):
    res = client.post("/v1/reconstruct", content=serialize(occlusion_step()))
    assert res.status_code == 200
    report, glb = parse_multipart(res)
    assert report["image_id"] == "occlusion-step"
    gltf, verts, faces = decode_glb(glb)
    assert len(gltf["meshes"][0]["primitives"]) >= 1
    assert len(verts) > 0 and len(faces) > 0


def test_reconstruct_invalid_document_400_with_report(client):
    doc = json.loads(serialize(frontal_square()))
    doc["normals"] = [{"x": 60.0, "y": 45.0, "nx": 0.5, "ny": 0.0, "nz": 0.0}]
    res = client.post("/v1/reconstruct", json=doc)
    assert res.status_code == 400
    body = res.json()
    assert body["valid"] is False
    codes = {v["code"] for v in body["violations"]}
    assert "normal_not_unit" in codes


def test_reconstruct_relation_conflict_422(client):
    doc = parallel_relation()
    doc = dataclasses.replace(
        doc,
        relations=doc.relations
        + (RelativeNormalRelation(doc.relations[0].anchor_a, doc.relations[0].anchor_b, "orthogonal"),),
    )
    res = client.post("/v1/reconstruct", content=serialize(doc))
    assert res.status_code == 422
    assert res.json()["error"] == "relation_conflict"
    assert res.json()["detail"]["cycle"]


def test_request_size_limit(client):
    res = client.post("/v1/reconstruct", content=b"x" * (10 * 1024 * 1024 + 1))
    assert res.status_code == 413


def test_timeout_returns_504():
    slow = TestClient(create_app(request_timeout_s=1e-9))
    res = slow.post("/v1/reconstruct", content=serialize(frontal_square()))
    assert res.status_code == 504
    assert res.json()["error"] == "timeout"


def test_concurrent_requests_no_cross_talk(client):
    docs = {"frontal-square": frontal_square(), "fold-wedge": fold_wedge()}
    results = {}

    def post(name, doc):
        res = client.post("/v1/reconstruct", content=serialize(doc))
        results[name] = parse_multipart(res)

    threads = [threading.Thread(target=post, args=item) for item in docs.items()]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for name in docs:
        report, glb = results[name]
        assert report["image_id"] == name
        assert len(glb) > 0


def test_service_glb_matches_library_path_bitwise(client):
    doc = occlusion_step()
    res = client.post("/v1/reconstruct", content=serialize(doc))
    _report, service_glb = parse_multipart(res)
    rec = reconstruct_document(doc, ReconstructionConfig())
    assert service_glb == encode_glb(rec.mesh.vertices, rec.mesh.faces)


def test_config_override_changes_resolution(client):
    doc = json.loads(serialize(frontal_square()))
    res = client.post("/v1/reconstruct", json={"document": doc, "config": {"working_resolution": 48}})
    assert res.status_code == 200
    report, _ = parse_multipart(res)
    assert max(report["working_resolution"]) <= 48

    res = client.post("/v1/reconstruct", json={"document": doc, "config": {"bogus": 3}})
    assert res.status_code == 400
    assert res.json()["error"] == "bad_config"
