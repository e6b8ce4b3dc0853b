import dataclasses
import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from anno3d.cli import main
from anno3d.document import RelativeNormalRelation, serialize
from anno3d.io_formats import decode_dmap
from anno3d.pipeline import reconstruct_document
from anno3d.synthetic import build_corpus, parallel_relation, write_corpus

ARTIFACT_SUFFIXES = (".nmap", ".dmap", ".ply", ".glb", "_report.json")


@pytest.fixture
def runner():
    return CliRunner()


def write_doc(doc, path):
    with open(path, "wb") as fh:
        fh.write(serialize(doc))
    return str(path)


def test_reconstruct_writes_five_artifacts(runner, tmp_path, square_doc):
    doc_path = write_doc(square_doc, tmp_path / "doc.json")
    out = tmp_path / "out"
    result = runner.invoke(main, ["reconstruct", doc_path, "--out", str(out)])
    assert result.exit_code == 0, result.output
    files = sorted(os.listdir(out))
    assert files == sorted("doc" + s for s in ARTIFACT_SUFFIXES)
    report = json.loads((out / "doc_report.json").read_text())
    assert report["warnings"] == []
    assert report["lp_mode_used"] == "strict"


def test_failed_document_is_isolated_with_exit_code_2(runner, tmp_path, square_doc):
    good = write_doc(square_doc, tmp_path / "good.json")
    conflicted = parallel_relation()
    conflicted = dataclasses.replace(
        conflicted,
        relations=conflicted.relations
        + (RelativeNormalRelation((32.0, 40.0), (88.0, 40.0), "orthogonal"),),
    )
    bad = write_doc(conflicted, tmp_path / "bad.json")
    out = tmp_path / "out"
    result = runner.invoke(main, ["reconstruct", good, bad, "--out", str(out)])
    assert result.exit_code == 2
    assert (out / "good.dmap").exists()
    assert not (out / "bad.dmap").exists()
    failure = json.loads((out / "bad_report.json").read_text())
    assert failure["error"] == "relation_conflict"


def test_reconstruct_deterministic_across_runs(runner, tmp_path):
    corpus = tmp_path / "corpus"
    write_corpus(corpus)
    doc_paths = sorted(str(p) for p in corpus.iterdir())
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert runner.invoke(main, ["reconstruct", *doc_paths, "--out", str(out1)]).exit_code == 0
    assert runner.invoke(main, ["reconstruct", *doc_paths, "--out", str(out2)]).exit_code == 0
    for name in os.listdir(out1):
        if name.endswith("_report.json"):
            continue  # carries timings and timestamps
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_reconstruct_png_flag(runner, tmp_path, square_doc):
    doc_path = write_doc(square_doc, tmp_path / "doc.json")
    out = tmp_path / "out"
    result = runner.invoke(main, ["reconstruct", doc_path, "--out", str(out), "--png", "--debug"])
    assert result.exit_code == 0
    for suffix in ("_normals.png", "_depth.png", "_depth_scale.json", "_continuous.png", "_adjacency.json"):
        assert (out / f"doc{suffix}").exists()


def test_resolution_flag_changes_raster(runner, tmp_path, square_doc):
    doc_path = write_doc(square_doc, tmp_path / "doc.json")
    out = tmp_path / "out"
    result = runner.invoke(main, ["reconstruct", doc_path, "--out", str(out), "--resolution", "20"])
    assert result.exit_code == 0
    depth, _ = decode_dmap((out / "doc.dmap").read_bytes())
    assert depth.shape == (20, 20)


def test_stats_examples(runner, tmp_path, square_doc, cut_doc, fold_doc):
    # focal 2x width lands in the [1, 10) bin
    paths = [
        write_doc(square_doc, tmp_path / "a.json"),
        write_doc(cut_doc, tmp_path / "b.json"),
        write_doc(fold_doc, tmp_path / "c.json"),
    ]
    result = runner.invoke(main, ["stats", *paths])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["focal_length_image_widths"]["1_to_10"] == 3
    assert report["region_boundary_mix"] == {"occlusion_only": 1, "fold_only": 1, "both": 0}
    assert report["continuous_surface_counts"] == {"1": 2, "2": 1}


def test_stats_both_bucket(runner, tmp_path, cut_doc):
    import dataclasses as dc
    from anno3d.document import BoundaryCurve

    doc = dc.replace(
        cut_doc, boundaries=cut_doc.boundaries + (BoundaryCurve("fold", ((20.0, 22.0), (20.0, 38.0))),)
    )
    path = write_doc(doc, tmp_path / "both.json")
    report = json.loads(runner.invoke(main, ["stats", path]).output)
    assert report["region_boundary_mix"]["both"] == 1


def build_eval_fixture(tmp_path, n_docs=3):
    """pred = gt setup: reconstruct docs, save their outputs as predictions."""
    docs = build_corpus()[2:2 + n_docs]  # occlusion-step, fold-wedge, smooth-cylinder
    items = []
    for doc in docs:
        rec = reconstruct_document(doc)
        stem = doc.image_id
        doc_path = write_doc(doc, tmp_path / f"{stem}.json")
        from anno3d.io_formats import encode_dmap, encode_nmap

        (tmp_path / f"{stem}.dmap").write_bytes(encode_dmap(rec.export_depth, rec.valid_mask))
        (tmp_path / f"{stem}.nmap").write_bytes(encode_nmap(rec.normal_map.normals, rec.valid_mask))
        pe = np.where(rec.grid.occlusion_mask() | rec.grid.fold_mask(), 1.0, 0.0)
        pf = np.where(rec.grid.fold_mask(), 1.0, 0.0)
        np.savez(tmp_path / f"{stem}_boundary.npz", p_edge=pe, p_fold=pf)
        items.append(
            {
                "id": stem,
                "annotation": doc_path,
                "pred_depth": str(tmp_path / f"{stem}.dmap"),
                "pred_normals": str(tmp_path / f"{stem}.nmap"),
                "pred_boundary": str(tmp_path / f"{stem}_boundary.npz"),
            }
        )
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"items": items}))
    return manifest


def test_evaluate_pred_equals_gt(runner, tmp_path):
    manifest = build_eval_fixture(tmp_path)
    out = tmp_path / "eval"
    result = runner.invoke(
        main,
        ["evaluate", str(manifest), "--out", str(out), "--metrics", "lsiv,wkdr,normals,boundary"],
    )
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    agg = report["aggregate"]
    # predictions pass through float32 rasters, so "zero" is storage epsilon
    assert agg["lsiv_rmse"] < 1e-5
    assert agg["wkdr_pct"] == 0.0
    assert agg["normal_mean_deg"] < 1e-2
    assert agg["boundary_ods"] == 1.0
    assert (out / "report.csv").exists()


def test_evaluate_missing_prediction_names_item(runner, tmp_path):
    manifest = build_eval_fixture(tmp_path, n_docs=1)
    data = json.loads(manifest.read_text())
    data["items"][0]["pred_depth"] = str(tmp_path / "nope.dmap")
    data["items"][0]["id"] = "missing-one"
    manifest.write_text(json.dumps(data))
    out = tmp_path / "eval"
    result = runner.invoke(main, ["evaluate", str(manifest), "--out", str(out)])
    assert result.exit_code == 1
    assert "missing-one" in result.output

    ok = runner.invoke(main, ["evaluate", str(manifest), "--out", str(out), "--allow-partial"])
    assert ok.exit_code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["aggregate"]["skipped"] == ["missing-one"]


def test_evaluate_rerun_identical_csv(runner, tmp_path):
    manifest = build_eval_fixture(tmp_path, n_docs=2)
    out1, out2 = tmp_path / "e1", tmp_path / "e2"
    for out in (out1, out2):
        result = runner.invoke(
            main, ["evaluate", str(manifest), "--out", str(out), "--metrics", "lsiv,wkdr"]
        )
        assert result.exit_code == 0, result.output
    assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()


def test_config_round_trip(tmp_path):
    from anno3d.config import ReconstructionConfig

    cfg = ReconstructionConfig(working_resolution=128, epsilon=0.1, seed=42)
    path = tmp_path / "cfg.json"
    cfg.save(path)
    assert ReconstructionConfig.load(path) == cfg
    with pytest.raises(ValueError):
        ReconstructionConfig(epsilon=-1.0)
    with pytest.raises(ValueError):
        ReconstructionConfig.from_dict({"bogus": 1})
