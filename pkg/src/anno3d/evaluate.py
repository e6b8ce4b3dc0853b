"""Batch evaluation of predictions against annotation-derived ground truth.

A job manifest lists items; each item names an annotation document and
prediction files. Ground-truth depth/normals default to the document's own
reconstruction at the working resolution (the dataset protocol); boundary
and plane ground truth always derive from the annotation.

Manifest schema::

    {"items": [{
        "id": "img-001",
        "annotation": "docs/img-001.json",
        "pred_depth": "preds/img-001.dmap",        # optional
        "pred_focal_px": 210.0,                    # optional, default gt focal
        "pred_normals": "preds/img-001.nmap",      # optional
        "pred_boundary": "preds/img-001.npz",      # arrays p_edge, p_fold
        "pred_planes": "preds/img-001-planes.npz", # arrays masks, confidences
        "gt_depth": "gt/img-001.dmap",             # optional override
        "gt_focal_px": 210.0,
        "gt_normals": "gt/img-001.nmap"
    }]}
"""

from __future__ import annotations

import csv
import io
import json
import os
import zlib
from dataclasses import dataclass, field

import numpy as np

from anno3d.config import ReconstructionConfig
from anno3d.document import parse
from anno3d.io_formats import decode_dmap, decode_nmap
from anno3d.metrics import (
    BoundaryPrediction,
    MetricError,
    boundary_eval,
    lsiv_rmse,
    normal_metrics,
    plane_instance_ap,
    relation_classes,
    relative_normal_auc,
    wkdr,
)
from anno3d.pipeline import reconstruct_document

ALL_METRICS = ("lsiv", "wkdr", "normals", "relnormal", "boundary", "planes")


class ManifestError(ValueError):
    pass


@dataclass
class JobItem:
    id: str
    annotation: str
    pred_depth: str | None = None
    pred_focal_px: float | None = None
    pred_normals: str | None = None
    pred_boundary: str | None = None
    pred_planes: str | None = None
    gt_depth: str | None = None
    gt_focal_px: float | None = None
    gt_normals: str | None = None


@dataclass
class JobManifest:
    items: list[JobItem] = field(default_factory=list)

    @classmethod
    def load(cls, path) -> "JobManifest":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        items = []
        seen = set()
        base = os.path.dirname(os.path.abspath(path))

        def absolute(p):
            return p if p is None or os.path.isabs(p) else os.path.join(base, p)

        for i, entry in enumerate(raw.get("items", [])):
            if "id" not in entry or "annotation" not in entry:
                raise ManifestError(f"items[{i}] needs 'id' and 'annotation'")
            if entry["id"] in seen:
                raise ManifestError(f"duplicate item id {entry['id']!r}")
            seen.add(entry["id"])
            items.append(
                JobItem(
                    id=entry["id"],
                    annotation=absolute(entry["annotation"]),
                    pred_depth=absolute(entry.get("pred_depth")),
                    pred_focal_px=entry.get("pred_focal_px"),
                    pred_normals=absolute(entry.get("pred_normals")),
                    pred_boundary=absolute(entry.get("pred_boundary")),
                    pred_planes=absolute(entry.get("pred_planes")),
                    gt_depth=absolute(entry.get("gt_depth")),
                    gt_focal_px=entry.get("gt_focal_px"),
                    gt_normals=absolute(entry.get("gt_normals")),
                )
            )
        return cls(items=items)


def item_seed(base_seed: int, item_id: str) -> int:
    return (base_seed ^ zlib.crc32(item_id.encode("utf-8"))) & 0x7FFFFFFF


def _missing_files(item: JobItem) -> list[str]:
    missing = []
    for p in (item.annotation, item.pred_depth, item.pred_normals, item.pred_boundary, item.pred_planes, item.gt_depth, item.gt_normals):
        if p is not None and not os.path.exists(p):
            missing.append(p)
    return missing


def evaluate_item(item: JobItem, metric_names, config: ReconstructionConfig) -> dict:
    with open(item.annotation, "rb") as fh:
        doc = parse(fh.read())
    rec = reconstruct_document(doc, config)
    part = rec.partition
    region = rec.valid_mask
    seed = item_seed(config.seed, item.id)

    if item.gt_depth:
        with open(item.gt_depth, "rb") as fh:
            gt_depth, gt_depth_valid = decode_dmap(fh.read())
        gt_focal = item.gt_focal_px if item.gt_focal_px else rec.working_focal
    else:
        gt_depth, gt_depth_valid = rec.export_depth, region
        gt_focal = rec.working_focal
    if item.gt_normals:
        with open(item.gt_normals, "rb") as fh:
            gt_normals, _ = decode_nmap(fh.read())
    else:
        gt_normals = rec.normal_map.normals

    results: dict = {"id": item.id}
    notes: list[str] = []

    def shape_ok(arr, name):
        if arr.shape[:2] != region.shape:
            raise MetricError("shape_mismatch", f"{name} {arr.shape[:2]} vs raster {region.shape}")

    if "lsiv" in metric_names or "wkdr" in metric_names:
        if item.pred_depth is None:
            notes.append("depth metrics skipped: no pred_depth")
        else:
            with open(item.pred_depth, "rb") as fh:
                pred_depth, _ = decode_dmap(fh.read())
            shape_ok(pred_depth, "pred_depth")
            pred_focal = item.pred_focal_px if item.pred_focal_px else gt_focal
            if "lsiv" in metric_names:
                results["lsiv_rmse"] = lsiv_rmse(
                    pred_depth, pred_focal, gt_depth, gt_focal, part.continuous_id, gt_depth_valid
                )
            if "wkdr" in metric_names:
                results["wkdr_pct"] = wkdr(
                    pred_depth, gt_depth, gt_depth_valid & region, n_pairs=1000, seed=seed
                )

    if "normals" in metric_names or "relnormal" in metric_names:
        if item.pred_normals is None:
            notes.append("normal metrics skipped: no pred_normals")
        else:
            with open(item.pred_normals, "rb") as fh:
                pred_normals, _ = decode_nmap(fh.read())
            shape_ok(pred_normals, "pred_normals")
            if "normals" in metric_names:
                results.update(
                    {f"normal_{k}": v for k, v in normal_metrics(pred_normals, gt_normals, region).items()}
                )
            if "relnormal" in metric_names:
                classes = relation_classes(doc, part)
                if all(classes.get(c) for c in ("parallel", "orthogonal", "neither")):
                    auc = relative_normal_auc(pred_normals, part, classes, samples_per_class=100, seed=seed)
                    results["auc_o"] = auc["auc_o"]
                    results["auc_p"] = auc["auc_p"]
                    results["_curves"] = {
                        "pr_orthogonal": auc["pr_o"].to_dict(),
                        "pr_parallel": auc["pr_p"].to_dict(),
                    }
                else:
                    notes.append("relnormal skipped: needs relations of all three classes")

    if "boundary" in metric_names:
        if item.pred_boundary is None:
            notes.append("boundary skipped: no pred_boundary")
        else:
            with np.load(item.pred_boundary) as npz:
                bp = BoundaryPrediction(p_edge=npz["p_edge"], p_fold=npz["p_fold"])
            shape_ok(bp.p_edge, "p_edge")
            results["_boundary"] = (bp, (rec.grid.occlusion_mask(), rec.grid.fold_mask()))

    if "planes" in metric_names:
        if item.pred_planes is None:
            notes.append("planes skipped: no pred_planes")
        else:
            with np.load(item.pred_planes) as npz:
                masks = [m.astype(bool) for m in npz["masks"]]
                confidences = [float(c) for c in npz["confidences"]]
            planar_sids = _planar_smooth_ids(doc, part)
            if not planar_sids:
                notes.append("planes skipped: no planar surfaces annotated")
            else:
                gt_masks = [part.smooth_id == sid for sid in planar_sids]
                for m in masks:
                    shape_ok(m, "plane mask")
                ap = plane_instance_ap(masks, confidences, gt_masks)
                results["plane_ap"] = ap["AP"]
                results["plane_ap50"] = ap["AP50"]
                results["plane_ap75"] = ap["AP75"]

    results["_notes"] = notes
    return results


def _planar_smooth_ids(doc, part) -> list[int]:
    from anno3d.partition import AnchorError, resolve_anchor

    out = []
    for flag in doc.planarity:
        if not flag.is_planar:
            continue
        try:
            _, sid = resolve_anchor(part, flag.anchor)
        except AnchorError:
            continue
        if sid not in out:
            out.append(sid)
    return out


SCALAR_COLUMNS = (
    "lsiv_rmse",
    "wkdr_pct",
    "normal_mean_deg",
    "normal_median_deg",
    "normal_pct_within_11_25",
    "normal_pct_within_22_5",
    "normal_pct_within_30",
    "auc_o",
    "auc_p",
    "plane_ap",
    "plane_ap50",
    "plane_ap75",
)


def run_evaluation(
    manifest: JobManifest,
    out_dir,
    metric_names=ALL_METRICS,
    config: ReconstructionConfig | None = None,
    allow_partial: bool = False,
) -> dict:
    """Evaluate every manifest item; write per-image and aggregate reports.

    Missing files fail the run unless ``allow_partial`` is set, in which case
    incomplete items are listed and skipped.
    """
    config = config or ReconstructionConfig()
    os.makedirs(out_dir, exist_ok=True)

    missing = {item.id: _missing_files(item) for item in manifest.items}
    missing = {k: v for k, v in missing.items() if v}
    if missing and not allow_partial:
        raise ManifestError(f"missing files (use --allow-partial to skip): {missing}")

    per_image = []
    boundary_inputs = []
    for item in manifest.items:
        if item.id in missing:
            continue
        res = evaluate_item(item, metric_names, config)
        if "_boundary" in res:
            boundary_inputs.append(res.pop("_boundary"))
        per_image.append(res)

    aggregate: dict = {"images": len(per_image), "skipped": sorted(missing)}
    for key in SCALAR_COLUMNS:
        vals = [r[key] for r in per_image if key in r]
        if vals:
            aggregate[key] = float(np.mean(vals))
    if boundary_inputs:
        bres = boundary_eval([b for b, _ in boundary_inputs], [g for _, g in boundary_inputs])
        aggregate["boundary_ods"] = bres["ODS"]
        aggregate["boundary_ois"] = bres["OIS"]
        aggregate["boundary_ap"] = bres["AP"]
        aggregate["boundary_pr"] = {
            "thresholds": bres["thresholds"],
            "precision": bres["pr_precision"],
            "recall": bres["pr_recall"],
        }

    report = {
        "config": config.to_dict(),
        "metrics": list(metric_names),
        "per_image": [
            {k: v for k, v in r.items() if not k.startswith("_")}
            | {"notes": r["_notes"]}
            | ({"curves": r["_curves"]} if "_curves" in r else {})
            for r in per_image
        ],
        "aggregate": aggregate,
    }
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)

    csv_text = io.StringIO()
    writer = csv.writer(csv_text, lineterminator="\n")
    writer.writerow(("id",) + SCALAR_COLUMNS)
    for r in per_image:
        writer.writerow([r["id"]] + [r.get(k, "") for k in SCALAR_COLUMNS])
    writer.writerow(["AGGREGATE"] + [aggregate.get(k, "") for k in SCALAR_COLUMNS])
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text.getvalue())

    return report
