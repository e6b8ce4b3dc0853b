"""Evaluation metrics for single-image 3D predictions.

All metrics are pure functions of rasters and annotation-derived structures;
any sampling is driven by an explicit seed so repeated calls are bitwise
stable. Depth metrics compare back-projected point clouds so that predictions
with a different focal length are judged by shape, not by raw pixel values.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from anno3d.document import AnnotationDocument, NormalSample
from anno3d.partition import SurfacePartition
from anno3d.reconstruct import backproject_raster

WKDR_EQUAL_TOLERANCE = 0.02  # depth ratio within 1 + tol counts as "equal"
BOUNDARY_THRESHOLDS = np.round(np.arange(0.01, 1.00, 0.01), 2)  # 99 values
PLANE_IOU_THRESHOLDS = np.round(np.arange(0.50, 0.96, 0.05), 2)  # 10 values


class MetricError(ValueError):
    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}" + (f": {message}" if message else ""))


# ---------------------------------------------------------------------------
# PR curves


@dataclass
class PRCurve:
    """Precision/recall sweep with trapezoidal area over recall.

    Classes are weight-balanced (total negative weight equals total positive
    weight) so that an uninformative constant score yields an area of 0.5,
    matching the chance baseline reported for front-facing predictors.
    """

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    auc: float

    def to_dict(self) -> dict:
        return {
            "thresholds": [float(x) for x in self.thresholds],
            "precision": [float(x) for x in self.precision],
            "recall": [float(x) for x in self.recall],
            "auc": self.auc,
        }


def pr_curve(scores: np.ndarray, positive: np.ndarray, balance: bool = True) -> PRCurve:
    """Sweep all score thresholds (descending), grouping tied scores."""
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = int((~positive).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError("degenerate_classes", f"{n_pos} positives, {n_neg} negatives")
    w = np.where(positive, 1.0, n_pos / n_neg if balance else 1.0)

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pw = np.where(positive[order], w[order], 0.0)
    nw = np.where(positive[order], 0.0, w[order])
    # group boundaries where the score strictly drops
    boundaries = np.nonzero(np.diff(s))[0]
    ends = np.append(boundaries, len(s) - 1)
    tp = np.cumsum(pw)[ends]
    fp = np.cumsum(nw)[ends]
    total_pos = tp[-1]
    precision = tp / np.maximum(tp + fp, 1e-300)
    recall = tp / total_pos
    thresholds = s[ends]

    rs = np.concatenate([[0.0], recall])
    ps = np.concatenate([[precision[0]], precision])
    auc = float(np.trapezoid(ps, rs))
    return PRCurve(thresholds=thresholds, precision=precision, recall=recall, auc=auc)


# ---------------------------------------------------------------------------
# Depth metrics


@dataclass
class AlignmentParams:
    """Per-surface scale and z-translation fitted by LSIV alignment."""

    scale: dict[int, float] = field(default_factory=dict)
    z_shift: dict[int, float] = field(default_factory=dict)


def fit_scale_zshift(pred: np.ndarray, gt: np.ndarray) -> tuple[float, float]:
    """Closed-form argmin over (lambda, delta) of ||gt - lambda*pred - delta*e_z||^2."""
    if len(pred) < 2:
        return 1.0, 0.0
    a2 = float(np.sum(pred * pred))
    az = float(np.sum(pred[:, 2]))
    ab = float(np.sum(pred * gt))
    bz = float(np.sum(gt[:, 2]))
    n = len(pred)
    mat = np.array([[a2, az], [az, n]])
    rhs = np.array([ab, bz])
    try:
        lam, delta = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError:
        return 1.0, 0.0
    return float(lam), float(delta)


def lsiv_rmse_points(
    pred_points: np.ndarray,
    gt_points: np.ndarray,
    surface_ids: np.ndarray,
    return_params: bool = False,
):
    """LSIV residual on pixel-aligned clouds (gt already sigma-normalized)."""
    params = AlignmentParams()
    sq_sum = 0.0
    for sid in np.unique(surface_ids):
        sel = surface_ids == sid
        a = pred_points[sel]
        b = gt_points[sel]
        lam, delta = fit_scale_zshift(a, b)
        params.scale[int(sid)] = lam
        params.z_shift[int(sid)] = delta
        resid = b - lam * a
        resid[:, 2] -= delta
        sq_sum += float(np.sum(resid * resid))
    value = math.sqrt(sq_sum / len(pred_points))
    return (value, params) if return_params else value


def lsiv_rmse(
    pred_depth: np.ndarray,
    pred_focal: float,
    gt_depth: np.ndarray,
    gt_focal: float,
    gt_surface_ids: np.ndarray,
    valid: np.ndarray | None = None,
    return_params: bool = False,
):
    """Locally scale-invariant RMSE over back-projected point clouds.

    The ground-truth cloud is normalized by the standard deviation of its X
    coordinates; each ground-truth continuous surface is aligned to the
    prediction with its own scale and z-translation before the residual.
    """
    if valid is None:
        valid = (gt_depth > 0) & (pred_depth > 0) & (gt_surface_ids >= 0)
    else:
        valid = valid & (gt_depth > 0) & (pred_depth > 0) & (gt_surface_ids >= 0)
    if not valid.any():
        raise MetricError("empty_mask")

    pred_pts = backproject_raster(pred_depth, valid, pred_focal)
    gt_pts = backproject_raster(gt_depth, valid, gt_focal)
    sigma = float(np.std(gt_pts[..., 0][valid]))
    if sigma == 0.0:
        raise MetricError("degenerate_gt", "zero std of ground-truth X coordinates")
    return lsiv_rmse_points(pred_pts[valid], gt_pts[valid] / sigma, gt_surface_ids[valid], return_params)


def _depth_relation(z1: np.ndarray, z2: np.ndarray, t_eq: float) -> np.ndarray:
    """0 = equal (ratio within 1 + t_eq), 1 = first closer, 2 = first farther."""
    hi = np.maximum(z1, z2)
    lo = np.minimum(z1, z2)
    rel = np.where(z1 < z2, 1, 2)
    return np.where(hi / lo < 1.0 + t_eq, 0, rel)


def wkdr(
    pred_depth: np.ndarray,
    gt_depth: np.ndarray,
    valid: np.ndarray,
    n_pairs: int = 1000,
    seed: int = 0,
    t_eq: float = WKDR_EQUAL_TOLERANCE,
    return_pairs: bool = False,
):
    """Percentage of sampled pixel pairs whose depth order disagrees with gt.

    Half the pairs are uniform random valid pixels, half lie on shared random
    horizontal lines.
    """
    if n_pairs % 2 != 0:
        raise MetricError("n_pairs_odd", str(n_pairs))
    use = valid & (gt_depth > 0) & (pred_depth > 0)
    ys, xs = np.nonzero(use)
    if len(xs) < 2:
        raise MetricError("too_few_valid_pixels", str(len(xs)))
    rng = np.random.default_rng(seed)

    idx_a = []
    idx_b = []
    half = n_pairs // 2
    while len(idx_a) < half:
        i, j = rng.integers(0, len(xs), size=2)
        if i != j:
            idx_a.append(i)
            idx_b.append(j)

    rows = np.unique(ys)
    row_pixels = {int(r): np.nonzero(use[r])[0] for r in rows}
    rows_ok = [r for r in rows if len(row_pixels[int(r)]) >= 2]
    if not rows_ok:
        raise MetricError("no_rows_with_two_pixels")
    line_a = []
    line_b = []
    while len(line_a) < half:
        r = int(rows_ok[rng.integers(0, len(rows_ok))])
        cols = row_pixels[r]
        i, j = rng.integers(0, len(cols), size=2)
        if i != j:
            line_a.append((r, int(cols[i])))
            line_b.append((r, int(cols[j])))

    first = [(int(ys[i]), int(xs[i])) for i in idx_a] + line_a
    second = [(int(ys[j]), int(xs[j])) for j in idx_b] + line_b
    g1 = np.array([gt_depth[p] for p in first])
    g2 = np.array([gt_depth[p] for p in second])
    p1 = np.array([pred_depth[p] for p in first])
    p2 = np.array([pred_depth[p] for p in second])

    gt_rel = _depth_relation(g1, g2, t_eq)
    pred_rel = _depth_relation(p1, p2, t_eq)
    value = float(np.mean(gt_rel != pred_rel) * 100.0)
    if return_pairs:
        return value, list(zip(first, second))
    return value


# ---------------------------------------------------------------------------
# Normal metrics


def normal_metrics(pred_normals: np.ndarray, gt_normals: np.ndarray, mask: np.ndarray) -> dict:
    """Angular error statistics in degrees plus strict %-within thresholds."""
    if not mask.any():
        raise MetricError("empty_mask")
    dots = np.sum(pred_normals[mask] * gt_normals[mask], axis=-1)
    ang = np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))
    return {
        "mean_deg": float(np.mean(ang)),
        "median_deg": float(np.median(ang)),
        "pct_within_11_25": float(np.mean(ang < 11.25) * 100.0),
        "pct_within_22_5": float(np.mean(ang < 22.5) * 100.0),
        "pct_within_30": float(np.mean(ang < 30.0) * 100.0),
    }


def relation_classes(doc: AnnotationDocument, part: SurfacePartition) -> dict[str, list[tuple[int, int]]]:
    """Annotated relation pairs as smooth-surface id pairs, by class."""
    from anno3d.partition import resolve_anchor

    out: dict[str, list[tuple[int, int]]] = {"parallel": [], "orthogonal": [], "neither": []}
    for rel in doc.relations:
        _, sa = resolve_anchor(part, rel.anchor_a)
        _, sb = resolve_anchor(part, rel.anchor_b)
        out[rel.relation].append((sa, sb))
    return out


def relative_normal_auc(
    pred_normals: np.ndarray,
    part: SurfacePartition,
    classed_pairs: dict[str, list[tuple[int, int]]],
    samples_per_class: int = 100,
    seed: int = 0,
) -> dict:
    """AUC of PR curves for detecting orthogonal and parallel surface pairs.

    For each sampled point pair the angle between predicted normals is folded
    to [0, 90]; the folded angle itself scores orthogonality and its
    complement scores parallelism.
    """
    for cls in ("parallel", "orthogonal", "neither"):
        if not classed_pairs.get(cls):
            raise MetricError("missing_class", cls)
    rng = np.random.default_rng(seed)

    pixels_by_sid: dict[int, np.ndarray] = {}

    def surface_pixels(sid: int) -> np.ndarray:
        if sid not in pixels_by_sid:
            pts = part.surface_pixels("smooth", sid)
            if len(pts) == 0:
                raise MetricError("empty_surface", str(sid))
            pixels_by_sid[sid] = pts
        return pixels_by_sid[sid]

    folded = []
    labels = []
    for cls in ("parallel", "orthogonal", "neither"):
        pairs = classed_pairs[cls]
        for _ in range(samples_per_class):
            sa, sb = pairs[int(rng.integers(0, len(pairs)))]
            pa = surface_pixels(sa)
            pb = surface_pixels(sb)
            xa, ya = pa[int(rng.integers(0, len(pa)))]
            xb, yb = pb[int(rng.integers(0, len(pb)))]
            na = pred_normals[ya, xa]
            nb = pred_normals[yb, xb]
            cos = float(np.clip(np.dot(na, nb) / (np.linalg.norm(na) * np.linalg.norm(nb)), -1, 1))
            theta = math.degrees(math.acos(cos))
            folded.append(min(theta, 180.0 - theta))
            labels.append(cls)
    folded = np.asarray(folded)
    labels = np.asarray(labels)

    curve_o = pr_curve(folded, labels == "orthogonal")
    curve_p = pr_curve(90.0 - folded, labels == "parallel")
    return {"auc_o": curve_o.auc, "auc_p": curve_p.auc, "pr_o": curve_o, "pr_p": curve_p}


# ---------------------------------------------------------------------------
# Boundary detection metrics


@dataclass
class BoundaryPrediction:
    p_edge: np.ndarray  # probability of being a boundary pixel
    p_fold: np.ndarray  # probability of being a fold (vs occlusion)


def _match_counts(
    pred_mask: np.ndarray, gt_mask: np.ndarray, tol: float, matching: str
) -> tuple[int, int, int]:
    """One-to-one matching of predicted to gt pixels within distance ``tol``."""
    pred_pts = np.argwhere(pred_mask)[:, ::-1]  # (x, y)
    gt_pts = np.argwhere(gt_mask)[:, ::-1]
    n_pred, n_gt = len(pred_pts), len(gt_pts)
    if n_pred == 0 or n_gt == 0:
        return 0, n_pred, n_gt

    if matching == "exact":
        d = np.linalg.norm(pred_pts[:, None, :] - gt_pts[None, :, :], axis=2)
        big = tol * 1e6 + 1.0
        cost = np.where(d <= tol, d, big)
        rows, cols = linear_sum_assignment(cost)
        tp = int(np.sum(cost[rows, cols] <= tol))
        return tp, n_pred - tp, n_gt - tp

    tree = cKDTree(gt_pts)
    candidates = []
    for pi, pt in enumerate(pred_pts):
        for gi in tree.query_ball_point(pt, tol):
            dist = float(np.hypot(*(pt - gt_pts[gi])))
            candidates.append((dist, pi, gi))
    candidates.sort()
    pred_used = np.zeros(n_pred, dtype=bool)
    gt_used = np.zeros(n_gt, dtype=bool)
    tp = 0
    for _dist, pi, gi in candidates:
        if not pred_used[pi] and not gt_used[gi]:
            pred_used[pi] = True
            gt_used[gi] = True
            tp += 1
    return tp, n_pred - tp, n_gt - tp


def _f_score(tp: float, fp: float, fn: float) -> float:
    if tp == 0:
        return 0.0
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    return 2.0 * p * r / (p + r)


def boundary_counts(
    pred: BoundaryPrediction,
    gt_occlusion: np.ndarray,
    gt_fold: np.ndarray,
    thresholds: np.ndarray = BOUNDARY_THRESHOLDS,
    match_tol: float | None = None,
    matching: str = "greedy",
) -> np.ndarray:
    """Joint (tp, fp, fn) per threshold; a boundary must also match in class."""
    if pred.p_edge.shape != gt_occlusion.shape or pred.p_fold.shape != gt_occlusion.shape:
        raise MetricError("shape_mismatch")
    h, w = gt_occlusion.shape
    tol = match_tol if match_tol is not None else 0.0075 * math.hypot(w, h)
    out = np.zeros((len(thresholds), 3), dtype=np.int64)
    is_fold = pred.p_fold > 0.5
    for t_i, tau in enumerate(thresholds):
        edge = pred.p_edge > tau
        tp_o, fp_o, fn_o = _match_counts(edge & ~is_fold, gt_occlusion, tol, matching)
        tp_f, fp_f, fn_f = _match_counts(edge & is_fold, gt_fold, tol, matching)
        out[t_i] = (tp_o + tp_f, fp_o + fp_f, fn_o + fn_f)
    return out


def boundary_eval(
    predictions: list[BoundaryPrediction],
    gts: list[tuple[np.ndarray, np.ndarray]],
    match_tol: float | None = None,
    matching: str = "greedy",
    thresholds: np.ndarray = BOUNDARY_THRESHOLDS,
) -> dict:
    """Dataset ODS/OIS/AP for joint occlusion-and-fold boundary detection."""
    if len(predictions) != len(gts):
        raise MetricError("length_mismatch")
    per_image = np.zeros((len(predictions), len(thresholds), 3), dtype=np.int64)
    for i, (pred, (gt_o, gt_f)) in enumerate(zip(predictions, gts)):
        per_image[i] = boundary_counts(pred, gt_o, gt_f, thresholds, match_tol, matching)

    totals = per_image.sum(axis=0)
    f_per_tau = np.array([_f_score(*totals[t]) for t in range(len(thresholds))])
    ods_idx = int(np.argmax(f_per_tau))

    ois_counts = np.zeros(3, dtype=np.int64)
    for i in range(len(predictions)):
        fs = np.array([_f_score(*per_image[i, t]) for t in range(len(thresholds))])
        ois_counts += per_image[i, int(np.argmax(fs))]
    ois = _f_score(*ois_counts)

    tp = totals[:, 0].astype(float)
    fp = totals[:, 1].astype(float)
    fn = totals[:, 2].astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), 0.0)
        recall = np.where(tp + fn > 0, tp / np.maximum(tp + fn, 1), 0.0)
    order = np.argsort(recall, kind="stable")
    rs = np.concatenate([[0.0], recall[order]])
    ps = np.concatenate([[precision[order][0] if len(order) else 0.0], precision[order]])
    ap = float(np.trapezoid(ps, rs))

    return {
        "ODS": float(f_per_tau[ods_idx]),
        "ODS_threshold": float(thresholds[ods_idx]),
        "OIS": float(ois),
        "AP": ap,
        "pr_recall": [float(x) for x in recall],
        "pr_precision": [float(x) for x in precision],
        "thresholds": [float(x) for x in thresholds],
    }


# ---------------------------------------------------------------------------
# Plane instance segmentation


def _mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.logical_and(a, b).sum())
    if inter == 0:
        return 0.0
    union = int(np.logical_or(a, b).sum())
    return inter / union


def plane_instance_ap(
    pred_masks: list[np.ndarray],
    confidences: list[float],
    gt_masks: list[np.ndarray],
    iou_thresholds: np.ndarray = PLANE_IOU_THRESHOLDS,
) -> dict:
    """COCO-style mask AP averaged over IoU thresholds 0.50:0.05:0.95.

    Predictions are processed in confidence order; each matches the unmatched
    ground truth of highest IoU above the threshold. Duplicates count as
    false positives. AP uses the precision envelope over recall.
    """
    for i, a in enumerate(gt_masks):
        for b in gt_masks[i + 1 :]:
            if np.logical_and(a, b).any():
                raise MetricError("gt_not_partition", "ground-truth masks overlap")
    if not gt_masks:
        raise MetricError("no_gt_masks")

    order = sorted(range(len(pred_masks)), key=lambda i: (-confidences[i], i))
    iou = np.zeros((len(pred_masks), len(gt_masks)))
    for i, pm in enumerate(pred_masks):
        for j, gm in enumerate(gt_masks):
            iou[i, j] = _mask_iou(pm, gm)

    ap_per_t = {}
    for t in iou_thresholds:
        gt_used = np.zeros(len(gt_masks), dtype=bool)
        flags = []  # True = TP in confidence order
        for i in order:
            best_j = -1
            best_iou = 0.0
            for j in range(len(gt_masks)):
                if gt_used[j] or iou[i, j] < t:
                    continue
                if iou[i, j] > best_iou:
                    best_iou = iou[i, j]
                    best_j = j
            if best_j >= 0:
                gt_used[best_j] = True
                flags.append(True)
            else:
                flags.append(False)
        tp = np.cumsum(flags)
        k = np.arange(1, len(flags) + 1)
        precision = tp / k
        recall = tp / len(gt_masks)
        ap = 0.0
        prev_r = 0.0
        for idx in range(len(flags)):
            if flags[idx]:
                env = float(np.max(precision[idx:]))
                ap += (recall[idx] - prev_r) * env
                prev_r = recall[idx]
        ap_per_t[float(t)] = ap

    values = list(ap_per_t.values())
    return {
        "AP": float(np.mean(values)),
        "AP50": ap_per_t[0.5],
        "AP75": ap_per_t[0.75],
        "per_threshold": ap_per_t,
    }


# ---------------------------------------------------------------------------
# Point cloud EDist


def point_cloud_edist(
    cloud_a: np.ndarray,
    cloud_b: np.ndarray,
    mode: str = "global_scale_translate",
    surface_ids: np.ndarray | None = None,
) -> float:
    """Mean distance between corresponding points after aligning A onto B.

    ``global_scale_translate`` fits one scale and a 3-vector translation;
    ``surfacewise_scale`` fits one scale per surface plus a shared global
    translation (the protocol used for human and CNN reconstructions).
    """
    a = np.asarray(cloud_a, dtype=float)
    b = np.asarray(cloud_b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise MetricError("shape_mismatch")
    if len(a) < 4:
        raise MetricError("too_few_correspondences", str(len(a)))

    if mode == "global_scale_translate":
        am = a.mean(axis=0)
        bm = b.mean(axis=0)
        ac = a - am
        denom = float(np.sum(ac * ac))
        s = float(np.sum(ac * (b - bm)) / denom) if denom > 0 else 1.0
        t = bm - s * am
        return float(np.mean(np.linalg.norm(s * a + t - b, axis=1)))

    if mode != "surfacewise_scale":
        raise MetricError("bad_mode", mode)
    if surface_ids is None:
        raise MetricError("missing_surface_ids")
    sids = np.asarray(surface_ids)
    uniq = np.unique(sids)
    m = len(uniq)
    sid_index = {int(s): i for i, s in enumerate(uniq)}
    n = len(a)
    mat = np.zeros((m + 3, m + 3))
    rhs = np.zeros(m + 3)
    for s in uniq:
        i = sid_index[int(s)]
        sel = sids == s
        asel = a[sel]
        bsel = b[sel]
        mat[i, i] = float(np.sum(asel * asel))
        mat[i, m : m + 3] = asel.sum(axis=0)
        mat[m : m + 3, i] = asel.sum(axis=0)
        rhs[i] = float(np.sum(asel * bsel))
    mat[m : m + 3, m : m + 3] = np.eye(3) * n
    rhs[m : m + 3] = b.sum(axis=0)
    sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    scales = sol[:m]
    t = sol[m : m + 3]
    aligned = a * scales[[sid_index[int(s)] for s in sids]][:, None] + t
    return float(np.mean(np.linalg.norm(aligned - b, axis=1)))


# ---------------------------------------------------------------------------
# Rotation-search EDist


def _rotation_matrix(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    cc = 1.0 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def _axis_grid() -> np.ndarray:
    dirs = []
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            for k in (-1, 0, 1):
                if i == j == k == 0:
                    continue
                v = np.array([i, j, k], dtype=float)
                dirs.append(v / np.linalg.norm(v))
    return np.asarray(dirs)  # 26 directions


def rotate_document_normals(doc: AnnotationDocument, rotation: np.ndarray) -> AnnotationDocument:
    """New document whose annotated normals are rotated by ``rotation``."""
    rotated = tuple(
        NormalSample(position=s.position, normal=tuple(rotation @ np.asarray(s.normal)))
        for s in doc.normals
    )
    return dataclasses.replace(doc, normals=rotated)


def post_rotation_edist(
    doc: AnnotationDocument,
    gt_points: np.ndarray,
    gt_valid: np.ndarray,
    config=None,
    mode: str = "global_scale_translate",
    angles_deg: tuple = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0),
) -> dict:
    """Best EDist over a global rotation (up to ~30 degrees) of the annotated
    normals, searched on a 26-direction axis grid and refined around the best.

    ``gt_points`` is an (H, W, 3) point raster aligned with the document's
    working-resolution reconstruction.
    """
    from anno3d.pipeline import reconstruct_document

    def run(rotation: np.ndarray | None) -> float:
        d = doc if rotation is None else rotate_document_normals(doc, rotation)
        rec = reconstruct_document(d, config, check=False)
        pts = backproject_raster(rec.export_depth, rec.valid_mask, rec.working_focal)
        use = rec.valid_mask & gt_valid & (rec.export_depth > 0)
        if use.sum() < 4:
            raise MetricError("too_few_correspondences")
        sids = rec.partition.continuous_id[use] if mode == "surfacewise_scale" else None
        return point_cloud_edist(pts[use], gt_points[use], mode, sids)

    unrotated = run(None)
    best = (unrotated, None, 0.0)  # (edist, axis, angle)
    for axis in _axis_grid():
        for ang in angles_deg:
            e = run(_rotation_matrix(axis, math.radians(ang)))
            if e < best[0]:
                best = (e, axis, ang)

    if best[1] is not None:
        axis = best[1]
        for delta in (-2.5, -1.25, 1.25, 2.5):
            ang = best[2] + delta
            if ang <= 0 or ang > 32.5:
                continue
            e = run(_rotation_matrix(axis, math.radians(ang)))
            if e < best[0]:
                best = (e, axis, ang)

    return {
        "edist": best[0],
        "unrotated_edist": unrotated,
        "rotation_axis": None if best[1] is None else [float(x) for x in best[1]],
        "rotation_angle_deg": float(best[2]),
    }
