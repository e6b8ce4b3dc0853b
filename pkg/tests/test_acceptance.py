"""Acceptance suite: one test per release criterion, at the stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to get one line per
criterion; each test also prints an ``ACCEPTANCE <name>: PASS`` line when it
succeeds.
"""

import math
import time

import numpy as np

from anno3d.config import ReconstructionConfig
from anno3d.document import AnnotationDocument, BoundaryCurve, CameraIntrinsics, NormalSample
from anno3d.io_formats import encode_dmap, encode_nmap, encode_ply
from anno3d.metrics import (
    BoundaryPrediction,
    boundary_counts,
    boundary_eval,
    lsiv_rmse,
    lsiv_rmse_points,
    normal_metrics,
    plane_instance_ap,
    relative_normal_auc,
    wkdr,
)
from anno3d.normals import NormalMap, build_constraints, solve_dense_normals
from anno3d.partition import partition, rasterize
from anno3d.pipeline import reconstruct_document
from anno3d.reconstruct import (
    backproject_raster,
    centered_coords,
    integrate_surface,
    snap_normals,
)
from anno3d.synthetic import build_corpus, random_scene_document

from conftest import rect, unit
from test_metrics import exhaustive_match_oracle, toy_boundary_case, two_surface_scene
from test_normals import oracle_dense_solve, oracle_energy
from test_reconstruct import (
    OrderingConstraintSet,
    OrderingPair,
    _StubPart,
    brute_force_lp_oracle,
    uniform_depths,
)


def _ok(name):
    print(f"ACCEPTANCE {name}: PASS")


def test_c01_normal_solver_constancy():
    size = 132  # 128x128 region inside a 132 px image
    doc = AnnotationDocument(
        image_id="c01",
        intrinsics=CameraIntrinsics(2.0 * size, size, size),
        region=rect(2, 2, 130, 130),
        normals=(NormalSample((66.0, 66.0), unit(0.3, -0.2, 1.0)),),
    )
    part = partition(rasterize(doc, 1.0))
    assert part.grid.region_mask.sum() == 128 * 128
    t0 = time.perf_counter()
    nm, _ = solve_dense_normals(part, build_constraints(doc, part))
    elapsed = time.perf_counter() - t0
    dev = np.abs(nm.normals[part.grid.region_mask] - np.array(unit(0.3, -0.2, 1.0))).max()
    assert dev < 1e-6, f"max deviation {dev}"
    assert elapsed < 1.0, f"solve took {elapsed:.3f}s"
    _ok("normal solver constancy")


def test_c02_fold_insulation():
    left_n = np.array([0.0, 0.0, 1.0])
    right_n = np.array([math.sqrt(2) / 2, 0.0, math.sqrt(2) / 2])
    doc = AnnotationDocument(
        image_id="c02",
        intrinsics=CameraIntrinsics(80.0, 40, 40),
        region=rect(2, 2, 38, 38),
        boundaries=(BoundaryCurve("fold", ((20.0, 2.0), (20.0, 38.0))),),
        normals=(NormalSample((10.0, 20.0), tuple(left_n)), NormalSample((30.0, 20.0), tuple(right_n))),
    )
    part = partition(rasterize(doc, 1.0))
    grid = part.grid
    nm, _ = solve_dense_normals(part, build_constraints(doc, part))

    fold = grid.fold_mask()
    assert set(np.nonzero(fold)[1].tolist()) == {20}
    xs = np.arange(grid.width)[None, :].repeat(grid.height, axis=0)
    left = grid.region_mask & (xs < 20)
    right = grid.region_mask & (xs > 20)
    assert np.abs(nm.normals[left] - left_n).max() < 1e-6
    assert np.abs(nm.normals[right] - right_n).max() < 1e-6
    # the fold raster carries its kept side; the jump is exactly at the raster
    fold_vals = nm.normals[fold]
    is_left = np.abs(fold_vals - left_n).max() < 1e-6
    is_right = np.abs(fold_vals - right_n).max() < 1e-6
    assert is_left or is_right
    _ok("fold insulation")


def test_c03_eq1_energy_matches_dense_oracle():
    checked = 0
    seed = 0
    while checked < 10:
        doc = random_scene_document(seed, size=int(16 + (seed * 5) % 17))
        seed += 1
        part = partition(rasterize(doc, 1.0))
        cs = build_constraints(doc, part)
        if not len(cs):
            continue
        nm, _ = solve_dense_normals(part, cs)
        e_solver = oracle_energy(part.grid, nm.raw)
        oracle = oracle_dense_solve(part.grid, cs)
        e_oracle = oracle_energy(part.grid, oracle)
        assert abs(e_solver - e_oracle) <= 1e-8 * max(e_oracle, 1e-12), (
            f"seed {seed - 1}: solver {e_solver} vs oracle {e_oracle}"
        )
        checked += 1
    _ok("eq1 optimality oracle (10 scenes)")


def test_c04_integration_correctness():
    a, b = 0.3, -0.2
    c = math.sqrt(1 - a * a - b * b)
    size, focal = 32, 64.0
    doc = AnnotationDocument(
        image_id="c04",
        intrinsics=CameraIntrinsics(focal, size, size),
        region=rect(0, 0, size, size),
        normals=(NormalSample((16.0, 16.0), (a, b, c)),),
    )
    part = partition(rasterize(doc, 1.0))
    nm, _ = solve_dense_normals(part, build_constraints(doc, part))
    t0 = time.perf_counter()
    sd = integrate_surface(snap_normals(nm), part, focal, 0)
    elapsed = time.perf_counter() - t0

    uu, vv = centered_coords(size, size)
    gt = 2.0 * focal / (a * uu + b * vv + c * focal)
    gt /= np.median(gt[sd.mask])
    rel = np.abs(sd.depth[sd.mask] - gt[sd.mask]) / gt[sd.mask]
    assert rel.max() < 1e-3, f"max relative error {rel.max()}"
    assert elapsed < 1.0
    _ok("integration correctness")


def _layered_doc(seed):
    rng = np.random.default_rng(1000 + seed)
    size = 40
    n_cuts = int(rng.integers(1, 4))
    ys = np.sort(rng.choice(np.arange(10, 31, 5), size=n_cuts, replace=False))
    boundaries = tuple(
        BoundaryCurve("occlusion_sharp", ((2.0, float(y)), (38.0, float(y))), "left") for y in ys
    )
    bands = [2.0] + [float(y) for y in ys] + [38.0]
    normals = tuple(
        NormalSample(
            ((bands[i] + bands[i + 1]) / 2.0 + 2.0, (bands[i] + bands[i + 1]) / 2.0),
            unit(float(rng.uniform(-0.3, 0.3)), float(rng.uniform(-0.3, 0.3)), 1.0),
        )
        for i in range(len(bands) - 1)
    )
    normals = tuple(NormalSample((20.0, (bands[i] + bands[i + 1]) / 2.0), n.normal) for i, n in enumerate(normals))
    return AnnotationDocument(
        image_id=f"layers-{seed}",
        intrinsics=CameraIntrinsics(80.0, size, size),
        region=rect(2, 2, 38, 38),
        boundaries=boundaries,
        normals=normals,
    )


def test_c05_lp_ordering():
    config = ReconstructionConfig()
    checked = 0
    seed = 0
    while checked < 20:
        doc = _layered_doc(seed)
        seed += 1
        rec = reconstruct_document(doc, config, check=False)
        if rec.partition.n_continuous < 2 or len(rec.pairs) == 0:
            continue
        assert rec.lp.mode == "strict"
        for pair in rec.pairs.pairs:
            zc = rec.depth[pair.closer[1], pair.closer[0]]
            zf = rec.depth[pair.farther[1], pair.farther[0]]
            assert zc + config.epsilon <= zf + 1e-9, (doc.image_id, pair, zc, zf)
        checked += 1

    # cyclic 3-surface case: soft mode, minimum-violation set per brute force
    from anno3d.reconstruct import solve_ordering_lp

    part = _StubPart([[0, 1, 2]])
    pairs = OrderingConstraintSet(
        pairs=[
            OrderingPair((0, 0), (1, 0), 0),
            OrderingPair((1, 0), (2, 0), 1),
            OrderingPair((2, 0), (0, 0), 2),
        ]
    )
    res = solve_ordering_lp(uniform_depths(part), pairs, part, 0.05, 0.01)
    assert res.mode == "soft"
    coeffs = [(0, 1.0, 1, 1.0), (1, 1.0, 2, 1.0), (2, 1.0, 0, 1.0)]
    grid = np.round(np.arange(0.01, 0.2001, 0.01), 4).tolist()
    xs, violated = brute_force_lp_oracle(coeffs, 3, 0.05, 0.01, grid)
    assert res.violated_pairs == violated
    assert np.allclose(res.scale_factors, xs, atol=1e-9)
    _ok("LP ordering (20 acyclic scenes + cyclic soft mode)")


def test_c06_z_snap_exact():
    nm = NormalMap(normals=np.array([[[1.0, 0.0, 0.0]]]), valid_mask=np.ones((1, 1), bool))
    out = snap_normals(nm).normals[0, 0]
    assert out[0] == math.sqrt(0.91)
    assert out[1] == 0.0
    assert out[2] == 0.3
    _ok("z-snap")


def test_c07_metric_identities():
    gt, sid = two_surface_scene(16, 16)
    valid = np.ones_like(sid, bool)
    assert lsiv_rmse(gt, 20.0, gt, 20.0, sid) <= 1e-9
    assert wkdr(gt, gt, valid, 400, seed=5) == 0.0

    n = np.zeros((16, 16, 3))
    n[..., 2] = 1.0
    assert normal_metrics(n, n, valid)["mean_deg"] == 0.0

    occ = np.zeros((16, 16), bool)
    occ[5, 2:14] = True
    fold = np.zeros((16, 16), bool)
    fold[10, 3:12] = True
    pred = BoundaryPrediction(np.where(occ | fold, 1.0, 0.0), np.where(fold, 1.0, 0.0))
    bres = boundary_eval([pred], [(occ, fold)])
    assert bres["ODS"] == 1.0 and bres["OIS"] == 1.0 and bres["AP"] == 1.0

    masks = []
    for i in range(3):
        m = np.zeros((16, 16), bool)
        m[:, i * 5 : i * 5 + 4] = True
        masks.append(m)
    pres = plane_instance_ap(masks, [0.5, 0.9, 0.1], masks)
    assert pres["AP"] == 1.0

    strictly = np.exp(0.1 * np.arange(256, dtype=float).reshape(16, 16))
    assert wkdr(np.ones_like(strictly), strictly, valid, 400, seed=5) == 100.0
    _ok("metric identities")


def test_c08_lsiv_invariance_directions():
    gt, sid = two_surface_scene(16, 16)
    valid = np.ones_like(sid, bool)
    gt_pts = backproject_raster(gt, valid, 20.0)
    sigma = float(np.std(gt_pts[..., 0]))
    gt_cloud = (gt_pts / sigma)[valid]
    ids = sid[valid]

    base = lsiv_rmse_points(gt_cloud.copy(), gt_cloud, ids)
    shifted = gt_cloud.copy()
    shifted[ids == 0] = shifted[ids == 0] * 2.5 + (0.0, 0.0, 0.7)
    shifted[ids == 1] = shifted[ids == 1] * 0.4 + (0.0, 0.0, -0.2)
    assert abs(lsiv_rmse_points(shifted, gt_cloud, ids) - base) < 1e-9

    translated = gt_cloud + np.array([0.1, 0.0, 0.0])
    assert lsiv_rmse_points(translated, gt_cloud, ids) - base > 1e-3
    _ok("LSIV invariance and non-invariance")


class _PixelPart:
    def surface_pixels(self, which, sid):
        return np.array([[sid, 0]])


def test_c09_relative_normal_auc():
    z = (0.0, 0.0, 1.0)
    x = (1.0, 0.0, 0.0)
    mid = (math.sin(math.radians(45)), 0.0, math.cos(math.radians(45)))
    classes = {"parallel": [(0, 1)], "orthogonal": [(0, 2)], "neither": [(0, 3)]}

    separable = np.zeros((1, 4, 3))
    for i, v in enumerate([z, z, x, mid]):
        separable[0, i] = v
    res = relative_normal_auc(separable, _PixelPart(), classes, samples_per_class=60, seed=3)
    assert res["auc_o"] == 1.0 and res["auc_p"] == 1.0

    frontal = np.zeros((1, 4, 3))
    frontal[..., 2] = 1.0
    res = relative_normal_auc(frontal, _PixelPart(), classes, samples_per_class=60, seed=3)
    assert abs(res["auc_o"] - 0.5) <= 0.05
    assert abs(res["auc_p"] - 0.5) <= 0.05
    _ok("relative-normal AUC")


def test_c10_boundary_a6_counts():
    pred, gt_occ, gt_fold = toy_boundary_case()
    tol = 1.5
    thresholds = np.array([0.25, 0.55, 0.85])
    counts = boundary_counts(pred, gt_occ, gt_fold, thresholds, match_tol=tol)
    is_fold = pred.p_fold > 0.5
    for t_i, tau in enumerate(thresholds):
        edge = pred.p_edge > tau
        joint = np.zeros(3, dtype=int)
        for cls_mask, gt_mask in (((edge & ~is_fold), gt_occ), ((edge & is_fold), gt_fold)):
            pred_pts = [tuple(p[::-1]) for p in np.argwhere(cls_mask)]
            gt_pts = [tuple(p[::-1]) for p in np.argwhere(gt_mask)]
            tp = exhaustive_match_oracle(pred_pts, gt_pts, tol)
            joint += (tp, len(pred_pts) - tp, len(gt_pts) - tp)
        assert counts[t_i].tolist() == joint.tolist(), f"threshold {tau}"
    _ok("boundary A6 counts vs exhaustive matching")


def test_c11_end_to_end_determinism_and_runtime():
    config = ReconstructionConfig()
    t0 = time.perf_counter()
    artifacts = []
    for _run in range(2):
        run = {}
        for doc in build_corpus():
            rec = reconstruct_document(doc, config)
            run[doc.image_id] = (
                encode_dmap(rec.export_depth, rec.valid_mask),
                encode_nmap(rec.normal_map.normals, rec.valid_mask),
                encode_ply(rec.mesh.vertices, rec.mesh.vertex_surface, rec.mesh.faces),
            )
        artifacts.append(run)
    elapsed = time.perf_counter() - t0
    for image_id in artifacts[0]:
        for a, b in zip(artifacts[0][image_id], artifacts[1][image_id]):
            assert a == b, f"{image_id} artifact differs between runs"
    assert elapsed < 30.0, f"two corpus runs took {elapsed:.1f}s"
    _ok(f"end-to-end determinism ({elapsed:.1f}s for 2 runs)")
