import dataclasses

import numpy as np
import pytest

from anno3d.document import AnnotationDocument, BoundaryCurve, CameraIntrinsics, RegionPolygon
from anno3d.partition import (
    LABEL_NONE,
    AnchorError,
    RasterError,
    fill_polygon,
    partition,
    rasterize,
    resolve_anchor,
)
from anno3d.synthetic import random_scene_document

from conftest import rect

def brute_force_inside(vertices, width, height):
    """Independent even-odd oracle: count crossings at or left of each center."""
    mask = np.zeros((height, width), dtype=bool)
    n = len(vertices)
    for j in range(height):
        for i in range(width):
            cx, cy = i + 0.5, j + 0.5
            crossings = 0
            for k in range(n):
                x1, y1 = vertices[k]
                x2, y2 = vertices[(k + 1) % n]
                if (y1 <= cy < y2) or (y2 <= cy < y1):
                    if x1 + (cy - y1) * (x2 - x1) / (y2 - y1) <= cx:
                        crossings += 1
            mask[j, i] = crossings % 2 == 1
    return mask


def test_axis_aligned_square_fills_exactly():
    mask = fill_polygon([(0, 0), (10, 0), (10, 10), (0, 10)], 20, 20)
    assert int(mask.sum()) == 100
    assert mask[:10, :10].all()


@pytest.mark.parametrize(
    "vertices",
    [
        [(2.25, 3.25), (12.25, 3.25), (12.25, 9.75), (2.25, 9.75)],
        [(3.1, 1.4), (14.8, 4.2), (11.3, 13.7), (1.9, 10.1)],
        [(8.0, 1.0), (15.0, 8.0), (8.0, 15.0), (1.0, 8.0)],  # diamond
    ],
)
def test_fill_matches_brute_force_oracle(vertices):
    got = fill_polygon(vertices, 18, 18)
    want = brute_force_inside(vertices, 18, 18)
    assert np.array_equal(got, want)


def test_no_boundaries_label_none(square_doc):
    grid = rasterize(square_doc, 1.0)
    assert (grid.boundary_label == LABEL_NONE).all()


def test_horizontal_occlusion_closer_left_is_upper_row(cut_doc):
    grid = rasterize(cut_doc, 1.0)
    ys, xs = np.nonzero(grid.boundary_label != LABEL_NONE)
    assert set(ys.tolist()) == {20}
    # polyline runs left -> right, closer_side=left: the upper row (y-1)
    dirs = grid.side_dir[ys, xs]
    assert (dirs[:, 1] < 0).all() and np.allclose(dirs[:, 0], 0.0)


def test_degenerate_region_raises():
    doc = AnnotationDocument(
        image_id="tiny",
        intrinsics=CameraIntrinsics(50.0, 32, 32),
        region=RegionPolygon(((1.0, 1.0), (2.0, 1.0), (2.0, 2.0), (1.0, 2.0))),
    )
    with pytest.raises(RasterError) as err:
        rasterize(doc, 1.0)
    assert err.value.code == "region_too_small"


def test_full_cut_gives_two_continuous_two_smooth(cut_doc):
    part = partition(rasterize(cut_doc, 1.0))
    assert part.n_continuous == 2
    assert part.n_smooth == 2
    # cut pixels belong to the closer (upper) surface
    upper_id = part.continuous_id[10, 20]
    assert part.continuous_id[20, 20] == upper_id
    assert part.continuous_id[30, 20] != upper_id


def flood_fill_components(open_mask):
    """Independent 4-connected component oracle (BFS)."""
    h, w = open_mask.shape
    labels = np.full((h, w), -1, dtype=int)
    next_label = 0
    for sy in range(h):
        for sx in range(w):
            if not open_mask[sy, sx] or labels[sy, sx] >= 0:
                continue
            stack = [(sx, sy)]
            labels[sy, sx] = next_label
            while stack:
                x, y = stack.pop()
                for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < w and 0 <= ny < h and open_mask[ny, nx] and labels[ny, nx] < 0:
                        labels[ny, nx] = next_label
                        stack.append((nx, ny))
            next_label += 1
    return labels, next_label


def test_occlusion_and_fold_cross_matches_component_oracle(cut_doc):
    doc = dataclasses.replace(
        cut_doc,
        boundaries=cut_doc.boundaries + (BoundaryCurve("fold", ((20.0, 2.0), (20.0, 38.0))),),
    )
    grid = rasterize(doc, 1.0)
    part = partition(grid)
    assert part.n_continuous == 2
    assert part.n_smooth == 4

    occ = grid.occlusion_mask()
    anyb = grid.boundary_label != LABEL_NONE
    _, n_cont_oracle = flood_fill_components(grid.region_mask & ~occ)
    _, n_smooth_oracle = flood_fill_components(grid.region_mask & ~anyb)
    assert part.n_continuous == n_cont_oracle
    assert part.n_smooth == n_smooth_oracle

    # oracle labels agree as a partition of the non-boundary pixels
    oracle_labels, _ = flood_fill_components(grid.region_mask & ~anyb)
    sel = grid.region_mask & ~anyb
    pairs = set(zip(part.smooth_id[sel].tolist(), oracle_labels[sel].tolist()))
    assert len(pairs) == part.n_smooth  # bijection


def test_uncut_square_single_surface(square_doc):
    part = partition(rasterize(square_doc, 1.0))
    assert part.n_continuous == 1
    assert part.n_smooth == 1


def test_resolve_anchor(square_doc, cut_doc):
    part = partition(rasterize(square_doc, 1.0))
    assert resolve_anchor(part, (20.0, 20.0)) == (0, 0)

    part2 = partition(rasterize(cut_doc, 1.0))
    above = resolve_anchor(part2, (20.0, 10.0))
    below = resolve_anchor(part2, (20.0, 30.0))
    assert above[0] != below[0]

    with pytest.raises(AnchorError) as err:
        resolve_anchor(part2, (20.0, 20.4))
    assert err.value.code == "anchor_on_boundary"
    with pytest.raises(AnchorError) as err:
        resolve_anchor(part2, (0.5, 0.5))
    assert err.value.code == "anchor_outside"


def test_refinement_and_gamma_subset_properties():
    for seed in range(8):
        doc = random_scene_document(seed, size=24)
        grid = rasterize(doc, 1.0)
        part = partition(grid)

        # refinement: same smooth id implies same continuous id
        sel = part.smooth_id >= 0
        for sid in range(part.n_smooth):
            cids = np.unique(part.continuous_id[sel & (part.smooth_id == sid)])
            assert len(cids) == 1

        ys, xs = np.nonzero(grid.boundary_label != LABEL_NONE)
        for x, y in zip(xs.tolist(), ys.tolist()):
            side = part.side_neighbors(x, y)
            phi = part.neighbors(x, y)
            assert set(side) <= set(phi)
            if grid.occlusion_mask()[y, x]:
                for qx, qy in side:
                    assert part.continuous_id[qy, qx] == part.continuous_id[y, x]


def test_partition_determinism(cut_doc):
    p1 = partition(rasterize(cut_doc, 1.0))
    p2 = partition(rasterize(cut_doc, 1.0))
    assert np.array_equal(p1.continuous_id, p2.continuous_id)
    assert np.array_equal(p1.smooth_id, p2.smooth_id)


def test_working_scale_downsamples(cut_doc):
    grid = rasterize(cut_doc, 0.5)
    assert grid.width == 20 and grid.height == 20
    part = partition(grid)
    assert part.n_continuous == 2


def test_resample_ids_nearest():
    from anno3d.partition import resample_ids

    ids = np.array([[0, 1], [2, 3]], dtype=np.int32)
    up = resample_ids(ids, 4, 4)
    assert up.shape == (4, 4)
    assert np.array_equal(up[:2, :2], np.zeros((2, 2), int))
    assert np.array_equal(up[2:, 2:], np.full((2, 2), 3))
    # downsampling back recovers the original labels
    assert np.array_equal(resample_ids(up, 2, 2), ids)


def test_retraced_stroke_rasterized_as_drawn_with_conflict_warning():
    # a hairpin stroke doubles back over itself: the raster keeps the drawn
    # pixels (no topology repair) and the opposing closer-side directions are
    # surfaced as a conflict warning
    doc = AnnotationDocument(
        image_id="hairpin",
        intrinsics=CameraIntrinsics(80.0, 40, 40),
        region=rect(2, 2, 38, 38),
        boundaries=(
            BoundaryCurve("occlusion_sharp", ((10.0, 10.0), (10.0, 30.0), (10.0, 12.0)), "left"),
        ),
    )
    grid = rasterize(doc, 1.0)
    stamped = np.nonzero(grid.boundary_label != LABEL_NONE)
    assert set(stamped[0].tolist()) >= set(range(11, 29))  # retrace rows survive
    assert any(w["code"] == "closer_side_conflict" for w in grid.warnings)


def test_corner_join_is_thinned():
    # an L-shaped polyline must stay one pixel wide at the join
    doc = AnnotationDocument(
        image_id="corner",
        intrinsics=CameraIntrinsics(80.0, 40, 40),
        region=rect(2, 2, 38, 38),
        boundaries=(BoundaryCurve("fold", ((10.0, 10.0), (25.0, 10.0), (25.0, 25.0))),),
    )
    grid = rasterize(doc, 1.0)
    lab = grid.boundary_label != LABEL_NONE
    blocks = lab[:-1, :-1] & lab[:-1, 1:] & lab[1:, :-1] & lab[1:, 1:]
    assert not blocks.any()  # no 2x2 thickening anywhere
