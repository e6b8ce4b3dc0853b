"""Deterministic synthetic annotation corpus for tests, demos and benchmarks.

``python -m anno3d.synthetic --out DIR`` writes the ten documents as JSON.
The builders are seeded functions of their arguments only, so the corpus is
identical on every machine.
"""

from __future__ import annotations

import math

import numpy as np

from anno3d.document import (
    AnnotationDocument,
    BoundaryCurve,
    CameraIntrinsics,
    NormalSample,
    PlanarityFlag,
    RegionPolygon,
    RelativeNormalRelation,
    serialize,
)


def _unit(x: float, y: float, z: float) -> tuple[float, float, float]:
    n = math.sqrt(x * x + y * y + z * z)
    return (x / n, y / n, z / n)


def _rect(x0, y0, x1, y1) -> RegionPolygon:
    return RegionPolygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def frontal_square(image_id: str = "frontal-square") -> AnnotationDocument:
    """Single planar surface facing the camera."""
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(240.0, 120, 90),
        region=_rect(8.0, 8.0, 112.0, 82.0),
        normals=(NormalSample((60.0, 45.0), (0.0, 0.0, 1.0)),),
        planarity=(PlanarityFlag((60.0, 45.0), True),),
    )


def slanted_plane(image_id: str = "slanted-plane") -> AnnotationDocument:
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(300.0, 100, 100),
        region=_rect(6.0, 6.0, 94.0, 94.0),
        normals=(NormalSample((50.0, 50.0), _unit(0.35, -0.2, 1.0)),),
        planarity=(PlanarityFlag((50.0, 50.0), True),),
    )


def occlusion_step(image_id: str = "occlusion-step") -> AnnotationDocument:
    """Two stacked surfaces, the upper one closer."""
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(200.0, 110, 90),
        region=_rect(6.0, 6.0, 104.0, 84.0),
        boundaries=(BoundaryCurve("occlusion_sharp", ((6.0, 45.0), (104.0, 45.0)), "left"),),
        normals=(
            NormalSample((55.0, 24.0), (0.0, 0.0, 1.0)),
            NormalSample((55.0, 66.0), _unit(0.0, -0.35, 1.0)),
        ),
    )


def fold_wedge(image_id: str = "fold-wedge") -> AnnotationDocument:
    """One continuous surface folded down the middle, like an open book."""
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(260.0, 120, 90),
        region=_rect(10.0, 8.0, 110.0, 82.0),
        boundaries=(BoundaryCurve("fold", ((60.0, 8.0), (60.0, 82.0))),),
        normals=(
            NormalSample((34.0, 45.0), _unit(0.45, 0.0, 1.0)),
            NormalSample((86.0, 45.0), _unit(-0.45, 0.0, 1.0)),
        ),
        planarity=(PlanarityFlag((34.0, 45.0), True), PlanarityFlag((86.0, 45.0), True)),
    )


def smooth_occlusion_cylinder(image_id: str = "smooth-cylinder") -> AnnotationDocument:
    """A curved surface whose silhouette is a smooth occlusion over a backdrop."""
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(240.0, 100, 100),
        region=_rect(5.0, 5.0, 95.0, 95.0),
        boundaries=(BoundaryCurve("occlusion_smooth", ((40.0, 95.0), (40.0, 5.0)), "left"),),
        normals=(
            NormalSample((20.0, 50.0), (0.0, 0.0, 1.0)),
            NormalSample((70.0, 50.0), (0.0, 0.0, 1.0)),
        ),
        planarity=(PlanarityFlag((70.0, 50.0), True),),
    )


def parallel_relation(image_id: str = "parallel-pair") -> AnnotationDocument:
    """Two planar surfaces annotated slightly apart and marked parallel."""
    tilt_a = _unit(0.20, 0.0, 1.0)
    tilt_b = _unit(0.28, 0.0, 1.0)
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(220.0, 120, 80),
        region=_rect(8.0, 8.0, 112.0, 72.0),
        boundaries=(BoundaryCurve("fold", ((60.0, 8.0), (60.0, 72.0))),),
        normals=(NormalSample((32.0, 40.0), tilt_a), NormalSample((88.0, 40.0), tilt_b)),
        planarity=(PlanarityFlag((32.0, 40.0), True), PlanarityFlag((88.0, 40.0), True)),
        relations=(RelativeNormalRelation((32.0, 40.0), (88.0, 40.0), "parallel"),),
    )


def orthogonal_relation(image_id: str = "orthogonal-pair") -> AnnotationDocument:
    """A floor-meets-wall fold with an orthogonality annotation."""
    wall = _unit(0.0, 0.1, 1.0)
    floor = _unit(0.0, -1.0, 0.15)
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(260.0, 120, 100),
        region=_rect(8.0, 8.0, 112.0, 92.0),
        boundaries=(BoundaryCurve("fold", ((8.0, 55.0), (112.0, 55.0))),),
        normals=(NormalSample((60.0, 30.0), wall), NormalSample((60.0, 75.0), floor)),
        planarity=(PlanarityFlag((60.0, 30.0), True), PlanarityFlag((60.0, 75.0), True)),
        relations=(RelativeNormalRelation((60.0, 30.0), (60.0, 75.0), "orthogonal"),),
    )


def three_layers(image_id: str = "three-layers") -> AnnotationDocument:
    """Three depth layers separated by two occlusions, nearest at the bottom."""
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(250.0, 100, 120),
        region=_rect(6.0, 6.0, 94.0, 114.0),
        boundaries=(
            BoundaryCurve("occlusion_sharp", ((94.0, 42.0), (6.0, 42.0)), "left"),
            BoundaryCurve("occlusion_sharp", ((94.0, 78.0), (6.0, 78.0)), "left"),
        ),
        normals=(
            NormalSample((50.0, 22.0), (0.0, 0.0, 1.0)),
            NormalSample((50.0, 60.0), _unit(0.15, 0.0, 1.0)),
            NormalSample((50.0, 96.0), _unit(-0.15, 0.1, 1.0)),
        ),
    )


def notch_region(image_id: str = "notch-region") -> AnnotationDocument:
    """Non-convex region with a dangling occlusion cut."""
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(210.0, 110, 90),
        region=RegionPolygon(
            ((8.0, 8.0), (102.0, 8.0), (102.0, 82.0), (62.0, 82.0), (62.0, 50.0), (44.0, 50.0), (44.0, 82.0), (8.0, 82.0))
        ),
        boundaries=(BoundaryCurve("occlusion_sharp", ((8.0, 30.0), (70.0, 30.0)), "right"),),
        normals=(
            NormalSample((50.0, 18.0), _unit(0.0, 0.2, 1.0)),
            NormalSample((24.0, 62.0), (0.0, 0.0, 1.0)),
        ),
    )


def curved_blob(image_id: str = "curved-blob") -> AnnotationDocument:
    """Curved surface with several samples, no boundaries."""
    return AnnotationDocument(
        image_id=image_id,
        intrinsics=CameraIntrinsics(280.0, 100, 90),
        region=RegionPolygon(((14.0, 20.0), (58.0, 9.0), (90.0, 32.0), (84.0, 74.0), (36.0, 81.0), (10.0, 52.0))),
        normals=(
            NormalSample((30.0, 40.0), _unit(0.3, 0.1, 1.0)),
            NormalSample((60.0, 30.0), _unit(-0.1, 0.25, 1.0)),
            NormalSample((55.0, 60.0), _unit(-0.25, -0.2, 1.0)),
        ),
        planarity=(PlanarityFlag((55.0, 60.0), False),),
    )


BUILDERS = (
    frontal_square,
    slanted_plane,
    occlusion_step,
    fold_wedge,
    smooth_occlusion_cylinder,
    parallel_relation,
    orthogonal_relation,
    three_layers,
    notch_region,
    curved_blob,
)


def build_corpus() -> list[AnnotationDocument]:
    """The ten bundled synthetic documents, in a fixed order."""
    return [builder() for builder in BUILDERS]


def write_corpus(out_dir) -> list[str]:
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, doc in enumerate(build_corpus()):
        path = os.path.join(out_dir, f"{i:02d}_{doc.image_id}.json")
        with open(path, "wb") as fh:
            fh.write(serialize(doc))
        paths.append(path)
    return paths


def random_scene_document(
    seed: int,
    size: int = 32,
    max_cuts: int = 2,
    image_id: str | None = None,
) -> AnnotationDocument:
    """Small random scene used by solver and LP acceptance checks.

    Cuts are parallel horizontal boundaries with a consistent closer side, so
    the sampled ordering constraints are always acyclic.
    """
    rng = np.random.default_rng(seed)
    margin = 2.0
    region = _rect(margin, margin, size - margin, size - margin)
    pool = np.arange(8, size - 8, 4)
    n_cuts = min(int(rng.integers(0, max_cuts + 1)), len(pool))
    ys = np.sort(rng.choice(pool, size=n_cuts, replace=False)) if n_cuts else []
    boundaries = []
    for y in ys:
        kind = "occlusion_sharp" if rng.random() < 0.7 else "fold"
        if kind == "fold":
            boundaries.append(BoundaryCurve("fold", ((margin, float(y)), (size - margin, float(y)))))
        else:
            boundaries.append(
                BoundaryCurve("occlusion_sharp", ((margin, float(y)), (size - margin, float(y))), "left")
            )
    bands = [margin] + [float(y) for y in ys] + [size - margin]
    normals = []
    for b0, b1 in zip(bands[:-1], bands[1:]):
        if b1 - b0 < 3:
            continue
        cy = (b0 + b1) / 2.0
        cx = float(rng.uniform(size * 0.3, size * 0.7))
        vec = _unit(float(rng.uniform(-0.4, 0.4)), float(rng.uniform(-0.4, 0.4)), 1.0)
        normals.append(NormalSample((cx, cy), vec))
    return AnnotationDocument(
        image_id=image_id or f"random-{seed}",
        intrinsics=CameraIntrinsics(float(2 * size), size, size),
        region=region,
        boundaries=tuple(boundaries),
        normals=tuple(normals),
    )


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Write the bundled synthetic corpus as JSON.")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    for path in write_corpus(args.out):
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
