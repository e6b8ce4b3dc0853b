import numpy as np
import pytest

from anno3d.document import (
    AnnotationDocument,
    BoundaryCurve,
    CameraIntrinsics,
    NormalSample,
    PlanarityFlag,
    RegionPolygon,
    RelativeNormalRelation,
)


def rect(x0, y0, x1, y1):
    return RegionPolygon(((float(x0), float(y0)), (float(x1), float(y0)), (float(x1), float(y1)), (float(x0), float(y1))))


def unit(x, y, z):
    v = np.array([x, y, z], dtype=float)
    return tuple(v / np.linalg.norm(v))


@pytest.fixture
def square_doc():
    """Uncut 36x36 region with a single annotated normal."""
    return AnnotationDocument(
        image_id="square",
        intrinsics=CameraIntrinsics(80.0, 40, 40),
        region=rect(2, 2, 38, 38),
        normals=(NormalSample((20.0, 20.0), (0.0, 0.0, 1.0)),),
    )


@pytest.fixture
def cut_doc():
    """Square split by a full-width horizontal occlusion, top side closer."""
    return AnnotationDocument(
        image_id="cut",
        intrinsics=CameraIntrinsics(80.0, 40, 40),
        region=rect(2, 2, 38, 38),
        boundaries=(BoundaryCurve("occlusion_sharp", ((2.0, 20.0), (38.0, 20.0)), "left"),),
        normals=(
            NormalSample((20.0, 10.0), (0.0, 0.0, 1.0)),
            NormalSample((20.0, 30.0), (0.0, 0.0, 1.0)),
        ),
    )


@pytest.fixture
def fold_doc():
    """Square split by a vertical fold, anchored flat left and tilted right."""
    return AnnotationDocument(
        image_id="fold",
        intrinsics=CameraIntrinsics(80.0, 40, 40),
        region=rect(2, 2, 38, 38),
        boundaries=(BoundaryCurve("fold", ((20.0, 2.0), (20.0, 38.0))),),
        normals=(
            NormalSample((10.0, 20.0), (0.0, 0.0, 1.0)),
            NormalSample((30.0, 20.0), unit(1.0, 0.0, 1.0)),
        ),
    )


def relation_doc(relation_kinds=("parallel",), normal_a=None, normal_b=None):
    """Two planar halves split by a fold, with the given relation(s)."""
    normal_a = normal_a or unit(0.0, 0.0, 1.0)
    normal_b = normal_b or unit(0.1, 0.0, 1.0)
    relations = tuple(
        RelativeNormalRelation((10.0, 20.0), (30.0, 20.0), kind) for kind in relation_kinds
    )
    return AnnotationDocument(
        image_id="relation",
        intrinsics=CameraIntrinsics(80.0, 40, 40),
        region=rect(2, 2, 38, 38),
        boundaries=(BoundaryCurve("fold", ((20.0, 2.0), (20.0, 38.0))),),
        normals=(NormalSample((10.0, 20.0), normal_a), NormalSample((30.0, 20.0), normal_b)),
        planarity=(PlanarityFlag((10.0, 20.0), True), PlanarityFlag((30.0, 20.0), True)),
        relations=relations,
    )
