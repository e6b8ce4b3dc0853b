"""Sparse single-image 3D annotations: reconstruction and evaluation toolkit."""

from anno3d.config import ReconstructionConfig
from anno3d.document import (
    AnnotationDocument,
    BoundaryCurve,
    CameraIntrinsics,
    NormalSample,
    ParseError,
    PlanarityFlag,
    RegionPolygon,
    RelativeNormalRelation,
    parse,
    serialize,
)
from anno3d.pipeline import Reconstruction, ReconstructionError, reconstruct_document
from anno3d.validation import ValidationReport, Violation, validate

__version__ = "0.1.0"

__all__ = [
    "AnnotationDocument",
    "BoundaryCurve",
    "CameraIntrinsics",
    "NormalSample",
    "ParseError",
    "PlanarityFlag",
    "Reconstruction",
    "ReconstructionConfig",
    "ReconstructionError",
    "RegionPolygon",
    "RelativeNormalRelation",
    "ValidationReport",
    "Violation",
    "parse",
    "reconstruct_document",
    "serialize",
    "validate",
]
