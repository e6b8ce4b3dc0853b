"""Annotation document model: types, JSON parsing and canonical serialization.

One document holds everything a worker annotated on a single image: the
region polygon, occlusion/fold boundaries, sparse surface normals, planarity
flags and relative-normal relations. Documents are immutable after parse and
safe to share between workers.

Coordinate conventions used throughout the package:
  * image coordinates: x grows right, y grows down, subpixel floats;
  * camera coordinates: centered, u = x - width/2, v = y - height/2;
  * normals: unit 3-vectors with n_z > 0 (camera-facing hemisphere), the
    (n_x, n_y) components expressed in the image x/y directions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

SCHEMA_VERSION = 1

BOUNDARY_KINDS = ("occlusion_sharp", "occlusion_smooth", "fold")
OCCLUSION_KINDS = ("occlusion_sharp", "occlusion_smooth")
SIDES = ("left", "right")
RELATION_KINDS = ("neither", "parallel", "orthogonal")


class ParseError(ValueError):
    """Malformed document JSON. ``path`` locates the offending field."""

    def __init__(self, code: str, path: str, message: str = ""):
        self.code = code
        self.path = path
        super().__init__(f"{code}:{path}" + (f" ({message})" if message else ""))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal length in pixels, principal point at center."""

    focal_px: float
    width: int
    height: int


@dataclass(frozen=True)
class RegionPolygon:
    """Annotated region of interest as an ordered vertex list (pixels)."""

    vertices: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class BoundaryCurve:
    """Occlusion or fold polyline.

    ``closer_side`` is left/right relative to the polyline direction and is
    present exactly for the two occlusion kinds.
    """

    kind: str
    points: tuple[tuple[float, float], ...]
    closer_side: str | None = None


@dataclass(frozen=True)
class NormalSample:
    """A worker-placed surface normal at an image position."""

    position: tuple[float, float]
    normal: tuple[float, float, float]


@dataclass(frozen=True)
class PlanarityFlag:
    """Marks the smooth surface under ``anchor`` as planar or curved."""

    anchor: tuple[float, float]
    is_planar: bool


@dataclass(frozen=True)
class RelativeNormalRelation:
    """Pairwise relation between two planar surfaces, identified by anchors."""

    anchor_a: tuple[float, float]
    anchor_b: tuple[float, float]
    relation: str


@dataclass(frozen=True)
class AnnotationDocument:
    image_id: str
    intrinsics: CameraIntrinsics
    region: RegionPolygon
    boundaries: tuple[BoundaryCurve, ...] = ()
    normals: tuple[NormalSample, ...] = ()
    planarity: tuple[PlanarityFlag, ...] = ()
    relations: tuple[RelativeNormalRelation, ...] = ()


def _want(obj: dict, key: str, path: str):
    if key not in obj:
        raise ParseError("missing_field", f"{path}.{key}" if path else key)
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError("not_a_number", path)
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError("not_an_integer", path)
    return value


def _point2(value, path: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ParseError("not_a_point", path)
    return (_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def _array(value, path: str) -> list:
    if not isinstance(value, list):
        raise ParseError("not_an_array", path)
    return value


def parse(doc_bytes: bytes | str) -> AnnotationDocument:
    """Parse UTF-8 JSON bytes into an :class:`AnnotationDocument`.

    Raises :class:`ParseError` with a field path on malformed input. Semantic
    invariants (unit norms, polygon simplicity, ...) are *not* checked here;
    use :func:`anno3d.validation.validate` for those.
    """
    if isinstance(doc_bytes, bytes):
        try:
            text = doc_bytes.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("bad_encoding", "", str(exc)) from exc
    else:
        text = doc_bytes
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("bad_json", f"line {exc.lineno}", exc.msg) from exc
    if not isinstance(raw, dict):
        raise ParseError("not_an_object", "")

    version = _want(raw, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ParseError("unsupported_schema_version", "schema_version", str(version))

    image_id = _want(raw, "image_id", "")
    if not isinstance(image_id, str):
        raise ParseError("not_a_string", "image_id")

    intr_raw = _want(raw, "intrinsics", "")
    if not isinstance(intr_raw, dict):
        raise ParseError("not_an_object", "intrinsics")
    intrinsics = CameraIntrinsics(
        focal_px=_number(_want(intr_raw, "focal_px", "intrinsics"), "intrinsics.focal_px"),
        width=_integer(_want(intr_raw, "width", "intrinsics"), "intrinsics.width"),
        height=_integer(_want(intr_raw, "height", "intrinsics"), "intrinsics.height"),
    )

    region_raw = _array(_want(raw, "region", ""), "region")
    region = RegionPolygon(
        vertices=tuple(_point2(v, f"region[{i}]") for i, v in enumerate(region_raw))
    )

    boundaries = []
    for i, b in enumerate(_array(raw.get("boundaries", []), "boundaries")):
        path = f"boundaries[{i}]"
        if not isinstance(b, dict):
            raise ParseError("not_an_object", path)
        kind = _want(b, "kind", path)
        if kind not in BOUNDARY_KINDS:
            raise ParseError("bad_enum", f"{path}.kind", str(kind))
        points = tuple(
            _point2(p, f"{path}.points[{j}]")
            for j, p in enumerate(_array(_want(b, "points", path), f"{path}.points"))
        )
        closer_side = b.get("closer_side")
        if closer_side is not None and closer_side not in SIDES:
            raise ParseError("bad_enum", f"{path}.closer_side", str(closer_side))
        boundaries.append(BoundaryCurve(kind=kind, points=points, closer_side=closer_side))

    normals = []
    for i, n in enumerate(_array(raw.get("normals", []), "normals")):
        path = f"normals[{i}]"
        if not isinstance(n, dict):
            raise ParseError("not_an_object", path)
        normals.append(
            NormalSample(
                position=(
                    _number(_want(n, "x", path), f"{path}.x"),
                    _number(_want(n, "y", path), f"{path}.y"),
                ),
                normal=(
                    _number(_want(n, "nx", path), f"{path}.nx"),
                    _number(_want(n, "ny", path), f"{path}.ny"),
                    _number(_want(n, "nz", path), f"{path}.nz"),
                ),
            )
        )

    planarity = []
    for i, p in enumerate(_array(raw.get("planarity", []), "planarity")):
        path = f"planarity[{i}]"
        if not isinstance(p, dict):
            raise ParseError("not_an_object", path)
        is_planar = _want(p, "is_planar", path)
        if not isinstance(is_planar, bool):
            raise ParseError("not_a_boolean", f"{path}.is_planar")
        planarity.append(
            PlanarityFlag(
                anchor=(
                    _number(_want(p, "x", path), f"{path}.x"),
                    _number(_want(p, "y", path), f"{path}.y"),
                ),
                is_planar=is_planar,
            )
        )

    relations = []
    for i, r in enumerate(_array(raw.get("relations", []), "relations")):
        path = f"relations[{i}]"
        if not isinstance(r, dict):
            raise ParseError("not_an_object", path)
        relation = _want(r, "relation", path)
        if relation not in RELATION_KINDS:
            raise ParseError("bad_enum", f"{path}.relation", str(relation))
        relations.append(
            RelativeNormalRelation(
                anchor_a=_point2(_want(r, "a", path), f"{path}.a"),
                anchor_b=_point2(_want(r, "b", path), f"{path}.b"),
                relation=relation,
            )
        )

    return AnnotationDocument(
        image_id=image_id,
        intrinsics=intrinsics,
        region=region,
        boundaries=tuple(boundaries),
        normals=tuple(normals),
        planarity=tuple(planarity),
        relations=tuple(relations),
    )


def to_dict(doc: AnnotationDocument) -> dict:
    """Plain-dict form of a document, matching the JSON schema."""
    out: dict = {
        "schema_version": SCHEMA_VERSION,
        "image_id": doc.image_id,
        "intrinsics": {
            "focal_px": doc.intrinsics.focal_px,
            "width": doc.intrinsics.width,
            "height": doc.intrinsics.height,
        },
        "region": [[x, y] for x, y in doc.region.vertices],
        "boundaries": [],
        "normals": [
            {"x": s.position[0], "y": s.position[1], "nx": s.normal[0], "ny": s.normal[1], "nz": s.normal[2]}
            for s in doc.normals
        ],
        "planarity": [
            {"x": p.anchor[0], "y": p.anchor[1], "is_planar": p.is_planar} for p in doc.planarity
        ],
        "relations": [
            {"a": list(r.anchor_a), "b": list(r.anchor_b), "relation": r.relation}
            for r in doc.relations
        ],
    }
    for b in doc.boundaries:
        entry: dict = {"kind": b.kind, "points": [[x, y] for x, y in b.points]}
        if b.closer_side is not None:
            entry["closer_side"] = b.closer_side
        out["boundaries"].append(entry)
    return out


def serialize(doc: AnnotationDocument) -> bytes:
    """Canonical JSON bytes: sorted keys, no extra whitespace, UTF-8.

    ``parse(serialize(d)) == d`` for every well-typed document, and
    serialization of a parsed canonical byte string reproduces it exactly.
    """
    return json.dumps(to_dict(doc), sort_keys=True, separators=(",", ":")).encode("utf-8")
