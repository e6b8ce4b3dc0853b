"""Document validation: every type invariant becomes a coded violation.

Violations are data, not exceptions: :func:`validate` always returns a
report. Checks that need surface identity (planarity anchors, relations)
rasterize the document at its native resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from anno3d.document import AnnotationDocument, OCCLUSION_KINDS
from anno3d.partition import (
    AnchorError,
    RasterError,
    partition,
    point_in_polygon,
    polygon_area,
    polygon_self_intersects,
    rasterize,
    resolve_anchor,
)

UNIT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str = ""

    def to_dict(self) -> dict:
        return {"code": self.code, "path": self.path, "message": self.message}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, path: str, message: str = ""):
        self.violations.append(Violation(code, path, message))

    def warn(self, code: str, path: str, message: str = ""):
        self.warnings.append(Violation(code, path, message))

    def to_dict(self) -> dict:
        return {
            "valid": self.ok,
            "violations": [v.to_dict() for v in self.violations],
            "warnings": [v.to_dict() for v in self.warnings],
        }


def _all_finite(*values) -> bool:
    return all(math.isfinite(v) for v in values)


def validate(doc: AnnotationDocument) -> ValidationReport:
    """Check every document invariant; empty report iff all hold."""
    report = ValidationReport()
    intr = doc.intrinsics

    # JSON permits NaN/Infinity literals; reject them before any geometry
    if not _all_finite(intr.focal_px):
        report.add("not_finite", "intrinsics.focal_px")
        return report
    for i, (x, y) in enumerate(doc.region.vertices):
        if not _all_finite(x, y):
            report.add("not_finite", f"region[{i}]")
            return report
    for i, b in enumerate(doc.boundaries):
        for j, (x, y) in enumerate(b.points):
            if not _all_finite(x, y):
                report.add("not_finite", f"boundaries[{i}].points[{j}]")
    for i, s in enumerate(doc.normals):
        if not _all_finite(*s.position, *s.normal):
            report.add("not_finite", f"normals[{i}]")
    for i, p in enumerate(doc.planarity):
        if not _all_finite(*p.anchor):
            report.add("not_finite", f"planarity[{i}]")
    for i, r in enumerate(doc.relations):
        if not _all_finite(*r.anchor_a, *r.anchor_b):
            report.add("not_finite", f"relations[{i}]")
    if report.violations:
        return report

    if not (intr.focal_px > 0):
        report.add("focal_not_positive", "intrinsics.focal_px", str(intr.focal_px))
    if intr.width <= 0 or intr.height <= 0:
        report.add("bad_image_size", "intrinsics", f"{intr.width}x{intr.height}")
        return report  # nothing geometric can be checked

    verts = doc.region.vertices
    if len(verts) < 3:
        report.add("polygon_too_small", "region", f"{len(verts)} vertices")
    else:
        if polygon_self_intersects(verts):
            report.add("polygon_self_intersecting", "region")
        for i, (x, y) in enumerate(verts):
            if not (0 <= x <= intr.width and 0 <= y <= intr.height):
                report.add("vertex_out_of_bounds", f"region[{i}]", f"({x}, {y})")
        if polygon_area(verts) < 4.0:
            report.add("region_too_small", "region", f"area {polygon_area(verts):.3f} px^2")

    region_ok = not report.violations

    for i, b in enumerate(doc.boundaries):
        path = f"boundaries[{i}]"
        if len(b.points) < 2:
            report.add("boundary_too_short", path, f"{len(b.points)} points")
        if b.kind == "fold" and b.closer_side is not None:
            report.add("fold_has_side", path)
        if b.kind in OCCLUSION_KINDS and b.closer_side is None:
            report.add("occlusion_missing_side", path)
        if region_ok:
            for j, (x, y) in enumerate(b.points):
                if not point_in_polygon(x, y, verts):
                    report.warn("boundary_point_outside_region", f"{path}.points[{j}]", f"({x}, {y})")

    for i, s in enumerate(doc.normals):
        path = f"normals[{i}]"
        norm = math.sqrt(sum(c * c for c in s.normal))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            report.add("normal_not_unit", path, f"norm {norm:.6f}")
        if s.normal[2] <= 0:
            report.add("normal_not_front_facing", path, f"nz {s.normal[2]:.6f}")
        if region_ok and not point_in_polygon(s.position[0], s.position[1], verts):
            report.add("normal_outside_region", path, f"{s.position}")

    if not region_ok:
        return report

    # Surface-level checks need the partition at native resolution.
    try:
        grid = rasterize(doc, scale=1.0)
    except RasterError as exc:
        report.add(exc.code, "region")
        return report
    part = partition(grid)
    for w in grid.warnings:
        report.warn(w["code"], f"boundaries[{w.get('curve', '?')}]")

    planar_smooth: dict[int, int] = {}
    flags_by_smooth: dict[int, bool] = {}
    for i, p in enumerate(doc.planarity):
        path = f"planarity[{i}]"
        try:
            _, sid = resolve_anchor(part, p.anchor)
        except AnchorError as exc:
            report.add(exc.code, path, f"{p.anchor}")
            continue
        if sid in flags_by_smooth and flags_by_smooth[sid] != p.is_planar:
            report.add("planarity_conflict", path, f"surface {sid}")
        flags_by_smooth[sid] = p.is_planar
        if p.is_planar:
            planar_smooth[sid] = i

    normals_by_smooth: dict[int, int] = {}
    for i, s in enumerate(doc.normals):
        try:
            _, sid = resolve_anchor(part, s.position)
        except AnchorError:
            continue  # already reported above when outside region
        normals_by_smooth[sid] = normals_by_smooth.get(sid, 0) + 1

    for sid, flag_idx in planar_smooth.items():
        if normals_by_smooth.get(sid, 0) == 0:
            report.add("planar_missing_normal", f"planarity[{flag_idx}]", f"surface {sid}")

    for i, r in enumerate(doc.relations):
        path = f"relations[{i}]"
        sids = []
        bad = False
        for label, anchor in (("a", r.anchor_a), ("b", r.anchor_b)):
            try:
                _, sid = resolve_anchor(part, anchor)
            except AnchorError as exc:
                report.add(exc.code, f"{path}.{label}", f"{anchor}")
                bad = True
                continue
            if not flags_by_smooth.get(sid, False):
                report.add("relation_on_nonplanar", f"{path}.{label}", f"surface {sid}")
                bad = True
            sids.append(sid)
        if not bad and len(sids) == 2 and sids[0] == sids[1]:
            report.add("relation_same_surface", path, f"surface {sids[0]}")

    return report
