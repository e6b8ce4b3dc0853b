"""End-to-end reconstruction of one document into depth, cloud and mesh.

This is the single library path used by both the CLI and the HTTP service:
validate, rasterize at the working resolution, partition, solve normals,
snap, integrate per continuous surface, order surfaces with the LP, then
back-project. The result carries every intermediate needed by exports and
by the evaluation code (which uses reconstructions as ground truth).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from anno3d.config import ReconstructionConfig
from anno3d.document import AnnotationDocument
from anno3d.normals import (
    NormalConstraintSet,
    NormalMap,
    RelationConflictError,
    adjust_relative_normals,
    annotated_constraints,
    smooth_occlusion_constraints,
    solve_dense_normals,
)
from anno3d.partition import PixelGrid, SurfacePartition, partition, rasterize
from anno3d.reconstruct import (
    LPResult,
    OrderingConstraintSet,
    SurfaceDepth,
    TriangleMesh,
    backproject,
    build_mesh,
    combine_depth,
    integrate_surface,
    mesh_with_vertices,
    normalize_depth,
    sample_ordering_pairs,
    snap_normals,
    solve_ordering_lp,
)
from anno3d.validation import validate


class ReconstructionError(ValueError):
    def __init__(self, code: str, detail=None):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}" + (f": {detail}" if detail is not None else ""))


@dataclass
class Reconstruction:
    """Everything produced for one document at the working resolution."""

    document: AnnotationDocument
    config: ReconstructionConfig
    grid: PixelGrid
    partition: SurfacePartition
    normal_map: NormalMap          # solved, snapped
    surface_depths: dict[int, SurfaceDepth]
    pairs: OrderingConstraintSet
    lp: LPResult
    depth: np.ndarray              # X*_S * Z_S, pre export normalization
    export_depth: np.ndarray       # global median normalized
    points: np.ndarray             # (N, 3) from export_depth
    point_pixels: np.ndarray       # (N, 2)
    point_surfaces: np.ndarray     # (N,)
    mesh: TriangleMesh
    working_focal: float
    warnings: list[dict] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def valid_mask(self) -> np.ndarray:
        return self.grid.region_mask

    def run_report(self) -> dict:
        return {
            "image_id": self.document.image_id,
            "config": self.config.to_dict(),
            "working_resolution": [self.grid.width, self.grid.height],
            "working_focal_px": self.working_focal,
            "surfaces": {
                "continuous": self.partition.n_continuous,
                "smooth": self.partition.n_smooth,
            },
            "ordering_pairs": len(self.pairs),
            "lp_mode_used": self.lp.mode,
            "lp_violated_pairs": self.lp.violated_pairs,
            "scale_factors": [float(x) for x in self.lp.scale_factors],
            "warnings": self.warnings,
            "timings_s": {k: round(v, 6) for k, v in self.timings.items()},
        }


def working_scale(doc: AnnotationDocument, config: ReconstructionConfig) -> float:
    """Scale mapping annotation pixels to the working raster (never upscales)."""
    max_dim = max(doc.intrinsics.width, doc.intrinsics.height)
    return min(1.0, config.working_resolution / max_dim)


def reconstruct_document(
    doc: AnnotationDocument,
    config: ReconstructionConfig | None = None,
    check: bool = True,
) -> Reconstruction:
    """Run the full pipeline; raises :class:`ReconstructionError` on failure.

    ``check=False`` skips document validation (used internally by the
    rotation-search metric, which feeds deliberately rotated normals).
    """
    config = config or ReconstructionConfig()
    warnings: list[dict] = []
    timings: dict[str, float] = {}

    if check:
        report = validate(doc)
        if not report.ok:
            raise ReconstructionError("validation_failed", report.to_dict())

    t0 = time.perf_counter()
    scale = working_scale(doc, config)
    grid = rasterize(doc, scale)
    part = partition(grid)
    warnings.extend(grid.warnings)
    timings["rasterize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    constraints = NormalConstraintSet()
    for pixel, vec, source in smooth_occlusion_constraints(part, warnings):
        constraints.add(pixel, vec, source)
    for pixel, vec, source in annotated_constraints(doc, part, warnings):
        constraints.add(pixel, vec, source)
    try:
        for pixel, vec, source in adjust_relative_normals(doc, part):
            constraints.add(pixel, vec, source)
    except RelationConflictError as exc:
        raise ReconstructionError("relation_conflict", {"cycle": exc.cycle}) from exc
    solved, solve_warnings = solve_dense_normals(part, constraints)
    warnings.extend(solve_warnings)
    snapped = snap_normals(solved)
    timings["normals"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    focal = doc.intrinsics.focal_px * scale
    surface_depths = {
        sid: integrate_surface(snapped, part, focal, sid) for sid in range(part.n_continuous)
    }
    timings["integration"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pairs = sample_ordering_pairs(part, stride=config.pair_stride, offset=config.pair_offset)
    warnings.extend(pairs.warnings)
    lp = solve_ordering_lp(surface_depths, pairs, part, config.epsilon, config.eta, config.lp_mode)
    if lp.mode == "soft" and config.lp_mode == "strict":
        warnings.append({"code": "lp_soft_fallback", "violated_pairs": lp.violated_pairs})
    depth = combine_depth(surface_depths, lp.scale_factors, part)
    export_depth = normalize_depth(depth, grid.region_mask)
    timings["ordering"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    points, point_pixels = backproject(export_depth, grid.region_mask, focal, warnings)
    point_surfaces = part.continuous_id[point_pixels[:, 1], point_pixels[:, 0]].astype(np.int64)
    mesh = build_mesh(export_depth, part)
    mesh = mesh_with_vertices(mesh, export_depth, focal)
    timings["export"] = time.perf_counter() - t0

    return Reconstruction(
        document=doc,
        config=config,
        grid=grid,
        partition=part,
        normal_map=snapped,
        surface_depths=surface_depths,
        pairs=pairs,
        lp=lp,
        depth=depth,
        export_depth=export_depth,
        points=points,
        point_pixels=point_pixels,
        point_surfaces=point_surfaces,
        mesh=mesh,
        working_focal=focal,
        warnings=warnings,
        timings=timings,
    )
