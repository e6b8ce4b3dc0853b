"""Corpus statistics: focal length, boundary/curvature mix, surface counts."""

from __future__ import annotations

from anno3d.document import AnnotationDocument, OCCLUSION_KINDS
from anno3d.partition import partition, rasterize
from anno3d.pipeline import working_scale
from anno3d.config import ReconstructionConfig


def corpus_stats(docs: list[AnnotationDocument], config: ReconstructionConfig | None = None) -> dict:
    """Histogram report over a document set.

    Focal lengths are binned in image-width units (the telephoto range sits
    almost entirely inside [1, 10)). Region buckets count documents whose
    boundaries are occlusion only / fold only / both, and whose planarity
    flags mark planar only / curved only / both.
    """
    config = config or ReconstructionConfig()
    focal_bins = {"lt_1": 0, "1_to_10": 0, "ge_10": 0}
    boundary_mix = {"occlusion_only": 0, "fold_only": 0, "both": 0}
    curvature_mix = {"planar_only": 0, "curved_only": 0, "both": 0}
    continuous_counts: dict[str, int] = {}
    smooth_counts: dict[str, int] = {}

    for doc in docs:
        rel_focal = doc.intrinsics.focal_px / doc.intrinsics.width
        if rel_focal < 1.0:
            focal_bins["lt_1"] += 1
        elif rel_focal < 10.0:
            focal_bins["1_to_10"] += 1
        else:
            focal_bins["ge_10"] += 1

        has_occ = any(b.kind in OCCLUSION_KINDS for b in doc.boundaries)
        has_fold = any(b.kind == "fold" for b in doc.boundaries)
        if has_occ and has_fold:
            boundary_mix["both"] += 1
        elif has_occ:
            boundary_mix["occlusion_only"] += 1
        elif has_fold:
            boundary_mix["fold_only"] += 1

        has_planar = any(p.is_planar for p in doc.planarity)
        has_curved = any(not p.is_planar for p in doc.planarity)
        if has_planar and has_curved:
            curvature_mix["both"] += 1
        elif has_planar:
            curvature_mix["planar_only"] += 1
        elif has_curved:
            curvature_mix["curved_only"] += 1

        part = partition(rasterize(doc, working_scale(doc, config)))
        key_c = str(part.n_continuous)
        key_s = str(part.n_smooth)
        continuous_counts[key_c] = continuous_counts.get(key_c, 0) + 1
        smooth_counts[key_s] = smooth_counts.get(key_s, 0) + 1

    return {
        "documents": len(docs),
        "focal_length_image_widths": focal_bins,
        "region_boundary_mix": boundary_mix,
        "region_curvature_mix": curvature_mix,
        "continuous_surface_counts": dict(sorted(continuous_counts.items(), key=lambda kv: int(kv[0]))),
        "smooth_surface_counts": dict(sorted(smooth_counts.items(), key=lambda kv: int(kv[0]))),
    }
