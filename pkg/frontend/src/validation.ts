/**
 * Client-side validation: the document invariants that can be checked
 * without rasterizing surfaces. Surface-level checks (anchor resolution,
 * planar-surface normals per surface) are the server's job; its /v1/validate
 * report uses the same {code, path, message} shape.
 */

import { pointInPolygon, polygonArea, polygonSelfIntersects } from "./geometry.js";
import type { AnnotationDocument } from "./schema.js";

export interface Violation {
  code: string;
  path: string;
  message: string;
}

export function validateDocument(doc: AnnotationDocument): Violation[] {
  const out: Violation[] = [];
  const add = (code: string, path: string, message = "") => out.push({ code, path, message });

  if (!(doc.intrinsics.focal_px > 0)) add("focal_not_positive", "intrinsics.focal_px");
  if (doc.intrinsics.width <= 0 || doc.intrinsics.height <= 0) {
    add("bad_image_size", "intrinsics");
    return out;
  }

  if (doc.region.length < 3) {
    add("polygon_too_small", "region", `${doc.region.length} vertices`);
  } else {
    if (polygonSelfIntersects(doc.region)) add("polygon_self_intersecting", "region");
    if (polygonArea(doc.region) < 4) add("region_too_small", "region");
    doc.region.forEach(([x, y], i) => {
      if (x < 0 || y < 0 || x > doc.intrinsics.width || y > doc.intrinsics.height) {
        add("vertex_out_of_bounds", `region[${i}]`);
      }
    });
  }
  const regionOk = out.length === 0;

  doc.boundaries.forEach((b, i) => {
    if (b.points.length < 2) add("boundary_too_short", `boundaries[${i}]`);
    if (b.kind === "fold" && b.closer_side !== undefined) add("fold_has_side", `boundaries[${i}]`);
    if (b.kind !== "fold" && b.closer_side === undefined) add("occlusion_missing_side", `boundaries[${i}]`);
  });

  doc.normals.forEach((n, i) => {
    const norm = Math.hypot(n.nx, n.ny, n.nz);
    if (Math.abs(norm - 1) > 1e-6) add("normal_not_unit", `normals[${i}]`, norm.toFixed(6));
    if (n.nz <= 0) add("normal_not_front_facing", `normals[${i}]`);
    if (regionOk && !pointInPolygon(n.x, n.y, doc.region)) add("normal_outside_region", `normals[${i}]`);
  });

  if (regionOk) {
    doc.planarity.forEach((p, i) => {
      if (!pointInPolygon(p.x, p.y, doc.region)) add("anchor_outside", `planarity[${i}]`);
    });
    doc.relations.forEach((r, i) => {
      if (!pointInPolygon(r.a[0], r.a[1], doc.region)) add("anchor_outside", `relations[${i}].a`);
      if (!pointInPolygon(r.b[0], r.b[1], doc.region)) add("anchor_outside", `relations[${i}].b`);
    });
  }
  return out;
}

/** Locate the document element a violation path refers to, for highlighting. */
export function elementFromPath(path: string): { kind: string; index: number } | null {
  const match = /^(region|boundaries|normals|planarity|relations)(?:\[(\d+)\])?/.exec(path);
  if (!match) return null;
  return { kind: match[1], index: match[2] === undefined ? -1 : Number(match[2]) };
}
