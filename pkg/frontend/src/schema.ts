/**
 * Annotation document schema v1, mirroring the service's JSON contract.
 * Coordinates are image pixels (x right, y down); normals are unit vectors
 * with nz > 0.
 */

export type Point = [number, number];
export type BoundaryKind = "occlusion_sharp" | "occlusion_smooth" | "fold";
export type CloserSide = "left" | "right";
export type RelationKind = "neither" | "parallel" | "orthogonal";

export interface Intrinsics {
  focal_px: number;
  width: number;
  height: number;
}

export interface Boundary {
  kind: BoundaryKind;
  points: Point[];
  closer_side?: CloserSide;
}

export interface NormalSample {
  x: number;
  y: number;
  nx: number;
  ny: number;
  nz: number;
}

export interface PlanarityFlag {
  x: number;
  y: number;
  is_planar: boolean;
}

export interface Relation {
  a: Point;
  b: Point;
  relation: RelationKind;
}

export interface AnnotationDocument {
  schema_version: 1;
  image_id: string;
  intrinsics: Intrinsics;
  region: Point[];
  boundaries: Boundary[];
  normals: NormalSample[];
  planarity: PlanarityFlag[];
  relations: Relation[];
}

export function emptyDocument(imageId = "", width = 0, height = 0, focalPx = 0): AnnotationDocument {
  return {
    schema_version: 1,
    image_id: imageId,
    intrinsics: { focal_px: focalPx, width, height },
    region: [],
    boundaries: [],
    normals: [],
    planarity: [],
    relations: [],
  };
}

export function cloneDocument(doc: AnnotationDocument): AnnotationDocument {
  return JSON.parse(JSON.stringify(doc)) as AnnotationDocument;
}

/** Stable-key-order JSON so identical documents serialize identically. */
export function serializeDocument(doc: AnnotationDocument): string {
  const boundaries = doc.boundaries.map((b) => {
    const entry: Record<string, unknown> = { kind: b.kind, points: b.points };
    if (b.closer_side !== undefined) entry.closer_side = b.closer_side;
    return entry;
  });
  return JSON.stringify({
    schema_version: doc.schema_version,
    image_id: doc.image_id,
    intrinsics: {
      focal_px: doc.intrinsics.focal_px,
      width: doc.intrinsics.width,
      height: doc.intrinsics.height,
    },
    region: doc.region,
    boundaries,
    normals: doc.normals.map((n) => ({ x: n.x, y: n.y, nx: n.nx, ny: n.ny, nz: n.nz })),
    planarity: doc.planarity.map((p) => ({ x: p.x, y: p.y, is_planar: p.is_planar })),
    relations: doc.relations.map((r) => ({ a: r.a, b: r.b, relation: r.relation })),
  });
}

export class SchemaError extends Error {
  constructor(public path: string, message: string) {
    super(`${path}: ${message}`);
  }
}

function asPoint(value: unknown, path: string): Point {
  if (!Array.isArray(value) || value.length !== 2 || typeof value[0] !== "number" || typeof value[1] !== "number") {
    throw new SchemaError(path, "expected [x, y]");
  }
  return [value[0], value[1]];
}

export function parseDocument(text: string): AnnotationDocument {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new SchemaError("", `invalid JSON (${String(err)})`);
  }
  const obj = raw as Record<string, unknown>;
  if (obj == null || typeof obj !== "object") throw new SchemaError("", "expected an object");
  if (obj.schema_version !== 1) throw new SchemaError("schema_version", "unsupported version");
  const intr = obj.intrinsics as Record<string, unknown> | undefined;
  if (!intr || typeof intr.focal_px !== "number" || typeof intr.width !== "number" || typeof intr.height !== "number") {
    throw new SchemaError("intrinsics", "expected {focal_px, width, height}");
  }
  const doc = emptyDocument(String(obj.image_id ?? ""), intr.width, intr.height, intr.focal_px);
  doc.region = ((obj.region as unknown[]) ?? []).map((p, i) => asPoint(p, `region[${i}]`));
  for (const [i, b] of (((obj.boundaries as unknown[]) ?? []) as Record<string, unknown>[]).entries()) {
    const kind = b.kind as BoundaryKind;
    if (!["occlusion_sharp", "occlusion_smooth", "fold"].includes(kind)) {
      throw new SchemaError(`boundaries[${i}].kind`, String(b.kind));
    }
    const boundary: Boundary = {
      kind,
      points: ((b.points as unknown[]) ?? []).map((p, j) => asPoint(p, `boundaries[${i}].points[${j}]`)),
    };
    if (b.closer_side !== undefined) {
      if (b.closer_side !== "left" && b.closer_side !== "right") {
        throw new SchemaError(`boundaries[${i}].closer_side`, String(b.closer_side));
      }
      boundary.closer_side = b.closer_side;
    }
    doc.boundaries.push(boundary);
  }
  for (const [i, n] of (((obj.normals as unknown[]) ?? []) as Record<string, unknown>[]).entries()) {
    for (const key of ["x", "y", "nx", "ny", "nz"]) {
      if (typeof n[key] !== "number") throw new SchemaError(`normals[${i}].${key}`, "expected a number");
    }
    doc.normals.push({ x: n.x as number, y: n.y as number, nx: n.nx as number, ny: n.ny as number, nz: n.nz as number });
  }
  for (const [i, p] of (((obj.planarity as unknown[]) ?? []) as Record<string, unknown>[]).entries()) {
    if (typeof p.x !== "number" || typeof p.y !== "number" || typeof p.is_planar !== "boolean") {
      throw new SchemaError(`planarity[${i}]`, "expected {x, y, is_planar}");
    }
    doc.planarity.push({ x: p.x, y: p.y, is_planar: p.is_planar });
  }
  for (const [i, r] of (((obj.relations as unknown[]) ?? []) as Record<string, unknown>[]).entries()) {
    const relation = r.relation as RelationKind;
    if (!["neither", "parallel", "orthogonal"].includes(relation)) {
      throw new SchemaError(`relations[${i}].relation`, String(r.relation));
    }
    doc.relations.push({ a: asPoint(r.a, `relations[${i}].a`), b: asPoint(r.b, `relations[${i}].b`), relation });
  }
  return doc;
}
