/** 2D/3D helpers shared by the editor, the canvas renderer and tests. */

import type { Point } from "./schema.js";

export type Vec3 = [number, number, number];

export function pointInPolygon(x: number, y: number, polygon: Point[]): boolean {
  let inside = false;
  const n = polygon.length;
  for (let i = 0; i < n; i++) {
    const [x1, y1] = polygon[i];
    const [x2, y2] = polygon[(i + 1) % n];
    if ((y1 <= y && y < y2) || (y2 <= y && y < y1)) {
      const xCross = x1 + ((y - y1) * (x2 - x1)) / (y2 - y1);
      if (xCross <= x) inside = !inside;
    }
  }
  return inside;
}

function orient(a: Point, b: Point, c: Point): number {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

function properIntersect(p1: Point, p2: Point, p3: Point, p4: Point): boolean {
  const d1 = orient(p3, p4, p1);
  const d2 = orient(p3, p4, p2);
  const d3 = orient(p1, p2, p3);
  const d4 = orient(p1, p2, p4);
  return d1 !== 0 && d2 !== 0 && d3 !== 0 && d4 !== 0 && d1 > 0 !== d2 > 0 && d3 > 0 !== d4 > 0;
}

export function polygonSelfIntersects(polygon: Point[]): boolean {
  const n = polygon.length;
  for (let i = 0; i < n; i++) {
    for (let j = i + 2; j < n; j++) {
      if ((j + 1) % n === i) continue;
      if (properIntersect(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n])) {
        return true;
      }
    }
  }
  return false;
}

export function polygonArea(polygon: Point[]): number {
  let area = 0;
  for (let i = 0; i < polygon.length; i++) {
    const [x1, y1] = polygon[i];
    const [x2, y2] = polygon[(i + 1) % polygon.length];
    area += x1 * y2 - x2 * y1;
  }
  return Math.abs(area) / 2;
}

export function norm3(v: Vec3): number {
  return Math.hypot(v[0], v[1], v[2]);
}

export function normalize3(v: Vec3): Vec3 {
  const n = norm3(v);
  return n > 0 ? [v[0] / n, v[1] / n, v[2] / n] : [0, 0, 1];
}

/**
 * Trackball-on-hemisphere mapping for the normal widget.
 *
 * A drag offset (dx, dy) in widget pixels tilts the normal away from the
 * camera axis: the tilt angle grows linearly with drag distance and reaches
 * 90 degrees at `radius` pixels; the in-plane direction follows the drag.
 * No drag gives the frontal normal (0, 0, 1).
 */
export function dragToNormal(dx: number, dy: number, radius: number): Vec3 {
  const r = Math.hypot(dx, dy);
  if (r < 1e-12) return [0, 0, 1];
  const tilt = (Math.min(r / radius, 0.999) * Math.PI) / 2;
  const s = Math.sin(tilt);
  return [(s * dx) / r, (s * dy) / r, Math.cos(tilt)];
}

/** Inverse of dragToNormal, for re-editing an existing arrow. */
export function normalToDrag(n: Vec3, radius: number): [number, number] {
  const tilt = Math.acos(Math.min(Math.max(n[2], -1), 1));
  const r = (tilt / (Math.PI / 2)) * radius;
  const len = Math.hypot(n[0], n[1]);
  if (len < 1e-12) return [0, 0];
  return [(n[0] / len) * r, (n[1] / len) * r];
}

/**
 * Perspective projection of the normal-widget grid.
 *
 * The grid lies in the plane orthogonal to the normal, anchored at the
 * annotated pixel back-projected to a nominal depth, and is projected with
 * the document's focal length, so its foreshortening changes with focal_px
 * while the stored normal does not.
 */
export function normalGridLines(
  position: Point,
  normal: Vec3,
  focalPx: number,
  imageWidth: number,
  imageHeight: number,
  halfExtentPx = 16,
  steps = 4,
): Point[][] {
  const cx = imageWidth / 2;
  const cy = imageHeight / 2;
  const z0 = 1.0;
  const p0: Vec3 = [((position[0] - cx) * z0) / focalPx, ((position[1] - cy) * z0) / focalPx, z0];
  // arrow direction toward the viewer in point space is (nx, ny, -nz)
  const m = normalize3([normal[0], normal[1], -normal[2]]);
  const seed: Vec3 = Math.abs(m[2]) < 0.9 ? [0, 0, 1] : [0, 1, 0];
  const t1 = normalize3([
    m[1] * seed[2] - m[2] * seed[1],
    m[2] * seed[0] - m[0] * seed[2],
    m[0] * seed[1] - m[1] * seed[0],
  ]);
  const t2: Vec3 = [
    m[1] * t1[2] - m[2] * t1[1],
    m[2] * t1[0] - m[0] * t1[2],
    m[0] * t1[1] - m[1] * t1[0],
  ];
  const scale = (halfExtentPx / focalPx) * z0;

  const project = (p: Vec3): Point => [(focalPx * p[0]) / p[2] + cx, (focalPx * p[1]) / p[2] + cy];
  const at = (i: number, j: number): Point =>
    project([
      p0[0] + scale * ((i / steps) * t1[0] + (j / steps) * t2[0]),
      p0[1] + scale * ((i / steps) * t1[1] + (j / steps) * t2[1]),
      p0[2] + scale * ((i / steps) * t1[2] + (j / steps) * t2[2]),
    ]);

  const lines: Point[][] = [];
  for (let i = -steps; i <= steps; i++) {
    const row: Point[] = [];
    const col: Point[] = [];
    for (let j = -steps; j <= steps; j++) {
      row.push(at(i, j));
      col.push(at(j, i));
    }
    lines.push(row, col);
  }
  return lines;
}

/** Screen endpoint of the normal arrow for drawing. */
export function normalArrowTip(
  position: Point,
  normal: Vec3,
  focalPx: number,
  imageWidth: number,
  imageHeight: number,
  lengthPx = 24,
): Point {
  const cx = imageWidth / 2;
  const cy = imageHeight / 2;
  const z0 = 1.0;
  const p0: Vec3 = [((position[0] - cx) * z0) / focalPx, ((position[1] - cy) * z0) / focalPx, z0];
  const m = normalize3([normal[0], normal[1], -normal[2]]);
  const len = (lengthPx / focalPx) * z0;
  const tip: Vec3 = [p0[0] + len * m[0], p0[1] + len * m[1], p0[2] + len * m[2]];
  return [(focalPx * tip[0]) / Math.max(tip[2], 1e-6) + cx, (focalPx * tip[1]) / Math.max(tip[2], 1e-6) + cy];
}

/** Left-hand offset direction of a polyline segment in screen coordinates. */
export function leftOfDirection(dx: number, dy: number): [number, number] {
  const n = Math.hypot(dx, dy);
  if (n < 1e-12) return [0, 0];
  return [dy / n, -dx / n];
}
