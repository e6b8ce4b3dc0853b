/**
 * Editor state machine: document mutations, undo/redo, preview staleness.
 *
 * Every mutation snapshots the previous state onto the undo stack (as exact
 * JSON bytes, so undo/redo round-trips state) and marks a ready preview
 * stale. The DOM layer owns only rendering and event translation.
 */

import { dragToNormal, type Vec3 } from "./geometry.js";
import {
  cloneDocument,
  emptyDocument,
  parseDocument,
  serializeDocument,
  type AnnotationDocument,
  type BoundaryKind,
  type CloserSide,
  type Point,
  type RelationKind,
} from "./schema.js";
import { validateDocument, type Violation } from "./validation.js";

export type Tool = "polygon" | "boundary" | "normal" | "planarity" | "relation" | "select";

export type PreviewStatus = "none" | "pending" | "ready" | "stale" | "error";

export interface PreviewState {
  status: PreviewStatus;
  report: unknown | null;
  violations: Violation[];
  errorCode: string | null;
  /** serialized document of the last successful submit */
  submittedDoc: string | null;
}

interface Snapshot {
  doc: string;
  draftPolygon: string;
  draftBoundary: string;
}

export class Editor {
  doc: AnnotationDocument = emptyDocument();
  tool: Tool = "polygon";
  boundaryKind: BoundaryKind = "occlusion_sharp";
  closerSide: CloserSide = "left";
  relationKind: RelationKind = "parallel";

  draftPolygon: Point[] = [];
  draftBoundary: Point[] = [];

  preview: PreviewState = { status: "none", report: null, violations: [], errorCode: null, submittedDoc: null };

  private undoStack: Snapshot[] = [];
  private redoStack: Snapshot[] = [];

  // --- snapshots -----------------------------------------------------------

  private snapshot(): Snapshot {
    return {
      doc: serializeDocument(this.doc),
      draftPolygon: JSON.stringify(this.draftPolygon),
      draftBoundary: JSON.stringify(this.draftBoundary),
    };
  }

  private restore(snap: Snapshot): void {
    this.doc = parseDocument(snap.doc);
    this.draftPolygon = JSON.parse(snap.draftPolygon) as Point[];
    this.draftBoundary = JSON.parse(snap.draftBoundary) as Point[];
  }

  private beginMutation(): void {
    this.undoStack.push(this.snapshot());
    this.redoStack = [];
  }

  private touched(): void {
    if (this.preview.status === "ready") this.preview.status = "stale";
  }

  undo(): boolean {
    const snap = this.undoStack.pop();
    if (!snap) return false;
    this.redoStack.push(this.snapshot());
    this.restore(snap);
    this.touched();
    return true;
  }

  redo(): boolean {
    const snap = this.redoStack.pop();
    if (!snap) return false;
    this.undoStack.push(this.snapshot());
    this.restore(snap);
    this.touched();
    return true;
  }

  // --- image / intrinsics --------------------------------------------------

  setImage(imageId: string, width: number, height: number, focalPx: number): void {
    this.beginMutation();
    this.doc = emptyDocument(imageId, width, height, focalPx);
    this.draftPolygon = [];
    this.draftBoundary = [];
    this.preview = { status: "none", report: null, violations: [], errorCode: null, submittedDoc: null };
  }

  setFocal(focalPx: number): void {
    this.beginMutation();
    this.doc.intrinsics.focal_px = focalPx;
    this.touched();
  }

  // --- region polygon --------------------------------------------------------

  addPolygonVertex(p: Point): void {
    if (this.doc.region.length >= 3) return; // region already closed
    this.beginMutation();
    this.draftPolygon.push(p);
    this.touched();
  }

  /** Close the draft polygon into the document region. */
  closePolygon(): boolean {
    if (this.draftPolygon.length < 3) return false;
    this.beginMutation();
    this.doc.region = this.draftPolygon.map((p) => [p[0], p[1]] as Point);
    this.draftPolygon = [];
    this.touched();
    return true;
  }

  get regionClosed(): boolean {
    return this.doc.region.length >= 3;
  }

  // --- boundaries --------------------------------------------------------------

  addBoundaryPoint(p: Point): void {
    this.beginMutation();
    this.draftBoundary.push(p);
    this.touched();
  }

  finishBoundary(): boolean {
    if (this.draftBoundary.length < 2) return false;
    this.beginMutation();
    const boundary = {
      kind: this.boundaryKind,
      points: this.draftBoundary.map((p) => [p[0], p[1]] as Point),
    } as AnnotationDocument["boundaries"][number];
    if (this.boundaryKind !== "fold") boundary.closer_side = this.closerSide;
    this.doc.boundaries.push(boundary);
    this.draftBoundary = [];
    this.touched();
    return true;
  }

  toggleCloserSide(index: number): void {
    const boundary = this.doc.boundaries[index];
    if (!boundary || boundary.kind === "fold" || boundary.closer_side === undefined) return;
    this.beginMutation();
    boundary.closer_side = boundary.closer_side === "left" ? "right" : "left";
    this.touched();
  }

  // --- normals -------------------------------------------------------------------

  addNormal(x: number, y: number, normal: Vec3 = [0, 0, 1]): number {
    this.beginMutation();
    this.doc.normals.push({ x, y, nx: normal[0], ny: normal[1], nz: normal[2] });
    this.touched();
    return this.doc.normals.length - 1;
  }

  /** Orient an existing normal from a drag offset (widget pixels). */
  dragNormal(index: number, dx: number, dy: number, radius = 48): void {
    const sample = this.doc.normals[index];
    if (!sample) return;
    this.beginMutation();
    const [nx, ny, nz] = dragToNormal(dx, dy, radius);
    sample.nx = nx;
    sample.ny = ny;
    sample.nz = nz;
    this.touched();
  }

  setNormal(index: number, normal: Vec3): void {
    const sample = this.doc.normals[index];
    if (!sample) return;
    this.beginMutation();
    [sample.nx, sample.ny, sample.nz] = normal;
    this.touched();
  }

  // --- planarity and relations ------------------------------------------------------

  /** Toggle or create a planarity flag near (x, y); returns its index. */
  setPlanarity(x: number, y: number, isPlanar?: boolean, snapRadius = 8): number {
    this.beginMutation();
    const existing = this.doc.planarity.findIndex((p) => Math.hypot(p.x - x, p.y - y) <= snapRadius);
    if (existing >= 0) {
      this.doc.planarity[existing].is_planar = isPlanar ?? !this.doc.planarity[existing].is_planar;
      this.touched();
      return existing;
    }
    this.doc.planarity.push({ x, y, is_planar: isPlanar ?? true });
    this.touched();
    return this.doc.planarity.length - 1;
  }

  addRelation(a: Point, b: Point, relation?: RelationKind): number {
    this.beginMutation();
    this.doc.relations.push({ a: [a[0], a[1]], b: [b[0], b[1]], relation: relation ?? this.relationKind });
    this.touched();
    return this.doc.relations.length - 1;
  }

  removeElement(kind: "boundaries" | "normals" | "planarity" | "relations", index: number): void {
    const list = this.doc[kind] as unknown[];
    if (index < 0 || index >= list.length) return;
    this.beginMutation();
    list.splice(index, 1);
    this.touched();
  }

  // --- validation and preview ----------------------------------------------------------

  violations(): Violation[] {
    return validateDocument(this.doc);
  }

  canSubmit(): boolean {
    return this.regionClosed && this.violations().length === 0;
  }

  exportJSON(): string {
    return serializeDocument(this.doc);
  }

  importJSON(text: string): void {
    this.beginMutation();
    this.doc = parseDocument(text);
    this.draftPolygon = [];
    this.draftBoundary = [];
    this.touched();
  }

  markPreviewPending(): void {
    this.preview.status = "pending";
    this.preview.errorCode = null;
    this.preview.violations = [];
  }

  markPreviewReady(report: unknown): void {
    this.preview.status = "ready";
    this.preview.report = report;
    this.preview.submittedDoc = this.exportJSON();
  }

  markPreviewError(errorCode: string, violations: Violation[] = []): void {
    this.preview.status = "error";
    this.preview.errorCode = errorCode;
    this.preview.violations = violations;
  }

  /** True when the document changed after the last successful submit. */
  isPreviewStale(): boolean {
    if (this.preview.status === "stale") return true;
    if (this.preview.status !== "ready" || this.preview.submittedDoc === null) return false;
    return this.exportJSON() !== this.preview.submittedDoc;
  }

  previewClean(): boolean {
    return this.preview.status === "ready" && !this.isPreviewStale();
  }
}

export function documentFingerprint(doc: AnnotationDocument): string {
  return serializeDocument(cloneDocument(doc));
}
