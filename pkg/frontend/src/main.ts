/** DOM wiring: canvas drawing, tool handling, preview loop. */

import { ApiClient } from "./api.js";
import { Editor, type Tool } from "./editor.js";
import { leftOfDirection, normalArrowTip, normalGridLines } from "./geometry.js";
import type { Point } from "./schema.js";
import { elementFromPath } from "./validation.js";
import { PreviewViewer } from "./viewer.js";

const BOUNDARY_COLORS: Record<string, string> = {
  occlusion_sharp: "#e05252",
  occlusion_smooth: "#4fbf6b",
  fold: "#f2a33c",
};

const editor = new Editor();
const api = new ApiClient(localStorage.getItem("anno3d.api") ?? "http://127.0.0.1:8008");

const canvas = document.getElementById("annotate") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const previewCanvas = document.getElementById("preview") as HTMLCanvasElement;
const viewer = new PreviewViewer(previewCanvas);

let image: HTMLImageElement | null = null;
let draggingNormal: number | null = null;
let dragOrigin: Point | null = null;
let pendingRelationAnchor: Point | null = null;
let highlights: { kind: string; index: number }[] = [];

function $(id: string): HTMLElement {
  return document.getElementById(id)!;
}

// ---------------------------------------------------------------- image load

($("image-input") as HTMLInputElement).addEventListener("change", (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  const url = URL.createObjectURL(file);
  const img = new Image();
  img.onload = () => {
    image = img;
    canvas.width = img.naturalWidth;
    canvas.height = img.naturalHeight;
    const focal = img.naturalWidth * 2;
    ($("focal-input") as HTMLInputElement).value = String(focal);
    editor.setImage(file.name, img.naturalWidth, img.naturalHeight, focal);
    refresh();
  };
  img.src = url;
});

($("focal-input") as HTMLInputElement).addEventListener("change", (ev) => {
  const value = Number((ev.target as HTMLInputElement).value);
  if (value > 0) editor.setFocal(value);
  refresh();
});

// ---------------------------------------------------------------- tools

for (const tool of ["polygon", "boundary", "normal", "planarity", "relation"] as Tool[]) {
  $(`tool-${tool}`).addEventListener("click", () => {
    editor.tool = tool;
    document.querySelectorAll(".tool").forEach((el) => el.classList.remove("active"));
    $(`tool-${tool}`).classList.add("active");
    refresh();
  });
}

document.querySelectorAll<HTMLInputElement>("input[name=boundary-kind]").forEach((radio) =>
  radio.addEventListener("change", () => {
    editor.boundaryKind = radio.value as typeof editor.boundaryKind;
  }),
);

$("closer-side").addEventListener("click", () => {
  editor.closerSide = editor.closerSide === "left" ? "right" : "left";
  $("closer-side").textContent = `closer: ${editor.closerSide}`;
  // also flip the last drawn occlusion so the toggle is visible immediately
  for (let i = editor.doc.boundaries.length - 1; i >= 0; i--) {
    if (editor.doc.boundaries[i].kind !== "fold") {
      editor.toggleCloserSide(i);
      break;
    }
  }
  refresh();
});

($("relation-kind") as HTMLSelectElement).addEventListener("change", (ev) => {
  editor.relationKind = (ev.target as HTMLSelectElement).value as typeof editor.relationKind;
});

$("undo").addEventListener("click", () => {
  editor.undo();
  refresh();
});
$("redo").addEventListener("click", () => {
  editor.redo();
  refresh();
});
window.addEventListener("keydown", (ev) => {
  if (ev.ctrlKey && ev.key === "z") {
    editor.undo();
    refresh();
  } else if (ev.ctrlKey && ev.key === "y") {
    editor.redo();
    refresh();
  } else if (ev.key === "Enter" && editor.tool === "boundary") {
    editor.finishBoundary();
    refresh();
  } else if (ev.key === "Enter" && editor.tool === "polygon") {
    editor.closePolygon();
    refresh();
  }
});

// ---------------------------------------------------------------- canvas input

function canvasPoint(ev: MouseEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return [
    ((ev.clientX - rect.left) / rect.width) * canvas.width,
    ((ev.clientY - rect.top) / rect.height) * canvas.height,
  ];
}

canvas.addEventListener("mousedown", (ev) => {
  const p = canvasPoint(ev);
  switch (editor.tool) {
    case "polygon": {
      const first = editor.draftPolygon[0];
      if (first && editor.draftPolygon.length >= 3 && Math.hypot(p[0] - first[0], p[1] - first[1]) < 8) {
        editor.closePolygon();
      } else {
        editor.addPolygonVertex(p);
      }
      break;
    }
    case "boundary":
      editor.addBoundaryPoint(p);
      break;
    case "normal": {
      const near = editor.doc.normals.findIndex((n) => Math.hypot(n.x - p[0], n.y - p[1]) < 10);
      draggingNormal = near >= 0 ? near : editor.addNormal(p[0], p[1]);
      const sample = editor.doc.normals[draggingNormal];
      dragOrigin = [sample.x, sample.y];
      break;
    }
    case "planarity":
      editor.setPlanarity(p[0], p[1]);
      break;
    case "relation": {
      if (pendingRelationAnchor === null) {
        pendingRelationAnchor = p;
      } else {
        editor.addRelation(pendingRelationAnchor, p);
        pendingRelationAnchor = null;
      }
      break;
    }
  }
  refresh();
});

canvas.addEventListener("mousemove", (ev) => {
  if (draggingNormal === null || dragOrigin === null) return;
  const p = canvasPoint(ev);
  editor.dragNormal(draggingNormal, p[0] - dragOrigin[0], p[1] - dragOrigin[1]);
  refresh();
});

window.addEventListener("mouseup", () => {
  draggingNormal = null;
  dragOrigin = null;
});

canvas.addEventListener("dblclick", () => {
  if (editor.tool === "boundary") editor.finishBoundary();
  if (editor.tool === "polygon") editor.closePolygon();
  refresh();
});

// ---------------------------------------------------------------- drawing

function isHighlighted(kind: string, index: number): boolean {
  return highlights.some((h) => h.kind === kind && (h.index === index || h.index === -1));
}

function drawPolyline(points: Point[], color: string, width: number, dashed = false): void {
  if (points.length === 0) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.setLineDash(dashed ? [6, 4] : []);
  ctx.beginPath();
  ctx.moveTo(points[0][0], points[0][1]);
  for (const [x, y] of points.slice(1)) ctx.lineTo(x, y);
  ctx.stroke();
  ctx.setLineDash([]);
}

function draw(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (image) ctx.drawImage(image, 0, 0);

  const doc = editor.doc;
  if (doc.region.length >= 3) {
    drawPolyline([...doc.region, doc.region[0]], isHighlighted("region", -1) ? "#ffe066" : "#6ea8fe", 2);
  }
  drawPolyline(editor.draftPolygon, "#6ea8fe", 1.5, true);

  doc.boundaries.forEach((b, i) => {
    const color = isHighlighted("boundaries", i) ? "#ffe066" : BOUNDARY_COLORS[b.kind];
    drawPolyline(b.points, color, 2.5);
    if (b.closer_side) {
      for (let s = 0; s + 1 < b.points.length; s++) {
        const [x1, y1] = b.points[s];
        const [x2, y2] = b.points[s + 1];
        let [ox, oy] = leftOfDirection(x2 - x1, y2 - y1);
        if (b.closer_side === "right") {
          ox = -ox;
          oy = -oy;
        }
        const mx = (x1 + x2) / 2;
        const my = (y1 + y2) / 2;
        drawPolyline([[mx, my], [mx + 9 * ox, my + 9 * oy]], color, 1.5);
      }
    }
  });
  drawPolyline(editor.draftBoundary, BOUNDARY_COLORS[editor.boundaryKind], 1.5, true);

  doc.normals.forEach((n, i) => {
    const focal = doc.intrinsics.focal_px;
    const grid = normalGridLines([n.x, n.y], [n.nx, n.ny, n.nz], focal, doc.intrinsics.width, doc.intrinsics.height);
    for (const line of grid) drawPolyline(line, "rgba(79,191,107,0.8)", 1);
    const tip = normalArrowTip([n.x, n.y], [n.nx, n.ny, n.nz], focal, doc.intrinsics.width, doc.intrinsics.height);
    const color = isHighlighted("normals", i) ? "#ffe066" : "#4f7bf0";
    drawPolyline([[n.x, n.y], tip], color, 2.5);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(tip[0], tip[1], 3, 0, Math.PI * 2);
    ctx.fill();
  });

  doc.planarity.forEach((p, i) => {
    ctx.fillStyle = isHighlighted("planarity", i) ? "#ffe066" : p.is_planar ? "#d0f0ff" : "#f0c0ff";
    ctx.font = "12px sans-serif";
    ctx.fillText(p.is_planar ? "P" : "C", p.x + 4, p.y - 4);
    ctx.beginPath();
    ctx.arc(p.x, p.y, 2.5, 0, Math.PI * 2);
    ctx.fill();
  });

  doc.relations.forEach((r, i) => {
    const color = isHighlighted("relations", i) ? "#ffe066" : "#c792ea";
    drawPolyline([r.a, r.b], color, 1, true);
    const label = r.relation === "parallel" ? "||" : r.relation === "orthogonal" ? "T" : "--";
    ctx.fillStyle = color;
    ctx.fillText(label, (r.a[0] + r.b[0]) / 2, (r.a[1] + r.b[1]) / 2);
  });

  if (pendingRelationAnchor) {
    ctx.fillStyle = "#c792ea";
    ctx.beginPath();
    ctx.arc(pendingRelationAnchor[0], pendingRelationAnchor[1], 4, 0, Math.PI * 2);
    ctx.fill();
  }
}

// ---------------------------------------------------------------- panels

function refresh(): void {
  draw();

  const violations = editor.violations();
  const list = $("violations");
  list.innerHTML = "";
  for (const v of violations) {
    const li = document.createElement("li");
    li.textContent = `${v.code} @ ${v.path}`;
    list.appendChild(li);
  }
  ($("submit") as HTMLButtonElement).disabled = !editor.canSubmit();

  const badge = $("stale-badge");
  badge.hidden = !(editor.isPreviewStale() || editor.preview.status === "stale");

  const status = $("preview-status");
  status.className = editor.preview.status;
  status.textContent = {
    none: "no preview yet",
    pending: "reconstructing...",
    ready: "preview up to date",
    stale: "preview stale - resubmit",
    error: `error: ${editor.preview.errorCode ?? ""}`,
  }[editor.preview.status];
}

$("submit").addEventListener("click", () => {
  void submitPreview();
});

async function submitPreview(): Promise<void> {
  highlights = [];
  editor.markPreviewPending();
  refresh();
  try {
    const result = await api.reconstruct(editor.exportJSON());
    if (result.ok) {
      editor.markPreviewReady(result.report);
      await viewer.loadGlb(result.glb);
      const warnings = (result.report.warnings as { code: string }[]) ?? [];
      $("warnings").textContent = warnings.length
        ? `warnings: ${warnings.map((w) => w.code).join(", ")}`
        : "";
      $("report").textContent = JSON.stringify(result.report, null, 2);
    } else {
      editor.markPreviewError(result.errorCode, result.violations);
      highlights = result.violations
        .map((v) => elementFromPath(v.path))
        .filter((h): h is { kind: string; index: number } => h !== null);
      if (result.errorCode === "relation_conflict") {
        highlights.push({ kind: "relations", index: -1 });
      }
    }
  } catch (err) {
    if ((err as Error).name !== "AbortError") {
      editor.markPreviewError(String(err));
    }
  }
  refresh();
}

// ---------------------------------------------------------------- import/export

$("export").addEventListener("click", () => {
  const blob = new Blob([editor.exportJSON()], { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = `${editor.doc.image_id || "annotation"}.json`;
  a.click();
});

($("import-input") as HTMLInputElement).addEventListener("change", async (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  editor.importJSON(await file.text());
  canvas.width = editor.doc.intrinsics.width;
  canvas.height = editor.doc.intrinsics.height;
  ($("focal-input") as HTMLInputElement).value = String(editor.doc.intrinsics.focal_px);
  refresh();
});

refresh();
