"""Rasterization of annotations and the continuous/smooth surface partition.

The annotated region and its boundary curves are scan-converted onto a pixel
grid. Occlusion curves cut the region into *continuous surfaces*; fold curves
further cut those into *smooth surfaces*. Boundary pixels themselves are
assigned to a side: occlusion pixels to their closer side, fold pixels to the
left side of the polyline direction (a fixed, deterministic choice).

Pixel conventions: integer pixel (i, j) covers [i, i+1) x [j, j+1) with its
center at (i + 0.5, j + 0.5); polygon fill is even-odd at pixel centers with
a half-open rule so abutting polygons would not double-fill. For a direction
d = (dx, dy) in screen coordinates (y down), the left side is (dy, -dx).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi

from anno3d.document import AnnotationDocument, OCCLUSION_KINDS

LABEL_NONE = 0
LABEL_OCC_SHARP = 1
LABEL_OCC_SMOOTH = 2
LABEL_FOLD = 3

_KIND_TO_LABEL = {
    "occlusion_sharp": LABEL_OCC_SHARP,
    "occlusion_smooth": LABEL_OCC_SMOOTH,
    "fold": LABEL_FOLD,
}

# 4-neighbor offsets in fixed (up, down, left, right) order, (dx, dy).
NEIGHBOR_OFFSETS = ((0, -1), (0, 1), (-1, 0), (1, 0))

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class RasterError(ValueError):
    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}" + (f": {message}" if message else ""))


class AnchorError(ValueError):
    def __init__(self, code: str, point):
        self.code = code
        self.point = tuple(point)
        super().__init__(f"{code}: {tuple(point)}")


def polygon_area(vertices) -> float:
    """Shoelace area (absolute value) of a polygon in pixel units."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


def polygon_self_intersects(vertices) -> bool:
    n = len(vertices)
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if (j + 1) % n == i:
                continue
            if _segments_properly_intersect(*edges[i], *edges[j]):
                return True
    return False


def point_in_polygon(x: float, y: float, vertices) -> bool:
    """Even-odd crossing test counting edge crossings at or left of (x, y)."""
    inside = False
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if (y1 <= y < y2) or (y2 <= y < y1):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x_cross <= x:
                inside = not inside
    return inside


def fill_polygon(vertices, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill at pixel centers, half-open on edges."""
    mask = np.zeros((height, width), dtype=bool)
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    ymin = max(0, int(np.floor(v[:, 1].min() - 0.5)))
    ymax = min(height - 1, int(np.ceil(v[:, 1].max())))
    for j in range(ymin, ymax + 1):
        yc = j + 0.5
        xs = []
        for i in range(n):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % n]
            if (y1 <= yc < y2) or (y2 <= yc < y1):
                xs.append(x1 + (yc - y1) * (x2 - x1) / (y2 - y1))
        xs.sort()
        for k in range(0, len(xs) - 1, 2):
            # pixel centers i + 0.5 in [xs[k], xs[k+1])
            lo = int(np.ceil(xs[k] - 0.5))
            hi = int(np.ceil(xs[k + 1] - 0.5))
            lo = max(lo, 0)
            hi = min(hi, width)
            if hi > lo:
                mask[j, lo:hi] = True
    return mask


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """8-connected integer line from (x0, y0) to (x1, y1), inclusive."""
    points = []
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return points


def _thin_chain(chain: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Drop corner pixels that only thicken the chain at segment joins.

    Single greedy pass: a pixel is redundant when the last kept pixel is
    already 8-adjacent to the next one. One pass cuts staircase corners
    without collapsing deliberately retraced strokes (which stay as drawn).
    """
    if len(chain) <= 2:
        return chain
    out = [chain[0]]
    for i in range(1, len(chain) - 1):
        prev = out[-1]
        nxt = chain[i + 1]
        if max(abs(prev[0] - nxt[0]), abs(prev[1] - nxt[1])) <= 1:
            continue
        out.append(chain[i])
    out.append(chain[-1])
    return out


@dataclass
class CurveRaster:
    """Rasterized boundary polyline: ordered pixel chain with local frames."""

    index: int
    kind: str
    closer_side: str | None
    chain: np.ndarray     # (K, 2) int32, (x, y)
    tangent: np.ndarray   # (K, 2) float64 unit tangents; (0, 0) where degenerate
    side_dir: np.ndarray  # (K, 2) float64: closer side (occlusion) / kept side (fold)
    in_region: np.ndarray  # (K,) bool

    @property
    def is_occlusion(self) -> bool:
        return self.kind in OCCLUSION_KINDS


@dataclass
class PixelGrid:
    """Region and boundary rasters at the working resolution."""

    width: int
    height: int
    scale: float
    region_mask: np.ndarray     # (H, W) bool
    boundary_label: np.ndarray  # (H, W) uint8, LABEL_* values
    boundary_id: np.ndarray     # (H, W) int32, curve index or -1
    side_dir: np.ndarray        # (H, W, 2) float32: per boundary pixel side direction
    curves: list[CurveRaster] = field(default_factory=list)
    warnings: list[dict] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def occlusion_mask(self) -> np.ndarray:
        return (self.boundary_label == LABEL_OCC_SHARP) | (self.boundary_label == LABEL_OCC_SMOOTH)

    def fold_mask(self) -> np.ndarray:
        return self.boundary_label == LABEL_FOLD


def _chain_tangents(chain: np.ndarray, window: int = 2) -> np.ndarray:
    """Central-difference unit tangents over +-``window`` chain samples."""
    k = len(chain)
    tangents = np.zeros((k, 2), dtype=float)
    pts = chain.astype(float)
    for i in range(k):
        a = pts[max(i - window, 0)]
        b = pts[min(i + window, k - 1)]
        d = b - a
        norm = float(np.hypot(d[0], d[1]))
        if norm < 1e-12 and k > 1:
            a = pts[max(i - 1, 0)]
            b = pts[min(i + 1, k - 1)]
            d = b - a
            norm = float(np.hypot(d[0], d[1]))
        tangents[i] = d / norm if norm >= 1e-12 else (0.0, 0.0)
    return tangents


def rasterize(doc: AnnotationDocument, scale: float = 1.0) -> PixelGrid:
    """Scan-convert a document's region and boundaries at ``scale``.

    ``scale`` maps annotation pixels to working-raster pixels. Boundary
    curves are drawn one pixel wide (Bresenham, chain-thinned so joints do
    not thicken) and clipped to the region mask. When curves overlap, the
    last-drawn curve wins except that a fold never displaces an occlusion.
    """
    if scale <= 0:
        raise RasterError("bad_scale", str(scale))
    width = max(1, int(round(doc.intrinsics.width * scale)))
    height = max(1, int(round(doc.intrinsics.height * scale)))

    verts = [(x * scale, y * scale) for x, y in doc.region.vertices]
    if polygon_area(verts) < 4.0:
        raise RasterError("region_too_small", f"area {polygon_area(verts):.3f} px^2 at working scale")

    region = fill_polygon(verts, width, height)
    boundary_label = np.zeros((height, width), dtype=np.uint8)
    boundary_id = np.full((height, width), -1, dtype=np.int32)
    side_dir = np.zeros((height, width, 2), dtype=np.float32)
    # stamp priority: occlusion beats fold, later curve beats earlier
    priority = np.full((height, width), -1, dtype=np.int64)

    warnings: list[dict] = []
    curves: list[CurveRaster] = []
    for idx, curve in enumerate(doc.boundaries):
        pts = [(x * scale, y * scale) for x, y in curve.points]
        chain: list[tuple[int, int]] = []
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            seg = bresenham(int(np.floor(x0)), int(np.floor(y0)), int(np.floor(x1)), int(np.floor(y1)))
            if chain and seg and seg[0] == chain[-1]:
                seg = seg[1:]
            chain.extend(seg)
        if not chain:
            chain = [(int(np.floor(pts[0][0])), int(np.floor(pts[0][1])))]
        chain = _thin_chain(chain)
        arr = np.asarray(chain, dtype=np.int32)
        tangent = _chain_tangents(arr)

        left = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        if curve.kind == "fold":
            sides = left
        elif curve.closer_side == "left":
            sides = left
        else:
            sides = -left

        degenerate = np.hypot(tangent[:, 0], tangent[:, 1]) < 1e-12
        if degenerate.any():
            warnings.append({"code": "degenerate_tangent", "curve": idx, "pixels": int(degenerate.sum())})

        inside = np.zeros(len(arr), dtype=bool)
        prio = (1 if curve.kind in OCCLUSION_KINDS else 0) * (1 << 32) + idx
        conflict = False
        for k, (px, py) in enumerate(arr):
            if not (0 <= px < width and 0 <= py < height) or not region[py, px]:
                continue
            inside[k] = True
            if priority[py, px] == prio and not conflict:
                prev = side_dir[py, px]
                if prev[0] * sides[k, 0] + prev[1] * sides[k, 1] < 0:
                    conflict = True
                    warnings.append({"code": "closer_side_conflict", "curve": idx, "pixel": [int(px), int(py)]})
            if prio >= priority[py, px]:
                priority[py, px] = prio
                boundary_label[py, px] = _KIND_TO_LABEL[curve.kind]
                boundary_id[py, px] = idx
                side_dir[py, px] = sides[k]
        curves.append(
            CurveRaster(
                index=idx,
                kind=curve.kind,
                closer_side=curve.closer_side,
                chain=arr,
                tangent=tangent,
                side_dir=sides,
                in_region=inside,
            )
        )

    return PixelGrid(
        width=width,
        height=height,
        scale=scale,
        region_mask=region,
        boundary_label=boundary_label,
        boundary_id=boundary_id,
        side_dir=side_dir,
        curves=curves,
        warnings=warnings,
    )


@dataclass
class SurfacePartition:
    """Continuous/smooth surface labeling plus the side-aware adjacency."""

    grid: PixelGrid
    continuous_id: np.ndarray  # (H, W) int32, -1 outside region
    smooth_id: np.ndarray      # (H, W) int32, -1 outside region
    n_continuous: int
    n_smooth: int
    smooth_to_continuous: np.ndarray  # (n_smooth,) int32

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def neighbors(self, x: int, y: int) -> list[tuple[int, int]]:
        """Phi(p): in-region 4-neighbors of pixel (x, y)."""
        out = []
        for dx, dy in NEIGHBOR_OFFSETS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < self.grid.width and 0 <= ny < self.grid.height and self.grid.region_mask[ny, nx]:
                out.append((nx, ny))
        return out

    def side_neighbors(self, x: int, y: int) -> list[tuple[int, int]]:
        """Gamma(p) for a boundary pixel: in-region neighbors on its kept side."""
        sx, sy = self.grid.side_dir[y, x]
        out = []
        for dx, dy in NEIGHBOR_OFFSETS:
            if dx * sx + dy * sy <= 0:
                continue
            nx, ny = x + dx, y + dy
            if 0 <= nx < self.grid.width and 0 <= ny < self.grid.height and self.grid.region_mask[ny, nx]:
                out.append((nx, ny))
        return out

    def surface_pixels(self, which: str, sid: int) -> np.ndarray:
        ids = self.continuous_id if which == "continuous" else self.smooth_id
        ys, xs = np.nonzero(ids == sid)
        return np.stack([xs, ys], axis=1)


def _assign_boundary_pixels(grid: PixelGrid, continuous_id, smooth_id):
    """Give boundary pixels the labels of their kept-side neighbors."""
    h, w = grid.shape
    boundary = (grid.boundary_label != LABEL_NONE) & grid.region_mask
    is_occ = grid.occlusion_mask()
    ys, xs = np.nonzero(boundary)
    pending = list(zip(xs.tolist(), ys.tolist()))

    def try_assign(px, py, restrict_side, cont_snap, smooth_snap):
        best = None
        best_dot = 0.0
        sx, sy = grid.side_dir[py, px]
        for dx, dy in NEIGHBOR_OFFSETS:
            nx, ny = px + dx, py + dy
            if not (0 <= nx < w and 0 <= ny < h) or not grid.region_mask[ny, nx]:
                continue
            dot = dx * sx + dy * sy
            if restrict_side and dot <= 0:
                continue
            if smooth_snap[ny, nx] < 0:
                continue
            key = dot if restrict_side else 0.0
            if best is None or key > best_dot + 1e-12:
                best = (nx, ny)
                best_dot = key
        if best is None:
            return False
        nx, ny = best
        if is_occ[py, px]:
            continuous_id[py, px] = cont_snap[ny, nx]
        smooth_id[py, px] = smooth_snap[ny, nx]
        return True

    for restrict_side in (True, False):
        for _ in range(h + w):
            if not pending:
                break
            cont_snap = continuous_id.copy()
            smooth_snap = smooth_id.copy()
            remaining = []
            for px, py in pending:
                if not try_assign(px, py, restrict_side, cont_snap, smooth_snap):
                    remaining.append((px, py))
            if len(remaining) == len(pending):
                break
            pending = remaining
    return pending


def partition(grid: PixelGrid) -> SurfacePartition:
    """Label continuous and smooth surfaces and assign boundary pixels.

    Continuous surfaces are 4-connected components of the region minus
    occlusion pixels; smooth surfaces of the region minus all boundary
    pixels. Occlusion pixels join their closer-side surface, fold pixels the
    kept (left) side; both labels are copied from the same donor neighbor so
    the smooth labeling always refines the continuous one.
    """
    h, w = grid.shape
    occ = grid.occlusion_mask()
    any_boundary = grid.boundary_label != LABEL_NONE

    cont_interior = grid.region_mask & ~occ
    smooth_interior = grid.region_mask & ~any_boundary

    cont_lab, n_cont = ndi.label(cont_interior, structure=_FOUR_CONNECTED)
    smooth_lab, n_smooth = ndi.label(smooth_interior, structure=_FOUR_CONNECTED)

    continuous_id = np.where(cont_interior, cont_lab - 1, -1).astype(np.int32)
    smooth_id = np.where(smooth_interior, smooth_lab - 1, -1).astype(np.int32)

    unassigned = _assign_boundary_pixels(grid, continuous_id, smooth_id)

    # Boundary pixels with no labeled neighbor at all form their own islands.
    if unassigned:
        island = np.zeros((h, w), dtype=bool)
        for px, py in unassigned:
            island[py, px] = True
        isl_lab, n_isl = ndi.label(island, structure=_FOUR_CONNECTED)
        for k in range(1, n_isl + 1):
            sel = isl_lab == k
            sel_occ = sel & occ
            sel_fold = sel & ~occ
            if sel_occ.any():
                continuous_id[sel_occ] = n_cont
                n_cont += 1
            if sel_fold.any():
                # folds inherit the continuous label they sit in; islands of
                # folds with no neighbors only occur in degenerate regions
                continuous_id[sel_fold & (continuous_id < 0)] = n_cont
                if (sel_fold & (continuous_id == n_cont)).any():
                    n_cont += 1
            smooth_id[sel] = n_smooth
            n_smooth += 1

    smooth_to_continuous = np.full(n_smooth, -1, dtype=np.int32)
    valid = smooth_id >= 0
    sids = smooth_id[valid]
    cids = continuous_id[valid]
    # first continuous label seen per smooth surface (they agree by construction)
    order = np.argsort(sids, kind="stable")
    seen = np.zeros(n_smooth, dtype=bool)
    for s, c in zip(sids[order], cids[order]):
        if not seen[s]:
            smooth_to_continuous[s] = c
            seen[s] = True

    return SurfacePartition(
        grid=grid,
        continuous_id=continuous_id,
        smooth_id=smooth_id,
        n_continuous=int(n_cont),
        n_smooth=int(n_smooth),
        smooth_to_continuous=smooth_to_continuous,
    )


def anchor_pixel(part: SurfacePartition, point) -> tuple[int, int]:
    """Working-raster pixel under an annotation-space point."""
    x = int(np.floor(point[0] * part.grid.scale))
    y = int(np.floor(point[1] * part.grid.scale))
    return x, y


def resolve_anchor(part: SurfacePartition, point) -> tuple[int, int]:
    """Resolve an anchor point to (continuous_id, smooth_id).

    Raises :class:`AnchorError` with code ``anchor_outside`` when the point
    is not inside the region and ``anchor_on_boundary`` when it falls on a
    boundary pixel.
    """
    x, y = anchor_pixel(part, point)
    if not (0 <= x < part.grid.width and 0 <= y < part.grid.height) or not part.grid.region_mask[y, x]:
        raise AnchorError("anchor_outside", point)
    if part.grid.boundary_label[y, x] != LABEL_NONE:
        raise AnchorError("anchor_on_boundary", point)
    return int(part.continuous_id[y, x]), int(part.smooth_id[y, x])


def resample_ids(ids: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbor resampling of an id raster to another resolution."""
    h, w = ids.shape
    ys = np.minimum((np.arange(height) * (h / height)).astype(int), h - 1)
    xs = np.minimum((np.arange(width) * (w / width)).astype(int), w - 1)
    return ids[np.ix_(ys, xs)]
