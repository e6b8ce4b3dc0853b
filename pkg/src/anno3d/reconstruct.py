"""Depth from normals: per-surface integration, ordering LP, backprojection.

Each continuous surface is integrated independently in log-depth under
perspective projection, normalized to median depth 1, then the surfaces are
placed in depth order by a small linear program over one scale factor per
surface. Depth order constraints come from point pairs sampled across
occlusion boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.linalg import splu

from anno3d.normals import NormalMap
from anno3d.partition import LABEL_NONE, SurfacePartition

Z_SNAP_MIN = 0.3
D_CLAMP_FRACTION = 0.05  # denominator floor, as a fraction of the focal length
SLACK_PENALTY = 1e3


def snap_normals(normal_map: NormalMap, z_min: float = Z_SNAP_MIN) -> NormalMap:
    """Clamp n_z to at least ``z_min`` so integrated depth cannot stretch away.

    Pixels with n_z < z_min get n_z = z_min and their (n_x, n_y) rescaled to
    restore unit norm; all other pixels pass through untouched.
    """
    n = normal_map.normals.copy()
    valid = normal_map.valid_mask
    low = valid & (n[..., 2] < z_min)
    if low.any():
        xy = n[low][:, :2]
        r = np.linalg.norm(xy, axis=1)
        assert (r > 0).all(), "unit normal with n_z < z_min must have nonzero (n_x, n_y)"
        scale = np.sqrt(1.0 - z_min * z_min) / r
        vals = n[low]
        vals[:, 0] = xy[:, 0] * scale
        vals[:, 1] = xy[:, 1] * scale
        vals[:, 2] = z_min
        n[low] = vals
    return NormalMap(normals=n, valid_mask=valid.copy(), raw=normal_map.raw)


@dataclass
class SurfaceDepth:
    """Median-normalized depth of one continuous surface."""

    surface_id: int
    depth: np.ndarray  # (H, W) float64, 0 outside the surface
    mask: np.ndarray   # (H, W) bool


def centered_coords(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """u = x - width/2, v = y - height/2 grids."""
    u = np.arange(width, dtype=float) - width / 2.0
    v = np.arange(height, dtype=float) - height / 2.0
    return np.meshgrid(u, v)


def integrate_surface(
    normal_map: NormalMap,
    part: SurfacePartition,
    intrinsics_focal: float,
    surface_id: int,
) -> SurfaceDepth:
    """Least-squares log-depth integration of one continuous surface.

    Target gradients are g_u = -n_x / D, g_v = -n_y / D with
    D = u n_x + v n_y + f n_z clamped away from zero; differences are taken
    only between 4-neighbors of the same surface (free Neumann boundary).
    The gauge is fixed by scaling the exponentiated result to median 1.
    """
    mask = part.continuous_id == surface_id
    h, w = mask.shape
    count = int(mask.sum())
    if count == 0:
        raise ValueError(f"empty surface {surface_id}")
    depth = np.zeros((h, w))
    if count == 1:
        depth[mask] = 1.0
        return SurfaceDepth(surface_id, depth, mask)

    f = float(intrinsics_focal)
    uu, vv = centered_coords(w, h)
    n = normal_map.normals
    d = uu * n[..., 0] + vv * n[..., 1] + f * n[..., 2]
    d = np.maximum(d, D_CLAMP_FRACTION * f)
    gu = -n[..., 0] / d
    gv = -n[..., 1] / d

    index = np.full((h, w), -1, dtype=np.int64)
    index[mask] = np.arange(count)

    rows_i = []
    rows_j = []
    rhs = []
    right = mask[:, :-1] & mask[:, 1:]
    ys, xs = np.nonzero(right)
    rows_i.append(index[ys, xs])
    rows_j.append(index[ys, xs + 1])
    rhs.append(0.5 * (gu[ys, xs] + gu[ys, xs + 1]))
    down = mask[:-1, :] & mask[1:, :]
    ys, xs = np.nonzero(down)
    rows_i.append(index[ys, xs])
    rows_j.append(index[ys + 1, xs])
    rhs.append(0.5 * (gv[ys, xs] + gv[ys + 1, xs]))

    i_idx = np.concatenate(rows_i)
    j_idx = np.concatenate(rows_j)
    b = np.concatenate(rhs)
    m = len(b)
    if m == 0:
        depth[mask] = 1.0
        return SurfaceDepth(surface_id, depth, mask)

    rows = np.concatenate([np.arange(m), np.arange(m)])
    cols = np.concatenate([j_idx, i_idx])
    vals = np.concatenate([np.ones(m), -np.ones(m)])
    D = sp.coo_matrix((vals, (rows, cols)), shape=(m, count)).tocsr()

    # normal equations with the first pixel pinned to fix the constant gauge
    A = (D.T @ D).tocsc()
    rhs_n = D.T @ b
    free = np.arange(1, count)
    A_ff = A[free][:, free]
    rhs_f = rhs_n[free]
    lu = splu(A_ff.tocsc())
    z = np.zeros(count)
    z[1:] = lu.solve(rhs_f)

    zvals = np.exp(z - z.max())  # shift for overflow safety; gauge refixed below
    med = float(np.median(zvals))
    zvals = zvals / med
    depth[mask] = zvals
    return SurfaceDepth(surface_id, depth, mask)


@dataclass
class OrderingPair:
    closer: tuple[int, int]  # pixel (x, y)
    farther: tuple[int, int]
    curve_index: int


@dataclass
class OrderingConstraintSet:
    pairs: list[OrderingPair] = field(default_factory=list)
    warnings: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)


def sample_ordering_pairs(
    part: SurfacePartition, stride: int = 5, offset: int = 2
) -> OrderingConstraintSet:
    """Sample closer/farther pixel pairs along every occlusion curve.

    Walks each curve's pixel chain, and every ``stride`` pixels steps up to
    ``offset`` pixels along the boundary normal on both sides looking for
    plain region pixels of distinct continuous surfaces. Pairs with a missing
    side are skipped.
    """
    grid = part.grid
    out = OrderingConstraintSet()
    for curve in grid.curves:
        if not curve.is_occlusion:
            continue
        emitted = 0
        walk = [k for k in range(len(curve.chain)) if curve.in_region[k]]
        for wi in range(0, len(walk), stride):
            k = walk[wi]
            px, py = curve.chain[k]
            side = curve.side_dir[k]
            if np.hypot(side[0], side[1]) < 1e-12:
                continue

            def probe(direction):
                for step in range(1, offset + 1):
                    qx = int(round(px + direction[0] * step))
                    qy = int(round(py + direction[1] * step))
                    if not (0 <= qx < grid.width and 0 <= qy < grid.height):
                        continue
                    if not grid.region_mask[qy, qx]:
                        continue
                    if grid.boundary_label[qy, qx] != LABEL_NONE:
                        continue
                    return qx, qy
                return None

            closer = probe(side)
            farther = probe(-side)
            if closer is None or farther is None:
                continue
            cid_c = part.continuous_id[closer[1], closer[0]]
            cid_f = part.continuous_id[farther[1], farther[0]]
            if cid_c < 0 or cid_f < 0 or cid_c == cid_f:
                continue
            out.pairs.append(OrderingPair(closer, farther, curve.index))
            emitted += 1
        if emitted == 0:
            out.warnings.append({"code": "no_pairs_for_curve", "curve": curve.index})
    return out


@dataclass
class LPResult:
    scale_factors: np.ndarray  # (n_surfaces,)
    mode: str                  # "strict" or "soft"
    violated_pairs: list[int] = field(default_factory=list)


def solve_ordering_lp(
    surface_depths: dict[int, SurfaceDepth],
    pairs: OrderingConstraintSet,
    part: SurfacePartition,
    epsilon: float = 0.05,
    eta: float = 0.01,
    mode: str = "strict",
) -> LPResult:
    """Minimize the sum of per-surface scales under depth-order constraints.

    ``strict`` tries the exact LP first and falls back to the slack-penalized
    form when the sampled ordering is cyclic; ``soft`` goes straight to the
    penalized form. Violated pairs (positive slack) are reported by index.
    """
    if epsilon <= 0 or eta <= 0:
        raise ValueError("epsilon and eta must be positive")
    n_s = part.n_continuous
    k = len(pairs.pairs)

    def pair_coeffs():
        rows = []
        for pair in pairs.pairs:
            cx, cy = pair.closer
            fx, fy = pair.farther
            s_c = int(part.continuous_id[cy, cx])
            s_f = int(part.continuous_id[fy, fx])
            z_c = float(surface_depths[s_c].depth[cy, cx])
            z_f = float(surface_depths[s_f].depth[fy, fx])
            rows.append((s_c, z_c, s_f, z_f))
        return rows

    coeffs = pair_coeffs()

    if k == 0:
        return LPResult(np.full(n_s, eta), "strict" if mode == "strict" else "soft", [])

    if mode == "strict":
        a = sp.lil_matrix((k, n_s))
        for i, (s_c, z_c, s_f, z_f) in enumerate(coeffs):
            a[i, s_c] += z_c
            a[i, s_f] -= z_f
        res = linprog(
            c=np.ones(n_s),
            A_ub=a.tocsr(),
            b_ub=np.full(k, -epsilon),
            bounds=[(eta, None)] * n_s,
            method="highs",
        )
        if res.status == 0:
            return LPResult(np.asarray(res.x), "strict", [])

    # soft mode: one nonnegative slack per pair, heavily penalized
    a = sp.lil_matrix((k, n_s + k))
    for i, (s_c, z_c, s_f, z_f) in enumerate(coeffs):
        a[i, s_c] += z_c
        a[i, s_f] -= z_f
        a[i, n_s + i] = -1.0
    c = np.concatenate([np.ones(n_s), np.full(k, SLACK_PENALTY)])
    bounds = [(eta, None)] * n_s + [(0, None)] * k
    res = linprog(c=c, A_ub=a.tocsr(), b_ub=np.full(k, -epsilon), bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"ordering LP failed with status {res.status}: {res.message}")
    x = np.asarray(res.x)
    violated = [i for i in range(k) if x[n_s + i] > 1e-9]
    return LPResult(x[:n_s], "soft", violated)


def combine_depth(
    surface_depths: dict[int, SurfaceDepth], scales: np.ndarray, part: SurfacePartition
) -> np.ndarray:
    """Full-region raster X*_S * Z_S; zero outside the region."""
    h, w = part.shape
    depth = np.zeros((h, w))
    for sid, sd in surface_depths.items():
        depth[sd.mask] = scales[sid] * sd.depth[sd.mask]
    return depth


def normalize_depth(depth: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Rescale so the median over valid pixels is 1 (export normalization)."""
    med = float(np.median(depth[valid]))
    if med <= 0:
        return depth.copy()
    return depth / med


def backproject(
    depth: np.ndarray, valid: np.ndarray, focal_px: float, warnings: list | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Back-project a depth raster to 3D points X = uZ/f, Y = vZ/f, Z.

    Returns (points (N, 3), pixel indices (N, 2) as (x, y)); nonpositive
    depth pixels are excluded with a warning.
    """
    h, w = depth.shape
    use = valid & (depth > 0)
    if warnings is not None and int((valid & ~use).sum()) > 0:
        warnings.append({"code": "nonpositive_depth_excluded", "pixels": int((valid & ~use).sum())})
    uu, vv = centered_coords(w, h)
    ys, xs = np.nonzero(use)
    z = depth[ys, xs]
    pts = np.stack([uu[ys, xs] * z / focal_px, vv[ys, xs] * z / focal_px, z], axis=1)
    return pts, np.stack([xs, ys], axis=1)


def backproject_raster(depth: np.ndarray, valid: np.ndarray, focal_px: float) -> np.ndarray:
    """(H, W, 3) point raster; zeros where invalid."""
    h, w = depth.shape
    uu, vv = centered_coords(w, h)
    pts = np.zeros((h, w, 3))
    use = valid & (depth > 0)
    pts[..., 0] = np.where(use, uu * depth / focal_px, 0.0)
    pts[..., 1] = np.where(use, vv * depth / focal_px, 0.0)
    pts[..., 2] = np.where(use, depth, 0.0)
    return pts


@dataclass
class TriangleMesh:
    vertices: np.ndarray      # (N, 3) float
    faces: np.ndarray         # (M, 3) int
    vertex_pixels: np.ndarray  # (N, 2) int (x, y)
    vertex_surface: np.ndarray  # (N,) int continuous id


def build_mesh(depth: np.ndarray, part: SurfacePartition) -> TriangleMesh:
    """Two triangles per 2x2 quad whose corners share a continuous surface.

    Quads straddling occlusion boundaries are cut; folds stay connected
    because their pixels carry the surface id of their kept side.
    """
    grid = part.grid
    valid = grid.region_mask & (depth > 0)
    h, w = depth.shape
    index = np.full((h, w), -1, dtype=np.int64)
    ys, xs = np.nonzero(valid)
    index[ys, xs] = np.arange(len(xs))

    cid = part.continuous_id
    quad = valid[:-1, :-1] & valid[:-1, 1:] & valid[1:, :-1] & valid[1:, 1:]
    same = (
        (cid[:-1, :-1] == cid[:-1, 1:])
        & (cid[:-1, :-1] == cid[1:, :-1])
        & (cid[:-1, :-1] == cid[1:, 1:])
    )
    qys, qxs = np.nonzero(quad & same)
    v00 = index[qys, qxs]
    v10 = index[qys, qxs + 1]
    v01 = index[qys + 1, qxs]
    v11 = index[qys + 1, qxs + 1]
    faces = np.concatenate(
        [np.stack([v00, v01, v11], axis=1), np.stack([v00, v11, v10], axis=1)], axis=0
    ).astype(np.int64)

    return TriangleMesh(
        vertices=np.empty((len(xs), 0)),
        faces=faces,
        vertex_pixels=np.stack([xs, ys], axis=1),
        vertex_surface=cid[ys, xs].astype(np.int64),
    )


def mesh_with_vertices(mesh: TriangleMesh, depth: np.ndarray, focal_px: float) -> TriangleMesh:
    """Fill mesh vertex positions by back-projecting its pixel grid."""
    h, w = depth.shape
    uu, vv = centered_coords(w, h)
    xs = mesh.vertex_pixels[:, 0]
    ys = mesh.vertex_pixels[:, 1]
    z = depth[ys, xs]
    verts = np.stack([uu[ys, xs] * z / focal_px, vv[ys, xs] * z / focal_px, z], axis=1)
    return TriangleMesh(verts, mesh.faces, mesh.vertex_pixels, mesh.vertex_surface)
