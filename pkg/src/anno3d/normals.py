"""Dense surface normals from sparse constraints.

The solver spreads known normals over each smooth surface by minimizing a
quadratic smoothness energy on the 4-neighbor graph. Occlusion pixels couple
only to their closer-side neighbors and fold pixels only to their kept side,
so the propagation stops exactly at boundary curves. Known normals come from
worker annotations, from the image-plane normals implied by smooth occlusion
boundaries, and from relation-adjusted annotations; each is pinned as a
Dirichlet condition.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from anno3d.document import AnnotationDocument
from anno3d.partition import (
    LABEL_NONE,
    NEIGHBOR_OFFSETS,
    SurfacePartition,
    anchor_pixel,
    resolve_anchor,
)

SOURCE_PRECEDENCE = {"smooth_occlusion": 0, "annotated": 1, "relation_adjusted": 2}


class RelationConflictError(ValueError):
    """Contradictory relation set, e.g. parallel and orthogonal on one pair."""

    def __init__(self, cycle: list[int], message: str = ""):
        self.code = "relation_conflict"
        self.cycle = cycle
        super().__init__(f"relation_conflict: surfaces {cycle}" + (f" ({message})" if message else ""))


@dataclass
class NormalConstraintSet:
    """Per-pixel unit normal constraints with source precedence.

    Later entries override earlier ones only when their source precedence is
    at least as high (relation_adjusted > annotated > smooth_occlusion).
    """

    entries: dict[tuple[int, int], tuple[np.ndarray, str]] = field(default_factory=dict)

    def add(self, pixel: tuple[int, int], normal, source: str) -> None:
        vec = np.asarray(normal, dtype=float)
        norm = float(np.linalg.norm(vec))
        if norm < 1e-12:
            raise ValueError(f"degenerate constraint normal at {pixel}")
        vec = vec / norm
        prev = self.entries.get(pixel)
        if prev is None or SOURCE_PRECEDENCE[source] >= SOURCE_PRECEDENCE[prev[1]]:
            self.entries[pixel] = (vec, source)

    def __len__(self) -> int:
        return len(self.entries)

    def items(self):
        return self.entries.items()


@dataclass
class NormalMap:
    """Per-pixel unit normals over the region.

    ``raw`` keeps the pre-normalization solver output; exported rasters use
    ``normals``.
    """

    normals: np.ndarray     # (H, W, 3) float64, unit on valid pixels
    valid_mask: np.ndarray  # (H, W) bool
    raw: np.ndarray | None = None


def _nearest_region_pixel(part: SurfacePartition, x: int, y: int, radius: int = 2):
    grid = part.grid
    if 0 <= x < grid.width and 0 <= y < grid.height and grid.region_mask[y, x]:
        return x, y
    for r in range(1, radius + 1):
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if max(abs(dx), abs(dy)) != r:
                    continue
                nx, ny = x + dx, y + dy
                if 0 <= nx < grid.width and 0 <= ny < grid.height and grid.region_mask[ny, nx]:
                    return nx, ny
    return None


def annotated_constraints(
    doc: AnnotationDocument, part: SurfacePartition, warnings: list | None = None
) -> list[tuple[tuple[int, int], np.ndarray, str]]:
    """Map worker normal samples onto working-raster pixels."""
    out = []
    for i, sample in enumerate(doc.normals):
        x, y = anchor_pixel(part, sample.position)
        hit = _nearest_region_pixel(part, x, y)
        if hit is None:
            if warnings is not None:
                warnings.append({"code": "normal_sample_outside_raster", "index": i})
            continue
        out.append((hit, np.asarray(sample.normal, dtype=float), "annotated"))
    return out


def smooth_occlusion_constraints(
    part: SurfacePartition, warnings: list | None = None
) -> list[tuple[tuple[int, int], np.ndarray, str]]:
    """Image-plane normals implied by smooth occlusion boundaries.

    At each smooth-occlusion pixel the closer surface curves away from the
    viewer, so its normal there lies in the image plane, orthogonal to the
    curve and pointing toward the farther side. The constraint is applied at
    the closer-side neighbor pixels; z stays exactly 0 (the z-snap happens
    later, before integration).
    """
    grid = part.grid
    out = []
    for curve in grid.curves:
        if curve.kind != "occlusion_smooth":
            continue
        for k, (px, py) in enumerate(curve.chain):
            if not curve.in_region[k]:
                continue
            if grid.boundary_id[py, px] != curve.index:
                continue  # overwritten by a later curve
            t = curve.tangent[k]
            if np.hypot(t[0], t[1]) < 1e-12:
                if warnings is not None:
                    warnings.append({"code": "degenerate_tangent", "curve": curve.index, "pixel": [int(px), int(py)]})
                continue
            closer = curve.side_dir[k]
            n2 = np.array([t[1], -t[0]])
            if float(n2 @ closer) > 0:
                n2 = -n2  # point toward the farther side
            normal = np.array([n2[0], n2[1], 0.0])
            for dx, dy in NEIGHBOR_OFFSETS:
                if dx * closer[0] + dy * closer[1] <= 0:
                    continue
                qx, qy = px + dx, py + dy
                if not (0 <= qx < grid.width and 0 <= qy < grid.height):
                    continue
                if not grid.region_mask[qy, qx] or grid.boundary_label[qy, qx] != LABEL_NONE:
                    continue
                out.append(((qx, qy), normal, "smooth_occlusion"))
    return out


class _UnionFind:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, a: int) -> int:
        self.parent.setdefault(a, a)
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _rotate_about(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    return (
        v * np.cos(angle)
        + np.cross(axis, v) * np.sin(angle)
        + axis * float(axis @ v) * (1.0 - np.cos(angle))
    )


def _parallel_path(parallel_edges: list[tuple[int, int]], start: int, goal: int) -> list[int]:
    adj: dict[int, list[int]] = {}
    for a, b in parallel_edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    prev = {start: start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            break
        for nxt in adj.get(cur, []):
            if nxt not in prev:
                prev[nxt] = cur
                queue.append(nxt)
    if goal not in prev:
        return [start, goal]
    path = [goal]
    while path[-1] != start:
        path.append(prev[path[-1]])
    return path[::-1]


def adjust_relative_normals(
    doc: AnnotationDocument,
    part: SurfacePartition,
    max_iterations: int = 100,
    tolerance: float = 1e-6,
) -> list[tuple[tuple[int, int], np.ndarray, str]]:
    """Enforce parallel/orthogonal relations on the annotated normals.

    Parallel surfaces are merged into one variable initialized at the
    normalized mean of their annotations (the on-sphere midpoint for a
    pair); orthogonal pairs are handled by cyclic projection, opening or
    closing each pair's angle symmetrically to 90 degrees until the largest
    per-sweep change falls below ``tolerance`` radians.
    """
    planar: dict[int, bool] = {}
    for flag in doc.planarity:
        _, sid = resolve_anchor(part, flag.anchor)
        planar[sid] = flag.is_planar

    samples_by_sid: dict[int, list[tuple[tuple[int, int], np.ndarray]]] = {}
    for sample in doc.normals:
        x, y = anchor_pixel(part, sample.position)
        hit = _nearest_region_pixel(part, x, y)
        if hit is None:
            continue
        _, sid = (int(part.continuous_id[hit[1], hit[0]]), int(part.smooth_id[hit[1], hit[0]]))
        samples_by_sid.setdefault(sid, []).append((hit, np.asarray(sample.normal, dtype=float)))

    uf = _UnionFind()
    parallel_edges: list[tuple[int, int]] = []
    orthogonal_pairs: list[tuple[int, int]] = []
    involved: set[int] = set()
    for rel in doc.relations:
        if rel.relation == "neither":
            continue
        _, sid_a = resolve_anchor(part, rel.anchor_a)
        _, sid_b = resolve_anchor(part, rel.anchor_b)
        for sid, anchor in ((sid_a, rel.anchor_a), (sid_b, rel.anchor_b)):
            if not planar.get(sid, False):
                raise ValueError(f"relation_on_nonplanar: surface {sid} at {anchor}")
            if sid not in samples_by_sid:
                raise ValueError(f"relation_missing_normal: surface {sid}")
        involved.update((sid_a, sid_b))
        if rel.relation == "parallel":
            parallel_edges.append((sid_a, sid_b))
            uf.union(sid_a, sid_b)
        else:
            orthogonal_pairs.append((sid_a, sid_b))

    if not involved:
        return []

    for a, b in orthogonal_pairs:
        if uf.find(a) == uf.find(b):
            raise RelationConflictError(_parallel_path(parallel_edges, a, b))

    groups: dict[int, list[int]] = {}
    for sid in involved:
        groups.setdefault(uf.find(sid), []).append(sid)

    vectors: dict[int, np.ndarray] = {}
    for root, members in groups.items():
        stack = [vec for sid in members for _, vec in samples_by_sid[sid]]
        mean = np.mean(stack, axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < 1e-8:
            raise RelationConflictError(sorted(members), "antipodal annotations in a parallel group")
        vectors[root] = mean / norm

    ortho_group_pairs = [(uf.find(a), uf.find(b)) for a, b in orthogonal_pairs]
    for _ in range(max_iterations):
        max_change = 0.0
        for ga, gb in ortho_group_pairs:
            u, v = vectors[ga], vectors[gb]
            cos = float(np.clip(u @ v, -1.0, 1.0))
            theta = np.arccos(cos)
            axis = np.cross(u, v)
            if np.linalg.norm(axis) < 1e-12:
                # annotations (anti)parallel: pick a stable perpendicular plane
                basis = np.eye(3)[int(np.argmin(np.abs(u)))]
                axis = np.cross(u, basis)
            delta = 0.5 * (np.pi / 2.0 - theta)
            new_u = _rotate_about(u, axis, -delta)
            new_v = _rotate_about(v, axis, delta)
            new_u /= np.linalg.norm(new_u)
            new_v /= np.linalg.norm(new_v)
            max_change = max(
                max_change,
                float(np.arccos(np.clip(u @ new_u, -1.0, 1.0))),
                float(np.arccos(np.clip(v @ new_v, -1.0, 1.0))),
            )
            vectors[ga], vectors[gb] = new_u, new_v
        if max_change < tolerance:
            break

    out = []
    for root, members in groups.items():
        vec = vectors[root]
        if vec[2] < 0:
            vec = -vec
        for sid in members:
            for pixel, _ in samples_by_sid[sid]:
                out.append((pixel, vec.copy(), "relation_adjusted"))
    return out


def build_constraints(
    doc: AnnotationDocument, part: SurfacePartition, warnings: list | None = None
) -> NormalConstraintSet:
    """Full constraint set: smooth occlusion, annotated, relation-adjusted."""
    cs = NormalConstraintSet()
    for pixel, vec, source in smooth_occlusion_constraints(part, warnings):
        cs.add(pixel, vec, source)
    for pixel, vec, source in annotated_constraints(doc, part, warnings):
        cs.add(pixel, vec, source)
    for pixel, vec, source in adjust_relative_normals(doc, part):
        cs.add(pixel, vec, source)
    return cs


def _smoothness_terms(part: SurfacePartition, index: np.ndarray):
    """Directed term list (p, q) of the quadratic smoothness energy."""
    grid = part.grid
    region = grid.region_mask
    interior = region & (grid.boundary_label == LABEL_NONE)

    rows = []
    cols = []
    # interior-interior adjacencies, both directions
    right = interior[:, :-1] & interior[:, 1:]
    ys, xs = np.nonzero(right)
    a = index[ys, xs]
    b = index[ys, xs + 1]
    rows.extend((a, b))
    cols.extend((b, a))
    down = interior[:-1, :] & interior[1:, :]
    ys, xs = np.nonzero(down)
    a = index[ys, xs]
    b = index[ys + 1, xs]
    rows.extend((a, b))
    cols.extend((b, a))

    # boundary pixels couple to their kept side only
    bys, bxs = np.nonzero(region & (grid.boundary_label != LABEL_NONE))
    brow = []
    bcol = []
    for px, py in zip(bxs.tolist(), bys.tolist()):
        sx, sy = grid.side_dir[py, px]
        for dx, dy in NEIGHBOR_OFFSETS:
            if dx * sx + dy * sy <= 0:
                continue
            qx, qy = px + dx, py + dy
            if 0 <= qx < grid.width and 0 <= qy < grid.height and region[qy, qx]:
                brow.append(index[py, px])
                bcol.append(index[qy, qx])
    if brow:
        rows.append(np.asarray(brow, dtype=np.int64))
        cols.append(np.asarray(bcol, dtype=np.int64))

    p = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    q = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    return p, q


def solve_dense_normals(
    part: SurfacePartition, constraints: NormalConstraintSet
) -> tuple[NormalMap, list[dict]]:
    """Minimize the smoothness energy subject to pinned normals.

    Returns the unit normal map and a warning list. Graph components not
    reachable from any constraint are filled with (0, 0, 1) and reported as
    ``unconstrained_surface``.
    """
    grid = part.grid
    region = grid.region_mask
    h, w = grid.shape
    n = int(region.sum())
    index = np.full((h, w), -1, dtype=np.int64)
    index[region] = np.arange(n)
    ys, xs = np.nonzero(region)

    p, q = _smoothness_terms(part, index)

    # one quadratic term per directed pair: A += (e_p - e_q)(e_p - e_q)^T
    data = np.concatenate([np.ones(len(p)), np.ones(len(p)), -np.ones(len(p)), -np.ones(len(p))])
    rows = np.concatenate([p, q, p, q])
    cols = np.concatenate([p, q, q, p])
    A = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()

    adjacency = sp.coo_matrix((np.ones(len(p)), (p, q)), shape=(n, n))
    n_comp, comp = connected_components(adjacency, directed=False)

    fixed_vec = np.zeros((n, 3))
    fixed_mask = np.zeros(n, dtype=bool)
    for (cx, cy), (vec, _src) in constraints.items():
        if 0 <= cx < w and 0 <= cy < h and region[cy, cx]:
            i = index[cy, cx]
            fixed_vec[i] = vec
            fixed_mask[i] = True

    solution = np.zeros((n, 3))
    warnings: list[dict] = []
    constrained_comps = set(comp[fixed_mask].tolist())
    unconstrained = [c for c in range(n_comp) if c not in constrained_comps]
    if unconstrained:
        sel = np.isin(comp, unconstrained)
        solution[sel] = (0.0, 0.0, 1.0)
        sids = sorted(set(part.smooth_id[ys[sel], xs[sel]].tolist()))
        warnings.append({"code": "unconstrained_surface", "smooth_ids": [int(s) for s in sids]})

    for c in sorted(constrained_comps):
        members = np.nonzero(comp == c)[0]
        fixed_local = fixed_mask[members]
        free_local = ~fixed_local
        vals = fixed_vec[members]
        if not free_local.any():
            solution[members] = vals
            continue
        A_c = A[members][:, members].tocsc()
        A_ff = A_c[free_local][:, free_local]
        A_fk = A_c[free_local][:, fixed_local]
        rhs = -A_fk @ vals[fixed_local]
        lu = splu(A_ff.tocsc())
        sol_free = np.column_stack([lu.solve(rhs[:, k]) for k in range(3)])
        out = np.empty((len(members), 3))
        out[fixed_local] = vals[fixed_local]
        out[free_local] = sol_free
        solution[members] = out

    raw = np.zeros((h, w, 3))
    raw[ys, xs] = solution

    norms = np.linalg.norm(solution, axis=1)
    unit = solution.copy()
    degenerate = norms < 1e-8
    unit[degenerate] = (0.0, 0.0, 1.0)
    unit[~degenerate] /= norms[~degenerate, None]
    flip = unit[:, 2] < 0
    unit[flip] *= -1.0

    normals = np.zeros((h, w, 3))
    normals[ys, xs] = unit
    return NormalMap(normals=normals, valid_mask=region.copy(), raw=raw), warnings
