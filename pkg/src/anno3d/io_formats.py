"""Binary artifact formats: NMAP/DMAP rasters, PLY point clouds/meshes, GLB.

NMAP and DMAP are little-endian rasters with an 8-byte magic followed by
uint32 width and height:

    NMAPv001 | width u32 | height u32 | float32[h][w][3] (nx, ny, nz)
    DMAPv001 | width u32 | height u32 | float32[h][w]    (depth, 0 = invalid)

Invalid NMAP pixels are written as (0, 0, 0). PLY files are binary
little-endian with per-vertex position and the continuous surface id as a
scalar property. GLB output flips to glTF's y-up/z-back convention so
browsers display the mesh upright; PLY keeps raw camera coordinates.
"""

from __future__ import annotations

import json
import struct

import numpy as np

NMAP_MAGIC = b"NMAPv001"
DMAP_MAGIC = b"DMAPv001"


class FormatError(ValueError):
    pass


def encode_nmap(normals: np.ndarray, valid: np.ndarray) -> bytes:
    h, w, _ = normals.shape
    data = np.where(valid[..., None], normals, 0.0).astype("<f4")
    return NMAP_MAGIC + struct.pack("<II", w, h) + data.tobytes()


def decode_nmap(blob: bytes) -> tuple[np.ndarray, np.ndarray]:
    if blob[:8] != NMAP_MAGIC:
        raise FormatError("bad NMAP magic")
    w, h = struct.unpack("<II", blob[8:16])
    data = np.frombuffer(blob[16:], dtype="<f4")
    if data.size != h * w * 3:
        raise FormatError("NMAP payload size mismatch")
    normals = data.reshape(h, w, 3).astype(np.float64)
    valid = np.linalg.norm(normals, axis=-1) > 1e-6
    return normals, valid


def encode_dmap(depth: np.ndarray, valid: np.ndarray) -> bytes:
    h, w = depth.shape
    data = np.where(valid, depth, 0.0).astype("<f4")
    return DMAP_MAGIC + struct.pack("<II", w, h) + data.tobytes()


def decode_dmap(blob: bytes) -> tuple[np.ndarray, np.ndarray]:
    if blob[:8] != DMAP_MAGIC:
        raise FormatError("bad DMAP magic")
    w, h = struct.unpack("<II", blob[8:16])
    data = np.frombuffer(blob[16:], dtype="<f4")
    if data.size != h * w:
        raise FormatError("DMAP payload size mismatch")
    depth = data.reshape(h, w).astype(np.float64)
    return depth, depth > 0


def encode_ply(
    vertices: np.ndarray, surface_ids: np.ndarray, faces: np.ndarray | None = None
) -> bytes:
    """Binary little-endian PLY with x/y/z float32 and surface_id int32."""
    n = len(vertices)
    header = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
        "property int surface_id",
    ]
    if faces is not None:
        header += [f"element face {len(faces)}", "property list uchar int vertex_indices"]
    header.append("end_header")
    blob = ("\n".join(header) + "\n").encode("ascii")

    vert = np.empty(n, dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("sid", "<i4")])
    vert["x"] = vertices[:, 0]
    vert["y"] = vertices[:, 1]
    vert["z"] = vertices[:, 2]
    vert["sid"] = surface_ids
    blob += vert.tobytes()

    if faces is not None and len(faces):
        face = np.empty(len(faces), dtype=[("n", "u1"), ("v", "<i4", (3,))])
        face["n"] = 3
        face["v"] = faces
        blob += face.tobytes()
    return blob


def decode_ply(blob: bytes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read back PLY written by :func:`encode_ply` (for tests/round-trips)."""
    end = blob.index(b"end_header\n") + len(b"end_header\n")
    header = blob[:end].decode("ascii").splitlines()
    n_vert = n_face = 0
    for line in header:
        if line.startswith("element vertex"):
            n_vert = int(line.split()[-1])
        elif line.startswith("element face"):
            n_face = int(line.split()[-1])
    vert = np.frombuffer(
        blob, dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("sid", "<i4")], count=n_vert, offset=end
    )
    vertices = np.stack([vert["x"], vert["y"], vert["z"]], axis=1).astype(np.float64)
    sids = vert["sid"].astype(np.int64)
    offset = end + n_vert * 16
    faces = np.zeros((n_face, 3), dtype=np.int64)
    if n_face:
        face = np.frombuffer(blob, dtype=[("n", "u1"), ("v", "<i4", (3,))], count=n_face, offset=offset)
        faces = face["v"].astype(np.int64)
    return vertices, sids, faces


def _pad_to(data: bytes, align: int, pad: bytes) -> bytes:
    rem = len(data) % align
    return data if rem == 0 else data + pad * (align - rem)


def encode_glb(vertices: np.ndarray, faces: np.ndarray) -> bytes:
    """Single-primitive binary glTF.

    Camera coordinates (x right, y down, z forward) are flipped to glTF's
    (x right, y up, z toward viewer) so viewers show the scene upright.
    """
    gl_verts = np.column_stack([vertices[:, 0], -vertices[:, 1], -vertices[:, 2]]).astype("<f4")
    indices = faces.astype("<u4").reshape(-1)

    pos_bytes = _pad_to(gl_verts.tobytes(), 4, b"\x00")
    idx_bytes = _pad_to(indices.tobytes(), 4, b"\x00")
    bin_chunk = pos_bytes + idx_bytes

    vmin = gl_verts.min(axis=0) if len(gl_verts) else np.zeros(3, "<f4")
    vmax = gl_verts.max(axis=0) if len(gl_verts) else np.zeros(3, "<f4")
    gltf = {
        "asset": {"version": "2.0", "generator": "anno3d"},
        "scene": 0,
        "scenes": [{"nodes": [0]}],
        "nodes": [{"mesh": 0}],
        "meshes": [{"primitives": [{"attributes": {"POSITION": 0}, "indices": 1, "mode": 4}]}],
        "buffers": [{"byteLength": len(bin_chunk)}],
        "bufferViews": [
            {"buffer": 0, "byteOffset": 0, "byteLength": len(pos_bytes), "target": 34962},
            {"buffer": 0, "byteOffset": len(pos_bytes), "byteLength": len(idx_bytes), "target": 34963},
        ],
        "accessors": [
            {
                "bufferView": 0,
                "componentType": 5126,
                "count": int(len(gl_verts)),
                "type": "VEC3",
                "min": [float(x) for x in vmin],
                "max": [float(x) for x in vmax],
            },
            {"bufferView": 1, "componentType": 5125, "count": int(len(indices)), "type": "SCALAR"},
        ],
    }
    json_chunk = _pad_to(json.dumps(gltf, sort_keys=True, separators=(",", ":")).encode("utf-8"), 4, b" ")

    total = 12 + 8 + len(json_chunk) + 8 + len(bin_chunk)
    out = struct.pack("<III", 0x46546C67, 2, total)
    out += struct.pack("<II", len(json_chunk), 0x4E4F534A) + json_chunk
    out += struct.pack("<II", len(bin_chunk), 0x004E4942) + bin_chunk
    return out


def decode_glb(blob: bytes) -> tuple[dict, np.ndarray, np.ndarray]:
    """Parse a GLB written by :func:`encode_glb`; returns (json, verts, faces)."""
    magic, version, _length = struct.unpack("<III", blob[:12])
    if magic != 0x46546C67 or version != 2:
        raise FormatError("bad GLB header")
    json_len, json_type = struct.unpack("<II", blob[12:20])
    if json_type != 0x4E4F534A:
        raise FormatError("first GLB chunk must be JSON")
    gltf = json.loads(blob[20 : 20 + json_len].decode("utf-8"))
    off = 20 + json_len
    bin_len, bin_type = struct.unpack("<II", blob[off : off + 8])
    if bin_type != 0x004E4942:
        raise FormatError("second GLB chunk must be BIN")
    payload = blob[off + 8 : off + 8 + bin_len]
    views = gltf["bufferViews"]
    acc_pos, acc_idx = gltf["accessors"][0], gltf["accessors"][1]
    pv = views[acc_pos["bufferView"]]
    verts = np.frombuffer(
        payload, dtype="<f4", count=acc_pos["count"] * 3, offset=pv.get("byteOffset", 0)
    ).reshape(-1, 3)
    iv = views[acc_idx["bufferView"]]
    faces = np.frombuffer(
        payload, dtype="<u4", count=acc_idx["count"], offset=iv.get("byteOffset", 0)
    ).reshape(-1, 3)
    return gltf, verts.astype(np.float64), faces.astype(np.int64)


def normal_map_png(normals: np.ndarray, valid: np.ndarray, path) -> None:
    """(n + 1) / 2 mapped to RGB; invalid pixels black."""
    from PIL import Image

    rgb = np.clip((normals + 1.0) * 0.5 * 255.0, 0, 255).astype(np.uint8)
    rgb[~valid] = 0
    Image.fromarray(rgb, mode="RGB").save(path)


def depth_png16(depth: np.ndarray, valid: np.ndarray, path, sidecar_path) -> None:
    """16-bit grayscale PNG plus a JSON sidecar with the value scale."""
    from PIL import Image

    dmax = float(depth[valid].max()) if valid.any() else 1.0
    if dmax <= 0:
        dmax = 1.0
    scaled = np.zeros(depth.shape, dtype=np.uint16)
    scaled[valid] = np.clip(np.round(depth[valid] / dmax * 65535.0), 0, 65535).astype(np.uint16)
    Image.fromarray(scaled).save(path)  # uint16 infers 16-bit grayscale
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(
            {"depth_scale": dmax, "encoding": "depth = png_value / 65535 * depth_scale", "invalid": 0},
            fh,
            sort_keys=True,
        )


def id_map_png(ids: np.ndarray, path) -> None:
    """Color-coded id raster for debugging; id -1 is black."""
    from PIL import Image

    h, w = ids.shape
    rng = np.random.default_rng(12345)
    n = int(ids.max()) + 1 if ids.size and ids.max() >= 0 else 0
    palette = rng.integers(40, 255, size=(max(n, 1), 3), dtype=np.uint8)
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    mask = ids >= 0
    rgb[mask] = palette[ids[mask] % max(n, 1)]
    Image.fromarray(rgb, mode="RGB").save(path)
