"""Pinhole camera, gate mask rasterization, rolling-shutter warp and erosion.

Masks are (H, W) uint8 arrays with values in {0, 1}, 1 = gate pixel.

Frames: the camera is mounted at the body origin and oriented by a
yaw->pitch->roll Euler triple relative to the body (a pitched-up camera has a
positive pitch angle). That "mount" frame keeps aviation axes (x forward along
the optical axis, y right, z down). Projection uses the usual optic axes
(x right, y down, z forward); the fixed permutation between the two is
internal. Pixel (u, v) = (column, row), with integer coordinates at pixel
centers, u = fx * x/z + cx.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .quat import euler_to_matrix, quat_to_matrix
from .track import Track

# optic -> mount axis permutation: x_m = z_o, y_m = x_o, z_m = y_o
_PERM_MOUNT_FROM_OPTIC = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float


@dataclass(frozen=True)
class CameraExtrinsics:
    """Euler rotation body -> camera mount, yaw->pitch->roll order, rad."""

    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0


def nominal_intrinsics(width: int, height: int) -> CameraIntrinsics:
    """Standardized intrinsics: focal length 25/64 of the image size,
    principal point at the center (25 px for a 64 px image)."""
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    return CameraIntrinsics(
        width=width,
        height=height,
        fx=25.0 / 64.0 * width,
        fy=25.0 / 64.0 * height,
        cx=0.5 * width,
        cy=0.5 * height,
    )


def project(p_c, intr: CameraIntrinsics):
    """Project an optic-frame point to pixel (u, v); None if behind the camera."""
    x, y, z = (float(c) for c in p_c)
    if z <= 0.0:
        return None
    return intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy


def mount_matrix(ext: CameraExtrinsics) -> np.ndarray:
    """Rotation matrix body <- camera mount."""
    return euler_to_matrix(ext.roll, ext.pitch, ext.yaw)


def body_rates_to_camera(rates, ext: CameraExtrinsics) -> np.ndarray:
    """Body rates expressed in the camera mount frame (p_c, q_c, r_c)."""
    return mount_matrix(ext).T @ np.asarray(rates, dtype=float)


def world_to_camera(p_w, drone_pos, drone_quat, ext: CameraExtrinsics) -> np.ndarray:
    """World point in optic-frame coordinates (pairs with project)."""
    r_wb = quat_to_matrix(drone_quat)
    r_bm = mount_matrix(ext)
    v_body = r_wb.T @ (np.asarray(p_w, dtype=float) - np.asarray(drone_pos, dtype=float))
    v_mount = r_bm.T @ v_body
    return _PERM_MOUNT_FROM_OPTIC.T @ v_mount


_ray_grid_cache: dict[tuple, np.ndarray] = {}


def _optic_ray_grid(intr: CameraIntrinsics) -> np.ndarray:
    """(H, W, 3) optic-frame direction for each pixel center."""
    key = (intr.width, intr.height, intr.fx, intr.fy, intr.cx, intr.cy)
    grid = _ray_grid_cache.get(key)
    if grid is None:
        us = (np.arange(intr.width) - intr.cx) / intr.fx
        vs = (np.arange(intr.height) - intr.cy) / intr.fy
        xg, yg = np.meshgrid(us, vs)
        grid = np.stack([xg, yg, np.ones_like(xg)], axis=2)
        _ray_grid_cache[key] = grid
    return grid


def _gate_pixel_window(gate, pos, m_world_optic, intr):
    """Conservative pixel bbox of the gate's outer square, or None if the
    gate is fully out of view. Falls back to the full frame when the gate
    plane crosses the camera plane (corners behind the camera)."""
    ho = 0.5 * gate.outer_size
    corners_g = np.array([[0.0, -ho, -ho], [0.0, -ho, ho], [0.0, ho, -ho], [0.0, ho, ho]])
    corners_w = corners_g @ gate.rotation.T + gate.center
    corners_o = (corners_w - pos) @ m_world_optic
    if np.all(corners_o[:, 2] <= 0.0):
        return None
    if np.any(corners_o[:, 2] <= 1e-12):
        return 0, intr.height, 0, intr.width
    u = intr.fx * corners_o[:, 0] / corners_o[:, 2] + intr.cx
    v = intr.fy * corners_o[:, 1] / corners_o[:, 2] + intr.cy
    u0 = max(int(np.floor(u.min())), 0)
    u1 = min(int(np.ceil(u.max())) + 1, intr.width)
    v0 = max(int(np.floor(v.min())), 0)
    v1 = min(int(np.ceil(v.max())) + 1, intr.height)
    if u0 >= u1 or v0 >= v1:
        return None
    return v0, v1, u0, u1


def render_mask(drone_pos, drone_quat, ext: CameraExtrinsics,
                intr: CameraIntrinsics, track: Track) -> np.ndarray:
    """Rasterize all visible gate frames seen from the drone pose.

    Each pixel casts a ray through its center; the pixel is set when the ray
    hits any visible gate plane inside the annulus between the outer and inner
    squares (union over gates, so depth order is irrelevant). Deterministic
    for fixed inputs and invariant to translating drone and gates together.
    """
    pos = np.asarray(drone_pos, dtype=float)
    m_world_optic = quat_to_matrix(drone_quat) @ mount_matrix(ext) @ _PERM_MOUNT_FROM_OPTIC
    grid = _optic_ray_grid(intr)

    mask = np.zeros((intr.height, intr.width), dtype=bool)
    for gate in track.gates:
        if not gate.visible:
            continue
        window = _gate_pixel_window(gate, pos, m_world_optic, intr)
        if window is None:
            continue
        v0, v1, u0, u1 = window
        m_gate_optic = gate.rotation.T @ m_world_optic
        origin_g = gate.rotation.T @ (pos - gate.center)
        dirs_g = grid[v0:v1, u0:u1].reshape(-1, 3) @ m_gate_optic.T
        dx = dirs_g[:, 0]
        safe_dx = np.where(dx == 0.0, 1.0, dx)
        t = -origin_g[0] / safe_dx
        hit_y = origin_g[1] + t * dirs_g[:, 1]
        hit_z = origin_g[2] + t * dirs_g[:, 2]
        extent = np.maximum(np.abs(hit_y), np.abs(hit_z))
        hit = (dx != 0.0) & (t > 0.0)
        hit &= (extent >= 0.5 * gate.inner_size) & (extent <= 0.5 * gate.outer_size)
        mask[v0:v1, u0:u1] |= hit.reshape(v1 - v0, u1 - u0)
    return mask.astype(np.uint8)


_pixel_grid_cache: dict[tuple, tuple] = {}


def _pixel_grids(h: int, w: int) -> tuple:
    grids = _pixel_grid_cache.get((h, w))
    if grids is None:
        grids = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
        _pixel_grid_cache[(h, w)] = grids
    return grids


def rolling_shutter_warp(mask: np.ndarray, s: float, q_c: float, r_c: float) -> np.ndarray:
    """Affine rolling-shutter approximation: horizontal shear from the camera
    yaw rate, vertical scaling about the image center row from the pitch rate.

    Output pixel (x, y) samples the input at
        x' = x - s*r_c*y + (W/2)*s*r_c
        y' = (1 + s*q_c)*y - (H/2)*s*q_c
    with nearest-neighbor lookup (masks stay binary); out-of-bounds reads 0.
    s = 0 returns a bit-identical copy.
    """
    h, w = mask.shape
    ys, xs = _pixel_grids(h, w)
    src_x = xs - s * r_c * ys + 0.5 * w * s * r_c
    src_y = (1.0 + s * q_c) * ys - 0.5 * h * s * q_c
    rx = np.rint(src_x).astype(np.int64)
    ry = np.rint(src_y).astype(np.int64)
    inside = (rx >= 0) & (rx < w) & (ry >= 0) & (ry < h)
    out = np.zeros_like(mask)
    out[inside] = mask[ry[inside], rx[inside]]
    return out


def erode_mask(mask: np.ndarray) -> np.ndarray:
    """Erode by one pixel: 3x3 average pool (stride 1, edge-replicated), then
    keep a pixel only if the whole neighborhood was set."""
    h, w = mask.shape
    padded = np.pad(mask.astype(np.int64), 1, mode="edge")
    acc = np.zeros((h, w), dtype=np.int64)
    for di in range(3):
        for dj in range(3):
            acc += padded[di:di + h, dj:dj + w]
    return (acc == 9).astype(np.uint8)


def write_pgm(path, mask: np.ndarray) -> None:
    """Dump a binary mask as an 8-bit portable graymap (0/255)."""
    h, w = mask.shape
    data = (mask.astype(np.uint8) * 255).tobytes()
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + data)


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) graymap written by write_pgm back to a {0,1} mask."""
    raw = Path(path).read_bytes()
    header, rest = raw.split(b"\n", 1)
    if header != b"P5":
        raise ValueError(f"{path}: not a binary graymap")
    dims, rest = rest.split(b"\n", 1)
    maxval, rest = rest.split(b"\n", 1)
    w, h = (int(t) for t in dims.split())
    if int(maxval) != 255:
        raise ValueError(f"{path}: expected maxval 255")
    img = np.frombuffer(rest[: w * h], dtype=np.uint8).reshape(h, w)
    return (img > 127).astype(np.uint8)
