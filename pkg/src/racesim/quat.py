"""Quaternion and Euler-angle helpers.

Conventions used throughout the package:
  * quaternions are (w, x, y, z), unit norm, and encode the attitude of the
    body in the world frame: R(q) maps body-frame vectors to world frame.
  * Euler angles follow the aerospace yaw->pitch->roll order, i.e.
    R = Rz(psi) @ Ry(theta) @ Rx(phi), with NED axes (z down).

The *_f functions take and return plain floats/tuples; they are the hot path
used inside the integrator. The array wrappers below them are the public API.
"""

import math

import numpy as np


def quat_mul_f(aw, ax, ay, az, bw, bx, by, bz):
    """Hamilton product a*b on scalar components."""
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def rot_matrix_f(w, x, y, z):
    """Rotation matrix entries (row major) for a unit quaternion, body->world."""
    return (
        1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y),
    )


def quat_mul(a, b):
    """Hamilton product of two (w, x, y, z) arrays."""
    out = quat_mul_f(a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3])
    return np.array(out, dtype=float)


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q[0]) ** 2 + float(q[1]) ** 2 + float(q[2]) ** 2 + float(q[3]) ** 2)
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return q / n


def quat_to_matrix(q):
    """3x3 rotation matrix of a unit quaternion (body->world)."""
    m = rot_matrix_f(float(q[0]), float(q[1]), float(q[2]), float(q[3]))
    return np.array(m, dtype=float).reshape(3, 3)


def quat_rotate(q, v):
    """Rotate a body-frame vector into the world frame."""
    return quat_to_matrix(q) @ np.asarray(v, dtype=float)


def quat_rotate_inverse(q, v):
    """Rotate a world-frame vector into the body frame."""
    return quat_to_matrix(q).T @ np.asarray(v, dtype=float)


def euler_to_quat(phi, theta, psi):
    """Quaternion for roll phi, pitch theta, yaw psi (yaw->pitch->roll order)."""
    cr, sr = math.cos(phi * 0.5), math.sin(phi * 0.5)
    cp, sp = math.cos(theta * 0.5), math.sin(theta * 0.5)
    cy, sy = math.cos(psi * 0.5), math.sin(psi * 0.5)
    return np.array(
        [
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ]
    )


def quat_to_euler(q):
    """(phi, theta, psi) roll/pitch/yaw of a unit quaternion."""
    w, x, y, z = (float(c) for c in q)
    phi = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    s = 2.0 * (w * y - z * x)
    s = max(-1.0, min(1.0, s))
    theta = math.asin(s)
    psi = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return phi, theta, psi


def euler_to_matrix(phi, theta, psi):
    """Rotation matrix Rz(psi) @ Ry(theta) @ Rx(phi)."""
    cph, sph = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cps, sps = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cth * cps, sph * sth * cps - cph * sps, cph * sth * cps + sph * sps],
            [cth * sps, sph * sth * sps + cph * cps, cph * sth * sps - sph * cps],
            [-sth, sph * cth, cph * cth],
        ]
    )


def rot_z(psi):
    """Yaw-only rotation matrix."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def wrap_angle(a):
    """Wrap an angle to (-pi, pi]."""
    a = float(a)
    out = math.fmod(a + math.pi, 2.0 * math.pi)
    if out <= 0.0:
        out += 2.0 * math.pi
    return out - math.pi
