"""Compiled Gauss-Seidel relaxation kernel for sphere piles.

Hand obstacles are capsules (segment + radius) and one optional cylinder
(the palm).  The container is a bowl (code 0) or an open box (code 1).
"""
from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

__all__ = ["AVAILABLE", "relax_spheres"]

AVAILABLE = njit is not None


def _project(pos, i, d, nx, ny, nz, slop, support, up):
    if d < -slop:
        k = -slop - d
        pos[i, 0] += k * nx
        pos[i, 1] += k * ny
        pos[i, 2] += k * nz
    if d < 2.0 * slop:
        s = nx * up[0] + ny * up[1] + nz * up[2]
        if s > support[i]:
            support[i] = s


def _kernel(pos, rad, mov, pairs, cap_a, cap_ab, cap_r, cyl, cyl_rot, cont, g, nudge, slop, tol,
            cos_stick, iterations):
    n = pos.shape[0]
    up = -g
    resting = np.zeros(n, dtype=np.bool_)
    support = np.empty(n)
    start = np.empty_like(pos)
    kind, c_r, c_hx, c_hy, c_h = cont[0], cont[1], cont[2], cont[3], cont[4]
    for _ in range(iterations):
        start[:, :] = pos
        for i in range(n):
            support[i] = -1.0
        if nudge != 0.0:
            for i in range(n):
                if mov[i] and not resting[i]:
                    pos[i, 0] += nudge * g[0]
                    pos[i, 1] += nudge * g[1]
                    pos[i, 2] += nudge * g[2]
        for i in range(n):
            if not mov[i]:
                continue
            r = rad[i]
            _project(pos, i, pos[i, 2] - r, 0.0, 0.0, 1.0, slop, support, up)
            if pos[i, 2] <= c_h:
                if kind == 0:
                    rho = math.sqrt(pos[i, 0] ** 2 + pos[i, 1] ** 2)
                    if rho > 1e-12:
                        _project(pos, i, c_r - rho - r, -pos[i, 0] / rho, -pos[i, 1] / rho, 0.0, slop, support, up)
                else:
                    _project(pos, i, c_hx - pos[i, 0] - r, -1.0, 0.0, 0.0, slop, support, up)
                    _project(pos, i, c_hx + pos[i, 0] - r, 1.0, 0.0, 0.0, slop, support, up)
                    _project(pos, i, c_hy - pos[i, 1] - r, 0.0, -1.0, 0.0, slop, support, up)
                    _project(pos, i, c_hy + pos[i, 1] - r, 0.0, 1.0, 0.0, slop, support, up)
            for k in range(cap_a.shape[0]):
                ax, ay, az = cap_a[k, 0], cap_a[k, 1], cap_a[k, 2]
                bx, by, bz = cap_ab[k, 0], cap_ab[k, 1], cap_ab[k, 2]
                rx, ry, rz = pos[i, 0] - ax, pos[i, 1] - ay, pos[i, 2] - az
                L2 = bx * bx + by * by + bz * bz
                t = (rx * bx + ry * by + rz * bz) / L2
                t = min(max(t, 0.0), 1.0)
                dx, dy, dz = rx - t * bx, ry - t * by, rz - t * bz
                dist = math.sqrt(dx * dx + dy * dy + dz * dz)
                d = dist - r - cap_r[k]
                if d < 2.0 * slop and dist > 1e-12:
                    _project(pos, i, d, dx / dist, dy / dist, dz / dist, slop, support, up)
            if cyl[0] > 0.0:
                R, hh = cyl[0], cyl[1]
                rx, ry, rz = pos[i, 0] - cyl[2], pos[i, 1] - cyl[3], pos[i, 2] - cyl[4]
                qx = rx * cyl_rot[0, 0] + ry * cyl_rot[1, 0] + rz * cyl_rot[2, 0]
                qy = rx * cyl_rot[0, 1] + ry * cyl_rot[1, 1] + rz * cyl_rot[2, 1]
                qz = rx * cyl_rot[0, 2] + ry * cyl_rot[1, 2] + rz * cyl_rot[2, 2]
                rho = math.sqrt(qx * qx + qy * qy)
                if rho > 1e-12:
                    ux, uy = qx / rho, qy / rho
                else:
                    ux, uy = 1.0, 0.0
                if rho <= R and abs(qz) <= hh:
                    side, cap = R - rho, hh - abs(qz)
                    if side < cap:
                        d, lx, ly, lz = -side, ux, uy, 0.0
                    else:
                        d, lx, ly, lz = -cap, 0.0, 0.0, (1.0 if qz >= 0 else -1.0)
                else:
                    cr = min(rho, R)
                    cz = min(max(qz, -hh), hh)
                    dx, dy, dz = qx - ux * cr, qy - uy * cr, qz - cz
                    d = math.sqrt(dx * dx + dy * dy + dz * dz)
                    if d > 1e-12:
                        lx, ly, lz = dx / d, dy / d, dz / d
                    else:
                        lx, ly, lz = 0.0, 0.0, 1.0
                d -= r
                if d < 2.0 * slop:
                    nx = cyl_rot[0, 0] * lx + cyl_rot[0, 1] * ly + cyl_rot[0, 2] * lz
                    ny = cyl_rot[1, 0] * lx + cyl_rot[1, 1] * ly + cyl_rot[1, 2] * lz
                    nz = cyl_rot[2, 0] * lx + cyl_rot[2, 1] * ly + cyl_rot[2, 2] * lz
                    _project(pos, i, d, nx, ny, nz, slop, support, up)
        for p in range(pairs.shape[0]):
            i, j = pairs[p, 0], pairs[p, 1]
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            d = dist - rad[i] - rad[j]
            if d >= 2.0 * slop or dist <= 1e-12:
                continue
            nx, ny, nz = dx / dist, dy / dist, dz / dist
            s = nx * up[0] + ny * up[1] + nz * up[2]
            if s > support[i]:
                support[i] = s
            if -s > support[j]:
                support[j] = -s
            if d < -slop:
                k = -slop - d
                wi = 0.5 if (mov[i] and mov[j]) else (1.0 if mov[i] else 0.0)
                wj = 0.5 if (mov[i] and mov[j]) else (1.0 if mov[j] else 0.0)
                pos[i, 0] += wi * k * nx
                pos[i, 1] += wi * k * ny
                pos[i, 2] += wi * k * nz
                pos[j, 0] -= wj * k * nx
                pos[j, 1] -= wj * k * ny
                pos[j, 2] -= wj * k * nz
        for i in range(n):
            resting[i] = support[i] >= cos_stick
        moved = 0.0
        for i in range(n):
            for c in range(3):
                moved = max(moved, abs(pos[i, c] - start[i, c]))
        if moved < tol:
            break
    return pos


if AVAILABLE:
    _project = njit(cache=True)(_project)
    _kernel = njit(cache=True)(_kernel)


def relax_spheres(pos, rad, mov, pairs, capsules, cylinder, container, g, nudge, slop, tol, mu, iterations):
    """Run the kernel.  ``capsules`` is a list of (a, ab, radius); ``cylinder``
    is ``None`` or ``(radius, half_height, center, rotation)``."""
    cap_a = np.array([c[0] for c in capsules], dtype=float).reshape(-1, 3)
    cap_ab = np.array([c[1] for c in capsules], dtype=float).reshape(-1, 3)
    cap_r = np.array([c[2] for c in capsules], dtype=float)
    if cylinder is None:
        cyl = np.zeros(5)
        rot = np.eye(3)
    else:
        R, hh, center, rot = cylinder
        cyl = np.array([R, hh, center[0], center[1], center[2]], dtype=float)
        rot = np.ascontiguousarray(rot, dtype=float)
    if container.kind == "bowl":
        cont = np.array([0.0, container.radius, 0.0, 0.0, container.height])
    else:
        cont = np.array([1.0, 0.0, container.half_x, container.half_y, container.height])
    cos_stick = 1.0 / math.sqrt(1.0 + mu * mu) if mu > 0 else 2.0
    out = np.ascontiguousarray(pos, dtype=float).copy()
    return _kernel(out, np.asarray(rad, dtype=float), np.asarray(mov, dtype=np.bool_),
                   np.asarray(pairs, dtype=np.int64).reshape(-1, 2), cap_a, cap_ab, cap_r, cyl, rot,
                   cont, np.asarray(g, dtype=float), float(nudge), float(slop), float(tol), cos_stick,
                   int(iterations))
