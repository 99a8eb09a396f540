"""
Hot integration loops, jitted with numba.

All kernels consume pre-drawn standard normals: a main block with one pair
per step plus a reserve block used only by wall-rejection retries.  Drawing
both blocks up front keeps the per-path stream consumption independent of
how many retries actually fire, which is what makes runs bit-reproducible.

Status codes: 0 ok, 1 too many halvings at a wall, 2 reserve exhausted.
The retry rule on a wall-adjacent proposal is: halve the local step, draw
fresh noise from the reserve, and integrate the remaining fraction of the
step in halved pieces (at most 20 halvings per step).
"""

import math

import numpy as np
from numba import njit

MAX_HALVINGS = 20


@njit(cache=True)
def bessel_map_kernel(tx0, ty0, dt, n_steps, stride, z, reserve, wall_delta,
                      out_xi, out_theta):
    tx = tx0
    ty = ty0
    xi = 0.0
    out_xi[0] = xi
    out_theta[0, 0] = tx
    out_theta[0, 1] = ty
    r_idx = 0
    rejections = 0
    for j in range(n_steps):
        h = dt
        z1 = z[j, 0]
        z2 = z[j, 1]
        t_done = 0.0
        halvings = 0
        while t_done < dt - 1e-18:
            b1 = 1.0 / tx - 2.5 * tx
            b2 = 1.0 / ty - 2.5 * ty
            s11 = ty * ty
            s12 = -tx * ty
            s22 = tx * tx
            sq = math.sqrt(h)
            dw1 = sq * z1
            dw2 = sq * z2
            nx = tx + b1 * h + s11 * dw1 + s12 * dw2
            ny = ty + b2 * h + s12 * dw1 + s22 * dw2
            nrm = math.sqrt(nx * nx + ny * ny)
            nx /= nrm
            ny /= nrm
            if nx > wall_delta and ny > wall_delta:
                xi += tx * dw1 + ty * dw2 + 2.0 * h
                tx = nx
                ty = ny
                t_done += h
                if t_done < dt - 1e-18:
                    if r_idx >= reserve.shape[0]:
                        return rejections, j, 2
                    z1 = reserve[r_idx, 0]
                    z2 = reserve[r_idx, 1]
                    r_idx += 1
            else:
                rejections += 1
                halvings += 1
                if halvings > MAX_HALVINGS:
                    return rejections, j, 1
                h *= 0.5
                if r_idx >= reserve.shape[0]:
                    return rejections, j, 2
                z1 = reserve[r_idx, 0]
                z2 = reserve[r_idx, 1]
                r_idx += 1
        if (j + 1) % stride == 0:
            o = (j + 1) // stride
            out_xi[o] = xi
            out_theta[o, 0] = tx
            out_theta[o, 1] = ty
    return rejections, n_steps, 0


@njit(cache=True)
def dunkl_map_kernel(tx0, ty0, dt, n_steps, stride, z, reserve, wall_delta,
                     roots, k, out_xi, out_theta):
    tx = tx0
    ty = ty0
    xi = 0.0
    out_xi[0] = xi
    out_theta[0, 0] = tx
    out_theta[0, 1] = ty
    m = roots.shape[0]
    r_idx = 0
    rejections = 0
    for j in range(n_steps):
        h = dt
        z1 = z[j, 0]
        z2 = z[j, 1]
        t_done = 0.0
        halvings = 0
        while t_done < dt - 1e-18:
            a1 = 0.0
            a2 = 0.0
            for r in range(m):
                dot = roots[r, 0] * tx + roots[r, 1] * ty
                a1 += k * roots[r, 0] / dot
                a2 += k * roots[r, 1] / dot
            ta = tx * a1 + ty * a2
            b1 = a1 - tx * ta - 0.5 * tx
            b2 = a2 - ty * ta - 0.5 * ty
            s11 = ty * ty
            s12 = -tx * ty
            s22 = tx * tx
            sq = math.sqrt(h)
            dw1 = sq * z1
            dw2 = sq * z2
            nx = tx + b1 * h + s11 * dw1 + s12 * dw2
            ny = ty + b2 * h + s12 * dw1 + s22 * dw2
            nrm = math.sqrt(nx * nx + ny * ny)
            nx /= nrm
            ny /= nrm
            ok = True
            for r in range(m):
                if roots[r, 0] * nx + roots[r, 1] * ny <= wall_delta:
                    ok = False
                    break
            if ok:
                xi += tx * dw1 + ty * dw2 + ta * h
                tx = nx
                ty = ny
                t_done += h
                if t_done < dt - 1e-18:
                    if r_idx >= reserve.shape[0]:
                        return rejections, j, 2
                    z1 = reserve[r_idx, 0]
                    z2 = reserve[r_idx, 1]
                    r_idx += 1
            else:
                rejections += 1
                halvings += 1
                if halvings > MAX_HALVINGS:
                    return rejections, j, 1
                h *= 0.5
                if r_idx >= reserve.shape[0]:
                    return rejections, j, 2
                z1 = reserve[r_idx, 0]
                z2 = reserve[r_idx, 1]
                r_idx += 1
        if (j + 1) % stride == 0:
            o = (j + 1) // stride
            out_xi[o] = xi
            out_theta[o, 0] = tx
            out_theta[o, 1] = ty
    return rejections, n_steps, 0


@njit(cache=True)
def dunkl_ssmp_kernel(x0, y0, dt, n_steps, stride, z, reserve, wall_delta,
                      roots, k, out_x):
    px = x0
    py = y0
    out_x[0, 0] = px
    out_x[0, 1] = py
    m = roots.shape[0]
    r_idx = 0
    rejections = 0
    for j in range(n_steps):
        h = dt
        z1 = z[j, 0]
        z2 = z[j, 1]
        t_done = 0.0
        halvings = 0
        while t_done < dt - 1e-18:
            d1 = 0.0
            d2 = 0.0
            for r in range(m):
                dot = roots[r, 0] * px + roots[r, 1] * py
                d1 += k * roots[r, 0] / dot
                d2 += k * roots[r, 1] / dot
            sq = math.sqrt(h)
            nx = px + d1 * h + sq * z1
            ny = py + d2 * h + sq * z2
            ok = True
            for r in range(m):
                if roots[r, 0] * nx + roots[r, 1] * ny <= wall_delta:
                    ok = False
                    break
            if ok:
                px = nx
                py = ny
                t_done += h
                if t_done < dt - 1e-18:
                    if r_idx >= reserve.shape[0]:
                        return rejections, j, 2
                    z1 = reserve[r_idx, 0]
                    z2 = reserve[r_idx, 1]
                    r_idx += 1
            else:
                rejections += 1
                halvings += 1
                if halvings > MAX_HALVINGS:
                    return rejections, j, 1
                h *= 0.5
                if r_idx >= reserve.shape[0]:
                    return rejections, j, 2
                z1 = reserve[r_idx, 0]
                z2 = reserve[r_idx, 1]
                r_idx += 1
        if (j + 1) % stride == 0:
            o = (j + 1) // stride
            out_x[o, 0] = px
            out_x[o, 1] = py
    return rejections, n_steps, 0
