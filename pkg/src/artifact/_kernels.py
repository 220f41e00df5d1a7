"""numba inner loops for the hard-sphere gain term.

The gain term is evaluated in gather form: for every output node v and every
partner u inside the energy ball, the post-collision values are interpolated
from the weighted ratio h = G / exp(-m|v|^2 / 2 T_ref).  Because the weight is
a collision invariant, the product of weights at (v', u') equals the product at
(v, u) and is pulled out of the angular sum.
"""
import os

import numba
import numpy as np
from numba import njit, prange

# the system TBB is too old for numba; avoid the fallback warning
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"


@njit(cache=True, inline="always")
def _stencil(x, x0, inv_h, n, order, idx, wts):
    # position in index units relative to node 0
    s = (x - x0) * inv_h
    k = int(np.floor(s))
    t = s - k
    if order == 1:
        idx[0] = k
        idx[1] = k + 1
        wts[0] = 1.0 - t
        wts[1] = t
        npt = 2
    else:
        idx[0] = k - 1
        idx[1] = k
        idx[2] = k + 1
        idx[3] = k + 2
        wts[0] = -t * (t - 1.0) * (t - 2.0) / 6.0
        wts[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
        wts[2] = -(t + 1.0) * t * (t - 2.0) / 2.0
        wts[3] = (t + 1.0) * t * (t - 1.0) / 6.0
        npt = 4
    for a in range(npt):
        if idx[a] < 0:
            idx[a] = 0
        elif idx[a] > n - 1:
            idx[a] = n - 1
    return npt


@njit(cache=True, inline="always")
def _interp(h3, x, y, z, x0, inv_h, n, order, ix, iy, iz, wx, wy, wz):
    p = _stencil(x, x0, inv_h, n, order, ix, wx)
    _stencil(y, x0, inv_h, n, order, iy, wy)
    _stencil(z, x0, inv_h, n, order, iz, wz)
    acc = 0.0
    for a in range(p):
        sa = 0.0
        for b in range(p):
            sb = 0.0
            for c in range(p):
                sb += wz[c] * h3[ix[a], iy[b], iz[c]]
            sa += wy[b] * sb
        acc += wx[a] * sa
    return acc


@njit(cache=True, parallel=True)
def pair_sums(h1, h2, om2, nodes, out_idx, u_sorted, u_limit, dirs, wdir, m1, m2, x0, h, order):
    """Gain and loss partner sums over the energy ball.

    For output node v_i returns
        S(v_i) = sum_u om2(u) sum_w w |(v-u).w| h1(v') h2(u')
        R(v_i) = sum_u om2(u) h2(u) sum_w w |(v-u).w|
    where ``u_limit[p]`` counts the leading entries of ``u_sorted`` that form an
    admissible pair with ``out_idx[p]``.
    """
    n = h1.shape[0]
    inv_h = 1.0 / h
    a2 = 2.0 * m2 / (m1 + m2)
    a1 = 2.0 * m1 / (m1 + m2)
    nd = dirs.shape[0]
    gain = np.zeros(out_idx.shape[0])
    loss = np.zeros(out_idx.shape[0])
    for p in prange(out_idx.shape[0]):
        ix = np.empty(4, np.int64)
        iy = np.empty(4, np.int64)
        iz = np.empty(4, np.int64)
        wx = np.empty(4)
        wy = np.empty(4)
        wz = np.empty(4)
        i = out_idx[p]
        vx = nodes[i, 0]
        vy = nodes[i, 1]
        vz = nodes[i, 2]
        tg = 0.0
        tl = 0.0
        for q in range(u_limit[p]):
            j = u_sorted[q]
            ux = nodes[j, 0]
            uy = nodes[j, 1]
            uz = nodes[j, 2]
            gx = vx - ux
            gy = vy - uy
            gz = vz - uz
            pg = 0.0
            pk = 0.0
            for d in range(nd):
                ox = dirs[d, 0]
                oy = dirs[d, 1]
                oz = dirs[d, 2]
                s = gx * ox + gy * oy + gz * oz
                if s == 0.0:
                    continue
                ws = wdir[d] * abs(s)
                pk += ws
                b = a2 * s
                f1 = _interp(h1, vx - b * ox, vy - b * oy, vz - b * oz, x0, inv_h, n, order, ix, iy, iz, wx, wy, wz)
                c = a1 * s
                f2 = _interp(h2, ux + c * ox, uy + c * oy, uz + c * oz, x0, inv_h, n, order, ix, iy, iz, wx, wy, wz)
                pg += ws * f1 * f2
            tg += om2[j] * pg
            tl += om2[j] * h2.ravel()[j] * pk
        gain[p] = tg
        loss[p] = tl
    return gain, loss


@njit(cache=True)
def entropic_rates(F1, F2, logF1, logF2, nodes, out_idx, u_sorted, u_limit, dirs, wdir,
                   m1, m2, pq, x0, h, n, rate, same, u_ref, emax):
    """Entropic discrete-velocity collision rates for one species pair.

    Every event (v_i, u_j, w) is replaced by lattice pairs (v_i + q h k, u_j - p h k),
    k on the corners of the cell holding the exact post-collision shift, where
    m1/m2 = p/q.  Momentum is exact for each pair; the corner weights r_c >= 0 are
    trilinear weights blended towards the lowest-energy corner so that energy is
    exact on average.  The gain is the weighted geometric mean of the corner
    products, so lattice Maxwellians are exact equilibria and the entropy
    production of every event is nonpositive.  Events whose corner pairs leave the
    energy ball m1|v-u_ref|^2 + m2|u-u_ref|^2 <= emax are dropped, so every node that
    trades mass also owns events.  When ``same`` is set F2 is F1 and both outputs
    accumulate into the first array.
    """
    p = pq[0]
    q = pq[1]
    a2 = 2.0 * m2 / (m1 + m2)
    inv = 1.0 / (q * h)
    out1 = np.zeros(F1.shape[0])
    out2 = np.zeros(F2.shape[0])
    nn = n * n
    r = np.empty(8)
    lam = np.empty(8, np.int64)
    mu = np.empty(8, np.int64)
    en = np.empty(8)
    for pp in range(out_idx.shape[0]):
        i = out_idx[pp]
        ix = i // nn
        iy = (i // n) % n
        iz = i % n
        vx = nodes[i, 0]
        vy = nodes[i, 1]
        vz = nodes[i, 2]
        for qq in range(u_limit[pp]):
            j = u_sorted[qq]
            jx = j // nn
            jy = (j // n) % n
            jz = j % n
            ux = nodes[j, 0]
            uy = nodes[j, 1]
            uz = nodes[j, 2]
            e0 = m1 * (vx * vx + vy * vy + vz * vz) + m2 * (ux * ux + uy * uy + uz * uz)
            # absolute and u_ref-relative pair energies differ by a constant for fixed momentum
            shift = e0 - (m1 * ((vx - u_ref[0]) ** 2 + (vy - u_ref[1]) ** 2 + (vz - u_ref[2]) ** 2)
                          + m2 * ((ux - u_ref[0]) ** 2 + (uy - u_ref[1]) ** 2 + (uz - u_ref[2]) ** 2))
            X = F1[i] * F2[j]
            for d in range(dirs.shape[0]):
                ox = dirs[d, 0]
                oy = dirs[d, 1]
                oz = dirs[d, 2]
                s = (vx - ux) * ox + (vy - uy) * oy + (vz - uz) * oz
                if s == 0.0:
                    continue
                # continuous shift of v in sub-lattice units
                kx = -a2 * s * ox * inv
                ky = -a2 * s * oy * inv
                kz = -a2 * s * oz * inv
                fx = np.floor(kx)
                fy = np.floor(ky)
                fz = np.floor(kz)
                tx = kx - fx
                ty = ky - fy
                tz = kz - fz
                ok = True
                ebar = 0.0
                clow = 0
                for c in range(8):
                    bx = (c >> 2) & 1
                    by = (c >> 1) & 1
                    bz = c & 1
                    cx = int(fx) + bx
                    cy = int(fy) + by
                    cz = int(fz) + bz
                    lx = ix + q * cx
                    ly = iy + q * cy
                    lz = iz + q * cz
                    mx = jx - p * cx
                    my = jy - p * cy
                    mz = jz - p * cz
                    if (lx < 0 or lx >= n or ly < 0 or ly >= n or lz < 0 or lz >= n
                            or mx < 0 or mx >= n or my < 0 or my >= n or mz < 0 or mz >= n):
                        ok = False
                        break
                    lam[c] = lx * nn + ly * n + lz
                    mu[c] = mx * nn + my * n + mz
                    r[c] = (tx if bx else 1.0 - tx) * (ty if by else 1.0 - ty) * (tz if bz else 1.0 - tz)
                    a = lam[c]
                    b = mu[c]
                    en[c] = (m1 * (nodes[a, 0] ** 2 + nodes[a, 1] ** 2 + nodes[a, 2] ** 2)
                             + m2 * (nodes[b, 0] ** 2 + nodes[b, 1] ** 2 + nodes[b, 2] ** 2))
                    if en[c] - shift > emax:
                        ok = False
                        break
                    ebar += r[c] * en[c]
                    if en[c] < en[clow]:
                        clow = c
                if not ok:
                    continue
                delta = ebar - e0
                if delta > 0.0:
                    if en[clow] >= e0:
                        continue
                    th = delta / (ebar - en[clow])
                    for c in range(8):
                        r[c] *= 1.0 - th
                    r[clow] += th
                logY = 0.0
                for c in range(8):
                    if r[c] > 0.0:
                        logY += r[c] * (logF1[lam[c]] + logF2[mu[c]])
                D = rate * wdir[d] * abs(s) * (np.exp(logY) - X)
                if same:
                    out1[i] += D
                    out1[j] += D
                    for c in range(8):
                        if r[c] > 0.0:
                            out1[lam[c]] -= r[c] * D
                            out1[mu[c]] -= r[c] * D
                else:
                    out1[i] += D
                    out2[j] += D
                    for c in range(8):
                        if r[c] > 0.0:
                            out1[lam[c]] -= r[c] * D
                            out2[mu[c]] -= r[c] * D
    return out1, out2


@njit(cache=True, parallel=True)
def linearized_rows(c1, c2, om2, nodes, rows, u_sorted, u_limit, dirs, wdir, m1, m2,
                    x0, h, order, colmap1, colmap2, n1, n2, want2):
    """Derivatives of the pair sums at constant ratios h1 = c1, h2 = c2.

    Row p of D1 (D2) holds d/dh1_k (d/dh2_k) of [om2-weighted gain - loss] at
    output node rows[p], restricted to the support columns given by colmap
    (-1 marks nodes outside the support).
    """
    n = int(round(nodes.shape[0] ** (1.0 / 3.0)))
    inv_h = 1.0 / h
    a2 = 2.0 * m2 / (m1 + m2)
    a1 = 2.0 * m1 / (m1 + m2)
    nr = rows.shape[0]
    D1 = np.zeros((nr, n1))
    D2 = np.zeros((nr, n2 if want2 else 1))
    nn = n * n
    for p in prange(nr):
        ix = np.empty(4, np.int64)
        iy = np.empty(4, np.int64)
        iz = np.empty(4, np.int64)
        wx = np.empty(4)
        wy = np.empty(4)
        wz = np.empty(4)
        i = rows[p]
        vx = nodes[i, 0]
        vy = nodes[i, 1]
        vz = nodes[i, 2]
        diag = 0.0
        for q in range(u_limit[p]):
            j = u_sorted[q]
            ux = nodes[j, 0]
            uy = nodes[j, 1]
            uz = nodes[j, 2]
            gx = vx - ux
            gy = vy - uy
            gz = vz - uz
            pk = 0.0
            for d in range(dirs.shape[0]):
                ox = dirs[d, 0]
                oy = dirs[d, 1]
                oz = dirs[d, 2]
                s = gx * ox + gy * oy + gz * oz
                if s == 0.0:
                    continue
                ws = wdir[d] * abs(s) * om2[j]
                pk += ws
                b = a2 * s
                npt = _stencil(vx - b * ox, x0, inv_h, n, order, ix, wx)
                _stencil(vy - b * oy, x0, inv_h, n, order, iy, wy)
                _stencil(vz - b * oz, x0, inv_h, n, order, iz, wz)
                f = ws * c2
                for a in range(npt):
                    for bb in range(npt):
                        for cc in range(npt):
                            col = colmap1[ix[a] * nn + iy[bb] * n + iz[cc]]
                            if col >= 0:
                                D1[p, col] += f * wx[a] * wy[bb] * wz[cc]
                if want2:
                    c = a1 * s
                    _stencil(ux + c * ox, x0, inv_h, n, order, ix, wx)
                    _stencil(uy + c * oy, x0, inv_h, n, order, iy, wy)
                    _stencil(uz + c * oz, x0, inv_h, n, order, iz, wz)
                    f = ws * c1
                    for a in range(npt):
                        for bb in range(npt):
                            for cc in range(npt):
                                col = colmap2[ix[a] * nn + iy[bb] * n + iz[cc]]
                                if col >= 0:
                                    D2[p, col] += f * wx[a] * wy[bb] * wz[cc]
            diag += pk * c2
            if want2:
                col = colmap2[j]
                if col >= 0:
                    D2[p, col] -= pk * c1
        col = colmap1[i]
        if col >= 0:
            D1[p, col] -= diag
    return D1, D2
