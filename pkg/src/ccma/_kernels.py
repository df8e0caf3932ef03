"""Compiled single-pass constraint assembly.

One call walks the row-primitive table of a :class:`ConstraintSystem`
and fills C, dC/ds, dC/du and, when asked, the weighted second-derivative
sums ``sum_r w_r d2C_r/ds2`` and ``sum_r w_r d2C_r/dsdu``. With
``weights_from_c`` the weights are the constraint values themselves,
which is exactly what the energy Hessian and dG/du need.

The math mirrors the vectorized numpy primitives in ``constraints``; the
two are cross-checked in the test suite.
"""

from __future__ import annotations

import numpy as np
from numba import njit

POINTDIFF, VECDIFF, VECDOT, LINEOFF, HEIGHT, VECWORLD, MOTORXY, MOTORZ = range(8)


@njit(cache=True)
def _elementary(theta, axis, d, out):
    # d-th derivative of the rotation about `axis` (0=z, 1=y, 2=x)
    c = np.cos(theta)
    s = np.sin(theta)
    if d == 1:
        c, s = -s, c
    elif d == 2:
        c, s = -c, -s
    one = 1.0 if d == 0 else 0.0
    out[:, :] = 0.0
    if axis == 0:
        out[0, 0] = c
        out[0, 1] = -s
        out[1, 0] = s
        out[1, 1] = c
        out[2, 2] = one
    elif axis == 1:
        out[0, 0] = c
        out[0, 2] = s
        out[2, 0] = -s
        out[2, 2] = c
        out[1, 1] = one
    else:
        out[1, 1] = c
        out[1, 2] = -s
        out[2, 1] = s
        out[2, 2] = c
        out[0, 0] = one


@njit(cache=True)
def _triple(A, B, C, out):
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                ab = A[i, 0] * B[0, k] + A[i, 1] * B[1, k] + A[i, 2] * B[2, k]
                acc += ab * C[k, j]
            out[i, j] = acc


@njit(cache=True)
def rotations(s, n_bodies, order, R, dR, d2R):
    E = np.empty((3, 3, 3, 3))  # [axis, derivative order, 3, 3]
    for b in range(n_bodies):
        for ax in range(3):
            for d in range(order + 1):
                _elementary(s[6 * b + ax], ax, d, E[ax, d])
        _triple(E[0, 0], E[1, 0], E[2, 0], R[b])
        if order >= 1:
            _triple(E[0, 1], E[1, 0], E[2, 0], dR[b, 0])
            _triple(E[0, 0], E[1, 1], E[2, 0], dR[b, 1])
            _triple(E[0, 0], E[1, 0], E[2, 1], dR[b, 2])
        if order >= 2:
            for a in range(3):
                for c in range(a, 3):
                    o0 = (a == 0) + (c == 0)
                    o1 = (a == 1) + (c == 1)
                    o2 = (a == 2) + (c == 2)
                    _triple(E[0, o0], E[1, o1], E[2, o2], d2R[b, a, c])
                    if c != a:
                        d2R[b, c, a, :, :] = d2R[b, a, c]


@njit(cache=True)
def _world(b, local, point, s, R, dR, d2R, order, v, J, H):
    # v = R local (+ t); J (3, 6) over (angles, translation); H (3, 3, 3) angle Hessian
    for i in range(3):
        v[i] = R[b, i, 0] * local[0] + R[b, i, 1] * local[1] + R[b, i, 2] * local[2]
        if point:
            v[i] += s[6 * b + 3 + i]
    if order == 0:
        return
    for i in range(3):
        for a in range(3):
            J[i, a] = dR[b, a, i, 0] * local[0] + dR[b, a, i, 1] * local[1] + dR[b, a, i, 2] * local[2]
        for a in range(3):
            J[i, 3 + a] = 1.0 if (point and a == i) else 0.0
    if order < 2:
        return
    for i in range(3):
        for a in range(3):
            for c in range(3):
                H[i, a, c] = d2R[b, a, c, i, 0] * local[0] + d2R[b, a, c, i, 1] * local[1] + d2R[b, a, c, i, 2] * local[2]


@njit(cache=True)
def assemble(s, u, n_bodies, ptype, prow, pbi, pbj, pvec, pslot, order, weights, weights_from_c, C, Js, Ju, Hss, Hsu):
    """Fill the output arrays in place; Hss/Hsu are accumulated (pass zeros)."""
    R = np.empty((n_bodies, 3, 3))
    dR = np.empty((n_bodies, 3, 3, 3))
    d2R = np.empty((n_bodies, 3, 3, 3, 3))
    rotations(s, n_bodies, order, R, dR, d2R)

    val = np.zeros(3)
    Jl = np.zeros((3, 12))
    Hl = np.zeros((3, 12, 12))
    Jul = np.zeros((3, 2))
    Hsul = np.zeros((3, 12, 2))
    va = np.zeros(3)
    vb = np.zeros(3)
    vc = np.zeros(3)
    Ja = np.zeros((3, 6))
    Jb = np.zeros((3, 6))
    Jc = np.zeros((3, 6))
    Ha = np.zeros((3, 3, 3))
    Hb = np.zeros((3, 3, 3))
    Hc = np.zeros((3, 3, 3))
    cols = np.empty(12, dtype=np.int64)

    for p in range(ptype.shape[0]):
        t = ptype[p]
        bi = pbi[p]
        bj = pbj[p]
        row0 = prow[p]
        two = t <= LINEOFF
        nc = 12 if two else 6
        for a in range(6):
            cols[a] = 6 * bi + a
            if two:
                cols[6 + a] = 6 * bj + a
        nr = 3
        nu = 0
        if order >= 1:
            Jl[:, :] = 0.0
            Jul[:, :] = 0.0
        if order >= 2:
            Hl[:, :, :] = 0.0
            Hsul[:, :, :] = 0.0

        if t == POINTDIFF or t == VECDIFF:
            pt = t == POINTDIFF
            _world(bi, pvec[p, 0], pt, s, R, dR, d2R, order, va, Ja, Ha)
            _world(bj, pvec[p, 1], pt, s, R, dR, d2R, order, vb, Jb, Hb)
            for i in range(3):
                val[i] = vb[i] - va[i]
            if order >= 1:
                for i in range(3):
                    for a in range(6):
                        Jl[i, a] = -Ja[i, a]
                        Jl[i, 6 + a] = Jb[i, a]
            if order >= 2:
                for i in range(3):
                    for a in range(3):
                        for c in range(3):
                            Hl[i, a, c] = -Ha[i, a, c]
                            Hl[i, 6 + a, 6 + c] = Hb[i, a, c]
        elif t == VECDOT:
            nr = 1
            _world(bi, pvec[p, 0], False, s, R, dR, d2R, order, va, Ja, Ha)
            _world(bj, pvec[p, 1], False, s, R, dR, d2R, order, vb, Jb, Hb)
            val[0] = va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2]
            if order >= 1:
                for a in range(6):
                    Jl[0, a] = vb[0] * Ja[0, a] + vb[1] * Ja[1, a] + vb[2] * Ja[2, a]
                    Jl[0, 6 + a] = va[0] * Jb[0, a] + va[1] * Jb[1, a] + va[2] * Jb[2, a]
            if order >= 2:
                for a in range(3):
                    for c in range(3):
                        Hl[0, a, c] = vb[0] * Ha[0, a, c] + vb[1] * Ha[1, a, c] + vb[2] * Ha[2, a, c]
                        Hl[0, 6 + a, 6 + c] = va[0] * Hb[0, a, c] + va[1] * Hb[1, a, c] + va[2] * Hb[2, a, c]
                for a in range(6):
                    for c in range(6):
                        x = Ja[0, a] * Jb[0, c] + Ja[1, a] * Jb[1, c] + Ja[2, a] * Jb[2, c]
                        Hl[0, a, 6 + c] = x
                        Hl[0, 6 + c, a] = x
        elif t == LINEOFF:
            nr = 1
            _world(bi, pvec[p, 0], True, s, R, dR, d2R, order, va, Ja, Ha)
            _world(bj, pvec[p, 1], True, s, R, dR, d2R, order, vb, Jb, Hb)
            _world(bi, pvec[p, 2], False, s, R, dR, d2R, order, vc, Jc, Hc)
            d0 = vb[0] - va[0]
            d1 = vb[1] - va[1]
            d2 = vb[2] - va[2]
            val[0] = d0 * vc[0] + d1 * vc[1] + d2 * vc[2]
            if order >= 1:
                for a in range(6):
                    Jl[0, a] = -(vc[0] * Ja[0, a] + vc[1] * Ja[1, a] + vc[2] * Ja[2, a]) + (
                        d0 * Jc[0, a] + d1 * Jc[1, a] + d2 * Jc[2, a]
                    )
                    Jl[0, 6 + a] = vc[0] * Jb[0, a] + vc[1] * Jb[1, a] + vc[2] * Jb[2, a]
            if order >= 2:
                for a in range(6):
                    for c in range(6):
                        mix_ac = Ja[0, a] * Jc[0, c] + Ja[1, a] * Jc[1, c] + Ja[2, a] * Jc[2, c]
                        mix_ca = Ja[0, c] * Jc[0, a] + Ja[1, c] * Jc[1, a] + Ja[2, c] * Jc[2, a]
                        Hl[0, a, c] = -mix_ac - mix_ca
                        x = Jc[0, a] * Jb[0, c] + Jc[1, a] * Jb[1, c] + Jc[2, a] * Jb[2, c]
                        Hl[0, a, 6 + c] = x
                        Hl[0, 6 + c, a] = x
                for a in range(3):
                    for c in range(3):
                        Hl[0, a, c] += -(vc[0] * Ha[0, a, c] + vc[1] * Ha[1, a, c] + vc[2] * Ha[2, a, c]) + (
                            d0 * Hc[0, a, c] + d1 * Hc[1, a, c] + d2 * Hc[2, a, c]
                        )
                        Hl[0, 6 + a, 6 + c] = vc[0] * Hb[0, a, c] + vc[1] * Hb[1, a, c] + vc[2] * Hb[2, a, c]
        elif t == HEIGHT:
            nr = 1
            val[0] = s[6 * bi + 5]
            if order >= 1:
                Jl[0, 5] = 1.0
        elif t == VECWORLD:
            _world(bi, pvec[p, 0], False, s, R, dR, d2R, order, va, Ja, Ha)
            for i in range(3):
                val[i] = va[i] - pvec[p, 1, i]
            if order >= 1:
                for i in range(3):
                    for a in range(6):
                        Jl[i, a] = Ja[i, a]
            if order >= 2:
                for i in range(3):
                    for a in range(3):
                        for c in range(3):
                            Hl[i, a, c] = Ha[i, a, c]
        elif t == MOTORXY:
            nr = 2
            nu = 2
            val[0] = s[6 * bi + 3] - u[pslot[p, 0]]
            val[1] = s[6 * bi + 4] - u[pslot[p, 1]]
            if order >= 1:
                Jl[0, 3] = 1.0
                Jl[1, 4] = 1.0
                Jul[0, 0] = -1.0
                Jul[1, 1] = -1.0
        else:  # MOTORZ
            nu = 1
            th = u[pslot[p, 0]]
            c = np.cos(th)
            sn = np.sin(th)
            vp = pvec[p, 0]
            w0 = c * vp[0] - sn * vp[1]
            w1 = sn * vp[0] + c * vp[1]
            w2 = vp[2]
            dw0 = -sn * vp[0] - c * vp[1]
            dw1 = c * vp[0] - sn * vp[1]
            for i in range(3):
                val[i] = R[bi, i, 0] * w0 + R[bi, i, 1] * w1 + R[bi, i, 2] * w2
            val[0] -= 1.0
            if order >= 1:
                for i in range(3):
                    for a in range(3):
                        Jl[i, a] = dR[bi, a, i, 0] * w0 + dR[bi, a, i, 1] * w1 + dR[bi, a, i, 2] * w2
                    Jul[i, 0] = R[bi, i, 0] * dw0 + R[bi, i, 1] * dw1
            if order >= 2:
                for i in range(3):
                    for a in range(3):
                        for cc in range(3):
                            Hl[i, a, cc] = d2R[bi, a, cc, i, 0] * w0 + d2R[bi, a, cc, i, 1] * w1 + d2R[bi, a, cc, i, 2] * w2
                        Hsul[i, a, 0] = dR[bi, a, i, 0] * dw0 + dR[bi, a, i, 1] * dw1

        for r in range(nr):
            row = row0 + r
            C[row] = val[r]
            if order >= 1:
                for a in range(nc):
                    Js[row, cols[a]] = Jl[r, a]
                for k in range(nu):
                    Ju[row, pslot[p, k]] = Jul[r, k]
            if order >= 2:
                wr = val[r] if weights_from_c else weights[row]
                if wr != 0.0:
                    for a in range(nc):
                        ca = cols[a]
                        for c2 in range(nc):
                            Hss[ca, cols[c2]] += wr * Hl[r, a, c2]
                        for k in range(nu):
                            Hsu[ca, pslot[p, k]] += wr * Hsul[r, a, k]
