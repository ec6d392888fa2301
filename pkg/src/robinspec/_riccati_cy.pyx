# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled propagation kernel.

Same contract as the numpy fallback: Dormand-Prince 5(4) on the stacked
(2N x N) system M'' = (lambda I - V(x)) M with QR renormalization of the
frame, Wronskian-defect bookkeeping at every renormalization checkpoint and
optional recording at output nodes.  Lambdas are integrated one at a time;
all matrix arithmetic is hand-rolled C loops (N <= 8 in practice, far below
BLAS call overhead).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cosh, exp, fabs, log, sqrt

cnp.import_array()

BACKEND_NAME = "cython"

DEF MAXN = 8
DEF MAXROWS = 16  # 2 * MAXN

cdef int KBOX = 0
cdef int KGAUSS = 1
cdef int KPT = 2
cdef int KTAB = 3

# Dormand-Prince 5(4) coefficients
cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40


cdef double _profile_value(long kind, double p0, double p1, double p2,
                           double[:] tab_x, double[:] tab_y, long lo, long hi, double x) nogil:
    cdef double u
    cdef long a, b, mid
    if kind == KBOX:
        if p1 < x < p2:
            return p0
        if x == p1 or x == p2:
            return 0.5 * p0
        return 0.0
    if kind == KGAUSS:
        u = (x - p1) / p2
        return p0 * exp(-0.5 * u * u)
    if kind == KPT:
        u = cosh((x - p1) / p2)
        return p0 / (u * u)
    # tabulated: binary search + linear interpolation, zero outside
    if hi - lo < 2 or x < tab_x[lo] or x > tab_x[hi - 1]:
        return 0.0
    a = lo
    b = hi - 1
    while b - a > 1:
        mid = (a + b) >> 1
        if tab_x[mid] <= x:
            a = mid
        else:
            b = mid
    u = (x - tab_x[a]) / (tab_x[b] - tab_x[a])
    return tab_y[a] * (1.0 - u) + tab_y[b] * u


cdef void _eval_potential(long nterms, long n, long[:] kinds, double[:, :] params,
                          double complex[:, :, :] weights, double[:] tab_x, double[:] tab_y,
                          long[:] tab_off, double x, double complex[:, :] v) nogil:
    cdef long k, i, j
    cdef double g
    for i in range(n):
        for j in range(n):
            v[i, j] = 0.0
    for k in range(nterms):
        g = _profile_value(kinds[k], params[k, 0], params[k, 1], params[k, 2],
                           tab_x, tab_y, tab_off[k], tab_off[k + 1], x)
        if g != 0.0:
            for i in range(n):
                for j in range(n):
                    v[i, j] = v[i, j] + g * weights[k, i, j]


cdef void _rhs(long nterms, long n, long[:] kinds, double[:, :] params,
               double complex[:, :, :] weights, double[:] tab_x, double[:] tab_y,
               long[:] tab_off, double lam, double x,
               double complex[:, :] y, double complex[:, :] out,
               double complex[:, :] vbuf) nogil:
    """out = f(x, y): top rows get y bottom, bottom rows get (lam I - V) y_top."""
    cdef long i, j, l
    cdef double complex acc
    _eval_potential(nterms, n, kinds, params, weights, tab_x, tab_y, tab_off, x, vbuf)
    for i in range(n):
        for j in range(n):
            out[i, j] = y[n + i, j]
    for i in range(n):
        for j in range(n):
            acc = lam * y[i, j]
            for l in range(n):
                acc = acc - vbuf[i, l] * y[l, j]
            out[n + i, j] = acc


cdef double _wronskian_defect_c(long n, double complex[:, :] y) nogil:
    """||M* M' - (M')* M||_F / (1 + ||M|| ||M'||)."""
    cdef long i, j, l
    cdef double complex wij
    cdef double acc = 0.0, nm = 0.0, nmp = 0.0
    for i in range(n):
        for j in range(n):
            wij = 0.0
            for l in range(n):
                wij = wij + y[l, i].conjugate() * y[n + l, j] - y[n + l, i].conjugate() * y[l, j]
            acc += wij.real * wij.real + wij.imag * wij.imag
    for i in range(n):
        for j in range(n):
            nm += y[i, j].real ** 2 + y[i, j].imag ** 2
            nmp += y[n + i, j].real ** 2 + y[n + i, j].imag ** 2
    return sqrt(acc) / (1.0 + sqrt(nm) * sqrt(nmp))


cdef double _renorm_c(long n, double complex[:, :] y) nogil:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Overwrites y with the orthonormal frame Q; returns sum log |r_jj|
    (the accumulated growth removed from the frame).
    """
    cdef long rows = 2 * n
    cdef long i, j, l, it
    cdef double complex proj
    cdef double nrm, out = 0.0
    for j in range(n):
        for it in range(2):
            for l in range(j):
                proj = 0.0
                for i in range(rows):
                    proj = proj + y[i, l].conjugate() * y[i, j]
                for i in range(rows):
                    y[i, j] = y[i, j] - proj * y[i, l]
        nrm = 0.0
        for i in range(rows):
            nrm += y[i, j].real ** 2 + y[i, j].imag ** 2
        nrm = sqrt(nrm)
        if nrm < 1e-300:
            nrm = 1e-300
        out += log(nrm)
        for i in range(rows):
            y[i, j] = y[i, j] / nrm
    return out


def integrate(pack, dim, lams, x0, x_end, breakpoints, record_nodes,
              rtol, atol, renorm_norm=1e6, renorm_every=40, max_steps=2_000_000,
              m0=None, mp0=None):
    """Mirror of the numpy backend's ``integrate``; loops lambdas serially."""
    kinds_arr, params_arr, weights_arr, tab_x_arr, tab_y_arr, tab_off_arr = pack
    cdef long[:] kinds = np.ascontiguousarray(kinds_arr, dtype=np.int64)
    cdef double[:, :] params = np.ascontiguousarray(params_arr, dtype=np.float64).reshape(len(kinds_arr), 3) if len(kinds_arr) else np.zeros((0, 3))
    cdef double complex[:, :, :] weights = np.ascontiguousarray(weights_arr, dtype=complex).reshape(len(kinds_arr), dim, dim) if len(kinds_arr) else np.zeros((0, dim, dim), dtype=complex)
    cdef double[:] tab_x = np.ascontiguousarray(tab_x_arr, dtype=np.float64)
    cdef double[:] tab_y = np.ascontiguousarray(tab_y_arr, dtype=np.float64)
    cdef long[:] tab_off = np.ascontiguousarray(tab_off_arr, dtype=np.int64)
    cdef long nterms = kinds.shape[0]
    cdef long n = dim

    if n > MAXN:
        raise ValueError(f"compiled kernel supports N <= {MAXN}, got {n}")

    lam_vec = np.atleast_1d(np.asarray(lams, dtype=float))
    cdef double[:] lam_view = lam_vec
    cdef long nl = lam_vec.size

    nodes_vec = np.asarray(record_nodes, dtype=float)
    cdef double[:] nodes = nodes_vec
    cdef long nrec = nodes_vec.size

    y_end = np.zeros((nl, 2 * n, n), dtype=complex)
    records = np.zeros((nrec, nl, 2 * n, n), dtype=complex)
    renorm_log = np.zeros(nl)
    wmax_arr = np.zeros(nl)
    cdef double complex[:, :, :] y_end_v = y_end
    cdef double complex[:, :, :, :] records_v = records
    cdef double[:] renorm_log_v = renorm_log
    cdef double[:] wmax_v = wmax_arr

    # initial frames may be shared (N, N) or per-lambda (L, N, N)
    if m0 is None:
        m0_arr = np.broadcast_to(np.eye(dim, dtype=complex), (nl, dim, dim)).copy()
    else:
        m0_arr = np.broadcast_to(np.asarray(m0, dtype=complex), (nl, dim, dim)).copy()
    if mp0 is None:
        mp0_arr = np.zeros((nl, dim, dim), dtype=complex)
    else:
        mp0_arr = np.broadcast_to(np.asarray(mp0, dtype=complex), (nl, dim, dim)).copy()
    cdef double complex[:, :, :] m0_v = m0_arr
    cdef double complex[:, :, :] mp0_v = mp0_arr

    # stop schedule: breakpoints, record nodes and the endpoint
    stop_set = {float(x_end)}
    stop_set.update(float(b) for b in breakpoints if x0 < b < x_end)
    stop_set.update(float(t) for t in nodes_vec if x0 < t <= x_end)
    stops_vec = np.array(sorted(stop_set), dtype=float)
    break_set = {float(b) for b in breakpoints}
    is_break_vec = np.array([1 if s in break_set else 0 for s in stops_vec], dtype=np.int64)
    cdef double[:] stops = stops_vec
    cdef long[:] is_break = is_break_vec
    cdef long nstops = stops_vec.size

    cdef double complex[:, :] y = np.zeros((2 * n, n), dtype=complex)
    cdef double complex[:, :] vbuf = np.zeros((n, n), dtype=complex)
    cdef double complex[:, :] ytmp = np.zeros((2 * n, n), dtype=complex)
    cdef double complex[:, :] y5 = np.zeros((2 * n, n), dtype=complex)
    stage_buf = np.zeros((7, 2 * n, n), dtype=complex)
    cdef double complex[:, :, :] k = stage_buf

    cdef long il, i, j, st, si, rec_i, steps
    cdef long accepted_since_renorm, k1_valid, at_target
    cdef long total_steps = 0
    cdef double lam, x, h, target, seg_lo, seg_hi, edge, xi, err, sc, ae, wd
    cdef double complex ev
    cdef double x0_c = x0, x_end_c = x_end
    cdef double rtol_c = rtol, atol_c = atol, renorm_norm_c = renorm_norm
    cdef long renorm_every_c = renorm_every, max_steps_c = max_steps
    cdef double nrm2, factor
    cdef double h_init = min((x_end_c - x0_c) / 8.0, 0.25 / sqrt(float(np.max(lam_vec)) + 1.0)) if x_end_c > x0_c else 0.0

    for il in range(nl):
        lam = lam_view[il]
        for i in range(n):
            for j in range(n):
                y[i, j] = m0_v[il, i, j]
                y[n + i, j] = mp0_v[il, i, j]

        rec_i = 0
        while rec_i < nrec and nodes[rec_i] <= x0_c:
            for i in range(2 * n):
                for j in range(n):
                    records_v[rec_i, il, i, j] = y[i, j]
            rec_i += 1

        if x_end_c <= x0_c:
            for i in range(2 * n):
                for j in range(n):
                    y_end_v[il, i, j] = y[i, j]
            continue

        x = x0_c
        h = h_init
        steps = 0
        accepted_since_renorm = 0
        k1_valid = 0
        wd = 0.0

        for st in range(nstops):
            target = stops[st]
            seg_lo = x
            seg_hi = target
            edge = 1e-10 * (1.0 if fabs(seg_hi) < 1.0 else fabs(seg_hi))
            k1_valid = 0
            while x < target:
                if h > target - x:
                    h = target - x
                at_target = 1 if (target - x) <= h * (1.0 + 1e-12) else 0
                if at_target:
                    h = target - x
                if steps >= max_steps_c:
                    raise RuntimeError(f"propagation exceeded {max_steps} steps at x={x:.6g}")
                steps += 1
                if not k1_valid:
                    xi = x
                    if xi < seg_lo + edge: xi = seg_lo + edge
                    if xi > seg_hi - edge: xi = seg_hi - edge
                    _rhs(nterms, n, kinds, params, weights, tab_x, tab_y, tab_off,
                         lam, xi, y, k[0], vbuf)
                    k1_valid = 1
                # stages 2..7
                for si in range(1, 7):
                    for i in range(2 * n):
                        for j in range(n):
                            ev = 0.0
                            if si == 1:
                                ev = A21 * k[0, i, j]
                            elif si == 2:
                                ev = A31 * k[0, i, j] + A32 * k[1, i, j]
                            elif si == 3:
                                ev = A41 * k[0, i, j] + A42 * k[1, i, j] + A43 * k[2, i, j]
                            elif si == 4:
                                ev = A51 * k[0, i, j] + A52 * k[1, i, j] + A53 * k[2, i, j] + A54 * k[3, i, j]
                            elif si == 5:
                                ev = A61 * k[0, i, j] + A62 * k[1, i, j] + A63 * k[2, i, j] + A64 * k[3, i, j] + A65 * k[4, i, j]
                            else:
                                ev = B1 * k[0, i, j] + B3 * k[2, i, j] + B4 * k[3, i, j] + B5 * k[4, i, j] + B6 * k[5, i, j]
                            ytmp[i, j] = y[i, j] + h * ev
                    if si == 1: xi = x + C2 * h
                    elif si == 2: xi = x + C3 * h
                    elif si == 3: xi = x + C4 * h
                    elif si == 4: xi = x + C5 * h
                    else: xi = x + h
                    if xi < seg_lo + edge: xi = seg_lo + edge
                    if xi > seg_hi - edge: xi = seg_hi - edge
                    if si == 6:
                        for i in range(2 * n):
                            for j in range(n):
                                y5[i, j] = ytmp[i, j]
                    _rhs(nterms, n, kinds, params, weights, tab_x, tab_y, tab_off,
                         lam, xi, ytmp, k[si], vbuf)
                # error estimate
                err = 0.0
                for i in range(2 * n):
                    for j in range(n):
                        ev = h * (E1 * k[0, i, j] + E3 * k[2, i, j] + E4 * k[3, i, j]
                                  + E5 * k[4, i, j] + E6 * k[5, i, j] + E7 * k[6, i, j])
                        ae = abs(y[i, j])
                        sc = abs(y5[i, j])
                        if ae > sc:
                            sc = ae
                        sc = atol_c + rtol_c * sc
                        ae = abs(ev) / sc
                        err += ae * ae
                err = sqrt(err / (2.0 * n * n))
                if err != err:
                    raise RuntimeError(f"non-finite state during propagation at x={x:.6g}")
                if err <= 1.0:
                    x = target if at_target else x + h
                    for i in range(2 * n):
                        for j in range(n):
                            y[i, j] = y5[i, j]
                            k[0, i, j] = k[6, i, j]  # FSAL
                    accepted_since_renorm += 1
                    nrm2 = 0.0
                    for i in range(2 * n):
                        for j in range(n):
                            nrm2 += y[i, j].real ** 2 + y[i, j].imag ** 2
                    if sqrt(nrm2) > renorm_norm_c or accepted_since_renorm >= renorm_every_c:
                        ae = _wronskian_defect_c(n, y)
                        if ae > wd:
                            wd = ae
                        renorm_log_v[il] += _renorm_c(n, y)
                        accepted_since_renorm = 0
                        k1_valid = 0
                if err > 0.0:
                    factor = 0.9 * err ** (-0.2)
                else:
                    factor = 5.0
                if factor > 5.0: factor = 5.0
                if factor < 0.2: factor = 0.2
                h = h * factor
            # record at this stop if it is an output node
            while rec_i < nrec and fabs(nodes[rec_i] - target) <= 1e-12 * (1.0 if fabs(target) < 1.0 else fabs(target)):
                for i in range(2 * n):
                    for j in range(n):
                        records_v[rec_i, il, i, j] = y[i, j]
                rec_i += 1
            if is_break[st]:
                k1_valid = 0
        ae = _wronskian_defect_c(n, y)
        if ae > wd:
            wd = ae
        wmax_v[il] = wd
        for i in range(2 * n):
            for j in range(n):
                y_end_v[il, i, j] = y[i, j]
        total_steps = steps

    return {
        "y_end": y_end,
        "records": records,
        "renorm_log": renorm_log,
        "wronskian_defect": wmax_arr,
        "steps": int(total_steps),
    }
