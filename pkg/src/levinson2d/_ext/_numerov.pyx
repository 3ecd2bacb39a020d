# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Numerov sweep; same contract as ``_fallback.numerov_sweep``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

from ._fallback import check_plan

cnp.import_array()

cdef double RESCALE_AT = 1e150
cdef double W0 = 63.0 / 256.0, W1 = 315.0 / 256.0, W2 = -210.0 / 256.0
cdef double W3 = 126.0 / 256.0, W4 = -45.0 / 256.0, W5 = 7.0 / 256.0


cdef inline void _count(double f, double* last, long* nod) noexcept nogil:
    cdef double s
    if f != 0.0:
        s = 1.0 if f > 0 else -1.0
        if last[0] != 0.0 and s != last[0]:
            nod[0] += 1
        last[0] = s


def numerov_sweep(q0, e2x, lams, double ell2, double dx, f0, f1, long stride0=1, breaks=()):
    cdef const double[::1] q = np.ascontiguousarray(q0, dtype=np.float64)
    cdef const double[::1] e = np.ascontiguousarray(e2x, dtype=np.float64)
    cdef const double[::1] lam = np.ascontiguousarray(lams, dtype=np.float64)
    cdef const double[::1] a0 = np.ascontiguousarray(f0, dtype=np.float64)
    cdef const double[::1] a1 = np.ascontiguousarray(f1, dtype=np.float64)
    cdef const long long[::1] brk = np.ascontiguousarray(np.asarray(breaks, dtype=np.int64).reshape(-1))
    cdef Py_ssize_t n_end = q.shape[0] - 2, m = lam.shape[0], nb = brk.shape[0]
    check_plan(n_end, stride0, brk)
    if e.shape[0] != q.shape[0] or a0.shape[0] != m or a1.shape[0] != m:
        raise ValueError("array lengths do not match")
    cdef Py_ssize_t i, j, k, bi, st
    cdef double L, fn, gm, gc, gn, last, h12
    cdef double hist[6]
    cdef int nh
    cdef long nod
    cdef int bad = 0

    out_b = np.empty(m)
    out_n = np.empty(m)
    out_g = np.empty(m)
    out_nodes = np.empty(m, dtype=np.int64)
    cdef double[::1] ob = out_b, on = out_n, og = out_g
    cdef long long[::1] onod = out_nodes

    with nogil:
        for j in range(m):
            L = lam[j]
            st = stride0
            i = st
            # hist[0] is the newest sample
            hist[0] = a1[j]
            hist[1] = a0[j]
            nh = 2
            nod = 0
            last = 0.0
            _count(a0[j], &last, &nod)
            _count(a1[j], &last, &nod)
            gm = ell2 + q[0] - e[0] * L
            gc = ell2 + q[st] - e[st] * L
            bi = 0
            while i <= n_end:
                if bi < nb and i == brk[bi]:
                    if nh < 6:
                        bad = 1
                        break
                    fn = (W0 * hist[0] + W1 * hist[1] + W2 * hist[2]
                          + W3 * hist[3] + W4 * hist[4] + W5 * hist[5])
                    st = st // 2
                    hist[1] = fn
                    nh = 2
                    gm = ell2 + q[i - st] - e[i - st] * L
                    bi += 1
                h12 = dx * st * dx * st / 12.0
                gn = ell2 + q[i + st] - e[i + st] * L
                fn = (2.0 * (1.0 + 5.0 * h12 * gc) * hist[0] - (1.0 - h12 * gm) * hist[1]) / (1.0 - h12 * gn)
                if i + st <= n_end:
                    _count(fn, &last, &nod)
                if fabs(fn) > RESCALE_AT:
                    fn /= RESCALE_AT
                    for k in range(nh):
                        hist[k] /= RESCALE_AT
                for k in range(5, 0, -1):
                    hist[k] = hist[k - 1]
                hist[0] = fn
                if nh < 6:
                    nh += 1
                gm = gc
                gc = gn
                i += st
            if st != 1 or i != n_end + 1:
                bad = 1
            ob[j] = hist[2]
            on[j] = hist[1]
            og[j] = hist[0]
            onod[j] = nod
    if bad:
        raise ValueError("invalid stride plan for the Numerov sweep")
    return out_b, out_n, out_g, out_nodes
