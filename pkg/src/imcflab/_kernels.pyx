# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise flow kernels; see ``_kernels_py`` for the reference."""

import numpy as np
from libc.math cimport expm1, sqrt


def imcf_speed(double[::1] r, double[:, ::1] p, double[:, :, ::1] R, int n):
    cdef Py_ssize_t N = r.shape[0]
    cdef Py_ssize_t d = p.shape[1]
    cdef Py_ssize_t a, i, j
    cdef double em, sh, ct, ct_m1, p2, pRp, trR, q, v, w, trB, pBp, trS, hm, acc
    speed = np.empty(N)
    Hm = np.empty(N)
    cdef double[::1] sp = speed
    cdef double[::1] hv = Hm
    for a in range(N):
        # one expm1 gives sinh, coth and coth - 1 without cancellation
        em = expm1(r[a])
        sh = 0.5 * em * (em + 2.0) / (em + 1.0)
        ct_m1 = 2.0 / (em * (em + 2.0))
        ct = 1.0 + ct_m1
        p2 = 0.0
        trR = 0.0
        pRp = 0.0
        for i in range(d):
            p2 += p[a, i] * p[a, i]
            trR += R[a, i, i]
            acc = 0.0
            for j in range(d):
                acc += R[a, i, j] * p[a, j]
            pRp += p[a, i] * acc
        q = p2 / (sh * sh)
        v = sqrt(1.0 + q)
        w = 1.0 / v
        trB = trR - ct * p2
        pBp = pRp - ct * p2 * p2
        trS = trB / sh - pBp / (sh * sh * sh * v * v)
        hm = (n - 1) * (ct_m1 * w - q / (v * (1.0 + v))) - trS * w / sh
        hv[a] = hm
        sp[a] = v / (hm + (n - 1))
    return speed, Hm
