# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Semantics mirror :mod:`songtips._pykernels` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs

cnp.import_array()


def greedy_map(double[:, ::1] L, Py_ssize_t k, double stop_eps):
    cdef Py_ssize_t n = L.shape[0]
    cdef Py_ssize_t steps = k if k < n else n
    cdef double[:, ::1] c = np.zeros((steps if steps > 0 else 1, n))
    cdef double[::1] d2 = np.empty(n)
    cdef unsigned char[::1] taken = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] picked = np.empty(steps, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gains = np.empty(steps)
    cdef Py_ssize_t i, j, s, step, count = 0
    cdef double best, dj, e, acc

    for i in range(n):
        d2[i] = L[i, i]

    for step in range(steps):
        j = -1
        best = 0.0
        for i in range(n):
            if not taken[i] and (j < 0 or d2[i] > best):
                j = i
                best = d2[i]
        if j < 0 or best <= stop_eps:
            break
        taken[j] = 1
        picked[count] = j
        gains[count] = log(best)
        count += 1
        if step == steps - 1:
            break
        dj = sqrt(best)
        for i in range(n):
            if taken[i]:
                continue
            acc = L[j, i]
            for s in range(step):
                acc -= c[s, j] * c[s, i]
            e = acc / dj
            c[step, i] = e
            d2[i] -= e * e
    return picked[:count].copy(), gains[:count].copy()


def rank_iterate(
    const cnp.int64_t[::1] indptr,
    const cnp.int64_t[::1] indices,
    const double[::1] weights,
    double base,
    double init,
    double damping,
    double tol,
    Py_ssize_t max_iter,
):
    cdef Py_ssize_t M = indptr.shape[0] - 1
    cdef double[::1] w = np.full(M, init)
    cdef double[::1] nxt = np.empty(M)
    cdef double[::1] tmp
    cdef Py_ssize_t it = 0, i, p
    cdef double acc, delta, resid = np.inf

    while it < max_iter:
        resid = 0.0
        for i in range(M):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc += weights[p] * w[indices[p]]
            nxt[i] = base + damping * acc
            delta = fabs(nxt[i] - w[i])
            if delta > resid:
                resid = delta
        tmp = w
        w = nxt
        nxt = tmp
        it += 1
        if resid < tol:
            break
    return np.asarray(w).copy(), it, resid


def plsa_accumulate(
    const cnp.int64_t[::1] doc,
    const cnp.int64_t[::1] word,
    const double[::1] count,
    const double[:, ::1] theta,
    const double[:, ::1] phi,
):
    cdef Py_ssize_t nnz = doc.shape[0]
    cdef Py_ssize_t t = theta.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] acc_theta = np.zeros((theta.shape[0], t))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] acc_phi = np.zeros((t, phi.shape[1]))
    cdef double[:, ::1] at = acc_theta
    cdef double[:, ::1] ap = acc_phi
    cdef double[::1] buf = np.empty(t)
    cdef double loglik = 0.0, s, scale
    cdef Py_ssize_t q, z, d, w

    for q in range(nnz):
        d = doc[q]
        w = word[q]
        s = 0.0
        for z in range(t):
            buf[z] = theta[d, z] * phi[z, w]
            s += buf[z]
        if s <= 0.0:
            loglik = -np.inf
            continue
        loglik += count[q] * log(s)
        scale = count[q] / s
        for z in range(t):
            at[d, z] += buf[z] * scale
            ap[z, w] += buf[z] * scale
    return acc_theta, acc_phi, loglik
