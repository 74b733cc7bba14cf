# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled graph and matrix kernels.

Every function here has a behaviour-identical counterpart in ``_core_py``.
Graphs are passed in CSR form: ``indptr`` (n + 1) and ``indices`` (int32).
"""

import numpy as np
from libc.stdlib cimport malloc, free
from libc.math cimport fabs, sqrt

BACKEND = "compiled"


cdef int _bfs(const int[::1] indptr, const int[::1] indices, int n, int source,
              int max_depth, int[::1] dist, int[::1] queue) nogil:
    cdef int head = 0, tail = 0, u, w, k, du
    for k in range(n):
        dist[k] = -1
    dist[source] = 0
    queue[tail] = source
    tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        if max_depth >= 0 and du >= max_depth:
            continue
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if dist[w] < 0:
                dist[w] = du + 1
                queue[tail] = w
                tail += 1
    return tail


def bfs_distances(const int[::1] indptr, const int[::1] indices, int source, int max_depth=-1):
    """Distances from ``source``; -1 marks unreachable (or beyond ``max_depth``)."""
    cdef int n = indptr.shape[0] - 1
    dist = np.empty(n, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    cdef int[::1] d = dist
    cdef int[::1] q = queue
    with nogil:
        _bfs(indptr, indices, n, source, max_depth, d, q)
    return dist


def all_pairs_bfs(const int[::1] indptr, const int[::1] indices):
    cdef int n = indptr.shape[0] - 1
    out = np.empty((n, n), dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    cdef int[:, ::1] o = out
    cdef int[::1] q = queue
    cdef int s
    with nogil:
        for s in range(n):
            _bfs(indptr, indices, n, s, -1, o[s], q)
    return out


def girth(const int[::1] indptr, const int[::1] indices):
    """Length of the shortest cycle, or 0 for a forest."""
    cdef int n = indptr.shape[0] - 1
    cdef int best = 0x7fffffff
    cdef int s, head, tail, u, w, k, du
    dist_a = np.empty(n, dtype=np.int32)
    par_a = np.empty(n, dtype=np.int32)
    queue_a = np.empty(n, dtype=np.int32)
    cdef int[::1] dist = dist_a
    cdef int[::1] par = par_a
    cdef int[::1] queue = queue_a
    with nogil:
        for s in range(n):
            for k in range(n):
                dist[k] = -1
            dist[s] = 0
            par[s] = -1
            head = 0
            tail = 1
            queue[0] = s
            while head < tail:
                u = queue[head]
                head += 1
                du = dist[u]
                if 2 * du + 1 >= best:
                    break
                for k in range(indptr[u], indptr[u + 1]):
                    w = indices[k]
                    if dist[w] < 0:
                        dist[w] = du + 1
                        par[w] = u
                        queue[tail] = w
                        tail += 1
                    elif w != par[u]:
                        if du + dist[w] + 1 < best:
                            best = du + dist[w] + 1
    return 0 if best == 0x7fffffff else best


cdef inline int _popcount(unsigned int x) nogil:
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


cdef inline int _ctz(unsigned int x) nogil:
    cdef int c = 0
    while not (x & 1):
        x >>= 1
        c += 1
    return c


def min_closed_expansion(const unsigned int[::1] closed, int n):
    """Minimise |N_1(A)| / |A| over nonempty A with |A| <= n/2.

    ``closed[v]`` is the bitmask of v together with its neighbours.
    Returns ``(numerator, denominator, argmin_mask)``.
    """
    if n > 24 or n < 2:
        raise ValueError("subset scan supports 2 <= n <= 24")
    cdef unsigned int total = 1u << n
    cdef unsigned int *nb = <unsigned int *> malloc(total * sizeof(unsigned int))
    if nb == NULL:
        raise MemoryError()
    cdef unsigned int mask, low
    cdef int size, cover, half = n // 2
    cdef long long best_num = 1, best_den = 0
    cdef unsigned int best_mask = 0
    try:
        with nogil:
            nb[0] = 0
            for mask in range(1, total):
                low = mask & (mask - 1)
                nb[mask] = nb[low] | closed[_ctz(mask)]
                size = _popcount(mask)
                if size > half:
                    continue
                cover = _popcount(nb[mask])
                # cover / size < best_num / best_den
                if best_den == 0 or <long long> cover * best_den < best_num * <long long> size:
                    best_num = cover
                    best_den = size
                    best_mask = mask
    finally:
        free(nb)
    return int(best_num), int(best_den), int(best_mask)


def jacobi_eigh(double[:, ::1] a, double tol=1e-12, int max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix (input copied).

    Returns ascending eigenvalues and the matching column eigenvectors.
    Stops once the off-diagonal Frobenius norm is below ``tol * ||A||_F``.
    """
    cdef int n = a.shape[0]
    m_arr = np.array(a, dtype=np.float64, copy=True)
    v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] m = m_arr
    cdef double[:, ::1] v = v_arr
    cdef int p, q, k, sweep
    cdef double off, fro = 0.0, app, aqq, apq, theta, t, c, s, tau, g, h
    for p in range(n):
        for q in range(n):
            fro += m[p, q] * m[p, q]
    fro = sqrt(fro)
    cdef double thresh = tol * fro
    cdef int converged = 0
    with nogil:
        for sweep in range(max_sweeps):
            off = 0.0
            for p in range(n):
                for q in range(p + 1, n):
                    off += 2.0 * m[p, q] * m[p, q]
            if sqrt(off) <= thresh or off == 0.0:
                converged = 1
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = m[p, q]
                    if apq == 0.0:
                        continue
                    app = m[p, p]
                    aqq = m[q, q]
                    theta = (aqq - app) / (2.0 * apq)
                    if theta >= 0:
                        t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                    else:
                        t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    tau = s / (1.0 + c)
                    m[p, p] = app - t * apq
                    m[q, q] = aqq + t * apq
                    m[p, q] = 0.0
                    m[q, p] = 0.0
                    for k in range(n):
                        if k != p and k != q:
                            g = m[k, p]
                            h = m[k, q]
                            m[k, p] = g - s * (h + tau * g)
                            m[p, k] = m[k, p]
                            m[k, q] = h + s * (g - tau * h)
                            m[q, k] = m[k, q]
                    for k in range(n):
                        g = v[k, p]
                        h = v[k, q]
                        v[k, p] = g - s * (h + tau * g)
                        v[k, q] = h + s * (g - tau * h)
    if not converged:
        raise ArithmeticError("Jacobi iteration did not converge in %d sweeps" % max_sweeps)
    w = np.diagonal(m_arr).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v_arr[:, order]
