"""Pure-Python/numpy versions of the kernels in ``_core.pyx``.

Selected automatically when the compiled extension is missing, or forced with
``COARSEKIT_PURE=1``.
"""

from collections import deque

import numpy as np

BACKEND = "python"


def bfs_distances(indptr, indices, source, max_depth=-1):
    n = len(indptr) - 1
    dist = [-1] * n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u]
        if 0 <= max_depth <= du:
            continue
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if dist[w] < 0:
                dist[w] = du + 1
                queue.append(w)
    return np.asarray(dist, dtype=np.int32)


def all_pairs_bfs(indptr, indices):
    n = len(indptr) - 1
    ip = indptr.tolist()
    ix = indices.tolist()
    out = np.empty((n, n), dtype=np.int32)
    for s in range(n):
        out[s] = bfs_distances(ip, ix, s)
    return out


def girth(indptr, indices):
    n = len(indptr) - 1
    ip = indptr.tolist()
    ix = indices.tolist()
    best = None
    for s in range(n):
        dist = {s: 0}
        parent = {s: -1}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            du = dist[u]
            if best is not None and 2 * du + 1 >= best:
                break
            for k in range(ip[u], ip[u + 1]):
                w = ix[k]
                if w not in dist:
                    dist[w] = du + 1
                    parent[w] = u
                    queue.append(w)
                elif w != parent[u]:
                    length = du + dist[w] + 1
                    if best is None or length < best:
                        best = length
    return 0 if best is None else best


def _popcount(a):
    return np.bitwise_count(a).astype(np.int64)


def min_closed_expansion(closed, n):
    if n > 24 or n < 2:
        raise ValueError("subset scan supports 2 <= n <= 24")
    nb = np.zeros(1, dtype=np.uint32)
    for v in range(n):
        nb = np.concatenate([nb, nb | np.uint32(closed[v])])
    masks = np.arange(1 << n, dtype=np.uint32)
    size = _popcount(masks)
    cover = _popcount(nb)
    ok = (size > 0) & (size <= n // 2)
    idx = np.flatnonzero(ok)
    ratio = cover[idx] / size[idx]
    # exact tie-break among float-near minima: first mask with the least cross product
    cand = idx[ratio <= ratio.min() * (1 + 1e-12)]
    best = None
    for m in cand:
        num, den = int(cover[m]), int(size[m])
        if best is None or num * best[1] < best[0] * den:
            best = (num, den, int(m))
    return best


def jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    m = np.array(a, dtype=np.float64, copy=True)
    n = m.shape[0]
    v = np.eye(n)
    thresh = tol * np.linalg.norm(m)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(m, 1) ** 2) * 2.0)
        if off <= thresh or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if apq == 0.0:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # rotate rows then columns of m, columns of v
                mp, mq = m[:, p].copy(), m[:, q].copy()
                m[:, p] = c * mp - s * mq
                m[:, q] = s * mp + c * mq
                mp, mq = m[p, :].copy(), m[q, :].copy()
                m[p, :] = c * mp - s * mq
                m[q, :] = s * mp + c * mq
                m[p, q] = m[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise ArithmeticError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(m).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
