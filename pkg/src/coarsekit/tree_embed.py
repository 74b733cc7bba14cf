"""Depth-bounded universal-cover lifts and the edge-path embedding of trees.

For a tree T with basepoint x0, xi(x) is the 0/1 indicator of the edges on
the path x0 -> x, and ||xi(x) - xi(y)||^2 = d(x, y).  Graph balls that lift
isometrically to the universal cover therefore carry a CND distance kernel.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import DisconnectedGraphError, FiniteGraph, GraphError, girth
from .kernels import CndVerdict, Kernel, Verdict, is_cnd_projected

MAX_LIFT_VERTICES = 10**6

LOCAL_ISOMETRY = "LOCAL_ISOMETRY"
NO_CERTIFICATE = "NO_CERTIFICATE"


class LiftTooLarge(GraphError):
    pass


class NotATree(GraphError):
    pass


class EmbeddingIdentityError(AssertionError):
    def __init__(self, pair, lhs, rhs):
        self.pair = pair
        super().__init__(f"||xi(x)-xi(y)||^2 = {lhs} but d = {rhs} for pair {pair}")


class CertificateRefused(GraphError):
    pass


@dataclass(frozen=True)
class TreeLift:
    """Tree of non-backtracking walks of length <= radius from ``center``.

    Lift vertex 0 is the empty walk; ``parent[i]`` is the walk with its last
    step removed and ``cover[i]`` is its endpoint in the source graph.
    ``ball`` lists source vertices within ``radius`` of the centre, sorted.
    """

    source: FiniteGraph
    center: int
    radius: int
    tree: FiniteGraph
    parent: tuple[int, ...]
    cover: tuple[int, ...]
    depth: tuple[int, ...]
    ball: tuple[int, ...]
    status: str
    ambient_isometric: bool

    @property
    def certified(self) -> bool:
        return self.status == LOCAL_ISOMETRY

    def walk(self, i: int) -> tuple[int, ...]:
        """Source vertices visited by lift vertex ``i``, starting at the centre."""
        out = []
        while i >= 0:
            out.append(self.cover[i])
            i = self.parent[i]
        return tuple(reversed(out))


def _lift_size_bound(g: FiniteGraph, radius: int) -> int:
    d = g.max_degree
    if radius == 0 or d == 0:
        return 1
    if d == 1:
        return 2
    if d == 2:
        return 1 + 2 * radius
    return 1 + d * ((d - 1) ** radius - 1) // (d - 2)


def _bfs_rows(adjacency: Sequence[Sequence[int]], source: int) -> list[int]:
    dist = [-1] * len(adjacency)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def lift_ball(g: FiniteGraph, center: int, radius: int) -> TreeLift:
    """Lift the radius ball around ``center`` to the universal cover.

    The lift is certified LOCAL_ISOMETRY when 2 * radius < girth, the covering
    map is a bijection onto the ball, and tree distances equal the distances
    of the ball's induced subgraph for every pair (checked exhaustively).
    ``ambient_isometric`` additionally records whether they equal distances in
    ``g`` itself.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if not g.is_connected():
        comps = g.components()
        raise DisconnectedGraphError((comps[0][0], comps[1][0]))
    bound = _lift_size_bound(g, radius)
    if bound > MAX_LIFT_VERTICES:
        raise LiftTooLarge(f"lift of radius {radius} may have {bound} > {MAX_LIFT_VERTICES} vertices")
    parent, cover, depth = [-1], [center], [0]
    edges = []
    frontier = [0]
    for level in range(1, radius + 1):
        nxt = []
        for i in frontier:
            back = cover[parent[i]] if parent[i] >= 0 else -1
            for w in g.adjacency[cover[i]]:
                if w == back:
                    continue
                j = len(cover)
                parent.append(i)
                cover.append(w)
                depth.append(level)
                edges.append((i, j))
                nxt.append(j)
        frontier = nxt
    tree = FiniteGraph(len(cover), tuple(edges))
    ambient = g.bfs(center)
    ball = tuple(int(v) for v in np.flatnonzero((ambient >= 0) & (ambient <= radius)))
    status, amb_iso = NO_CERTIFICATE, False
    if 2 * radius < girth(g) and sorted(cover) == list(ball):
        status, amb_iso = _verify_isometry(g, tree, cover, ball)
    return TreeLift(g, center, radius, tree, tuple(parent), tuple(cover), tuple(depth), ball, status, amb_iso)


def _verify_isometry(g, tree, cover, ball):
    sub = g.induced_subgraph(ball)
    pos = {v: i for i, v in enumerate(ball)}
    lift_of = {v: i for i, v in enumerate(cover)}
    intrinsic_ok, ambient_ok = True, True
    for v in ball:
        t_row = tree.bfs(lift_of[v])
        s_row = sub.bfs(pos[v])
        a_row = g.bfs(v)
        t_vals = t_row[[lift_of[w] for w in ball]]
        if not np.array_equal(t_vals, s_row):
            intrinsic_ok = False
            break
        if ambient_ok and not np.array_equal(t_vals, a_row[list(ball)]):
            ambient_ok = False
    if not intrinsic_ok:
        return NO_CERTIFICATE, False
    return LOCAL_ISOMETRY, ambient_ok


@dataclass(frozen=True)
class EdgePathVector:
    """Sparse 0/1 vector on tree edges: the edges of the path from the basepoint."""

    vertex: int
    support: tuple[int, ...]  # sorted edge ids
    dimension: int

    def squared_norm(self) -> int:
        return len(self.support)

    def squared_distance(self, other: EdgePathVector) -> int:
        return len(set(self.support).symmetric_difference(other.support))

    def dense(self) -> np.ndarray:
        out = np.zeros(self.dimension, dtype=np.int64)
        out[list(self.support)] = 1
        return out


def _require_tree(t: FiniteGraph) -> None:
    gi = girth(t)
    if gi != math.inf:
        raise NotATree(f"input has a cycle (girth {gi}); the edge-path embedding needs a tree")
    if not t.is_connected():
        comps = t.components()
        raise DisconnectedGraphError((comps[0][0], comps[1][0]))


def tree_embedding(t: FiniteGraph, basepoint: int = 0) -> dict[int, EdgePathVector]:
    """xi(x) for every vertex: indicator of the edge ids on the basepoint -> x path."""
    _require_tree(t)
    eid = t.edge_index
    support: dict[int, tuple[int, ...]] = {basepoint: ()}
    queue = deque([basepoint])
    while queue:
        u = queue.popleft()
        for w in t.adjacency[u]:
            if w not in support:
                support[w] = support[u] + (eid[(u, w) if u < w else (w, u)],)
                queue.append(w)
    m = len(t.edges)
    return {v: EdgePathVector(v, tuple(sorted(support[v])), m) for v in range(t.vertex_count)}


def indicator_matrix(embedding: dict[int, EdgePathVector]) -> np.ndarray:
    n = len(embedding)
    m = next(iter(embedding.values())).dimension if n else 0
    out = np.zeros((n, m), dtype=np.int64)
    for v, vec in embedding.items():
        out[v, list(vec.support)] = 1
    return out


@dataclass(frozen=True)
class EmbeddingProof:
    vertex_count: int
    basepoint: int
    pairs_checked: int
    max_error: int  # always 0 on return


def _squared_distance_matrix(x: np.ndarray) -> np.ndarray:
    gram = x @ x.T
    diag = np.diag(gram)
    return diag[:, None] + diag[None, :] - 2 * gram


def verify_embedding_identity(t: FiniteGraph, basepoint: int = 0,
                              distances: np.ndarray | None = None) -> EmbeddingProof:
    """Exact integer check of ||xi(x) - xi(y)||^2 = d(x, y) for every pair.

    ``distances`` defaults to BFS distances in ``t``.
    """
    emb = tree_embedding(t, basepoint)
    sq = _squared_distance_matrix(indicator_matrix(emb))
    if distances is None:
        distances = np.stack([t.bfs(v) for v in range(t.vertex_count)])
    bad = np.argwhere(sq != np.asarray(distances))
    if len(bad):
        x, y = (int(v) for v in bad[0])
        raise EmbeddingIdentityError((x, y), int(sq[x, y]), int(distances[x, y]))
    n = t.vertex_count
    return EmbeddingProof(n, basepoint, n * (n - 1) // 2, 0)


def embedding_json(embedding: dict[int, EdgePathVector]) -> str:
    return json.dumps([{"vertex": v, "support": list(e.support)} for v, e in sorted(embedding.items())])


def ball_kernel(g: FiniteGraph, center: int, radius: int, metric: str = "intrinsic") -> tuple[tuple[int, ...], Kernel]:
    """Distance kernel on the radius ball; ``intrinsic`` uses the induced subgraph's edge metric."""
    ambient = g.bfs(center)
    ball = tuple(int(v) for v in np.flatnonzero((ambient >= 0) & (ambient <= radius)))
    if metric == "intrinsic":
        sub = g.induced_subgraph(ball)
        d = np.stack([sub.bfs(i) for i in range(len(ball))])
    elif metric == "ambient":
        d = np.stack([g.bfs(v)[list(ball)] for v in ball])
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return ball, Kernel(d.astype(np.int64))


def ball_cnd_certificate(g: FiniteGraph, center: int, radius: int, metric: str = "intrinsic") -> CndVerdict:
    """Constructive CND certificate for the distance kernel on B(center, radius).

    The ball is lifted to the universal cover, the lift tree is embedded by
    edge-path vectors based at the centre, and the exact identity
    ||xi(x) - xi(y)||^2 = k(x, y) is checked on the ball.  The verdict is then
    cross-checked against the projected eigenvalue test.  ``metric`` selects
    the ball's own edge metric (default) or distances in ``g``.
    """
    gi = girth(g)
    if not 2 * radius < gi:
        raise CertificateRefused(f"need 2*radius < girth, got radius {radius} and girth {gi}")
    lift = lift_ball(g, center, radius)
    if not lift.certified:
        raise CertificateRefused(
            f"ball of radius {radius} at {center} does not lift isometrically (girth {gi})")
    if metric == "ambient" and not lift.ambient_isometric:
        raise CertificateRefused(
            f"ambient distances on the ball differ from tree distances (girth {gi}, radius {radius})")
    ball, kernel = ball_kernel(g, center, radius, metric)
    lift_of = {v: i for i, v in enumerate(lift.cover)}
    idx = [lift_of[v] for v in ball]
    emb = tree_embedding(lift.tree, 0)
    sq = _squared_distance_matrix(indicator_matrix(emb))[np.ix_(idx, idx)]
    bad = np.argwhere(sq != kernel.values)
    if len(bad):
        x, y = (int(v) for v in bad[0])
        raise EmbeddingIdentityError((ball[x], ball[y]), int(sq[x, y]), int(kernel.values[x, y]))
    check = is_cnd_projected(kernel)
    if not check.is_cnd:
        raise AssertionError(f"projected check disagrees with tree certificate: max_eig {check.max_eig}")
    return CndVerdict(Verdict.CND, check.max_eig, None, check.tol, "tree_lift")
