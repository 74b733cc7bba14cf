"""Finite graphs, edge metrics, girth, expansion, spectra and box spaces."""

from __future__ import annotations

import csv
import io
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from . import sl2
from ._accel import core
from .linalg import symmetric_eigh

INFINITY = math.inf

EXACT_EXPANSION_LIMIT = 24


class GraphError(ValueError):
    pass


class DisconnectedGraphError(GraphError):
    """Raised where a metric is needed; ``pair`` holds two vertices in different components."""

    def __init__(self, pair: tuple[int, int]):
        self.pair = pair
        super().__init__(f"graph is disconnected: vertices {pair[0]} and {pair[1]} lie in different components")


class GenerationError(GraphError):
    pass


class BoxSpaceError(GraphError):
    def __init__(self, message: str, witness: tuple[int, int, int] | None = None):
        self.witness = witness
        super().__init__(message if witness is None else f"{message}; witness triple {witness}")


@dataclass(frozen=True)
class FiniteGraph:
    """Simple undirected graph on vertices ``0 .. vertex_count - 1``.

    ``degree_bound`` records the constant D of a bounded-degree family; when
    omitted it is the maximum degree of this graph.
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    degree_bound: int | None = None

    def __post_init__(self):
        if self.vertex_count < 1:
            raise GraphError("a graph needs at least one vertex")
        seen = set()
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise GraphError(f"edge ({u}, {v}) out of range")
            e = (u, v) if u < v else (v, u)
            if e in seen:
                raise GraphError(f"parallel edge {e}")
            seen.add(e)
            norm.append(e)
        object.__setattr__(self, "edges", tuple(norm))
        if self.degree_bound is not None and self.max_degree > self.degree_bound:
            raise GraphError(f"max degree {self.max_degree} exceeds recorded bound {self.degree_bound}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], dedupe: bool = False, degree_bound=None):
        edges = [tuple(e) for e in edges]
        if dedupe:
            edges = list(dict.fromkeys((min(u, v), max(u, v)) for u, v in edges))
        return cls(n, tuple(edges), degree_bound)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.vertex_count)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(a)) for a in nbrs)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        indptr = np.zeros(self.vertex_count + 1, dtype=np.int32)
        indptr[1:] = np.cumsum([len(a) for a in self.adjacency])
        indices = np.fromiter((w for a in self.adjacency for w in a), dtype=np.int32, count=int(indptr[-1]))
        return indptr, indices

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges)}

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    @property
    def min_degree(self) -> int:
        return min((len(a) for a in self.adjacency), default=0)

    @property
    def D(self) -> int:
        return self.degree_bound if self.degree_bound is not None else self.max_degree

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.vertex_count, self.vertex_count))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    def bfs(self, source: int, max_depth: int = -1) -> np.ndarray:
        indptr, indices = self.csr
        return core.bfs_distances(indptr, indices, int(source), int(max_depth))

    def components(self) -> list[list[int]]:
        label = [-1] * self.vertex_count
        comps = []
        for s in range(self.vertex_count):
            if label[s] >= 0:
                continue
            label[s] = len(comps)
            comp, queue = [s], deque([s])
            while queue:
                u = queue.popleft()
                for w in self.adjacency[u]:
                    if label[w] < 0:
                        label[w] = label[s]
                        comp.append(w)
                        queue.append(w)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def induced_subgraph(self, vertices: Sequence[int]) -> FiniteGraph:
        """Subgraph induced on ``vertices``; vertex i of the result is ``vertices[i]``."""
        pos = {v: i for i, v in enumerate(vertices)}
        edges = [(pos[u], pos[v]) for u, v in self.edges if u in pos and v in pos]
        return FiniteGraph(len(vertices), tuple(edges))

    # -- constructors -------------------------------------------------

    @classmethod
    def cycle(cls, n: int) -> FiniteGraph:
        if n < 3:
            raise GraphError("cycles need at least 3 vertices")
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def path(cls, n: int) -> FiniteGraph:
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    @classmethod
    def complete(cls, n: int) -> FiniteGraph:
        return cls(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def complete_bipartite(cls, a: int, b: int) -> FiniteGraph:
        return cls(a + b, tuple((i, a + j) for i in range(a) for j in range(b)))

    @classmethod
    def star(cls, leaves: int) -> FiniteGraph:
        return cls(leaves + 1, tuple((0, i) for i in range(1, leaves + 1)))

    @classmethod
    def petersen(cls) -> FiniteGraph:
        outer = [(i, (i + 1) % 5) for i in range(5)]
        spokes = [(i, i + 5) for i in range(5)]
        inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
        return cls(10, tuple(outer + spokes + inner))

    @classmethod
    def random_tree(cls, n: int, seed: int) -> FiniteGraph:
        """Uniform labelled tree via a random Pruefer sequence."""
        if n <= 2:
            return cls.path(n)
        rng = random.Random(seed)
        seq = [rng.randrange(n) for _ in range(n - 2)]
        degree = [1] * n
        for v in seq:
            degree[v] += 1
        import heapq

        leaves = [v for v in range(n) if degree[v] == 1]
        heapq.heapify(leaves)
        edges = []
        for v in seq:
            leaf = heapq.heappop(leaves)
            edges.append((leaf, v))
            degree[v] -= 1
            if degree[v] == 1:
                heapq.heappush(leaves, v)
        edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
        return cls(n, tuple(edges))

    # -- I/O --------------------------------------------------------------

    def to_json(self) -> dict:
        return {"n": self.vertex_count, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, data: dict) -> FiniteGraph:
        return cls.from_edges(int(data["n"]), data["edges"])

    @classmethod
    def from_edge_list(cls, text: str, n: int | None = None) -> FiniteGraph:
        """Whitespace edge list, one ``u v`` pair per line; ``#`` starts a comment."""
        edges = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            u, v = line.split()[:2]
            edges.append((int(u), int(v)))
        if n is None:
            n = 1 + max((max(e) for e in edges), default=0)
        return cls.from_edges(n, edges)

    @classmethod
    def load(cls, path) -> FiniteGraph:
        with open(path) as fh:
            text = fh.read()
        if text.lstrip().startswith("{"):
            return cls.from_json(json.loads(text))
        return cls.from_edge_list(text)


@dataclass(frozen=True)
class FiniteMetricSpace:
    dist: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        d = np.asarray(self.dist)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        if self.labels is not None and len(self.labels) != d.shape[0]:
            raise ValueError("label count does not match matrix size")

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self):
        return self.dist.max() if self.size else 0

    @property
    def point_labels(self) -> tuple:
        return self.labels if self.labels is not None else tuple(range(self.size))

    def is_integral(self) -> bool:
        return np.issubdtype(self.dist.dtype, np.integer) or bool(np.all(self.dist == np.round(self.dist)))

    def axiom_violation(self) -> str | None:
        d = self.dist
        if np.any(np.diag(d) != 0):
            return "nonzero diagonal"
        if np.any(d != d.T):
            return "asymmetric"
        if np.any(d < 0):
            return "negative distance"
        return None

    def triangle_violation(self) -> tuple[int, int, int] | None:
        """First (x, y, z) with d(x, z) > d(x, y) + d(y, z), scanning y outermost."""
        d = self.dist
        for y in range(self.size):
            bad = d > d[:, y, None] + d[None, y, :]
            if bad.any():
                x, z = np.argwhere(bad)[0]
                return int(x), y, int(z)
        return None

    def restrict(self, indices: Sequence[int]) -> FiniteMetricSpace:
        idx = np.asarray(indices, dtype=np.int64)
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return FiniteMetricSpace(self.dist[np.ix_(idx, idx)], labels)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([""] + [str(lab) for lab in self.point_labels])
        for lab, row in zip(self.point_labels, self.dist):
            writer.writerow([str(lab)] + [_fmt(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> FiniteMetricSpace:
        rows = list(csv.reader(io.StringIO(text)))
        labels = tuple(rows[0][1:])
        values = [[float(v) for v in r[1:]] for r in rows[1:]]
        arr = np.array(values).reshape(len(labels), len(labels))
        if np.all(arr == np.round(arr)):
            arr = arr.astype(np.int64)
        return cls(arr, labels)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) or float(v).is_integer():
        return str(int(v))
    return f"{float(v):.12g}"


# -- metrics and girth --------------------------------------------------------


def shortest_path_metric(g: FiniteGraph) -> FiniteMetricSpace:
    """Edge metric of a connected graph as an int32 matrix."""
    indptr, indices = g.csr
    d = core.all_pairs_bfs(indptr, indices)
    if g.vertex_count and (d[0] < 0).any():
        comps = g.components()
        raise DisconnectedGraphError((comps[0][0], comps[1][0]))
    return FiniteMetricSpace(d)


def girth(g: FiniteGraph) -> float | int:
    """Length of the shortest cycle; ``INFINITY`` for forests."""
    indptr, indices = g.csr
    value = core.girth(indptr, indices)
    return INFINITY if value == 0 else int(value)


def diameter(g: FiniteGraph) -> int:
    return int(shortest_path_metric(g).diameter)


def moore_bound(d: int, g: int) -> int:
    """Least order of a d-regular graph of girth at least g."""
    if d < 2 or g < 3:
        return d + 1 if g >= 3 else 1
    if g % 2:
        k = (g - 1) // 2
        return 1 + d * sum((d - 1) ** i for i in range(k))
    k = g // 2
    return 2 * sum((d - 1) ** i for i in range(k))


# -- spectra and expansion ----------------------------------------------------


@dataclass(frozen=True)
class SpectralReport:
    adjacency_eigenvalues: np.ndarray
    laplacian_eigenvalues: np.ndarray  # normalized Laplacian, ascending
    max_degree: int
    min_degree: int
    spectral_gap: float  # second-smallest normalized Laplacian eigenvalue
    expansion_lower: float
    expansion_upper: float
    cheeger_lower: float  # lambda_2 / 2 <= conductance
    cheeger_upper: float  # conductance <= sqrt(2 lambda_2)
    expansion_exact: Fraction | None = None
    mode: str = "spectral"

    @property
    def adjacency_gap(self) -> float:
        ev = self.adjacency_eigenvalues
        return float(ev[-1] - ev[-2]) if len(ev) > 1 else 0.0

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "adjacency_eigenvalues": [float(x) for x in self.adjacency_eigenvalues],
            "laplacian_eigenvalues": [float(x) for x in self.laplacian_eigenvalues],
            "spectral_gap": self.spectral_gap,
            "expansion_lower": self.expansion_lower,
            "expansion_upper": self.expansion_upper,
            "expansion_exact": None if self.expansion_exact is None else [
                self.expansion_exact.numerator, self.expansion_exact.denominator],
            "cheeger_lower": self.cheeger_lower,
            "cheeger_upper": self.cheeger_upper,
        }


def normalized_laplacian(g: FiniteGraph) -> np.ndarray:
    a = g.adjacency_matrix()
    deg = a.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    lap = np.eye(g.vertex_count) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    lap[deg == 0, deg == 0] = 0.0
    return lap


def _closed_masks(g: FiniteGraph) -> np.ndarray:
    masks = np.zeros(g.vertex_count, dtype=np.uint32)
    for v in range(g.vertex_count):
        m = 1 << v
        for w in g.adjacency[v]:
            m |= 1 << w
        masks[v] = m
    return masks


def closed_neighbourhood_ratio(g: FiniteGraph, subset: Iterable[int]) -> Fraction:
    a = set(subset)
    cover = set(a)
    for v in a:
        cover.update(g.adjacency[v])
    return Fraction(len(cover), len(a))


def spectral_profile(g: FiniteGraph, method: str = "auto") -> SpectralReport:
    """Adjacency and normalized-Laplacian spectra with Cheeger-type expansion bounds.

    The expansion bracket refers to c = min |N_1(A)| / |A| over |A| <= n/2,
    with N_1 the closed 1-neighbourhood:

    * lower: 1 + d_min * lambda_2 / (2 D), from |E(A, A^c)| >= mu_2 |A| / 2,
      mu_2 >= d_min * lambda_2 and each outer boundary vertex absorbing at
      most D boundary edges;
    * upper: the best sweep cut of the Fiedler vector (and every singleton),
      which is an actual admissible set.
    """
    if not g.is_connected():
        comps = g.components()
        raise DisconnectedGraphError((comps[0][0], comps[1][0]))
    a = g.adjacency_matrix()
    adj_ev, _ = symmetric_eigh(a, method=method)
    lap_ev, lap_vec = symmetric_eigh(normalized_laplacian(g), method=method)
    n = g.vertex_count
    lam2 = float(lap_ev[1]) if n > 1 else 0.0
    dmax, dmin = g.D, g.min_degree
    lower = 1.0 + dmin * max(lam2, 0.0) / (2.0 * dmax) - 1e-12 if n > 1 else INFINITY
    upper = _sweep_upper(g, lap_vec[:, 1] if n > 1 else None)
    return SpectralReport(
        adjacency_eigenvalues=adj_ev,
        laplacian_eigenvalues=lap_ev,
        max_degree=g.max_degree,
        min_degree=dmin,
        spectral_gap=lam2,
        expansion_lower=lower,
        expansion_upper=upper,
        cheeger_lower=lam2 / 2.0,
        cheeger_upper=math.sqrt(2.0 * max(lam2, 0.0)),
    )


def _sweep_upper(g: FiniteGraph, fiedler: np.ndarray | None) -> float:
    n = g.vertex_count
    if n < 2:
        return INFINITY
    best = min(Fraction(g.degree(v) + 1, 1) for v in range(n))
    deg = np.array([max(g.degree(v), 1) for v in range(n)], dtype=float)
    f = fiedler / np.sqrt(deg)
    for order in (np.argsort(f, kind="stable"), np.argsort(-f, kind="stable")):
        cover: set[int] = set()
        for size, v in enumerate(order[: n // 2], start=1):
            cover.add(int(v))
            cover.update(g.adjacency[int(v)])
            ratio = Fraction(len(cover), size)
            if ratio < best:
                best = ratio
    return float(best)


class ExactModeRefused(GraphError):
    pass


def expansion_constant(g: FiniteGraph, mode: str = "exact", method: str = "auto") -> SpectralReport:
    """Vertex expansion ratio min |N_1(A)|/|A| over nonempty |A| <= n/2.

    ``mode="exact"`` scans every subset (at most ``EXACT_EXPANSION_LIMIT``
    vertices) and also fills the spectral bracket; ``mode="spectral"`` only
    returns the bracket.
    """
    if mode not in ("exact", "spectral"):
        raise ValueError(f"unknown mode {mode!r}")
    report = spectral_profile(g, method=method)
    if mode == "spectral":
        return report
    n = g.vertex_count
    if n > EXACT_EXPANSION_LIMIT:
        raise ExactModeRefused(
            f"exact expansion scans 2^n subsets; refusing n={n} > {EXACT_EXPANSION_LIMIT}")
    exact = None
    if n >= 2:
        num, den, _ = core.min_closed_expansion(_closed_masks(g), n)
        exact = Fraction(num, den)
    return SpectralReport(**{**report.__dict__, "expansion_exact": exact, "mode": "exact"})


# -- Cayley graphs of SL(2, Z/n) ------------------------------------------------


def cayley_graph_sl2(n: int, generators: Sequence[sl2.Mat] | None = None) -> FiniteGraph:
    """Cayley graph of SL(2, Z/nZ): vertices in lexicographic matrix order, edges {g, g s}."""
    if n < 2:
        raise GraphError("modulus must be at least 2")
    gens = [sl2.reduce(tuple(int(v) for v in s), n) for s in (generators or sl2.STANDARD_GENERATORS)]
    for s in gens:
        if sl2.det(s) % n != 1 % n:
            raise GraphError(f"generator {s} has determinant {sl2.det(s) % n} mod {n}, not 1")
    gen_set = set(gens)
    for s in gens:
        if sl2.inv(s, n) not in gen_set:
            raise GraphError(f"generator set is not closed under inverses: {s}")
    elements = sl2.sl2_elements(n)
    codes = sl2.encode(elements, n)
    lookup = np.full(n**4, -1, dtype=np.int64)
    lookup[codes] = np.arange(len(codes))
    edges = set()
    for s in dict.fromkeys(gens):
        targets = lookup[sl2.encode(sl2.right_multiply(elements, s, n), n)]
        for u, v in zip(range(len(codes)), targets.tolist()):
            if u != v:
                edges.add((u, v) if u < v else (v, u))
    return FiniteGraph(len(codes), tuple(sorted(edges)))


# -- random regular graphs of large girth ----------------------------------------


def _within(adj: list[set], src: int, dst: int, limit: int) -> bool:
    """True when dist(src, dst) <= limit in the adjacency-set graph."""
    if src == dst:
        return True
    seen = {src}
    frontier = [src]
    for _ in range(limit):
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if w == dst:
                    return True
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
        if not frontier:
            break
    return False


def random_regular_with_girth(degree: int, size: int, girth_target: int, seed: int,
                              max_swaps: int = 10_000) -> FiniteGraph:
    """Random d-regular simple graph with girth >= ``girth_target``.

    Each attempt adds edges greedily, always serving a vertex with the most
    open stubs, and only joins vertices at distance >= girth_target - 1, so
    the girth bound holds at every step.  Leftover stubs are repaired by
    double-edge swaps under the same distance test; a stuck attempt is
    restarted.  Restarts and swaps share the ``max_swaps`` budget.
    Deterministic for a fixed seed.
    """
    d, n, g = degree, size, girth_target
    if d < 1 or n < 1 or (d * n) % 2:
        raise GenerationError(f"need d*n even and positive (d={d}, n={n})")
    if d >= n:
        raise GenerationError(f"degree {d} is too large for {n} vertices")
    bound = moore_bound(d, g)
    if n < bound:
        raise GenerationError(
            f"Moore bound: a {d}-regular graph of girth >= {g} needs >= {bound} vertices, got {n}")
    rng = random.Random(seed)
    budget = max_swaps
    while budget > 0:
        budget -= 1
        adj, need = _greedy_attempt(d, n, g, rng)
        budget = _swap_repair(adj, need, g, rng, budget, repair_cap=20 * n)
        if not any(need):
            edges = sorted((u, w) for u in range(n) for w in adj[u] if u < w)
            return FiniteGraph(n, tuple(edges), degree_bound=d)
    raise GenerationError(
        f"retry budget of {max_swaps} exhausted (d={d}, n={n}, girth>={g}, Moore bound {bound})")


def _joinable(adj, u, v, g) -> bool:
    # a new edge uv closes a cycle of length dist(u, v) + 1
    return u != v and v not in adj[u] and not _within(adj, u, v, g - 2)


def _greedy_attempt(d, n, g, rng):
    adj: list[set] = [set() for _ in range(n)]
    need = [d] * n
    order = list(range(n))
    rng.shuffle(order)
    while True:
        open_ = [v for v in order if need[v] > 0]
        if not open_:
            break
        u = max(open_, key=lambda v: need[v])
        others = [v for v in open_ if v != u]
        v = None
        for _ in range(min(16, len(others))):
            cand = others[rng.randrange(len(others))]
            if _joinable(adj, u, cand, g):
                v = cand
                break
        if v is None:
            good = [c for c in others if _joinable(adj, u, c, g)]
            if not good:
                break
            v = good[rng.randrange(len(good))]
        adj[u].add(v)
        adj[v].add(u)
        need[u] -= 1
        need[v] -= 1
    return adj, need


def _swap_repair(adj, need, g, rng, budget, repair_cap):
    """Fix open stubs in place by swaps; returns the remaining budget."""
    n = len(adj)
    spent = 0
    while any(need) and budget > 0 and spent < repair_cap:
        budget -= 1
        spent += 1
        deficient = [v for v in range(n) if need[v] > 0]
        u = deficient[rng.randrange(len(deficient))]
        others = [v for v in deficient if v != u]
        if others:
            v = others[rng.randrange(len(others))]
            if _joinable(adj, u, v, g):
                adj[u].add(v)
                adj[v].add(u)
                need[u] -= 1
                need[v] -= 1
                continue
        elif need[u] < 2:
            break
        else:
            v = u
        # remove an edge xy, add ux and vy
        x = rng.randrange(n)
        if not adj[x]:
            continue
        nbrs = sorted(adj[x])
        y = nbrs[rng.randrange(len(nbrs))]
        if len({u, v, x, y}) < (3 if u == v else 4):
            continue
        adj[x].discard(y)
        adj[y].discard(x)
        if _joinable(adj, u, x, g):
            adj[u].add(x)
            adj[x].add(u)
            if _joinable(adj, v, y, g):
                adj[v].add(y)
                adj[y].add(v)
                need[u] -= 1
                need[v] -= 1
                continue
            adj[u].discard(x)
            adj[x].discard(u)
        adj[x].add(y)
        adj[y].add(x)
    return budget


# -- box spaces --------------------------------------------------------------


SpacingRule = Callable[[int], float] | Sequence[float] | None


@dataclass(frozen=True)
class BoxSpace:
    """Finite prefix X_1, ..., X_m of a box space.

    Piece k (1-based) has basepoint vertex 0.  For x in X_m and y in X_n with
    m != n the distance is d(x, b_m) + spacing(max(m, n)) + d(b_n, y).
    Points are indexed globally, piece by piece.
    """

    pieces: tuple[FiniteGraph, ...]
    spacing: tuple[float, ...]
    piece_metrics: tuple[FiniteMetricSpace, ...] = field(repr=False)
    offsets: tuple[int, ...] = field(repr=False)

    @property
    def size(self) -> int:
        return self.offsets[-1]

    @property
    def piece_count(self) -> int:
        return len(self.pieces)

    @cached_property
    def girths(self) -> tuple:
        return tuple(girth(p) for p in self.pieces)

    @cached_property
    def degree_bound(self) -> int:
        return max(p.max_degree for p in self.pieces)

    @cached_property
    def _piece_index(self) -> np.ndarray:
        out = np.empty(self.size, dtype=np.int64)
        for k in range(self.piece_count):
            out[self.offsets[k]:self.offsets[k + 1]] = k
        return out

    @cached_property
    def _base_dist(self) -> np.ndarray:
        return np.concatenate([m.dist[0] for m in self.piece_metrics]).astype(np.int64)

    def piece_of(self, i: int) -> tuple[int, int]:
        """(0-based piece index, local vertex) of global point ``i``."""
        k = int(self._piece_index[i])
        return k, i - self.offsets[k]

    def piece_points(self, k: int) -> range:
        return range(self.offsets[k], self.offsets[k + 1])

    def spacing_between(self, k: int, l: int) -> float:
        return self.spacing[max(k, l)]

    def distance(self, i: int, j: int):
        k, a = self.piece_of(i)
        l, b = self.piece_of(j)
        if k == l:
            return self.piece_metrics[k].dist[a, b]
        return self._base_dist[i] + self.spacing[max(k, l)] + self._base_dist[j]

    def distances_from(self, i: int) -> np.ndarray:
        k, a = self.piece_of(i)
        piece = self._piece_index
        out = self._base_dist[i] + np.asarray(self.spacing)[np.maximum(piece, k)] + self._base_dist
        lo, hi = self.offsets[k], self.offsets[k + 1]
        out = out.astype(np.asarray(self.spacing).dtype if np.asarray(self.spacing).dtype.kind == "f" else np.int64)
        out[lo:hi] = self.piece_metrics[k].dist[a]
        return out

    @cached_property
    def metric(self) -> FiniteMetricSpace:
        return FiniteMetricSpace(np.stack([self.distances_from(i) for i in range(self.size)]))

    def ball(self, i: int, radius) -> np.ndarray:
        """Global indices within ``radius`` of point ``i`` (ascending)."""
        return np.flatnonzero(self.distances_from(i) <= radius)

    def separation(self, k: int) -> float:
        """d(X_k, union of the other pieces), attained at basepoints."""
        others = [self.spacing[max(k, l)] for l in range(self.piece_count) if l != k]
        return min(others) if others else INFINITY

    def to_json(self) -> dict:
        return {"pieces": [p.to_json() for p in self.pieces], "spacing": [_num(s) for s in self.spacing]}

    @classmethod
    def from_json(cls, data: dict) -> BoxSpace:
        return assemble_box_space([FiniteGraph.from_json(p) for p in data["pieces"]], data.get("spacing"))


def _num(x):
    return int(x) if float(x).is_integer() else float(x)


def default_spacing(pieces: Sequence[FiniteGraph]) -> list[int]:
    """spacing(n) = n + max diameter of X_1..X_n (1-based n)."""
    out, worst = [], 0
    for n, p in enumerate(pieces, start=1):
        worst = max(worst, diameter(p))
        out.append(n + worst)
    return out


def assemble_box_space(pieces: Sequence[FiniteGraph], spacing: SpacingRule = None) -> BoxSpace:
    """Realize the coarse disjoint union of connected ``pieces``.

    ``spacing`` is a callable on 1-based piece indices, a sequence, or None
    for :func:`default_spacing`.  It must be positive and strictly increasing.
    """
    pieces = tuple(pieces)
    if not pieces:
        raise BoxSpaceError("a box space needs at least one piece")
    metrics = []
    for p in pieces:
        metrics.append(shortest_path_metric(p))
    if spacing is None:
        values = default_spacing(pieces)
    elif callable(spacing):
        values = [spacing(n) for n in range(1, len(pieces) + 1)]
    else:
        values = list(spacing)
        if len(values) < len(pieces):
            raise BoxSpaceError(f"spacing has {len(values)} entries for {len(pieces)} pieces")
        values = values[: len(pieces)]
    values = [_num(v) for v in values]
    if any(v <= 0 for v in values):
        raise BoxSpaceError(f"spacing values must be positive: {values}")
    offsets = [0]
    for p in pieces:
        offsets.append(offsets[-1] + p.vertex_count)
    box = BoxSpace(pieces, tuple(values), tuple(metrics), tuple(offsets))
    bad = next((k for k in range(1, len(values)) if values[k] <= values[k - 1]), None)
    if bad is not None:
        witness = _spacing_triangle_witness(box)
        raise BoxSpaceError(
            f"spacing must strictly increase: spacing({bad + 1})={values[bad]} <= spacing({bad})={values[bad - 1]}",
            witness)
    return box


def _spacing_triangle_witness(box: BoxSpace) -> tuple[int, int, int] | None:
    # violations of the triangle inequality can only involve basepoints
    base = [box.offsets[k] for k in range(box.piece_count)]
    for x in base:
        for y in base:
            for z in base:
                if box.distance(x, z) > box.distance(x, y) + box.distance(y, z):
                    return x, y, z
    return None
