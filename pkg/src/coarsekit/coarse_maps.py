"""Coarse maps, kernel pullback, host spaces, retractions and extended kernels.

Finite-stage conventions: statements that hold "outside a bounded set" are
checked for every point outside an explicit piece prefix; nearest-point
choices break ties by the lowest point index.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .graphs import BoxSpace, FiniteGraph, FiniteMetricSpace, assemble_box_space, shortest_path_metric
from .kernels import (AsymptoticCndReport, BallVerdict, Kernel, KernelInvariantError, PropernessProfile,
                      excluded_prefix, is_cnd_projected, properness_profile)


class CoarseMapError(ValueError):
    pass


# -- coarse maps ----------------------------------------------------------------


@dataclass(frozen=True)
class CoarseMap:
    """Point map ``source -> target`` with its tightest nondecreasing envelopes.

    ``rho_plus[t]`` = max d(fx, fy) over d(x, y) <= t and ``rho_minus[t]`` =
    min d(fx, fy) over d(x, y) >= t, for integer t from 0 to the source
    diameter.
    """

    source: FiniteMetricSpace
    target: FiniteMetricSpace
    mapping: tuple[int, ...]
    rho_minus_table: tuple[float, ...] = field(repr=False)
    rho_plus_table: tuple[float, ...] = field(repr=False)

    def __call__(self, x: int) -> int:
        return self.mapping[x]

    def rho_plus(self, t: float) -> float:
        """Upper envelope; beyond the tabulated range it is the sup over all pairs."""
        if t < 0:
            return -math.inf
        i = int(math.floor(t))
        return self.rho_plus_table[min(i, len(self.rho_plus_table) - 1)]

    def rho_minus(self, t: float) -> float:
        """Lower envelope; ``rho_minus(t) = rho_minus(0) = 0`` for t <= 0, +inf past the diameter."""
        if t <= 0:
            return self.rho_minus_table[0]
        i = int(math.ceil(t))
        return self.rho_minus_table[i] if i < len(self.rho_minus_table) else math.inf

    @property
    def degenerate(self) -> bool:
        """True when every pair maps to distance 0 (a constant map)."""
        return self.rho_plus_table[-1] == 0

    @property
    def embedding_threshold(self) -> int | None:
        """Least t0 with rho_minus strictly increasing on [t0, diameter], if rho_minus ever grows."""
        lo = self.rho_minus_table
        t0 = len(lo) - 1
        while t0 > 0 and lo[t0 - 1] < lo[t0]:
            t0 -= 1
        if len(lo) < 2 or lo[-1] <= lo[0]:
            return None
        return t0

    def to_json(self) -> dict:
        return {"mapping": list(self.mapping),
                "rho_minus": [_num(x) for x in self.rho_minus_table],
                "rho_plus": [_num(x) for x in self.rho_plus_table],
                "degenerate": self.degenerate, "embedding_threshold": self.embedding_threshold}


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() else x


def control_envelopes(f: Sequence[int] | dict, source: FiniteMetricSpace, target: FiniteMetricSpace) -> CoarseMap:
    """Tabulate the envelopes of a total point map."""
    if isinstance(f, dict):
        missing = [x for x in range(source.size) if x not in f]
        if missing:
            raise CoarseMapError(f"map is partial: no image for source point {missing[0]}")
        f = [f[x] for x in range(source.size)]
    f = tuple(int(v) for v in f)
    if len(f) != source.size:
        raise CoarseMapError(f"map is partial: {len(f)} images for {source.size} source points")
    if any(not 0 <= v < target.size for v in f):
        raise CoarseMapError("map sends a point outside the target")
    idx = np.asarray(f, dtype=np.int64)
    pulled = Kernel(target.dist[np.ix_(idx, idx)])
    prof = properness_profile(pulled, source)
    return CoarseMap(source, target, f, prof.lower, prof.upper)


def identity_map(space: FiniteMetricSpace) -> CoarseMap:
    return control_envelopes(range(space.size), space, space)


@dataclass(frozen=True)
class DensityCheck:
    holds: bool
    farthest_point: int
    distance: float


def is_coarse_equivalence(f: CoarseMap, c: float) -> DensityCheck:
    """Is every target point within ``c`` of the image?  Reports the farthest target point."""
    image = sorted(set(f.mapping))
    dist_to_image = f.target.dist[:, image].min(axis=1)
    far = int(np.argmax(dist_to_image))
    d = dist_to_image[far]
    return DensityCheck(bool(d <= c), far, _num(d))


@dataclass(frozen=True)
class ApproximateInverse:
    inverse: CoarseMap
    forward_displacement: float  # max d(y, f(g(y))), at most C
    backward_displacement: float  # max d(x, g(f(x)))


def approximate_inverse(f: CoarseMap, c: float) -> ApproximateInverse:
    """g(y) = the source point whose image is nearest to y (lowest index on ties)."""
    dens = is_coarse_equivalence(f, c)
    if not dens.holds:
        raise CoarseMapError(f"image is not {c}-dense: target point {dens.farthest_point} at distance {dens.distance}")
    idx = np.asarray(f.mapping, dtype=np.int64)
    to_images = f.target.dist[:, idx]  # (target, source)
    g = np.argmin(to_images, axis=1)  # argmin returns the first minimum
    inverse = control_envelopes(g.tolist(), f.target, f.source)
    fwd = max((f.target.dist[y, idx[g[y]]] for y in range(f.target.size)), default=0)
    back = max((f.source.dist[x, g[idx[x]]] for x in range(f.source.size)), default=0)
    return ApproximateInverse(inverse, _num(fwd), _num(back))


def pullback_kernel(f: CoarseMap | Sequence[int], k: Kernel) -> Kernel:
    """(f*k)(x, y) = k(f(x), f(y))."""
    mapping = f.mapping if isinstance(f, CoarseMap) else tuple(f)
    if isinstance(f, CoarseMap) and k.size != f.target.size:
        raise KernelInvariantError(f"kernel has {k.size} points, map target has {f.target.size}")
    idx = np.asarray(mapping, dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= k.size):
        raise KernelInvariantError("map image outside the kernel's point set")
    return Kernel(k.values[np.ix_(idx, idx)])


# -- host spaces ----------------------------------------------------------------


@dataclass(frozen=True)
class HostSpace:
    """Finite host metric space with a distinguished subset Z split into pieces."""

    metric: FiniteMetricSpace
    pieces: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = set()
        for p in self.pieces:
            if seen.intersection(p):
                raise ValueError("Z pieces overlap")
            seen.update(p)
        if any(not 0 <= z < self.metric.size for z in seen):
            raise ValueError("Z contains a point outside the host")

    @cached_property
    def Z(self) -> tuple[int, ...]:
        return tuple(sorted(z for p in self.pieces for z in p))

    @property
    def size(self) -> int:
        return self.metric.size

    @cached_property
    def distance_to_Z(self) -> np.ndarray:
        return self.metric.dist[:, list(self.Z)].min(axis=1)

    @cached_property
    def nearest_Z(self) -> np.ndarray:
        """Nearest Z point of every host point, lowest index on ties (Z is sorted)."""
        z = np.asarray(self.Z)
        return z[np.argmin(self.metric.dist[:, z], axis=1)]

    @cached_property
    def piece_of_Z(self) -> dict[int, int]:
        return {z: k for k, p in enumerate(self.pieces) for z in p}

    def neighbourhood(self, radius: float) -> tuple[int, ...]:
        """N_R(Z) = {x : d(x, Z) <= R}, ascending."""
        return tuple(int(v) for v in np.flatnonzero(self.distance_to_Z <= radius))

    def to_json(self, metric_ref: str) -> dict:
        return {"host_metric": metric_ref, "Z": list(self.Z), "pieces": [list(p) for p in self.pieces]}

    @classmethod
    def from_json(cls, data: dict, metric: FiniteMetricSpace) -> HostSpace:
        host = cls(metric, tuple(tuple(int(v) for v in p) for p in data["pieces"]))
        if list(host.Z) != sorted(int(z) for z in data["Z"]):
            raise ValueError("Z does not match the union of the pieces")
        return host


@dataclass(frozen=True)
class ActionPatch:
    """Translations of Z^d restricted to a finite set of lattice points.

    Host point i sits at ``coords[i]``; the element g acts by x -> x + g where
    the result is a host point.  Word length is the l1 norm (generators are
    the unit vectors), so d(x, x g) = l(g) for the l1 host metric.
    """

    coords: np.ndarray

    @cached_property
    def lookup(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(v) for v in c): i for i, c in enumerate(self.coords)}

    @staticmethod
    def word_length(g: Sequence[int]) -> int:
        return int(sum(abs(int(v)) for v in g))

    @staticmethod
    def inverse(g: Sequence[int]) -> tuple[int, ...]:
        return tuple(-int(v) for v in g)

    def translate(self, x: int, g: Sequence[int]) -> int | None:
        return self.lookup.get(tuple(int(a) + int(b) for a, b in zip(self.coords[x], g)))

    def elements_of_length(self, length: int) -> list[tuple[int, int]]:
        """All g in Z^2 with |a| + |b| = length, in a fixed order."""
        if length == 0:
            return [(0, 0)]
        out = []
        for a in range(-length, length + 1):
            b = length - abs(a)
            out.append((a, b))
            if b:
                out.append((a, -b))
        return out


@dataclass(frozen=True)
class SyntheticHost:
    """A host space, the box space it models, the coarse map c: Z -> X, and an optional action patch."""

    host: HostSpace
    box: BoxSpace
    coarse_map: CoarseMap  # source: host metric restricted to Z (indexed like host.Z)
    patch: ActionPatch | None = None

    @cached_property
    def z_position(self) -> dict[int, int]:
        return {z: i for i, z in enumerate(self.host.Z)}

    def image(self, z: int) -> int:
        """c(z) as a global box-space point."""
        return self.coarse_map.mapping[self.z_position[z]]


def padded_box_host(pieces: Sequence[FiniteGraph], spacing=None, *, pendant_length: int = 6,
                    pendants_per_piece: int = 2, handles_per_piece: int = 1, seed: int = 0) -> SyntheticHost:
    """Box space realized inside a graph, padded with paths.

    Consecutive basepoints are joined by paths of length ``spacing(k + 1)``;
    each piece gets pendant paths and handles (paths joining two of its
    vertices, two edges longer than their distance, so piece metrics are
    kept).  Z is the union of the pieces; c is the identity onto the box.
    """
    box = assemble_box_space(pieces, spacing)
    rng = random.Random(seed)
    edges = [(box.offsets[k] + u, box.offsets[k] + v) for k, p in enumerate(box.pieces) for u, v in p.edges]
    n = box.size

    def add_path(start: int, length: int, end: int | None = None) -> None:
        nonlocal n
        prev = start
        inner = length - 1 if end is not None else length
        for _ in range(inner):
            edges.append((prev, n))
            prev = n
            n += 1
        if end is not None:
            edges.append((prev, end))

    for k in range(box.piece_count - 1):
        add_path(box.offsets[k], int(box.spacing[k + 1]), box.offsets[k + 1])
    for k, p in enumerate(box.pieces):
        for _ in range(pendants_per_piece):
            add_path(box.offsets[k] + rng.randrange(p.vertex_count), pendant_length)
        for _ in range(handles_per_piece):
            if p.vertex_count < 2:
                continue
            u, v = rng.sample(range(p.vertex_count), 2)
            add_path(box.offsets[k] + u, int(box.piece_metrics[k].dist[u, v]) + 2, box.offsets[k] + v)
    graph = FiniteGraph(n, tuple(edges))
    metric = shortest_path_metric(graph)
    host = HostSpace(metric, tuple(tuple(box.piece_points(k)) for k in range(box.piece_count)))
    c = control_envelopes(range(box.size), metric.restrict(host.Z), box.metric)
    return SyntheticHost(host, box, c)


def square_boundary(side: int) -> list[tuple[int, int]]:
    """Lattice points on the boundary of [0, side]^2 in cyclic order from the origin."""
    pts = [(i, 0) for i in range(side)]
    pts += [(side, i) for i in range(side)]
    pts += [(side - i, side) for i in range(side)]
    pts += [(0, side - i) for i in range(side)]
    return pts


def grid_host(sides: Sequence[int] = (2, 4, 8, 16, 24, 32), pad: int = 2, spacing=None) -> SyntheticHost:
    """Square boundaries in Z^2, far apart, thickened to their pad-neighbourhood.

    The host is N_pad(Z) with the l1 (word) metric of Z^2 and translation
    action; X is the box space of cycles C_{4L}, and c sends the boundary of
    the L-square to C_{4L} by position along the boundary.
    """
    z_coords: list[tuple[int, int]] = []
    pieces_local = []
    x0 = 0
    for side in sides:
        pts = [(x0 + a, b) for a, b in square_boundary(side)]
        pieces_local.append(len(pts))
        z_coords.extend(pts)
        x0 += side + 10 * side + 4 * pad + 20
    zset = set(z_coords)
    extra = set()
    for (a, b) in z_coords:
        for da in range(-pad, pad + 1):
            rest = pad - abs(da)
            for db in range(-rest, rest + 1):
                q = (a + da, b + db)
                if q not in zset:
                    extra.add(q)
    coords = np.array(z_coords + sorted(extra), dtype=np.int64)
    dist = np.abs(coords[:, None, 0] - coords[None, :, 0]) + np.abs(coords[:, None, 1] - coords[None, :, 1])
    metric = FiniteMetricSpace(dist.astype(np.int32))
    pieces, start = [], 0
    for count in pieces_local:
        pieces.append(tuple(range(start, start + count)))
        start += count
    host = HostSpace(metric, tuple(pieces))
    box = assemble_box_space([FiniteGraph.cycle(4 * s) for s in sides], spacing)
    c = control_envelopes(range(len(z_coords)), metric.restrict(host.Z), box.metric)
    return SyntheticHost(host, box, c, ActionPatch(coords))


# -- retractions and extended kernels --------------------------------------------


@dataclass(frozen=True)
class RetractionFamily:
    """Maps p_R : N_R(Z) -> Z for R = 0..r_max, stored as one array.

    ``assigned_at[x]`` is the least R with x in N_R(Z); ``target[x]`` is the
    Z point chosen then.  p_R(x) = target[x] whenever assigned_at[x] <= R, so
    each p_{R+1} extends p_R by construction.
    """

    host: HostSpace
    r_max: int
    target: np.ndarray
    assigned_at: np.ndarray

    def p(self, r: int, x: int) -> int:
        if not 0 <= r <= self.r_max:
            raise ValueError(f"R={r} outside 0..{self.r_max}")
        if self.assigned_at[x] > r:
            raise ValueError(f"point {x} is not in N_{r}(Z)")
        return int(self.target[x])

    def domain(self, r: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.flatnonzero(self.assigned_at <= r))

    def check_invariants(self) -> list[str]:
        """Pointwise check of p_0 = id on Z, extension and displacement; returns violations."""
        problems = []
        d = self.host.metric.dist
        z = set(self.host.Z)
        for x in z:
            if self.target[x] != x:
                problems.append(f"p_0({x}) = {self.target[x]} != {x}")
        for r in range(self.r_max):
            for x in self.domain(r + 1):
                tx = int(self.target[x])
                if tx not in z:
                    problems.append(f"p_{r + 1}({x}) = {tx} is not in Z")
                if d[x, tx] > r + 1:
                    problems.append(f"d(p_{r + 1}({x}), {x}) = {d[x, tx]} > {r + 1}")
        return problems


def neighborhood_retraction(h: HostSpace, r_max: int) -> RetractionFamily:
    """p_0 = id on Z; points entering at level R+1 go to a nearest Z point."""
    dz = h.distance_to_Z
    assigned = np.full(h.size, np.iinfo(np.int64).max, dtype=np.int64)
    target = np.full(h.size, -1, dtype=np.int64)
    for x in h.Z:
        assigned[x] = 0
        target[x] = x
    for r in range(r_max):
        new = np.flatnonzero((dz <= r + 1) & (assigned > r_max))
        for x in new:
            t = int(h.nearest_Z[x])
            if h.metric.dist[x, t] > r + 1:
                raise CoarseMapError(f"point {x} entered N_{r + 1} at distance {h.metric.dist[x, t]} from Z")
            target[x] = t
            assigned[x] = r + 1
    return RetractionFamily(h, r_max, target, assigned)


@dataclass(frozen=True)
class ExtendedKernel:
    """k_R on N_R(Z): the distance of X pulled back along c o p_R."""

    radius: int
    points: tuple[int, ...]  # host indices, ascending
    images: tuple[int, ...]  # box-space point of c(p_R(x))
    kernel: Kernel
    profile: PropernessProfile
    report: AsymptoticCndReport | None = None

    @cached_property
    def position(self) -> dict[int, int]:
        return {x: i for i, x in enumerate(self.points)}

    def value(self, x: int, y: int) -> float:
        return self.kernel.values[self.position[x], self.position[y]]

    def restrict_to(self, points: Iterable[int]) -> np.ndarray:
        idx = [self.position[x] for x in points]
        return self.kernel.values[np.ix_(idx, idx)]


def extended_kernel(sh: SyntheticHost, rf: RetractionFamily, radius: int, *, cnd_radius: int | None = None,
                    tol: float | None = None) -> ExtendedKernel:
    """Build k_R and its properness profile; optionally an asymptotic CND report.

    With ``cnd_radius = r`` every host ball B(x, r) inside N_R(Z) whose centre
    maps beyond the prefix N(r'') of X, r'' = rho_plus(2r + 2R), is checked.
    The images of such a ball have diameter <= r'' in X.
    """
    if radius > rf.r_max:
        raise ValueError(f"R={radius} exceeds the family's r_max={rf.r_max}")
    pts = rf.domain(radius)
    images = tuple(sh.image(int(rf.target[x])) for x in pts)
    dist_x = sh.box.metric.dist
    idx = np.asarray(images, dtype=np.int64)
    kernel = Kernel(dist_x[np.ix_(idx, idx)])
    host_sub = sh.host.metric.restrict(pts)
    profile = properness_profile(kernel, host_sub)
    report = None
    if cnd_radius is not None:
        report = _extended_report(sh, pts, images, kernel, host_sub, radius, cnd_radius, tol)
    return ExtendedKernel(radius, pts, images, kernel, profile, report)


def host_distance_kernel(sh: SyntheticHost, rf: RetractionFamily, radius: int) -> ExtendedKernel:
    """The host metric itself on N_R(Z), packaged like an extended kernel."""
    pts = rf.domain(radius)
    images = tuple(sh.image(int(rf.target[x])) for x in pts)
    sub = sh.host.metric.restrict(pts)
    kernel = Kernel(sub.dist)
    return ExtendedKernel(radius, pts, images, kernel, properness_profile(kernel, sub))


def _extended_report(sh, pts, images, kernel, host_sub, radius, r, tol) -> AsymptoticCndReport:
    r2 = sh.coarse_map.rho_plus(2 * r + 2 * radius)
    n = excluded_prefix(sh.box, int(math.ceil(r2)))
    verdicts = []
    tol = kernel.default_tol() if tol is None else tol
    for i, x in enumerate(pts):
        piece, _ = sh.box.piece_of(images[i])
        if piece < n:
            continue
        ball = np.flatnonzero(host_sub.dist[i] <= r)
        res = is_cnd_projected(kernel.restrict(ball), tol)
        verdicts.append(BallVerdict(piece + 1, int(x), int(x), len(ball), res.verdict, res.max_eig))
    return AsymptoticCndReport(r, r, 3 * int(math.ceil(r2)) + 1, n, tuple(verdicts))


# -- finite-stage action checks --------------------------------------------------


class Status(str, enum.Enum):
    OK = "OK"
    VIOLATED = "VIOLATED"
    PARTIAL = "PARTIAL"
    NOT_APPLICABLE = "NOT_APPLICABLE"


PARTIAL = Status.PARTIAL


def orbit_kernel(patch: ActionPatch, ext: ExtendedKernel, x: int, g: Sequence[int]):
    """h_fin(x, g) = k(x, x g), or ``PARTIAL`` when x g leaves the kernel's domain."""
    if x not in ext.position:
        return PARTIAL
    y = patch.translate(x, g)
    if y is None or y not in ext.position:
        return PARTIAL
    return ext.value(x, y)


@dataclass(frozen=True)
class ActionCheck:
    status: Status
    value: float | None = None
    reason: str = ""

    def to_json(self) -> dict:
        return {"status": self.status.value, "value": self.value, "reason": self.reason}


def verify_action_negativity(sh: SyntheticHost, ext: ExtendedKernel, x: int, gs: Sequence[Sequence[int]],
                             ts: Sequence[float], prefix: int, tol: float = 1e-9) -> ActionCheck:
    """Evaluate sum_ij t_i t_j k(x g_i, x g_j) for a sum-zero t.

    ``prefix`` is the number of leading box pieces excluded; every x g_i must
    be defined and map beyond it, otherwise the result is NOT_APPLICABLE.
    """
    t = np.asarray(ts, dtype=np.float64)
    if len(t) != len(gs):
        raise ValueError("need one coefficient per group element")
    if abs(t.sum()) > 1e-12 * max(1.0, float(np.abs(t).max(initial=0.0))):
        raise ValueError(f"coefficients must sum to zero, got {t.sum()}")
    if sh.patch is None:
        return ActionCheck(Status.NOT_APPLICABLE, None, "host has no action patch")
    pts = []
    for g in gs:
        y = sh.patch.translate(x, g)
        if y is None or y not in ext.position:
            return ActionCheck(Status.NOT_APPLICABLE, None, f"x g undefined for g={tuple(g)}")
        piece, _ = sh.box.piece_of(ext.images[ext.position[y]])
        if piece < prefix:
            return ActionCheck(Status.NOT_APPLICABLE, None, f"x g lies over excluded piece {piece + 1}")
        pts.append(y)
    if not pts:
        return ActionCheck(Status.OK, 0.0)
    value = float(t @ ext.restrict_to(pts).astype(np.float64) @ t)
    return ActionCheck(Status.OK if value <= tol else Status.VIOLATED, value)


@dataclass(frozen=True)
class ActionProfile:
    """min k(x, x g) per word length, with its comparison against rho_minus shifted by R and 2R."""

    lengths: tuple[int, ...]
    minima: tuple[float, ...]
    envelope: tuple[float, ...]  # envelope[l] = min of minima over l' >= l
    bound_r: tuple[float, ...]  # rho_minus(l - R)
    bound_2r: tuple[float, ...]  # rho_minus(l - 2R)
    witness_r: tuple | None  # (x, g, value, bound) at the first l where minima < bound_r
    witness_2r: tuple | None

    @property
    def dominates_r(self) -> bool:
        return self.witness_r is None

    @property
    def dominates_2r(self) -> bool:
        return self.witness_2r is None

    def to_json(self) -> dict:
        return {"lengths": list(self.lengths), "minima": [_num(v) for v in self.minima],
                "envelope": [_num(v) for v in self.envelope],
                "bound_l_minus_R": [_num(v) for v in self.bound_r],
                "bound_l_minus_2R": [_num(v) for v in self.bound_2r],
                "dominates_l_minus_R": self.dominates_r, "dominates_l_minus_2R": self.dominates_2r,
                "witness_l_minus_R": None if self.witness_r is None else [self.witness_r[0], list(self.witness_r[1]), _num(self.witness_r[2]), _num(self.witness_r[3])],
                "witness_l_minus_2R": None if self.witness_2r is None else [self.witness_2r[0], list(self.witness_2r[1]), _num(self.witness_2r[2]), _num(self.witness_2r[3])]}


def action_properness_profile(sh: SyntheticHost, ext: ExtendedKernel, max_length: int, prefix: int = 0) -> ActionProfile:
    """For l = 0..max_length: min of k(x, x g) over x, x g in N_R(Z) beyond ``prefix`` with l(g) = l."""
    if sh.patch is None:
        raise ValueError("host has no action patch")
    rho = sh.coarse_map.rho_minus
    radius = ext.radius
    coords = sh.patch.coords
    allowed = [x for x in ext.points if sh.box.piece_of(ext.images[ext.position[x]])[0] >= prefix]
    allowed_set = set(allowed)
    xs = np.asarray(allowed, dtype=np.int64)
    pos = np.asarray([ext.position[x] for x in allowed], dtype=np.int64)
    minima, argmins = [], []
    for length in range(max_length + 1):
        best, arg = math.inf, None
        for g in sh.patch.elements_of_length(length):
            ys = [sh.patch.lookup.get((int(c[0]) + g[0], int(c[1]) + g[1])) for c in coords[xs]]
            ok = np.array([y is not None and y in allowed_set for y in ys], dtype=bool)
            if not ok.any():
                continue
            ypos = np.asarray([ext.position[y] for y, o in zip(ys, ok) if o], dtype=np.int64)
            vals = ext.kernel.values[pos[ok], ypos]
            i = int(np.argmin(vals))
            if vals[i] < best:
                best, arg = float(vals[i]), (int(xs[ok][i]), tuple(g))
        minima.append(best)
        argmins.append(arg)
    envelope = list(np.minimum.accumulate(np.asarray(minima)[::-1])[::-1])
    bound_r = [rho(length - radius) for length in range(max_length + 1)]
    bound_2r = [rho(length - 2 * radius) for length in range(max_length + 1)]

    def first_violation(bound):
        for length, (m, b) in enumerate(zip(minima, bound)):
            if m < b:
                return (argmins[length][0], argmins[length][1], m, b)
        return None

    return ActionProfile(tuple(range(max_length + 1)), tuple(minima), tuple(float(v) for v in envelope),
                         tuple(bound_r), tuple(bound_2r), first_violation(bound_r), first_violation(bound_2r))


def load_batch(text: str) -> list[dict]:
    """JSON lines of {x, gs, ts}."""
    return [json.loads(line) for line in text.splitlines() if line.strip()]
