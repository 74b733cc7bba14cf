"""Conditionally negative definite (CND), asymptotically CND and proper kernels.

A kernel is a symmetric real matrix with zero diagonal.  It is CND when
sum_ij t_i t_j k(x_i, x_j) <= 0 for every coefficient vector with sum t_i = 0.
Three independent checkers are provided (sum-zero projection, the Gram
matrix at a basepoint, random sampling) plus an exact rational one for small
integer kernels.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .graphs import BoxSpace, FiniteMetricSpace, _fmt
from .linalg import sum_zero_basis, symmetric_eigh

EXACT_LIMIT = 64


class KernelInvariantError(ValueError):
    pass


class Verdict(str, enum.Enum):
    CND = "CND"
    NOT_CND = "NOT_CND"


@dataclass(frozen=True)
class Kernel:
    """Symmetric zero-diagonal kernel over points ``0 .. size - 1``."""

    values: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        v = np.array(self.values, copy=True)
        if v.dtype == object:
            v = v.astype(np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise KernelInvariantError("kernel matrix must be square")
        if np.any(np.diag(v) != 0):
            i = int(np.flatnonzero(np.diag(v) != 0)[0])
            raise KernelInvariantError(f"k(x,x) must vanish; k({i},{i}) = {v[i, i]}")
        if np.any(v != v.T):
            i, j = np.argwhere(v != v.T)[0]
            raise KernelInvariantError(f"kernel is not symmetric at ({i}, {j})")
        if not np.all(np.isfinite(v.astype(np.float64))):
            raise KernelInvariantError("kernel has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.labels is not None and len(self.labels) != v.shape[0]:
            raise KernelInvariantError("label count does not match kernel size")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_metric(cls, m: FiniteMetricSpace) -> Kernel:
        return cls(m.dist, m.labels)

    @classmethod
    def zeros(cls, n: int) -> Kernel:
        return cls(np.zeros((n, n), dtype=np.int64))

    def restrict(self, indices: Sequence[int]) -> Kernel:
        idx = np.asarray(indices, dtype=np.int64)
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return Kernel(self.values[np.ix_(idx, idx)], labels)

    def is_integral(self) -> bool:
        v = self.values
        return v.dtype.kind in "iu" or bool(np.all(v == np.round(v)))

    def inf_norm(self) -> float:
        return float(np.abs(self.values.astype(np.float64)).sum(axis=1).max()) if self.size else 0.0

    def default_tol(self) -> float:
        return max(1e-9 * self.inf_norm(), 1e-12)

    def quadratic_form(self, t) -> float:
        t = np.asarray(t, dtype=np.float64)
        return float(t @ self.values.astype(np.float64) @ t)

    def exact_quadratic_form(self, t: Sequence) -> Fraction:
        """sum t_i t_j k_ij in rationals (entries converted exactly)."""
        q = [Fraction(x) for x in t]
        vals = self.values
        total = Fraction(0)
        for i, ti in enumerate(q):
            if ti:
                row = sum((Fraction(vals[i, j].item()) * q[j] for j in range(len(q)) if q[j]), Fraction(0))
                total += ti * row
        return total

    def to_csv(self) -> str:
        labels = self.labels if self.labels is not None else tuple(range(self.size))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + [str(x) for x in labels])
        for lab, row in zip(labels, self.values):
            w.writerow([str(lab)] + [_fmt(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> Kernel:
        m = FiniteMetricSpace.from_csv(text)
        return cls(m.dist, m.labels)


@dataclass(frozen=True)
class CndVerdict:
    verdict: Verdict
    max_eig: float
    witness: tuple[float, ...] | None = None
    tol: float = 0.0
    method: str = "projected"
    exact_witness: tuple[Fraction, ...] | None = field(default=None, repr=False)

    @property
    def is_cnd(self) -> bool:
        return self.verdict is Verdict.CND

    def to_json(self) -> dict:
        out = {"verdict": self.verdict.value, "max_eig": self.max_eig, "method": self.method, "tol": self.tol,
               "witness": None if self.witness is None else list(self.witness)}
        if self.exact_witness is not None:
            out["exact_witness"] = [[x.numerator, x.denominator] for x in self.exact_witness]
        return out


def _resolve_tol(k: Kernel, tol: float | None) -> float:
    return k.default_tol() if tol is None else float(tol)


def is_cnd_projected(k: Kernel, tol: float | None = None, method: str = "auto") -> CndVerdict:
    """Largest eigenvalue of Q^T K Q with Q an orthonormal basis of sum-zero vectors."""
    tol = _resolve_tol(k, tol)
    n = k.size
    if n < 2:
        return CndVerdict(Verdict.CND, 0.0 if n else -math.inf, None, tol, "projected")
    q = sum_zero_basis(n)
    proj = q.T @ k.values.astype(np.float64) @ q
    w, v = symmetric_eigh(0.5 * (proj + proj.T), method=method)
    lam = float(w[-1])
    if lam <= tol:
        return CndVerdict(Verdict.CND, lam, None, tol, "projected")
    t = q @ v[:, -1]
    t -= t.mean()
    t /= np.linalg.norm(t)
    return CndVerdict(Verdict.NOT_CND, lam, tuple(float(x) for x in t), tol, "projected")


def schoenberg_gram(k: Kernel, basepoint: int) -> np.ndarray:
    """G_ij = k(i, x0) + k(j, x0) - k(i, j) over all points other than x0."""
    v = k.values.astype(np.float64)
    others = [i for i in range(k.size) if i != basepoint]
    col = v[others, basepoint]
    return col[:, None] + col[None, :] - v[np.ix_(others, others)]


def is_cnd_schoenberg(k: Kernel, basepoint: int = 0, tol: float | None = None, method: str = "auto") -> CndVerdict:
    """CND iff the Gram matrix at ``basepoint`` is positive semidefinite (down to -tol).

    ``max_eig`` holds -lambda_min(G).  A witness t is built from the bottom
    eigenvector v of G by t_i = v_i off the basepoint and t_x0 = -sum v, so
    that sum t_i t_j k_ij = -v^T G v.
    """
    if not 0 <= basepoint < max(k.size, 1):
        raise KernelInvariantError(f"basepoint {basepoint} outside point set of size {k.size}")
    tol = _resolve_tol(k, tol)
    if k.size < 2:
        return CndVerdict(Verdict.CND, 0.0 if k.size else -math.inf, None, tol, "schoenberg")
    g = schoenberg_gram(k, basepoint)
    w, vec = symmetric_eigh(0.5 * (g + g.T), method=method)
    score = -float(w[0])
    if score <= tol:
        return CndVerdict(Verdict.CND, score, None, tol, "schoenberg")
    v = vec[:, 0]
    t = np.insert(v, basepoint, 0.0)
    t[basepoint] = -v.sum()
    t[basepoint] -= t.sum()
    return CndVerdict(Verdict.NOT_CND, score, tuple(float(x) for x in t), tol, "schoenberg")


def is_cnd_sampled(k: Kernel, samples: int = 10_000, seed: int = 0, tol: float | None = None) -> CndVerdict:
    """Search random sum-zero vectors for a positive quadratic form.

    Half the samples are dense Gaussian vectors, half are supported on 2-4
    random points.  Finding none is evidence, not proof, of CND.
    """
    tol = _resolve_tol(k, tol)
    n = k.size
    if n < 2:
        return CndVerdict(Verdict.CND, 0.0, None, tol, "sampled")
    rng = np.random.default_rng(seed)
    vals = k.values.astype(np.float64)
    dense = rng.standard_normal((samples - samples // 2, n))
    m = samples // 2
    # random 2-4 point supports: first s columns of a random permutation per row
    order = rng.random((m, n)).argsort(axis=1)[:, :4]
    sizes = rng.integers(2, 5, size=m)
    keep = np.arange(order.shape[1])[None, :] < sizes[:, None]
    sparse = np.zeros((m, n))
    rows = np.broadcast_to(np.arange(m)[:, None], order.shape)
    sparse[rows[keep], order[keep]] = rng.standard_normal(int(keep.sum()))
    t = np.vstack([dense, sparse])
    t -= t.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(t, axis=1)
    t = t[norms > 0] / norms[norms > 0, None]
    forms = np.einsum("si,ij,sj->s", t, vals, t)
    best = int(np.argmax(forms))
    score = float(forms[best])
    if score <= tol:
        return CndVerdict(Verdict.CND, score, None, tol, "sampled")
    return CndVerdict(Verdict.NOT_CND, score, tuple(float(x) for x in t[best]), tol, "sampled")


def is_cnd_exact(k: Kernel, basepoint: int = 0) -> CndVerdict:
    """Exact rational decision for kernels with rational entries (<= 64 points).

    Symmetric elimination of the Gram matrix G at ``basepoint`` as
    U^T G U = M with U unit upper triangular.  G is PSD iff elimination
    finds no negative pivot and no zero pivot with a nonzero row; otherwise a
    column of U (or a combination of two) gives v with v^T G v < 0, which is
    turned into an exact sum-zero witness.  ``max_eig`` is 1.0 or 0.0 (a
    sign, not an eigenvalue).
    """
    n = k.size
    if n > EXACT_LIMIT:
        raise ValueError(f"exact path supports at most {EXACT_LIMIT} points, got {n}")
    if n < 2:
        return CndVerdict(Verdict.CND, 0.0, None, 0.0, "exact")
    vals = [[Fraction(k.values[i, j].item()) for j in range(n)] for i in range(n)]
    others = [i for i in range(n) if i != basepoint]
    m = len(others)
    g = [[vals[a][basepoint] + vals[b][basepoint] - vals[a][b] for b in others] for a in others]
    u = [[Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    v = None
    for p in range(m):
        piv = g[p][p]
        if piv < 0:
            v = [u[i][p] for i in range(m)]
            break
        if piv == 0:
            j = next((j for j in range(p + 1, m) if g[p][j] != 0), None)
            if j is None:
                continue
            a = -(g[j][j] + 1) / (2 * g[p][j])
            v = [a * u[i][p] + u[i][j] for i in range(m)]
            break
        for j in range(p + 1, m):
            f = g[p][j] / piv
            if f == 0:
                continue
            for r in range(m):
                g[r][j] -= f * g[r][p]
            for c in range(m):
                g[j][c] -= f * g[p][c]
            for r in range(m):
                u[r][j] -= f * u[r][p]
    if v is None:
        return CndVerdict(Verdict.CND, 0.0, None, 0.0, "exact")
    t = [Fraction(0)] * n
    for idx, i in enumerate(others):
        t[i] = v[idx]
    t[basepoint] = -sum(v, Fraction(0))
    return CndVerdict(Verdict.NOT_CND, 1.0, tuple(float(x) for x in t), 0.0, "exact", tuple(t))


def certify_cnd(k: Kernel, tol: float | None = None) -> CndVerdict:
    """Exact decision for small integral kernels, projected eigenvalue otherwise."""
    if k.size <= EXACT_LIMIT and k.is_integral():
        return is_cnd_exact(k)
    return is_cnd_projected(k, tol)


# -- asymptotic CND over box spaces ---------------------------------------------


class NotCertifiable(RuntimeError):
    """No prefix length works inside the finite prefix of the box space."""

    def __init__(self, radius, failing_piece: int, reason: str):
        self.radius = radius
        self.failing_piece = failing_piece
        self.reason = reason
        super().__init__(f"NOT_CERTIFIABLE for r={radius}: piece {failing_piece} {reason}")


@dataclass(frozen=True)
class BallVerdict:
    piece: int  # 1-based
    center: int  # vertex of the piece
    point: int  # global index in the box space
    size: int
    verdict: Verdict
    max_eig: float

    def to_json(self) -> dict:
        return {"piece": self.piece, "center": self.center, "size": self.size,
                "verdict": self.verdict.value, "max_eig": self.max_eig}


@dataclass(frozen=True)
class AsymptoticCndReport:
    """Ball-by-ball certificate for sets of diameter <= ``radius``.

    ``excluded_prefix`` is N(r): pieces 1..N form the bounded set K(r).  Every
    later piece is covered by balls of radius ``ball_radius``.
    """

    radius: int
    ball_radius: int
    min_girth: int
    excluded_prefix: int
    per_ball: tuple[BallVerdict, ...]

    @property
    def certified(self) -> bool:
        return all(b.verdict is Verdict.CND for b in self.per_ball)

    @property
    def verdict(self) -> Verdict:
        return Verdict.CND if self.certified else Verdict.NOT_CND

    @property
    def max_eig(self) -> float:
        return max((b.max_eig for b in self.per_ball), default=-math.inf)

    def failures(self) -> list[BallVerdict]:
        return [b for b in self.per_ball if b.verdict is not Verdict.CND]

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "radius": self.radius,
            "ball_radius": self.ball_radius,
            "min_girth": self.min_girth,
            "excluded_prefix": self.excluded_prefix,
            "max_eig": self.max_eig,
            "witness": None,
            "per_ball": [b.to_json() for b in self.per_ball],
        }


def required_girth(r: int) -> int:
    """Girth that makes every diameter-<=r set lift isometrically to the universal cover.

    A geodesic triangle on three points at mutual distance <= r has perimeter
    <= 3r; girth > 3r forces it to be a tripod, so the set embeds in a tree.
    """
    return 3 * r + 1


def excluded_prefix(b: BoxSpace, r: int, min_girth: int | None = None) -> int:
    """Least N with separation > r and girth >= min_girth for every piece beyond N."""
    min_girth = required_girth(r) if min_girth is None else min_girth
    bad = [k for k in range(b.piece_count) if not (b.separation(k) > r and b.girths[k] >= min_girth)]
    n = (bad[-1] + 1) if bad else 0
    if n == b.piece_count:
        k = bad[-1]
        reason = (f"has girth {b.girths[k]} < {min_girth}" if b.girths[k] < min_girth
                  else f"has separation {b.separation(k)} <= {r}")
        raise NotCertifiable(r, k + 1, reason + " and no later piece exists in the prefix")
    return n


def asymptotic_cnd_check(b: BoxSpace, k: Kernel, r: int, *, ball_radius: int | None = None,
                         min_girth: int | None = None, tol: float | None = None,
                         method: str = "projected", workers: int | None = None) -> AsymptoticCndReport:
    """Certify that ``k`` is CND on every set of diameter <= r outside a piece prefix.

    By default N(r) requires separation > r and girth >= 3r + 1 beyond the
    prefix, and each later piece is covered by balls of radius ceil(r/2) at
    every vertex.  Under those conditions every diameter-<=r set lies in one
    of those balls (it sits in a tree, hence within ceil(r/2) of a centre), and
    CND passes to subsets.  ``ball_radius`` and ``min_girth`` override the two
    parameters.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if k.size != b.size:
        raise KernelInvariantError(f"kernel has {k.size} points, box space has {b.size}")
    br = (r + 1) // 2 if ball_radius is None else ball_radius
    mg = required_girth(r) if min_girth is None else min_girth
    n = excluded_prefix(b, r, mg)
    jobs = [(piece, v) for piece in range(n, b.piece_count) for v in range(b.pieces[piece].vertex_count)]

    def check(job):
        piece, v = job
        local = np.flatnonzero(b.piece_metrics[piece].dist[v] <= br)
        points = local + b.offsets[piece]
        sub = k.restrict(points)
        if method == "exact":
            res = is_cnd_exact(sub, basepoint=int(np.searchsorted(local, v)))
        else:
            res = is_cnd_projected(sub, tol if tol is not None else k.default_tol())
        return BallVerdict(piece + 1, v, int(b.offsets[piece] + v), len(points), res.verdict, res.max_eig)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(check, jobs))
    else:
        verdicts = [check(j) for j in jobs]
    return AsymptoticCndReport(r, br, mg, n, tuple(verdicts))


# -- properness ---------------------------------------------------------------


@dataclass(frozen=True)
class PropernessProfile:
    """upper[r] = max k over d <= r, lower[r] = min k over d >= r, for r = 0..diameter."""

    radii: tuple[int, ...]
    upper: tuple[float, ...]
    lower: tuple[float, ...]

    @property
    def lower_grows(self) -> bool:
        """False when the lower profile is constant, a sign the kernel is not proper."""
        return len(self.lower) > 1 and self.lower[-1] > self.lower[0]

    def to_json(self) -> dict:
        return {"radii": list(self.radii), "upper": [_num(x) for x in self.upper],
                "lower": [_num(x) for x in self.lower], "lower_grows": self.lower_grows}


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() else x


def properness_profile(k: Kernel, m: FiniteMetricSpace) -> PropernessProfile:
    if k.size != m.size:
        raise KernelInvariantError(f"kernel has {k.size} points, metric space has {m.size}")
    d = m.dist
    vals = k.values
    diam = int(math.floor(float(d.max()))) if m.size else 0
    upper, lower = [], []
    flat_d = d.ravel()
    order = np.argsort(flat_d, kind="stable")
    sd = flat_d[order]
    sk = vals.ravel()[order].astype(np.float64)
    pref_max = np.maximum.accumulate(sk)
    suff_min = np.minimum.accumulate(sk[::-1])[::-1]
    for r in range(diam + 1):
        hi = np.searchsorted(sd, r, side="right")
        lo = np.searchsorted(sd, r, side="left")
        upper.append(float(pref_max[hi - 1]) if hi > 0 else -math.inf)
        lower.append(float(suff_min[lo]) if lo < len(sd) else math.inf)
    return PropernessProfile(tuple(range(diam + 1)), tuple(upper), tuple(lower))


def report_json(obj) -> str:
    return json.dumps(obj.to_json(), indent=2, sort_keys=True)
