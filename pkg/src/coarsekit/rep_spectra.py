"""Congruence quotients of SL(2, Z), their permutation representations and spectra.

u_n(g) acts on l^2(SL(2, Z/nZ)) by right translation, (u_n(g) f)(h) = f(h pi_n(g)).
Group-algebra elements are finitely supported rational functions on SL(2, Z),
keyed by integer matrices and displayed as shortest words in T, S.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import sl2
from .linalg import operator_norm

MODULUS_CAP = 13
WORD_RADIUS_CAP = 6


class ModulusTooLarge(ValueError):
    pass


# -- quotients --------------------------------------------------------------------


@dataclass(frozen=True)
class SL2Quotient:
    """SL(2, Z/nZ) as an (order, 4) array of matrices in lexicographic order."""

    n: int
    elements: np.ndarray
    lookup: np.ndarray  # code -> element index, -1 when not in the group

    @property
    def order(self) -> int:
        return len(self.elements)

    def index(self, g: sl2.Mat) -> int:
        """Index of pi_n(g) for an integer matrix g of determinant 1."""
        code = sl2.encode(np.asarray([g]), self.n)[0]
        i = int(self.lookup[code])
        if i < 0:
            raise ValueError(f"{g} is not in SL(2, Z/{self.n})")
        return i

    def element(self, i: int) -> sl2.Mat:
        return tuple(int(v) for v in self.elements[i])

    def right_permutation(self, g: sl2.Mat) -> np.ndarray:
        """perm[h] = index of h * pi_n(g)."""
        return self.lookup[sl2.encode(sl2.right_multiply(self.elements, sl2.reduce(g, self.n), self.n), self.n)]

    def check_homomorphism(self, pairs: int = 50, seed: int = 0, radius: int = 4) -> bool:
        """pi_n(g h) = pi_n(g) pi_n(h) on random pairs from a word ball."""
        ball = list(sl2.word_ball(radius))
        rng = random.Random(seed)
        for _ in range(pairs):
            g, h = rng.choice(ball), rng.choice(ball)
            lhs = self.index(sl2.mul(g, h))
            rhs = self.index(sl2.mul(self.element(self.index(g)), self.element(self.index(h)), self.n))
            if lhs != rhs:
                return False
        return True

    def check_group_axioms(self, samples: int = 200, seed: int = 0) -> bool:
        """Closure, identity and inverses on all elements; associativity on random triples."""
        n = self.n
        ident = self.index(sl2.IDENTITY)
        for i in range(self.order):
            g = self.element(i)
            if self.index(sl2.mul(g, sl2.inv(g, n), n)) != ident:
                return False
        rng = random.Random(seed)
        for _ in range(samples):
            a, b, c = (self.element(rng.randrange(self.order)) for _ in range(3))
            if sl2.mul(sl2.mul(a, b, n), c, n) != sl2.mul(a, sl2.mul(b, c, n), n):
                return False
        return True


@lru_cache(maxsize=None)
def sl2_quotient(n: int, cap: int = MODULUS_CAP) -> SL2Quotient:
    """Enumerate SL(2, Z/nZ) by closing {I} under right multiplication by T, S."""
    if n < 2:
        raise ValueError("modulus must be at least 2")
    if n > cap:
        raise ModulusTooLarge(
            f"modulus {n} exceeds cap {cap}: dense operators on {sl2.sl2_order(n)} points would need "
            f"{sl2.sl2_order(n) ** 2 * 8 / 2**20:.0f} MiB")
    seen = {sl2.reduce(sl2.IDENTITY, n)}
    queue = deque(seen)
    gens = [sl2.reduce(s, n) for s in sl2.STANDARD_GENERATORS]
    while queue:
        g = queue.popleft()
        for s in gens:
            h = sl2.mul(g, s, n)
            if h not in seen:
                seen.add(h)
                queue.append(h)
    elements = np.array(sorted(seen), dtype=np.int64)
    expected = sl2.sl2_order(n)
    if len(elements) != expected:
        raise AssertionError(f"enumerated {len(elements)} elements mod {n}, expected {expected}")
    lookup = np.full(n**4, -1, dtype=np.int64)
    lookup[sl2.encode(elements, n)] = np.arange(len(elements))
    elements.setflags(write=False)
    lookup.setflags(write=False)
    return SL2Quotient(n, elements, lookup)


# -- group algebra --------------------------------------------------------------------


def word_of(g: sl2.Mat) -> str:
    ball = sl2.word_ball(8)
    if g not in ball:
        raise ValueError(f"{g} has word length above 8")
    return ball[g][1] or "e"


def _parse(word: str) -> sl2.Mat:
    return sl2.IDENTITY if word.strip() in ("", "e") else sl2.parse_word(word)


@dataclass(frozen=True)
class GroupAlgebraElement:
    """Finitely supported function SL(2, Z) -> Q (or R)."""

    terms: Mapping[sl2.Mat, Fraction | float]

    def __post_init__(self):
        clean = {}
        for g, c in self.terms.items():
            if sl2.det(g) != 1:
                raise ValueError(f"{g} is not in SL(2, Z)")
            if c != 0:
                clean[tuple(int(v) for v in g)] = c
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    @classmethod
    def delta(cls, word: str = "e", coeff=1) -> GroupAlgebraElement:
        return cls({_parse(word): Fraction(coeff)})

    @classmethod
    def from_words(cls, pairs: Iterable[tuple[str, object]]) -> GroupAlgebraElement:
        terms: dict[sl2.Mat, Fraction] = {}
        for word, coeff in pairs:
            g = _parse(word)
            terms[g] = terms.get(g, Fraction(0)) + Fraction(coeff)
        return cls(terms)

    @classmethod
    def averaging(cls, generators: Sequence[sl2.Mat] = sl2.STANDARD_GENERATORS) -> GroupAlgebraElement:
        w = Fraction(1, len(generators))
        terms: dict[sl2.Mat, Fraction] = {}
        for s in generators:
            terms[s] = terms.get(s, Fraction(0)) + w
        return cls(terms)

    def __add__(self, other: GroupAlgebraElement) -> GroupAlgebraElement:
        out = dict(self.terms)
        for g, c in other.terms.items():
            out[g] = out.get(g, 0) + c
        return GroupAlgebraElement(out)

    def __sub__(self, other: GroupAlgebraElement) -> GroupAlgebraElement:
        return self + other.scale(-1)

    def scale(self, c) -> GroupAlgebraElement:
        return GroupAlgebraElement({g: c * v for g, v in self.terms.items()})

    def __mul__(self, other: GroupAlgebraElement) -> GroupAlgebraElement:
        """Convolution (x * y)(g) = sum_{a b = g} x(a) y(b)."""
        out: dict[sl2.Mat, Fraction] = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                g = sl2.mul(a, b)
                out[g] = out.get(g, 0) + ca * cb
        return GroupAlgebraElement(out)

    def star(self) -> GroupAlgebraElement:
        """x*(g) = conj(x(g^-1)); coefficients are real."""
        return GroupAlgebraElement({sl2.inv(g): c for g, c in self.terms.items()})

    @property
    def support(self) -> tuple[sl2.Mat, ...]:
        return tuple(self.terms)

    @property
    def support_radius(self) -> int:
        return max((sl2.word_length(g) for g in self.terms), default=0)

    def is_exact(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for c in self.terms.values())

    def to_json(self) -> dict:
        terms = []
        for g, c in self.terms.items():
            c = Fraction(c)
            terms.append({"word": word_of(g), "coeff": [c.numerator, c.denominator]})
        return {"terms": terms}

    @classmethod
    def from_json(cls, data: dict) -> GroupAlgebraElement:
        return cls.from_words((t["word"], Fraction(int(t["coeff"][0]), int(t["coeff"][1]))) for t in data["terms"])


def random_element(rng: random.Random, radius: int = 3, terms: int = 4, max_num: int = 5,
                   max_den: int = 4) -> GroupAlgebraElement:
    ball = sorted(sl2.word_ball(radius))
    chosen = rng.sample(ball, min(terms, len(ball)))
    return GroupAlgebraElement({g: Fraction(rng.randint(-max_num, max_num) or 1, rng.randint(1, max_den))
                                for g in chosen})


# -- representations ---------------------------------------------------------------------


@dataclass(frozen=True)
class PermutationRep:
    """u_n on l^2(SL(2, Z/nZ)); u_n(g) has a 1 at (h, h pi_n(g))."""

    quotient: SL2Quotient

    @property
    def n(self) -> int:
        return self.quotient.n

    @property
    def dim(self) -> int:
        return self.quotient.order

    def generator_matrix(self, g: sl2.Mat, dtype=np.float64) -> sp.csr_matrix:
        perm = self.quotient.right_permutation(g)
        rows = np.arange(self.dim)
        return sp.csr_matrix((np.ones(self.dim, dtype=dtype), (rows, perm)), shape=(self.dim, self.dim))

    def matrix(self, x: GroupAlgebraElement) -> sp.csr_matrix:
        """u_n(x) = sum_g x(g) u_n(g) in floating point."""
        rows, cols, vals = [], [], []
        ar = np.arange(self.dim)
        for g, c in x.terms.items():
            rows.append(ar)
            cols.append(self.quotient.right_permutation(g))
            vals.append(np.full(self.dim, float(c)))
        if not rows:
            return sp.csr_matrix((self.dim, self.dim))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.dim, self.dim))

    def integer_matrix(self, x: GroupAlgebraElement, scale: int) -> sp.csr_matrix:
        """scale * u_n(x) as an int64 matrix; ``scale`` must clear every denominator."""
        rows, cols, vals = [], [], []
        ar = np.arange(self.dim)
        for g, c in x.terms.items():
            v = Fraction(c) * scale
            if v.denominator != 1:
                raise ValueError(f"scale {scale} does not clear coefficient {c}")
            rows.append(ar)
            cols.append(self.quotient.right_permutation(g))
            vals.append(np.full(self.dim, int(v), dtype=np.int64))
        if not rows:
            return sp.csr_matrix((self.dim, self.dim), dtype=np.int64)
        m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.dim, self.dim), dtype=np.int64)
        m.sum_duplicates()
        return m

    def apply(self, x: GroupAlgebraElement, f: Mapping[int, Fraction]) -> dict[int, Fraction]:
        """Exact u_n(x) f for a sparse rational vector {index: value}."""
        out: dict[int, Fraction] = {}
        perms = {g: self.quotient.right_permutation(g) for g in x.terms}
        inv = {g: np.argsort(p) for g, p in perms.items()}
        # (u(g) f)(h) = f(h g): the mass at k moves to h = k g^-1
        for g, c in x.terms.items():
            for k, v in f.items():
                h = int(inv[g][k])
                out[h] = out.get(h, 0) + c * v
        return {h: v for h, v in out.items() if v != 0}


def common_denominator(x: GroupAlgebraElement) -> int:
    d = 1
    for c in x.terms.values():
        d = math.lcm(d, Fraction(c).denominator)
    return d


def representation_defect(x: GroupAlgebraElement, y: GroupAlgebraElement, n: int) -> int:
    """Largest entry of |D u_n(x*y) - (Dx u_n(x))(Dy u_n(y))| in integers, D = Dx Dy (0 means exact)."""
    rep = PermutationRep(sl2_quotient(n))
    dx, dy = common_denominator(x), common_denominator(y)
    lhs = rep.integer_matrix(x * y, dx * dy)
    rhs = rep.integer_matrix(x, dx) @ rep.integer_matrix(y, dy)
    diff = (lhs - rhs).tocoo()
    return int(np.abs(diff.data).max()) if diff.nnz else 0


@dataclass(frozen=True)
class CongruenceNorms:
    norms: dict[int, float]

    @property
    def sup(self) -> float:
        return max(self.norms.values(), default=0.0)

    def to_json(self) -> dict:
        return {"norms": {str(n): v for n, v in self.norms.items()}, "sup": self.sup}


def congruence_norm(x: GroupAlgebraElement, moduli: Iterable[int], cap: int = MODULUS_CAP) -> CongruenceNorms:
    """||u_n(x)|| for each modulus and their maximum."""
    return CongruenceNorms({n: operator_norm(PermutationRep(sl2_quotient(n, cap)).matrix(x)) for n in moduli})


# -- pushforward isometry --------------------------------------------------------------


def right_regular_apply(x: GroupAlgebraElement, xi: Mapping[sl2.Mat, Fraction]) -> dict[sl2.Mat, Fraction]:
    """(rho(x) xi)(h) = sum_g x(g) xi(h g) on SL(2, Z), exactly.

    The right regular representation is unitarily equivalent to the left one
    via xi -> xi(. ^-1), so these norms are those of lambda(x).
    """
    out: dict[sl2.Mat, Fraction] = {}
    for g, c in x.terms.items():
        ginv = sl2.inv(g)
        for k, v in xi.items():
            h = sl2.mul(k, ginv)
            out[h] = out.get(h, 0) + c * v
    return {h: v for h, v in out.items() if v != 0}


@dataclass(frozen=True)
class PushforwardCheck:
    n: int
    injective: bool
    collision: tuple[str, str] | None
    reduced_norm_sq: Fraction  # ||rho(x) xi||^2
    quotient_norm_sq: Fraction | None  # ||u_n(x) xi_n||^2 when injective
    xi_norm_sq: Fraction
    pushed_xi_norm_sq: Fraction | None

    @property
    def holds(self) -> bool:
        return self.injective and self.quotient_norm_sq == self.reduced_norm_sq \
            and self.pushed_xi_norm_sq == self.xi_norm_sq

    def to_json(self) -> dict:
        def q(v):
            return None if v is None else [v.numerator, v.denominator]
        return {"n": self.n, "injective": self.injective, "collision": list(self.collision) if self.collision else None,
                "reduced_norm_sq": q(self.reduced_norm_sq), "quotient_norm_sq": q(self.quotient_norm_sq),
                "holds": self.holds}


def pushforward_isometry_check(x: GroupAlgebraElement, xi: Mapping[sl2.Mat, Fraction], n: int) -> PushforwardCheck:
    """Compare ||u_n(x) pi_* xi|| with ||rho(x) xi|| exactly when pi_n is injective on the supports."""
    xi = {g: Fraction(v) for g, v in xi.items() if v != 0}
    eta = right_regular_apply(x, xi)
    red = sum((v * v for v in eta.values()), Fraction(0))
    xi_sq = sum((v * v for v in xi.values()), Fraction(0))
    quotient = sl2_quotient(n)
    seen: dict[int, sl2.Mat] = {}
    for g in sorted(set(xi) | set(eta)):
        i = quotient.index(g)
        if i in seen:
            return PushforwardCheck(n, False, (word_of(seen[i]), word_of(g)), red, None, xi_sq, None)
        seen[i] = g
    rep = PermutationRep(quotient)
    pushed = {quotient.index(g): v for g, v in xi.items()}
    image = rep.apply(x, pushed)
    q_sq = sum((v * v for v in image.values()), Fraction(0))
    p_sq = sum((v * v for v in pushed.values()), Fraction(0))
    return PushforwardCheck(n, True, None, red, q_sq, xi_sq, p_sq)


def first_injective_modulus(x: GroupAlgebraElement, xi: Mapping[sl2.Mat, Fraction],
                            cap: int = MODULUS_CAP) -> PushforwardCheck | None:
    """Smallest n in 2..cap where the pushforward check holds, or None."""
    for n in range(2, cap + 1):
        res = pushforward_isometry_check(x, xi, n)
        if res.holds:
            return res
    return None


# -- spectral gap and Kazhdan decay --------------------------------------------------------


def averaging_operator(n: int, generators: Sequence[sl2.Mat] = sl2.STANDARD_GENERATORS) -> np.ndarray:
    gens = [tuple(int(v) for v in s) for s in generators]
    for s in gens:
        if sl2.reduce(sl2.inv(s), n) not in {sl2.reduce(t, n) for t in gens}:
            raise ValueError(f"generator set is not symmetric mod {n}: missing inverse of {s}")
    rep = PermutationRep(sl2_quotient(n))
    return rep.matrix(GroupAlgebraElement.averaging(gens)).toarray()


@dataclass(frozen=True)
class GapReport:
    moduli: tuple[int, ...]
    lambda2: dict[int, float]  # largest eigenvalue on the complement of constants
    lambda_min: dict[int, float]
    constants_defect: dict[int, float]  # max |M_n 1 - 1|

    @property
    def epsilon(self) -> float:
        return min(1.0 - v for v in self.lambda2.values())

    def lambda_star(self, n: int) -> float:
        return max(abs(self.lambda2[n]), abs(self.lambda_min[n]))

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon,
                "moduli": {str(n): {"lambda2": self.lambda2[n], "lambda_min": self.lambda_min[n],
                                    "lambda_star": self.lambda_star(n)} for n in self.moduli}}


def trivial_isolation_gap(moduli: Iterable[int], generators: Sequence[sl2.Mat] = sl2.STANDARD_GENERATORS) -> GapReport:
    """Spectrum of M_n on the orthogonal complement of the constants."""
    moduli = tuple(moduli)
    lam2, lmin, defect = {}, {}, {}
    for n in moduli:
        m = averaging_operator(n, generators)
        dim = m.shape[0]
        defect[n] = float(np.abs(m @ np.ones(dim) - 1.0).max())
        # M is symmetric and fixes the constants; drop the eigenvalue nearest 1 once
        w = np.linalg.eigvalsh(m)
        top = int(np.argmin(np.abs(w - 1.0)))
        rest = np.delete(w, top)
        lam2[n] = float(rest[-1]) if len(rest) else 0.0
        lmin[n] = float(rest[0]) if len(rest) else 0.0
    return GapReport(moduli, lam2, lmin, defect)


@dataclass(frozen=True)
class DecayTable:
    n: int
    lambda_star: float
    norms: tuple[float, ...]  # ||M^k - P|| for k = 0..k_max

    def bound(self, k: int) -> float:
        return self.lambda_star**k

    def max_excess(self) -> float:
        """max_k (||M^k - P|| - lambda*^k); at most ~1e-8 when the bound holds."""
        return max(v - self.bound(k) for k, v in enumerate(self.norms))

    def max_deviation(self) -> float:
        return max(abs(v - self.bound(k)) for k, v in enumerate(self.norms))

    def to_json(self) -> dict:
        return {"n": self.n, "lambda_star": self.lambda_star,
                "rows": [{"k": k, "norm": v, "bound": self.bound(k)} for k, v in enumerate(self.norms)]}


def kazhdan_projection_decay(n: int, k_max: int = 30,
                             generators: Sequence[sl2.Mat] = sl2.STANDARD_GENERATORS) -> DecayTable:
    """||M_n^k - P_n|| by direct matrix powers, P_n the projection onto constants."""
    m = averaging_operator(n, generators)
    dim = m.shape[0]
    p = np.full((dim, dim), 1.0 / dim)
    gap = trivial_isolation_gap([n], generators)
    power = np.eye(dim)
    norms = []
    for _ in range(k_max + 1):
        diff = power - p
        norms.append(float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.T))).max()))
        power = power @ m
    return DecayTable(n, gap.lambda_star(n), tuple(norms))


def report_json(obj) -> str:
    return json.dumps(obj.to_json(), indent=2, sort_keys=True)
