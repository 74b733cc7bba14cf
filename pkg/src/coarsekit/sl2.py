"""Integer 2x2 matrix arithmetic for SL(2,Z) and its congruence quotients.

Matrices are 4-tuples ``(a, b, c, d)`` meaning [[a, b], [c, d]].
"""

from __future__ import annotations

import re
from functools import lru_cache

import numpy as np

Mat = tuple[int, int, int, int]

IDENTITY: Mat = (1, 0, 0, 1)
T: Mat = (1, 1, 0, 1)
T_INV: Mat = (1, -1, 0, 1)
S: Mat = (0, -1, 1, 0)
S_INV: Mat = (0, 1, -1, 0)

LETTERS: dict[str, Mat] = {"T": T, "T^-1": T_INV, "S": S, "S^-1": S_INV}
STANDARD_GENERATORS: tuple[Mat, ...] = (T, T_INV, S, S_INV)


def mul(x: Mat, y: Mat, n: int | None = None) -> Mat:
    a, b, c, d = x
    e, f, g, h = y
    out = (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)
    if n is not None:
        return tuple(v % n for v in out)
    return out


def inv(x: Mat, n: int | None = None) -> Mat:
    """Inverse of a determinant-one matrix."""
    a, b, c, d = x
    out = (d, -b, -c, a)
    if n is not None:
        return tuple(v % n for v in out)
    return out


def det(x: Mat) -> int:
    return x[0] * x[3] - x[1] * x[2]


def reduce(x: Mat, n: int) -> Mat:
    return tuple(v % n for v in x)


def prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def sl2_order(n: int) -> int:
    """|SL(2, Z/nZ)| = n^3 * prod_{p | n} (1 - p^-2)."""
    order = n**3
    for p in prime_factors(n):
        order = order * (p * p - 1) // (p * p)
    return order


def sl2_elements(n: int) -> np.ndarray:
    """All determinant-one matrices mod n, lexicographically ordered, shape (m, 4)."""
    r = np.arange(n)
    a, b, c, d = np.meshgrid(r, r, r, r, indexing="ij")
    flat = np.stack([a.ravel(), b.ravel(), c.ravel(), d.ravel()], axis=1)
    keep = (flat[:, 0] * flat[:, 3] - flat[:, 1] * flat[:, 2]) % n == (1 % n)
    return flat[keep]


def encode(mats: np.ndarray, n: int) -> np.ndarray:
    """Integer code a*n^3 + b*n^2 + c*n + d for rows of an (m, 4) array."""
    m = np.asarray(mats, dtype=np.int64) % n
    return ((m[:, 0] * n + m[:, 1]) * n + m[:, 2]) * n + m[:, 3]


def right_multiply(elements: np.ndarray, g: Mat, n: int) -> np.ndarray:
    """Rows ``x * g mod n`` for an (m, 4) array of matrices."""
    a, b, c, d = (elements[:, i].astype(np.int64) for i in range(4))
    e, f, gg, h = g
    return np.stack([a * e + b * gg, a * f + b * h, c * e + d * gg, c * f + d * h], axis=1) % n


_TOKEN = re.compile(r"^(T|S)(?:\^(-?\d+))?$")


def parse_word(word: str) -> Mat:
    """Evaluate a word such as ``"T S T^-1 S^2"`` in SL(2, Z)."""
    out = IDENTITY
    for token in word.split():
        m = _TOKEN.match(token)
        if m is None:
            raise ValueError(f"bad word token {token!r}")
        base = T if m.group(1) == "T" else S
        power = int(m.group(2)) if m.group(2) is not None else 1
        step = base if power >= 0 else inv(base)
        for _ in range(abs(power)):
            out = mul(out, step)
    return out


@lru_cache(maxsize=None)
def word_ball(radius: int) -> dict[Mat, tuple[int, str]]:
    """Word-length ball in SL(2,Z) for generators T^{+-1}, S^{+-1}.

    Maps each matrix to ``(length, shortest_word)``; the word problem at this
    scale is settled by matrix equality.
    """
    if radius > 8:
        raise ValueError("word balls are capped at radius 8")
    ball: dict[Mat, tuple[int, str]] = {IDENTITY: (0, "")}
    frontier = [IDENTITY]
    for r in range(1, radius + 1):
        nxt = []
        for g in frontier:
            word = ball[g][1]
            for name, s in LETTERS.items():
                h = mul(g, s)
                if h not in ball:
                    ball[h] = (r, f"{word} {name}".strip())
                    nxt.append(h)
        frontier = nxt
    return ball


def word_length(x: Mat, cap: int = 8) -> int:
    ball = word_ball(cap)
    if x not in ball:
        raise ValueError(f"{x} has word length above {cap}")
    return ball[x][0]
