"""GF(2) linear algebra: spans, coset labels, and the Walsh transform.

Vectors are bit-packed into Python ints (coordinate i lives at bit i), which
comfortably covers the ambient dimensions this artifact needs (at most 2n
with n <= 12).  Subspace bases are kept in reduced row-echelon form with the
leftmost-pivot convention so that ranks, membership tests and coset labels
are deterministic across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class F2Vector:
    """Fixed-length vector over GF(2), packed into an int (bit i = coord i)."""

    length: int
    word: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("negative length")
        if self.word < 0 or self.word >> self.length:
            raise ValueError("word has bits outside the declared length")

    @staticmethod
    def from_bits(bits) -> "F2Vector":
        bits = list(bits)
        word = 0
        for i, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError(f"bit {i} is {b!r}, expected 0 or 1")
            word |= b << i
        return F2Vector(len(bits), word)

    @staticmethod
    def from_string(s: str) -> "F2Vector":
        return F2Vector.from_bits(int(c) for c in s)

    @staticmethod
    def zero(length: int) -> "F2Vector":
        return F2Vector(length, 0)

    def bit(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.word >> i) & 1

    def __len__(self) -> int:
        return self.length

    @property
    def bits(self) -> tuple:
        return tuple((self.word >> i) & 1 for i in range(self.length))

    def __add__(self, other: "F2Vector") -> "F2Vector":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return F2Vector(self.length, self.word ^ other.word)

    def dot(self, other: "F2Vector") -> int:
        if self.length != other.length:
            raise ValueError("length mismatch")
        return bin(self.word & other.word).count("1") & 1

    def is_zero(self) -> bool:
        return self.word == 0

    def to_index(self) -> int:
        """Big-endian integer index (coordinate 0 most significant)."""
        return int(f"{self.word:0{self.length}b}"[::-1], 2) if self.length else 0

    @staticmethod
    def from_index(index: int, length: int) -> "F2Vector":
        if not 0 <= index < (1 << length):
            raise ValueError("index out of range")
        return F2Vector.from_bits(
            (index >> (length - 1 - i)) & 1 for i in range(length)
        )

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class F2Matrix:
    """Rectangular matrix over GF(2), stored as a tuple of equal-length rows."""

    rows: tuple

    def __post_init__(self):
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        if rows and len({r.length for r in rows}) != 1:
            raise ValueError("rows have mixed lengths")

    @staticmethod
    def from_rows(rows) -> "F2Matrix":
        return F2Matrix(tuple(rows))

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return self.rows[0].length if self.rows else 0


def _rref(words: list, width: int) -> tuple:
    """Reduced row echelon form of bit-packed rows; returns (rows, pivots)."""
    rows = [w for w in words]
    pivots = []
    r = 0
    for col in range(width):
        mask = 1 << col
        pivot_row = next((i for i in range(r, len(rows)) if rows[i] & mask), None)
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i] & mask:
                rows[i] ^= rows[r]
        pivots.append(col)
        r += 1
        if r == len(rows):
            break
    return rows[:r], tuple(pivots)


@dataclass(frozen=True)
class F2Subspace:
    """Subspace given by an RREF basis; dim = number of basis rows."""

    basis: F2Matrix
    ambient_dim: int
    pivots: tuple = field(default=())

    @property
    def dim(self) -> int:
        return self.basis.n_rows

    def elements(self):
        """Iterate all 2^dim members (ambient coordinates), zero first."""
        base = [row.word for row in self.basis.rows]
        for mask in range(1 << len(base)):
            w = 0
            for i, b in enumerate(base):
                if (mask >> i) & 1:
                    w ^= b
            yield F2Vector(self.ambient_dim, w)


def rank(M: F2Matrix) -> int:
    """GF(2) row rank by Gaussian elimination."""
    if not M.rows:
        return 0
    _, pivots = _rref([r.word for r in M.rows], M.n_cols)
    return len(pivots)


def span(vectors) -> F2Subspace:
    """Echelonized span of the given vectors (all of one common length)."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("span of an empty list is ambiguous: no ambient dim")
    lengths = {v.length for v in vectors}
    if len(lengths) != 1:
        raise ValueError("mixed vector lengths")
    width = lengths.pop()
    rows, pivots = _rref([v.word for v in vectors], width)
    basis = F2Matrix.from_rows(F2Vector(width, w) for w in rows)
    return F2Subspace(basis, width, pivots)


def zero_subspace(ambient_dim: int) -> F2Subspace:
    return F2Subspace(F2Matrix(()), ambient_dim, ())


def contains(S: F2Subspace, v: F2Vector) -> bool:
    """Membership test by reduction against the echelon basis."""
    if v.length != S.ambient_dim:
        raise ValueError("length mismatch")
    w = v.word
    for row, p in zip(S.basis.rows, S.pivots):
        if (w >> p) & 1:
            w ^= row.word
    return w == 0


def coset_label(s: F2Vector, J: F2Subspace) -> F2Vector:
    """Canonical label of the coset s + J, read off non-pivot coordinates.

    Two vectors get equal labels iff they differ by an element of J.  The
    label has length ambient_dim - dim J.
    """
    if s.length != J.ambient_dim:
        raise ValueError("length mismatch")
    w = s.word
    for row, p in zip(J.basis.rows, J.pivots):
        if (w >> p) & 1:
            w ^= row.word
    free = [i for i in range(J.ambient_dim) if i not in J.pivots]
    return F2Vector.from_bits((w >> i) & 1 for i in free)


def walsh_transform(f) -> np.ndarray:
    """Unnormalized Walsh transform ft(j) = sum_i (-1)^{i.j} f(i).

    Self-inverse up to the factor 2^m.  Input length must be a power of two.
    """
    a = np.asarray(f, dtype=float).copy()
    n = a.shape[0]
    if n == 0 or n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    h = 1
    while h < n:
        blocks = a.reshape(-1, 2 * h)
        top = blocks[:, :h].copy()
        bot = blocks[:, h:].copy()
        blocks[:, :h] = top + bot
        blocks[:, h:] = top - bot
        h *= 2
    return a


def coset_constant(f, V: F2Subspace, tol: float = 1e-12) -> bool:
    """True iff f(x + v) = f(x) for all x and all v in V (exhaustive)."""
    a = np.asarray(f, dtype=float)
    if a.shape[0] != 1 << V.ambient_dim:
        raise ValueError("function length does not match 2^ambient_dim")
    indices = np.arange(a.shape[0])
    for row in V.basis.rows:
        shift = row.to_index()
        if np.max(np.abs(a - a[indices ^ shift])) > tol:
            return False
    return True


def orthogonal_complement(S: F2Subspace) -> F2Subspace:
    """All v with v.b = 0 for every basis vector b (GF(2) nullspace)."""
    m = S.ambient_dim
    if S.dim == 0:
        return span([F2Vector(m, 1 << i) for i in range(m)]) if m else zero_subspace(0)
    rows, pivots = _rref([r.word for r in S.basis.rows], m)
    free = [i for i in range(m) if i not in pivots]
    basis = []
    for j in free:
        w = 1 << j
        for row, p in zip(rows, pivots):
            if (row >> j) & 1:
                w |= 1 << p
        basis.append(F2Vector(m, w))
    if not basis:
        return zero_subspace(m)
    return span(basis)
