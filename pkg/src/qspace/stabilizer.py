"""Stabilizer codes: parsing, syndrome projectors, and the distillation map.

A code is given by n-k commuting, independent Pauli generators on n qubits.
The module builds the projective syndrome measurement, a unitary that rotates
every syndrome sector onto a computational sector of a fresh register, and
the measure-then-output instrument whose Kraus operators pick those sectors
apart.  Qubit 1 is the leftmost character of a generator string and the most
significant bit of a basis-state index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import CertificateError, InputError
from .f2 import F2Matrix, F2Vector
from .instruments import Instrument

_PAULI_LETTERS = frozenset("IXYZ")


@dataclass(frozen=True)
class PauliString:
    """A Hermitian Pauli operator sign * i^(x.z) * X^x Z^z on n qubits."""

    n: int
    x_bits: F2Vector
    z_bits: F2Vector
    sign: int = 1

    def __post_init__(self):
        if len(self.x_bits) != self.n or len(self.z_bits) != self.n:
            raise InputError("Pauli bit vectors must have length n")
        if self.sign not in (1, -1):
            raise InputError(f"Pauli sign must be +1 or -1, got {self.sign}")

    @classmethod
    def from_string(cls, text: str, sign: int = 1) -> "PauliString":
        bad = set(text) - _PAULI_LETTERS
        if bad:
            raise InputError(f"invalid Pauli letters {sorted(bad)} in {text!r}")
        x = [1 if ch in "XY" else 0 for ch in text]
        z = [1 if ch in "ZY" else 0 for ch in text]
        return cls(len(text), F2Vector.from_bits(x), F2Vector.from_bits(z), sign)

    def commutes_with(self, other: "PauliString") -> bool:
        if self.n != other.n:
            raise InputError("Pauli length mismatch")
        return (self.x_bits.dot(other.z_bits) + self.z_bits.dot(other.x_bits)) % 2 == 0

    def dense(self) -> np.ndarray:
        """Dense matrix: a signed permutation, X^x Z^z |j> = (-1)^(z.j)|j^x>."""
        M = np.zeros((1 << self.n, 1 << self.n), dtype=complex)
        self.scatter_add(M)
        return M

    def scatter_add(self, acc: np.ndarray, weight: complex = 1.0):
        """Add weight * dense() into acc, touching only the nonzero band."""
        dim = 1 << self.n
        xm = self.x_bits.to_index()
        zm = self.z_bits.to_index()
        j = np.arange(dim)
        par = j & zm
        for shift in (16, 8, 4, 2, 1):
            par ^= par >> shift
        overlap = (xm & zm).bit_count()
        phases = self.sign * (1j ** (overlap % 4)) * (-1.0) ** (par & 1)
        acc[j ^ xm, j] += weight * phases

    def __str__(self) -> str:
        letters = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
        body = "".join(
            letters[(self.x_bits.bit(q), self.z_bits.bit(q))] for q in range(self.n)
        )
        return ("-" if self.sign < 0 else "") + body


@dataclass(frozen=True)
class StabilizerCode:
    name: str
    n: int
    k: int
    generators: tuple = field(default_factory=tuple)

    @property
    def n_minus_k(self) -> int:
        return self.n - self.k

    def check_matrix(self) -> "CheckMatrix":
        rows = [
            F2Vector.from_bits(
                [g.x_bits.bit(q) for q in range(self.n)]
                + [g.z_bits.bit(q) for q in range(self.n)]
            )
            for g in self.generators
        ]
        return CheckMatrix(F2Matrix(rows), self.n)


@dataclass(frozen=True)
class CheckMatrix:
    """(n-k) x 2n binary matrix; row i lists generator i's X then Z bits."""

    xz: F2Matrix
    n: int

    def x_column(self, qubit: int) -> F2Vector:
        """X-incidence of 1-based physical qubit across all generators."""
        self._check_qubit(qubit)
        return F2Vector.from_bits([row.bit(qubit - 1) for row in self.xz.rows])

    def z_column(self, qubit: int) -> F2Vector:
        self._check_qubit(qubit)
        return F2Vector.from_bits(
            [row.bit(self.n + qubit - 1) for row in self.xz.rows]
        )

    def _check_qubit(self, qubit: int):
        if not 1 <= qubit <= self.n:
            raise InputError(f"qubit index {qubit} out of range 1..{self.n}")


def parse_code(text: str) -> StabilizerCode:
    """Parse and fully validate a code from its JSON description."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"code JSON is malformed: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError("code JSON must be an object")
    try:
        n = int(raw["n"])
        k = int(raw["k"])
        gen_strings = list(raw["generators"])
    except KeyError as exc:
        raise InputError(f"code JSON missing field {exc.args[0]!r}") from exc
    if not 0 <= k <= n:
        raise InputError(f"need 0 <= k <= n, got n={n} k={k}")
    signs = raw.get("signs", [1] * len(gen_strings))
    if len(signs) != len(gen_strings) or any(s not in (1, -1) for s in signs):
        raise InputError("signs must be a list of +1/-1, one per generator")
    name = str(raw.get("name", f"[[{n},{k}]]"))

    generators = []
    for i, (text_i, sign_i) in enumerate(zip(gen_strings, signs), start=1):
        if not isinstance(text_i, str) or len(text_i) != n:
            raise InputError(f"generator {i} must be a string of length n={n}")
        try:
            generators.append(PauliString.from_string(text_i, sign_i))
        except InputError as exc:
            raise InputError(f"generator {i}: {exc}") from exc

    for i in range(len(generators)):
        for j in range(i + 1, len(generators)):
            if not generators[i].commutes_with(generators[j]):
                raise InputError(f"generators {i + 1} and {j + 1} anticommute")

    if len(generators) != n - k:
        raise InputError(
            f"expected {n - k} generators for n={n}, k={k}, got {len(generators)}"
        )
    code = StabilizerCode(name, n, k, tuple(generators))
    _check_independent(code)
    _check_fixed_space(code)
    return code


def _check_independent(code: StabilizerCode):
    span = {0}
    for i, g in enumerate(code.generators, start=1):
        word = (g.x_bits.to_index() << code.n) | g.z_bits.to_index()
        if word in span:
            raise InputError(f"generator {i} is a product of earlier generators")
        span |= {word ^ w for w in span}


def _check_fixed_space(code: StabilizerCode):
    P0 = syndrome_projector(code, F2Vector.zero(code.n_minus_k))
    trace = np.trace(P0)
    if abs(trace - 2**code.k) > 1e-6:
        raise InputError(
            f"joint fixed space of {code.name} has trace {trace:.6g}, "
            f"expected 2^k = {2**code.k}"
        )
    low = linalg.hermitian_eig(P0).eigenvalues[0]
    if low < -1e-6:
        raise InputError(
            f"joint fixed-space operator of {code.name} is not PSD "
            f"(min eigenvalue {low:.3g})"
        )


def syndrome_projector(code: StabilizerCode, s: F2Vector) -> np.ndarray:
    """Projector onto the joint (-1)^(s_i) eigenspace of the generators.

    The group average 2^(k-n) sum_r (-1)^(s.r) g^r, accumulated term by term;
    every g^r is a signed permutation, so each term touches only 2^n entries.
    """
    nk = code.n_minus_k
    if len(s) != nk:
        raise InputError(f"syndrome length {len(s)} != n-k = {nk}")
    dim = 1 << code.n
    P = np.zeros((dim, dim), dtype=complex)
    scale = 0.5**nk
    for index in range(1 << nk):
        r = F2Vector.from_index(index, nk)
        pauli_power(code, r).scatter_add(P, scale * (-1.0) ** s.dot(r))
    return P


def pauli_power(code: StabilizerCode, r: F2Vector) -> PauliString:
    """The group element prod_i g_i^(r_i), reduced to one signed Pauli.

    Products of commuting Hermitian Paulis stay Hermitian, so the phase is
    always a plain sign.
    """
    if len(r) != code.n_minus_k:
        raise InputError(f"exponent length {len(r)} != n-k = {code.n_minus_k}")
    x = z = 0
    e = 0
    for i in range(code.n_minus_k):
        if not r.bit(i):
            continue
        g = code.generators[i]
        gx = g.x_bits.to_index()
        gz = g.z_bits.to_index()
        e += (gx & gz).bit_count() + 2 * (z & gx).bit_count()
        e += 0 if g.sign > 0 else 2
        x ^= gx
        z ^= gz
    e = (e - (x & z).bit_count()) % 4
    if e not in (0, 2):
        raise CertificateError("generator product is not Hermitian")
    n = code.n
    return PauliString(
        n,
        F2Vector.from_bits((x >> (n - 1 - q)) & 1 for q in range(n)),
        F2Vector.from_bits((z >> (n - 1 - q)) & 1 for q in range(n)),
        1 if e == 0 else -1,
    )


def _pure_errors(code: StabilizerCode) -> list:
    """Per-generator Paulis D_i with g_j D_i = (-1)^(delta_ij) D_i g_j.

    Solves the GF(2) system (z_j | x_j) . (x_D | z_D) = e_i for each unit
    syndrome; XOR of solutions handles arbitrary syndromes.  Bit q of the
    packed unknown is x_D at qubit q, bit n+q is z_D at qubit q.
    """
    n, nk = code.n, code.n_minus_k
    rows = []
    for g in code.generators:
        word = 0
        for q in range(n):
            if g.z_bits.bit(q):
                word |= 1 << q
            if g.x_bits.bit(q):
                word |= 1 << (n + q)
        rows.append(word)
    combo = [1 << i for i in range(nk)]
    pivots = []
    r = 0
    for c in range(2 * n):
        pivot = next((i for i in range(r, nk) if (rows[i] >> c) & 1), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        combo[r], combo[pivot] = combo[pivot], combo[r]
        for i in range(nk):
            if i != r and (rows[i] >> c) & 1:
                rows[i] ^= rows[r]
                combo[i] ^= combo[r]
        pivots.append(c)
        r += 1
    if r != nk:
        raise CertificateError("pure-error system is rank deficient")
    units = []
    for i in range(nk):
        w = 0
        for row_idx, c in enumerate(pivots):
            if (combo[row_idx] >> i) & 1:
                w |= 1 << c
        units.append(w)
    return units


def _pauli_from_packed(code: StabilizerCode, word: int) -> PauliString:
    n = code.n
    x = [(word >> q) & 1 for q in range(n)]
    z = [(word >> (n + q)) & 1 for q in range(n)]
    return PauliString(n, F2Vector.from_bits(x), F2Vector.from_bits(z))


def encoding_unitary(code: StabilizerCode) -> np.ndarray:
    """Unitary U with U g_i U* = Z_i (x) I, Z_i on the i-th register qubit.

    Columns of U* are an orthonormal basis of each syndrome sector, obtained
    by translating a fixed basis of the trivial sector with pure errors; the
    choice of logical basis inside each sector is a free convention of this
    toolkit, pinned by the eigendecomposition of the trivial-sector projector.
    """
    n, k, nk = code.n, code.k, code.n_minus_k
    dim = 1 << n
    if nk == 0:
        return np.eye(dim, dtype=complex)
    P0 = syndrome_projector(code, F2Vector.zero(nk))
    eig = linalg.hermitian_eig(P0)
    v0 = eig.vectors[:, dim - (1 << k):]
    units = _pure_errors(code)
    Udag = np.zeros((dim, dim), dtype=complex)
    block = 1 << k
    for s_index in range(1 << nk):
        s = F2Vector.from_index(s_index, nk)
        word = 0
        for i in range(nk):
            if s.bit(i):
                word ^= units[i]
        D = _pauli_from_packed(code, word).dense()
        Udag[:, s_index * block : (s_index + 1) * block] = D @ v0
    U = Udag.conj().T

    if np.max(np.abs(U @ Udag - np.eye(dim))) > 1e-8:
        raise CertificateError("syndrome-sector basis is not orthonormal")
    for i, g in enumerate(code.generators):
        Zi = np.kron(
            np.kron(np.eye(1 << i), np.diag([1.0, -1.0]).astype(complex)),
            np.eye(1 << (n - i - 1)),
        )
        resid = np.max(np.abs(U @ g.dense() @ Udag - Zi))
        if resid > 1e-8:
            raise CertificateError(
                f"encoding relation for generator {i + 1} off by {resid:.3g}"
            )
    return U


def distillation_instrument(code: StabilizerCode) -> Instrument:
    """Syndrome measurement followed by decoding: Kraus (<s| (x) I) U per s.

    One rank-1 branch per syndrome, mapping 2^n -> 2^k; the branch POVM
    elements are exactly the syndrome projectors.
    """
    U = encoding_unitary(code)
    nk = code.n_minus_k
    block = 1 << code.k
    branches = {}
    for s_index in range(1 << nk):
        label = str(F2Vector.from_index(s_index, nk))
        branches[label] = [U[s_index * block : (s_index + 1) * block, :]]
    return Instrument(branches)


_BUILTIN_SPECS = {
    "five_one_three": {
        "name": "five_one_three",
        "n": 5,
        "k": 1,
        "generators": ["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"],
    },
    "steane": {
        "name": "steane",
        "n": 7,
        "k": 1,
        "generators": [
            "IIIXXXX", "IXXIIXX", "XIXIXIX",
            "IIIZZZZ", "IZZIIZZ", "ZIZIZIZ",
        ],
    },
    "shor": {
        "name": "shor",
        "n": 9,
        "k": 1,
        "generators": [
            "ZZIIIIIII", "IZZIIIIII", "IIIZZIIII", "IIIIZZIII",
            "IIIIIIZZI", "IIIIIIIZZ", "XXXXXXIII", "IIIXXXXXX",
        ],
    },
}


def builtin_names() -> list:
    return sorted(_BUILTIN_SPECS)


def builtin_code(name: str) -> StabilizerCode:
    if name not in _BUILTIN_SPECS:
        raise InputError(
            f"unknown builtin code {name!r}; available: {', '.join(builtin_names())}"
        )
    return parse_code(json.dumps(_BUILTIN_SPECS[name]))
