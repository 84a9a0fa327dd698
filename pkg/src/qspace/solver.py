"""Optimal delayed-loading search and the projective-measurement chain.

The number of live qubits for the syndrome-extraction instrument drops to
n - T exactly when T input qubits admit an ordering whose suffix check-matrix
columns stay inside shrinking GF(2) dimension bounds.  This module finds the
largest such T by exhaustive depth-first search and turns a feasible ordering
into the chain of coarse-grained syndrome measurements that later drives
circuit synthesis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import f2
from .errors import CertificateError, InputError
from .f2 import F2Subspace, F2Vector
from .instruments import GroupingMatrix, Povm, check_factorization, projective_grouping
from .stabilizer import StabilizerCode, pauli_power, syndrome_projector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ordering:
    """Qubits A_1..A_T chosen for delayed loading, 1-based, distinct."""

    qubits: tuple

    def __post_init__(self):
        if len(set(self.qubits)) != len(self.qubits):
            raise InputError(f"ordering {self.qubits} repeats a qubit")

    def __len__(self) -> int:
        return len(self.qubits)

    def __iter__(self):
        return iter(self.qubits)


@dataclass(frozen=True)
class ChainCertificate:
    """Witness that an ordering supports width n - T.

    subspaces[t-1] is J_t, measurements[t-1] the 2^t-outcome projective
    measurement P(t) whose outcomes are J_t-coset labels, groupings[t-1] the
    merge map from full syndromes onto those labels.
    """

    T: int
    ordering: Ordering
    subspaces: tuple
    measurements: tuple
    groupings: tuple


def _columns(code: StabilizerCode) -> dict:
    cm = code.check_matrix()
    return {q: (cm.x_column(q), cm.z_column(q)) for q in range(1, code.n + 1)}


def _feasible_suffix_dfs(code: StabilizerCode, T: int):
    """First ordering feasible for T delayed loads, or None.

    Depth-first over qubit choices for A_T, then A_{T-1}, ..., in ascending
    qubit index, growing the suffix span and pruning as soon as its dimension
    exceeds n-k-t.  The first hit is therefore the lexicographically least
    feasible tuple read as (A_T, ..., A_1).
    """
    nk = code.n_minus_k
    cols = _columns(code)

    def extend(chosen_rev: list, span_vecs: list) -> list | None:
        depth = len(chosen_rev)
        if depth == T:
            return list(reversed(chosen_rev))
        t = T - depth
        for q in range(1, code.n + 1):
            if q in chosen_rev:
                continue
            vecs = span_vecs + list(cols[q])
            if f2.span(vecs).dim > nk - t:
                continue
            found = extend(chosen_rev + [q], vecs)
            if found is not None:
                return found
        return None

    if T == 0:
        return []
    if T > min(code.n, nk):
        return None
    return extend([], [])


def feasible_ordering(code: StabilizerCode, T: int):
    """Exhaustive search for a T-load ordering; None certifies infeasibility."""
    found = _feasible_suffix_dfs(code, T)
    return None if found is None else Ordering(tuple(found))


def enumerate_orderings(code: StabilizerCode, T: int) -> list:
    """All feasible orderings at the given T, for diagnostics."""
    nk = code.n_minus_k
    cols = _columns(code)
    out = []

    def extend(chosen_rev: list, span_vecs: list):
        if len(chosen_rev) == T:
            out.append(Ordering(tuple(reversed(chosen_rev))))
            return
        t = T - len(chosen_rev)
        for q in range(1, code.n + 1):
            if q in chosen_rev:
                continue
            vecs = span_vecs + list(cols[q])
            if f2.span(vecs).dim <= nk - t:
                extend(chosen_rev + [q], vecs)

    if 0 < T <= min(code.n, nk):
        extend([], [])
    return out


def max_delay(code: StabilizerCode) -> tuple:
    """Largest feasible number of delayed loads, with a witnessing ordering.

    Feasibility is monotone (dropping A_1 from a T-load ordering leaves a
    feasible (T-1)-load one), so scanning T downward and stopping at the
    first hit is exact.
    """
    for T in range(min(code.n, code.n_minus_k), 0, -1):
        ordering = feasible_ordering(code, T)
        if ordering is not None:
            break
    else:
        T, ordering = 0, Ordering(())
    assert code.n_minus_k - T >= 0
    assert code.n - T >= code.k
    return T, ordering


def _scan_basis(code: StabilizerCode, ordering: Ordering) -> list:
    """Vectors u_1..u_{n-k}: suffix columns first, then standard completion.

    Scanning (x_{A_T}, z_{A_T}, ..., x_{A_1}, z_{A_1}) and skipping entries
    already in the running span guarantees span{u_1..u_d} contains every
    suffix span of at most d dimensions.
    """
    nk = code.n_minus_k
    cols = _columns(code)
    picked = []

    def try_add(v: F2Vector):
        if not picked:
            if not v.is_zero():
                picked.append(v)
        elif not f2.contains(f2.span(picked), v):
            picked.append(v)

    for q in reversed(list(ordering)):
        x, z = cols[q]
        try_add(x)
        try_add(z)
    for i in range(nk):
        if len(picked) == nk:
            break
        try_add(F2Vector.from_bits(1 if j == i else 0 for j in range(nk)))
    return picked


def _coset_measurement(code: StabilizerCode, J: F2Subspace) -> tuple:
    """Projective measurement with one outcome per coset of J.

    Element for coset c + J is the average of (-1)^(c.r) g^r over r in the
    orthogonal complement of J, assembled from signed Pauli permutations.
    Returns (Povm, GroupingMatrix from full syndromes onto coset labels).
    """
    nk = code.n_minus_k
    dim = 1 << code.n
    complement = f2.orthogonal_complement(J)
    paulis = [(r, pauli_power(code, r)) for r in complement.elements()]
    coarse_of = {}
    reps = {}
    for index in range(1 << nk):
        s = F2Vector.from_index(index, nk)
        label = str(f2.coset_label(s, J))
        coarse_of[str(s)] = label
        reps.setdefault(label, s)
    elements = {}
    scale = 1.0 / len(paulis)
    for label, rep in reps.items():
        acc = np.zeros((dim, dim), dtype=complex)
        for r, pauli in paulis:
            pauli.scatter_add(acc, scale * (-1.0) ** rep.dot(r))
        elements[label] = acc
    povm = Povm(elements)
    grouping = GroupingMatrix(coarse_of, tuple(sorted(reps)))
    return povm, grouping


def build_chain(code: StabilizerCode, ordering: Ordering) -> ChainCertificate:
    """Construct the certificate chain for a feasible ordering."""
    nk = code.n_minus_k
    T = len(ordering)
    if any(not 1 <= q <= code.n for q in ordering):
        raise InputError(f"ordering {tuple(ordering)} has qubits outside 1..{code.n}")
    cols = _columns(code)
    suffix = []
    for t in range(1, T + 1):
        vecs = []
        for tau in range(t, T + 1):
            vecs.extend(cols[ordering.qubits[tau - 1]])
        dim = f2.span(vecs).dim
        if dim > nk - t:
            raise CertificateError(
                f"suffix-span bound violated at step {t}: "
                f"dim {dim} > n-k-t = {nk - t}"
            )
        suffix.append(vecs)

    u = _scan_basis(code, ordering)
    subspaces = []
    measurements = []
    groupings = []
    for t in range(1, T + 1):
        J = f2.span(u[: nk - t]) if nk - t else f2.zero_subspace(nk)
        for v in suffix[t - 1]:
            if not f2.contains(J, v):
                raise CertificateError(
                    f"scan basis failed to absorb suffix span at step {t}"
                )
        povm, grouping = _coset_measurement(code, J)
        subspaces.append(J)
        measurements.append(povm)
        groupings.append(grouping)
    return ChainCertificate(
        T, ordering, tuple(subspaces), tuple(measurements), tuple(groupings)
    )


def verify_chain(code: StabilizerCode, cert: ChainCertificate, tol: float = 1e-8) -> bool:
    """Numerically re-check every certificate condition.

    Three groups of checks: each measurement is projective with outcome
    ranks 2^(n-t) and merges the true syndrome projectors per its grouping;
    consecutive measurements compose (coarser from finer); and measurement t
    ignores delayed qubit A_t entirely.
    """
    T = cert.T
    if T == 0:
        return True
    if len(cert.measurements) != T or len(cert.groupings) != T:
        log.info("chain rejected: lengths do not match T=%d", T)
        return False
    nk = code.n_minus_k
    dim = 1 << code.n
    dims = [2] * code.n

    # one pass over the true syndrome projectors, merged into every step
    merged = [
        {label: np.zeros((dim, dim), dtype=complex) for label in m.labels}
        for m in cert.measurements
    ]
    for index in range(1 << nk):
        s = F2Vector.from_index(index, nk)
        P = syndrome_projector(code, s)
        for t in range(1, T + 1):
            try:
                label = cert.groupings[t - 1].group(str(s))
            except KeyError:
                log.info("chain rejected: step %d grouping misses syndrome %s", t, s)
                return False
            if label not in merged[t - 1]:
                log.info("chain rejected: step %d grouping targets unknown %s", t, label)
                return False
            merged[t - 1][label] += P

    for t in range(1, T + 1):
        povm = cert.measurements[t - 1]
        if len(povm.labels) != 1 << t:
            log.info("chain rejected: step %d has %d outcomes", t, len(povm.labels))
            return False
        if not povm.is_projective(tol):
            log.info("chain rejected: step %d is not projective", t)
            return False
        for label in povm.labels:
            P = povm[label]
            if abs(np.trace(P).real - 2 ** (code.n - t)) > tol * 2**code.n:
                log.info("chain rejected: step %d outcome %s has wrong rank", t, label)
                return False
            if np.max(np.abs(merged[t - 1][label] - P)) > tol:
                log.info("chain rejected: step %d merge mismatch at %s", t, label)
                return False
        q = cert.ordering.qubits[t - 1]
        if check_factorization(povm, dims, q - 1, tol) is None:
            log.info("chain rejected: step %d signals from qubit %d", t, q)
            return False
        if t < T:
            if projective_grouping(povm, cert.measurements[t], tol) is None:
                log.info("chain rejected: step %d not composable from step %d", t, t + 1)
                return False
    return True
