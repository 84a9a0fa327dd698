"""Quantum instruments and POVMs over qubit Hilbert spaces.

Outcome labels are binary strings (possibly empty).  A POVM maps labels to
PSD operators summing to the identity; an instrument maps labels to lists of
Kraus operators whose Gram total is the identity.  Instruments constructed by
padding carry the padded labels in a marker set so equality tests can prune
them; equality of instruments is per-outcome CP-map equality via Choi
matrices, which quotients out per-outcome Kraus phase freedom.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import OP_TOL

logger = logging.getLogger(__name__)


def _check_label(label: str) -> str:
    if not isinstance(label, str) or any(c not in "01" for c in label):
        raise ValueError(f"outcome label must be a binary string, got {label!r}")
    return label


class Povm:
    """Outcome-labeled PSD operators summing to the identity."""

    def __init__(self, elements: dict, check_psd: bool = False, tol: float = OP_TOL):
        if not elements:
            raise ValueError("POVM needs at least one element")
        self.elements = {
            _check_label(k): np.asarray(E, dtype=complex) for k, E in elements.items()
        }
        dims = {E.shape for E in self.elements.values()}
        if len(dims) != 1 or any(a != b for a, b in dims):
            raise ValueError("POVM elements must be square and of equal size")
        self.dim = next(iter(dims))[0]
        total = sum(self.elements.values())
        if np.max(np.abs(total - np.eye(self.dim))) > tol:
            raise ValueError("POVM elements do not sum to the identity")
        for k, E in self.elements.items():
            if np.max(np.abs(E - E.conj().T)) > tol:
                raise ValueError(f"element {k!r} is not Hermitian")
        self._projective_cache = {}
        if check_psd:
            self.validate_psd()

    def validate_psd(self, rtol: float = linalg.RANK_RTOL):
        for k, E in self.elements.items():
            w = linalg.hermitian_eig(E).eigenvalues
            scale = float(np.max(np.abs(w))) if w.size else 0.0
            if w.size and np.min(w) < -rtol * max(scale, 1.0):
                raise ValueError(f"element {k!r} is not PSD: {np.min(w):.3e}")

    @property
    def labels(self) -> list:
        return sorted(self.elements)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.elements[label]

    def is_projective(self, tol: float = OP_TOL) -> bool:
        cached = self._projective_cache.get(tol)
        if cached is None:
            cached = all(
                np.max(np.abs(E @ E - E)) <= tol for E in self.elements.values()
            )
            self._projective_cache[tol] = cached
        return cached


class Instrument:
    """Outcome-labeled lists of Kraus operators, jointly trace-preserving."""

    def __init__(self, branches: dict, dim_in: int = None, dim_out: int = None,
                 padded=(), tol: float = OP_TOL):
        if not branches:
            raise ValueError("instrument needs at least one branch")
        self.branches = {
            _check_label(k): [np.asarray(K, dtype=complex) for K in ops]
            for k, ops in branches.items()
        }
        shapes = {K.shape for ops in self.branches.values() for K in ops}
        if not shapes:
            if dim_in is None or dim_out is None:
                raise ValueError("dims required when all branches are empty")
            shapes = {(dim_out, dim_in)}
        if len(shapes) != 1:
            raise ValueError(f"Kraus operators disagree in shape: {shapes}")
        self.dim_out, self.dim_in = next(iter(shapes))
        if dim_in is not None and dim_in != self.dim_in:
            raise ValueError("dim_in does not match Kraus shapes")
        if dim_out is not None and dim_out != self.dim_out:
            raise ValueError("dim_out does not match Kraus shapes")
        self.padded = frozenset(padded)
        total = np.zeros((self.dim_in, self.dim_in), dtype=complex)
        for ops in self.branches.values():
            for K in ops:
                total += K.conj().T @ K
        if np.max(np.abs(total - np.eye(self.dim_in))) > tol:
            raise ValueError("instrument is not trace-preserving overall")

    @property
    def labels(self) -> list:
        return sorted(self.branches)

    def __getitem__(self, label: str) -> list:
        return self.branches[label]

    def branch_norm(self, label: str) -> float:
        return float(
            np.sqrt(sum(np.sum(np.abs(K) ** 2) for K in self.branches[label]))
        )

    def is_rank1(self) -> bool:
        return all(len(ops) == 1 for ops in self.branches.values())


@dataclass(frozen=True)
class GroupingMatrix:
    """0/1 column-stochastic grouping: each fine label has one coarse label."""

    coarse_of: dict
    coarse_labels: tuple = field(default=())

    def __post_init__(self):
        coarse = tuple(self.coarse_labels) or tuple(
            sorted(set(self.coarse_of.values()))
        )
        object.__setattr__(self, "coarse_labels", coarse)
        missing = set(self.coarse_of.values()) - set(coarse)
        if missing:
            raise ValueError(f"coarse labels missing from declared set: {missing}")

    def group(self, fine_label: str) -> str:
        return self.coarse_of[fine_label]

    def fines_of(self, coarse_label: str) -> list:
        return sorted(f for f, c in self.coarse_of.items() if c == coarse_label)

    def entry(self, coarse_label: str, fine_label: str) -> int:
        return int(self.coarse_of.get(fine_label) == coarse_label)

    @property
    def fine_labels(self) -> list:
        return sorted(self.coarse_of)


def permutation_matrix(dims, new_order) -> np.ndarray:
    """Matrix P sending a |x_0..x_{p-1}> basis vector (factor layout dims)
    to the re-ordered basis vector with factors arranged per new_order.

    new_order lists current factor indices in their new positions, so
    P @ vec realizes vec.reshape(dims).transpose(new_order).
    """
    dims = list(dims)
    D = int(np.prod(dims))
    P = np.zeros((D, D))
    idx = np.arange(D).reshape(dims).transpose(new_order).reshape(-1)
    P[np.arange(D), idx] = 1.0
    return P


def associated_povm(inst: Instrument) -> Povm:
    """POVM reproducing the instrument's outcome statistics (sum of K^dag K)."""
    elements = {}
    for k, ops in inst.branches.items():
        E = np.zeros((inst.dim_in, inst.dim_in), dtype=complex)
        for K in ops:
            E += K.conj().T @ K
        elements[k] = E
    return Povm(elements)


def luders(E: Povm) -> Instrument:
    """Instrument with the single Kraus sqrt(E_k) per outcome."""
    return Instrument({k: [linalg.sqrt_psd(M)] for k, M in E.elements.items()})


def rank1_min_output(E: Povm, out_dim: int = None,
                     qubit_shaped: bool = False) -> Instrument:
    """Single-Kraus instrument for E with the smallest possible output space.

    The output dimension is r* = max_k rank(E_k) (under the global rank
    threshold), optionally rounded up to a power of two, or overridden by
    out_dim >= r*.  Kraus operators are L_k = J_k sqrt(E_k) with J_k a
    partial isometry mapping the range of E_k onto leading basis vectors.
    """
    ranks = {}
    eigs = {}
    for k, M in E.elements.items():
        eig = linalg.hermitian_eig(M)
        w = eig.eigenvalues
        scale = float(np.max(np.abs(w))) if w.size else 0.0
        if w.size and np.min(w) < -linalg.RANK_RTOL * max(scale, 1.0):
            raise ValueError(f"POVM element {k!r} is not PSD")
        keep = np.where(w > linalg.RANK_RTOL * scale)[0][::-1]  # descending
        ranks[k] = len(keep)
        eigs[k] = (w[keep], eig.vectors[:, keep])
    r_star = max(ranks.values())
    d = r_star if out_dim is None else int(out_dim)
    if d < r_star:
        raise ValueError(f"out_dim {d} below the minimal dimension {r_star}")
    if qubit_shaped and d > 1:
        d = 1 << (d - 1).bit_length()
    branches = {}
    for k, (w, V) in eigs.items():
        L = np.zeros((d, E.dim), dtype=complex)
        L[: len(w), :] = (np.sqrt(w)[:, None]) * V.conj().T
        branches[k] = [L]
    return Instrument(branches)


def projective_grouping(coarse: Povm, fine: Povm, tol: float = OP_TOL):
    """Unique 0/1 grouping with coarse_k = sum of its fine elements, or None.

    Both POVMs must be projective; each fine projector must sit inside
    exactly one coarse projector for a grouping to exist.
    """
    for name, P in (("coarse", coarse), ("fine", fine)):
        if not P.is_projective(tol):
            raise ValueError(f"{name} POVM is not projective")
    if coarse.dim != fine.dim:
        raise ValueError("dimension mismatch")
    coarse_of = {}
    trace_tol = fine.dim * max(tol, 1e-9)
    for l, F in fine.elements.items():
        # containment C F = F forces tr(CF) = tr(F), so the cheap trace test
        # screens candidates before the confirming product
        trace_f = np.trace(F).real
        hits = [
            k for k, C in coarse.elements.items()
            if abs(np.einsum("ij,ji->", C, F).real - trace_f) <= trace_tol
            and np.max(np.abs(C @ F - F)) <= tol
        ]
        if len(hits) != 1:
            return None
        coarse_of[l] = hits[0]
    for k, C in coarse.elements.items():
        total = sum(
            (fine.elements[l] for l, c in coarse_of.items() if c == k),
            np.zeros((fine.dim, fine.dim), dtype=complex),
        )
        if np.max(np.abs(total - C)) > tol:
            return None
    return GroupingMatrix(coarse_of, tuple(sorted(coarse.elements)))


def check_factorization(E: Povm, dims, factor_index: int, tol: float = OP_TOL):
    """Detect E_k = F_k (x) I_B over the factor at factor_index.

    Returns the POVM {F_k} on the complementary factors (original order) when
    every element factorizes within tol in max norm, else None.
    """
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != E.dim:
        raise ValueError(f"dims {dims} do not multiply to {E.dim}")
    if not 0 <= factor_index < len(dims):
        raise ValueError("factor_index out of range")
    d_B = dims[factor_index]
    keep = [i for i in range(len(dims)) if i != factor_index]
    d_A = E.dim // d_B
    n_ax = len(dims)
    order = keep + [factor_index]
    axes = order + [n_ax + i for i in order]
    factors = {}
    for k, M in E.elements.items():
        # reshuffle axes so the candidate trivial factor sits last, then
        # compare against F (x) I without forming any products
        R = M.reshape(dims + dims).transpose(axes).reshape(d_A, d_B, d_A, d_B)
        F = np.einsum("aibi->ab", R) / d_B
        dev = R - np.einsum("ab,ij->aibj", F, np.eye(d_B))
        if np.max(np.abs(dev)) > tol:
            return None
        factors[k] = F
    return Povm(factors)


def _kernel_basis(projector: np.ndarray) -> list:
    eig = linalg.hermitian_eig(projector)
    return [
        eig.vectors[:, i]
        for i in range(projector.shape[0])
        if eig.eigenvalues[i] < 0.5
    ]


def compose_postprocessing(target: Instrument, first: Instrument,
                           nu: GroupingMatrix, tol: float = OP_TOL) -> dict:
    """Outcome-conditioned instruments Theta with sum_l Theta_{k|l} o Gamma_l
    equal to the target branch for every k.

    Restricted to projective single-Kraus targets with the grouping nu taking
    the target's associated POVM to the first stage's associated POVM.  The
    returned map has one instrument per first-stage outcome l; its branches
    cover every target outcome (zero Kraus when k is not grouped under l) and
    one extra padded outcome completing trace preservation on the unreachable
    subspace, flagged via Instrument.padded.
    """
    if not (target.is_rank1() and first.is_rank1()):
        raise ValueError("both instruments must have single-Kraus branches")
    if sorted(nu.coarse_labels) != sorted(first.branches) or sorted(
        nu.fine_labels
    ) != sorted(target.branches):
        raise ValueError("grouping labels do not match the instruments")
    # validate one outcome operator at a time; the full associated POVM of a
    # many-outcome target would not fit comfortably in memory
    for l, (L_l,) in first.branches.items():
        total = -(L_l.conj().T @ L_l)
        for k in nu.fines_of(l):
            K = target[k][0]
            Ek = K.conj().T @ K
            if np.max(np.abs(Ek @ Ek - Ek)) > tol:
                raise ValueError("target's associated POVM is not projective")
            total += Ek
        if np.max(np.abs(total)) > tol:
            raise ValueError(
                f"first-stage POVM at {l!r} is not the nu-grouping of the target"
            )
    W = {k: linalg.polar_partial_isometry(target[k][0]) for k in target.branches}
    out = {}
    pad_len = max(len(k) for k in target.branches) + 1
    pad_label = "1" * pad_len
    for l, (L_l,) in sorted(first.branches.items()):
        V_l = linalg.polar_partial_isometry(L_l)
        branches = {}
        padded = set()
        live = np.zeros((first.dim_out, first.dim_out), dtype=complex)
        for k in target.branches:
            if nu.group(k) == l:
                K = (W[k] @ target[k][0].conj().T) @ (target[k][0] @ V_l.conj().T)
                branches[k] = [K]
                live += K.conj().T @ K
            else:
                branches[k] = [
                    np.zeros((target.dim_out, first.dim_out), dtype=complex)
                ]
                padded.add(k)
        kernel = _kernel_basis(live)
        if kernel:
            e0 = np.zeros((target.dim_out, 1), dtype=complex)
            e0[0, 0] = 1.0
            branches[pad_label] = [e0 @ v.conj()[None, :] for v in kernel]
            padded.add(pad_label)
        out[l] = Instrument(branches, padded=padded, tol=max(tol, 1e-7))
    return out


def ons_decompose(gamma: Instrument, dims, factor_index: int,
                  tol: float = OP_TOL):
    """Split a rank-1 instrument whose POVM ignores factor B as
    Gamma_k = U_k (G_k (x) id_B) U_k^dag-style Kraus factorization.

    Returns (G, unitaries): G acts on the complementary factors with output
    dimension dim_out/d_B, and for every outcome k the Kraus operator of
    gamma equals unitaries[k] @ (G_k (x) I_B) @ Pi, with Pi the permutation
    moving factor B to the last position.
    """
    if not gamma.is_rank1():
        raise ValueError("instrument branches must be single-Kraus")
    dims = [int(d) for d in dims]
    d_B = dims[factor_index]
    if gamma.dim_out % d_B:
        raise ValueError("output dimension not divisible by the B factor")
    E = associated_povm(gamma)
    F = check_factorization(E, dims, factor_index, tol)
    if F is None:
        raise ValueError("associated POVM does not factorize over that factor")
    G = rank1_min_output(F, out_dim=gamma.dim_out // d_B)
    keep = [i for i in range(len(dims)) if i != factor_index]
    Pi = permutation_matrix(dims, keep + [factor_index])
    unitaries = {}
    for k in gamma.branches:
        A_hat = np.kron(G[k][0], np.eye(d_B)) @ Pi
        unitaries[k] = linalg.connecting_unitary(A_hat, gamma[k][0], tol)
    return G, unitaries


def choi_matrix(kraus_ops) -> np.ndarray:
    """Choi matrix sum_i vec(K_i) vec(K_i)^dag (row-major vec)."""
    vecs = [np.asarray(K, dtype=complex).reshape(-1) for K in kraus_ops]
    d = vecs[0].shape[0]
    C = np.zeros((d, d), dtype=complex)
    for v in vecs:
        C += np.outer(v, v.conj())
    return C


def instrument_deviation(a: Instrument, b: Instrument, tol: float = OP_TOL):
    """Per-outcome max-norm Choi deviations after pruning; None on mismatch."""
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        logger.info(
            "instrument dims differ: (%d,%d) vs (%d,%d)",
            a.dim_in, a.dim_out, b.dim_in, b.dim_out,
        )
        return None
    live_a = {k for k in a.branches if a.branch_norm(k) > tol}
    live_b = {k for k in b.branches if b.branch_norm(k) > tol}
    if live_a != live_b:
        logger.info(
            "outcome sets differ after pruning: %s vs %s",
            sorted(live_a - live_b), sorted(live_b - live_a),
        )
        return None
    devs = {}
    for k in sorted(live_a):
        C_a = choi_matrix(a[k])
        C_b = choi_matrix(b[k])
        devs[k] = float(np.max(np.abs(C_a - C_b)))
    return devs


def instruments_equal(a: Instrument, b: Instrument, tol: float = OP_TOL) -> bool:
    """Per-outcome CP-map equality via Choi comparison at tolerance tol."""
    devs = instrument_deviation(a, b, tol)
    if devs is None:
        return False
    worst = max(devs.values(), default=0.0)
    if worst > tol:
        bad = max(devs, key=devs.get)
        logger.info("instruments differ at outcome %r by %.3e", bad, worst)
        return False
    return True
