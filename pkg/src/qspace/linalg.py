"""Dense complex matrix calculus used throughout the synthesis pipeline.

Matrices are plain numpy complex128 arrays.  Eigen-decomposition is delegated
to LAPACK via numpy.linalg.eigh, which is deterministic for a fixed input and
comfortably meets the reconstruction tolerances required here.  A single rank
convention applies everywhere: eigenvalues at or below RANK_RTOL times the
largest eigenvalue count as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OP_TOL = 1e-8          # default tolerance for operator identities
RANK_RTOL = 1e-9       # lambda <= RANK_RTOL * lambda_max counts as kernel


def _as_matrix(M) -> np.ndarray:
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={A.ndim}")
    return A


def dagger(A) -> np.ndarray:
    return np.asarray(A).conj().T


@dataclass(frozen=True)
class HermitianEig:
    """Eigenvalues ascending; vectors holds orthonormal columns."""

    eigenvalues: np.ndarray
    vectors: np.ndarray


def hermitian_eig(H, tol: float = OP_TOL) -> HermitianEig:
    """Spectral decomposition of a Hermitian matrix.

    Raises if H deviates from Hermitian by more than tol in max norm.
    Reconstruction V diag(w) V^dag matches H within 1e-10 * max|H|.
    """
    A = _as_matrix(H)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix not square")
    if A.size and np.max(np.abs(A - A.conj().T)) > tol:
        raise ValueError("matrix not Hermitian within tolerance")
    w, V = np.linalg.eigh((A + A.conj().T) / 2)
    return HermitianEig(w, V)


def sqrt_psd(E) -> np.ndarray:
    """PSD square root under the global rank convention.

    Kernel-level eigenvalues are zeroed before the root is taken: the square
    root's unbounded slope at zero would otherwise turn noise of size eps into
    sqrt(eps)-sized components.
    """
    eig = hermitian_eig(E)
    w = eig.eigenvalues
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and np.min(w) < -RANK_RTOL * scale:
        raise ValueError(f"matrix not PSD: min eigenvalue {np.min(w):.3e}")
    root = np.sqrt(np.where(w > RANK_RTOL * scale, w, 0.0))
    return (eig.vectors * root) @ eig.vectors.conj().T


def pinv_sqrt_psd(E) -> np.ndarray:
    """Pseudo-inverse square root: zero on the kernel, 1/sqrt(lambda) on it."""
    eig = hermitian_eig(E)
    w = eig.eigenvalues
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and np.min(w) < -RANK_RTOL * scale:
        raise ValueError(f"matrix not PSD: min eigenvalue {np.min(w):.3e}")
    inv = np.where(w > RANK_RTOL * scale, 1.0 / np.sqrt(np.clip(w, 1e-300, None)), 0.0)
    return (eig.vectors * inv) @ eig.vectors.conj().T


def psd_rank(E) -> int:
    """Rank of a PSD matrix under the global threshold."""
    w = hermitian_eig(E).eigenvalues
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    return int(np.sum(w > RANK_RTOL * scale))


def psd_range_projector(E) -> np.ndarray:
    """Orthogonal projector onto the range of a PSD matrix."""
    eig = hermitian_eig(E)
    w = eig.eigenvalues
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    cols = eig.vectors[:, w > RANK_RTOL * scale]
    return cols @ cols.conj().T


def kron(A, B) -> np.ndarray:
    return np.kron(_as_matrix(A), _as_matrix(B))


def partial_trace(M, dims, keep) -> np.ndarray:
    """Trace out all tensor factors not listed in keep.

    dims lists the factor dimensions of a square matrix M; keep is an index
    or set of indices of factors to retain, returned in their original order.
    """
    A = _as_matrix(M)
    dims = list(dims)
    total = int(np.prod(dims)) if dims else 1
    if A.shape != (total, total):
        raise ValueError(f"shape {A.shape} does not match dims {dims}")
    if isinstance(keep, (int, np.integer)):
        keep = {int(keep)}
    keep = sorted(set(int(i) for i in keep))
    if any(i < 0 or i >= len(dims) for i in keep):
        raise ValueError("keep index out of range")
    T = A.reshape(dims + dims)
    p = len(dims)
    for i in reversed(range(p)):
        if i in keep:
            continue
        T = np.trace(T, axis1=i, axis2=i + (T.ndim // 2))
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return T.reshape(d, d)


def extend_isometry(V) -> np.ndarray:
    """Extend an isometry (tall matrix, orthonormal columns) to a unitary.

    Completion columns come from orthonormalizing standard basis vectors
    against the existing columns, re-orthogonalized twice for stability.
    The first columns of the result equal V exactly.
    """
    A = _as_matrix(V)
    d, c = A.shape
    if c > d:
        raise ValueError("more columns than rows")
    if c and np.max(np.abs(A.conj().T @ A - np.eye(c))) > OP_TOL:
        raise ValueError("columns are not orthonormal within tolerance")
    cols = [A[:, j] for j in range(c)]
    for i in range(d):
        if len(cols) == d:
            break
        w = np.zeros(d, dtype=complex)
        w[i] = 1.0
        for _ in range(2):
            for q in cols:
                w = w - q * (q.conj() @ w)
        nrm = np.linalg.norm(w)
        if nrm > 1e-6:
            cols.append(w / nrm)
    if len(cols) != d:
        raise ValueError("failed to complete isometry to a unitary")
    U = np.column_stack(cols)
    U[:, :c] = A
    return U


def polar_partial_isometry(L) -> np.ndarray:
    """Partial isometry V with L = V sqrt(L^dag L), V^dag V = range projector.

    Built from the eigen-decomposition of the smaller Gram matrix side.
    """
    A = _as_matrix(L)
    d2, d1 = A.shape
    if d2 <= d1:
        eig = hermitian_eig(A @ A.conj().T)
        w, U = eig.eigenvalues, eig.vectors
        scale = float(np.max(np.abs(w))) if w.size else 0.0
        idx = np.where(w > RANK_RTOL * scale)[0]
        us = U[:, idx]
        vs = (A.conj().T @ us) / np.sqrt(w[idx])
    else:
        eig = hermitian_eig(A.conj().T @ A)
        w, V = eig.eigenvalues, eig.vectors
        scale = float(np.max(np.abs(w))) if w.size else 0.0
        idx = np.where(w > RANK_RTOL * scale)[0]
        vs = V[:, idx]
        us = (A @ vs) / np.sqrt(w[idx])
    return us @ vs.conj().T


def connecting_unitary(A, B, tol: float = OP_TOL) -> np.ndarray:
    """Unitary U with B = U A, for operators sharing a Gram matrix.

    Requires A^dag A = B^dag B (same domain, equal square output dimension).
    On the range of A the action is forced; the kernel complement is paired
    off deterministically via standard-basis completion.
    """
    A = _as_matrix(A)
    B = _as_matrix(B)
    if A.shape != B.shape:
        raise ValueError("operands must share shape")
    d2, d1 = A.shape
    if d2 <= d1:
        eig = hermitian_eig(A @ A.conj().T)
        w, U = eig.eigenvalues, eig.vectors
        scale = float(np.max(np.abs(w))) if w.size else 0.0
        idx = np.where(w > RANK_RTOL * scale)[0]
        vs = (A.conj().T @ U[:, idx]) / np.sqrt(w[idx])
    else:
        eig = hermitian_eig(A.conj().T @ A)
        w, V = eig.eigenvalues, eig.vectors
        scale = float(np.max(np.abs(w))) if w.size else 0.0
        idx = np.where(w > RANK_RTOL * scale)[0]
        vs = V[:, idx]
    lam = np.sqrt(np.sum(np.abs(A @ vs) ** 2, axis=0))
    a_cols = (A @ vs) / lam
    b_cols = (B @ vs) / lam
    Ua = extend_isometry(a_cols)
    Ub = extend_isometry(b_cols)
    U = Ub @ Ua.conj().T
    if np.max(np.abs(U @ A - B)) > max(tol, 1e-7):
        raise ValueError("no connecting unitary: Gram matrices differ")
    return U


def haar_unitary(dim: int, seed: int) -> np.ndarray:
    """Deterministic Haar-distributed unitary from a seeded Gaussian + QR."""
    if dim < 1:
        raise ValueError("dim must be positive")
    rng = np.random.default_rng(seed)
    Z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases
