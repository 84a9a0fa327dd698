"""Shared fixtures and generators for the test suite.

The random-object builders are deterministic in their seed argument so that
every suite run sees the same objects.
"""

from __future__ import annotations

import numpy as np

from qspace import linalg
from qspace.instruments import Instrument, Povm


def bits(i: int, width: int) -> str:
    return format(i, f"0{width}b") if width else ""


def random_povm(dim: int, n_outcomes: int, seed: int, width: int = None) -> Povm:
    """Random full-rank-sum POVM from normalized Wishart blocks."""
    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(n_outcomes):
        G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        blocks.append(G.conj().T @ G)
    S = sum(blocks)
    S_inv_half = linalg.pinv_sqrt_psd(S)
    w = width if width is not None else max(1, (n_outcomes - 1).bit_length())
    elements = {
        bits(i, w): S_inv_half @ B @ S_inv_half for i, B in enumerate(blocks)
    }
    return Povm(elements)


def random_projective_rank1_instrument(n_qubits: int, seed: int) -> Instrument:
    """Instrument with Kraus W_k P_k for a random projective rank-1 POVM."""
    dim = 1 << n_qubits
    u = linalg.haar_unitary(dim, seed)
    branches = {}
    for i in range(dim):
        P = np.outer(u[:, i], u[:, i].conj())
        W = linalg.haar_unitary(dim, seed + 101 + i)
        branches[bits(i, n_qubits)] = [W @ P]
    return Instrument(branches)


def computational_instrument() -> Instrument:
    P0 = np.diag([1.0, 0.0]).astype(complex)
    P1 = np.diag([0.0, 1.0]).astype(complex)
    return Instrument({"0": [P0], "1": [P1]})
