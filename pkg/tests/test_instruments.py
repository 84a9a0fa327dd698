import numpy as np
import pytest

from qspace import instruments as qi
from qspace import linalg

from conftest import bits, computational_instrument, random_povm


def projector_pair(dim=4, seed=0):
    u = linalg.haar_unitary(dim, seed)
    P = u[:, : dim // 2] @ u[:, : dim // 2].conj().T
    return P, np.eye(dim) - P


# ------------------------------------------------------------ associated_povm

def test_associated_povm_of_luders_projectors():
    P, Q = projector_pair()
    E = qi.Povm({"0": P, "1": Q})
    back = qi.associated_povm(qi.luders(E))
    assert np.max(np.abs(back["0"] - P)) <= 1e-8
    assert np.max(np.abs(back["1"] - Q)) <= 1e-8


def test_associated_povm_computational():
    E = qi.associated_povm(computational_instrument())
    assert np.allclose(E["0"], np.diag([1, 0]))
    assert np.allclose(E["1"], np.diag([0, 1]))


def test_associated_povm_random_rank1_sums_to_identity():
    E = random_povm(4, 5, seed=2)
    inst = qi.rank1_min_output(E)
    back = qi.associated_povm(inst)
    total = sum(back.elements.values())
    assert np.max(np.abs(total - np.eye(4))) <= 1e-8


# ---------------------------------------------------------------------- luders

def test_luders_trivial_povm_is_identity_channel():
    E = qi.Povm({"": np.eye(3, dtype=complex)})
    inst = qi.luders(E)
    assert np.allclose(inst[""][0], np.eye(3))


def test_luders_random_round_trip():
    for seed in range(4):
        E = random_povm(4, 3, seed=seed)
        back = qi.associated_povm(qi.luders(E))
        for k in E.labels:
            assert np.max(np.abs(back[k] - E[k])) <= 1e-8


# ------------------------------------------------------------ rank1_min_output

def test_rank1_projective_rank1_povm_gives_dim1():
    E = qi.Povm({"0": np.diag([1.0, 0.0]), "1": np.diag([0.0, 1.0])})
    inst = qi.rank1_min_output(E)
    assert inst.dim_out == 1
    for k in E.labels:
        L = inst[k][0]
        assert np.max(np.abs(L.conj().T @ L - E[k])) <= 1e-8


def test_rank1_maximally_mixed_povm():
    E = qi.Povm({"0": np.eye(2) / 2, "1": np.eye(2) / 2})
    assert qi.rank1_min_output(E).dim_out == 2


def test_rank1_qubit_shaped_rounds_up():
    E = random_povm(4, 2, seed=3)  # generically full rank 4 -> stays 4
    assert qi.rank1_min_output(E, qubit_shaped=True).dim_out == 4
    E3 = qi.Povm({
        "0": np.diag([1.0, 1.0, 1.0, 0.0]),
        "1": np.diag([0.0, 0.0, 0.0, 1.0]),
    })
    assert qi.rank1_min_output(E3).dim_out == 3
    assert qi.rank1_min_output(E3, qubit_shaped=True).dim_out == 4
    assert qi.rank1_min_output(E3, out_dim=5).dim_out == 5
    with pytest.raises(ValueError):
        qi.rank1_min_output(E3, out_dim=2)


def test_rank1_reproduces_associated_povm():
    for seed in range(5):
        E = random_povm(4, 4, seed=10 + seed)
        inst = qi.rank1_min_output(E)
        assert inst.is_rank1()
        back = qi.associated_povm(inst)
        for k in E.labels:
            assert np.max(np.abs(back[k] - E[k])) <= 1e-8


# --------------------------------------------------------- projective_grouping

def test_grouping_all_into_identity():
    P, Q = projector_pair(4, 1)
    fine = qi.Povm({"0": P, "1": Q})
    coarse = qi.Povm({"": np.eye(4, dtype=complex)})
    nu = qi.projective_grouping(coarse, fine)
    assert nu is not None
    assert nu.fines_of("") == ["0", "1"]


def test_grouping_identity_when_equal():
    P, Q = projector_pair(4, 5)
    E = qi.Povm({"0": P, "1": Q})
    nu = qi.projective_grouping(E, E)
    assert nu.group("0") == "0" and nu.group("1") == "1"


def test_grouping_recovers_construction():
    u = linalg.haar_unitary(8, 3)
    fine = {}
    for i in range(4):
        cols = u[:, 2 * i : 2 * i + 2]
        fine[bits(i, 2)] = cols @ cols.conj().T
    fine_povm = qi.Povm(fine)
    coarse_povm = qi.Povm({
        "0": fine["00"] + fine["01"],
        "1": fine["10"] + fine["11"],
    })
    nu = qi.projective_grouping(coarse_povm, fine_povm)
    assert nu.fines_of("0") == ["00", "01"]
    assert nu.fines_of("1") == ["10", "11"]


def test_grouping_none_when_incompatible():
    u = linalg.haar_unitary(4, 8)
    v = linalg.haar_unitary(4, 9)
    a = qi.Povm({
        "0": u[:, :2] @ u[:, :2].conj().T,
        "1": u[:, 2:] @ u[:, 2:].conj().T,
    })
    b = qi.Povm({
        "0": v[:, :2] @ v[:, :2].conj().T,
        "1": v[:, 2:] @ v[:, 2:].conj().T,
    })
    assert qi.projective_grouping(a, b) is None


def test_grouping_rejects_non_projective():
    E = random_povm(4, 2, seed=1)
    with pytest.raises(ValueError):
        qi.projective_grouping(E, E)


# --------------------------------------------------------- check_factorization

def test_factorization_recovers_tensor_form():
    F = random_povm(4, 3, seed=6)
    elements = {k: np.kron(F[k], np.eye(2)) for k in F.labels}
    E = qi.Povm(elements)
    got = qi.check_factorization(E, [2, 2, 2], factor_index=2)
    assert got is not None
    for k in F.labels:
        assert np.max(np.abs(got[k] - F[k])) <= 1e-10


def embed_trivial_middle(F, d0, d_mid, d2):
    """Insert an identity factor between the two halves F acts on."""
    T = F.reshape(d0, d2, d0, d2)
    full = np.einsum("acbd,ef->aecbfd", T, np.eye(d_mid))
    n = d0 * d_mid * d2
    return full.reshape(n, n)


def test_factorization_respects_factor_position():
    F = random_povm(4, 2, seed=7)
    elements = {k: embed_trivial_middle(F[k], 2, 2, 2) for k in F.labels}
    E = qi.Povm(elements)
    got = qi.check_factorization(E, [2, 2, 2], factor_index=1)
    assert got is not None
    for k in F.labels:
        assert np.max(np.abs(got[k] - F[k])) <= 1e-10
    assert qi.check_factorization(E, [2, 2, 2], factor_index=0) is None
    assert qi.check_factorization(E, [2, 2, 2], factor_index=2) is None


def test_factorization_rejects_bell_projector():
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    P = np.outer(phi, phi.conj())
    E = qi.Povm({"0": P, "1": np.eye(4) - P})
    assert qi.check_factorization(E, [2, 2], factor_index=0) is None
    assert qi.check_factorization(E, [2, 2], factor_index=1) is None


def test_factorization_bad_dims():
    E = random_povm(4, 2, seed=4)
    with pytest.raises(ValueError):
        qi.check_factorization(E, [2, 3], factor_index=0)


# ----------------------------------------------------- compose_postprocessing

def compose(theta_map, first):
    """Branches of sum_l Theta_{.|l} o Gamma_l keyed by target outcome."""
    out = {}
    for l, theta in theta_map.items():
        (L_l,) = first[l]
        for k in theta.branches:
            if k in theta.padded and k not in out:
                continue
            for K in theta[k]:
                op = K @ L_l
                if np.linalg.norm(op) > 1e-10:
                    out.setdefault(k, []).append(op)
    return out


def test_compose_identity_grouping_is_identity_on_range():
    target = qi.luders(qi.Povm(dict(zip(["0", "1"], projector_pair(4, 11)))))
    nu = qi.GroupingMatrix({"0": "0", "1": "1"})
    theta_map = qi.compose_postprocessing(target, target, nu)
    for l, theta in theta_map.items():
        K = theta[l][0]
        P = qi.associated_povm(target)[l]
        # identity on the reached range: K acts as the projector there
        assert np.max(np.abs(K @ P - P)) <= 1e-7


def test_compose_coarse_grained_luders_reproduces_target():
    u = linalg.haar_unitary(4, 21)
    P = {bits(i, 2): np.outer(u[:, i], u[:, i].conj()) for i in range(4)}
    branches = {
        k: [linalg.haar_unitary(4, 50 + i) @ P[k]]
        for i, k in enumerate(sorted(P))
    }
    target = qi.Instrument(branches)
    coarse_of = {"00": "0", "01": "0", "10": "1", "11": "1"}
    nu = qi.GroupingMatrix(coarse_of, ("0", "1"))
    first = qi.Instrument({
        "0": [P["00"] + P["01"]],
        "1": [P["10"] + P["11"]],
    })
    theta_map = qi.compose_postprocessing(target, first, nu)
    composed = qi.Instrument(compose(theta_map, first))
    assert qi.instruments_equal(composed, target, 1e-8)
    # companion: grouping relation on associated POVMs (necessity direction)
    F = qi.associated_povm(first)
    E = qi.associated_povm(target)
    for l in first.branches:
        acc = sum(E[k] for k in nu.fines_of(l))
        assert np.max(np.abs(acc - F[l])) <= 1e-8


def test_compose_rejects_wrong_first_stage():
    target = qi.luders(qi.Povm(dict(zip(["0", "1"], projector_pair(4, 31)))))
    other = qi.luders(qi.Povm(dict(zip(["0", "1"], projector_pair(4, 32)))))
    nu = qi.GroupingMatrix({"0": "0", "1": "1"})
    with pytest.raises(ValueError):
        qi.compose_postprocessing(target, other, nu)


# ------------------------------------------------------------- ons_decompose

def test_ons_decompose_literal_tensor_form():
    F = random_povm(4, 3, seed=13)
    G = qi.rank1_min_output(F)
    gamma = qi.Instrument({k: [np.kron(G[k][0], np.eye(2))] for k in G.labels})
    G2, unitaries = qi.ons_decompose(gamma, [4, 2], factor_index=1)
    assert G2.dim_out == G.dim_out
    for k in G.labels:
        # recovery up to per-outcome phase: compare Choi matrices
        assert np.max(np.abs(qi.choi_matrix(G2[k]) - qi.choi_matrix(G[k]))) <= 1e-8
        U = unitaries[k]
        assert np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) <= 1e-8


def test_ons_decompose_single_outcome_unitary():
    U = np.kron(linalg.haar_unitary(2, 1), linalg.haar_unitary(2, 2))
    gamma = qi.Instrument({"": [U]})
    G, unitaries = qi.ons_decompose(gamma, [2, 2], factor_index=1)
    K = G[""][0]
    assert K.shape == (2, 2)
    assert np.max(np.abs(K.conj().T @ K - np.eye(2))) <= 1e-8


def test_ons_decompose_reconstruction_identity():
    rng_seeds = range(3)
    for seed in rng_seeds:
        F = random_povm(4, 4, seed=40 + seed)
        L = qi.rank1_min_output(F, out_dim=4)
        Pi = qi.permutation_matrix([2, 4], [1, 0])
        branches = {}
        for i, k in enumerate(L.labels):
            U = linalg.haar_unitary(8, 70 + 10 * seed + i)
            branches[k] = [U @ np.kron(L[k][0], np.eye(2)) @ Pi]
        gamma = qi.Instrument(branches)
        G, unitaries = qi.ons_decompose(gamma, [2, 4], factor_index=0)
        for k in gamma.labels:
            rebuilt = unitaries[k] @ np.kron(G[k][0], np.eye(2)) @ Pi
            assert np.max(np.abs(rebuilt - gamma[k][0])) <= 1e-8


def test_ons_decompose_requires_factorization():
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    P = np.outer(phi, phi.conj())
    gamma = qi.luders(qi.Povm({"0": P, "1": np.eye(4) - P}))
    with pytest.raises(ValueError):
        qi.ons_decompose(gamma, [2, 2], factor_index=1)


# ---------------------------------------------------------- instruments_equal

def test_equal_identical():
    inst = computational_instrument()
    assert qi.instruments_equal(inst, inst, 1e-8)


def test_equal_up_to_kraus_phase():
    inst = computational_instrument()
    rotated = qi.Instrument({
        "0": [np.exp(1j * 0.7) * inst["0"][0]],
        "1": [np.exp(-1j * 1.2) * inst["1"][0]],
    })
    assert qi.instruments_equal(inst, rotated, 1e-8)


def test_unequal_after_perturbation():
    E = random_povm(4, 3, seed=5)
    a = qi.luders(E)
    branches = {k: [M.copy() for M in a[k]] for k in a.labels}
    branches[a.labels[0]][0][0, 0] += 1e-3
    b = qi.Instrument(branches, tol=1e-2)
    assert not qi.instruments_equal(a, b, 1e-8)


def test_unequal_dim_mismatch():
    a = computational_instrument()
    E = qi.Povm({"": np.eye(4, dtype=complex)})
    b = qi.luders(E)
    assert not qi.instruments_equal(a, b, 1e-8)


def test_padded_branches_pruned_before_comparison():
    inst = computational_instrument()
    padded = qi.Instrument({
        "0": [inst["0"][0]],
        "1": [inst["1"][0]],
        "11": [np.zeros((2, 2), dtype=complex)],
    }, padded={"11"})
    assert qi.instruments_equal(inst, padded, 1e-8)
