"""Circuit synthesis for measurement instruments under a live-qubit budget.

Three constructions are provided.  A binary-tree circuit realizes any POVM on
w qubits with one extra work qubit that is measured and reused once per
round.  A half-cut circuit realizes a rank-1 instrument without delayed
loading by first splitting the input space along a two-group projective
partition of the outcome set, which frees the work qubit before the
refinement trees run.  The staircase construction consumes a delayed-loading
certificate and alternates half-cut blocks with single-qubit input loads,
keeping the live width at n - T throughout.

Circuits are value-conditioned: every step carries a table keyed by the
classical record accumulated so far (measured bits concatenated left to
right, load projections included).  A single terminal relabeling step maps
raw records onto the instrument's outcome labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import InputError, SynthesisError
from .instruments import (
    GroupingMatrix,
    Instrument,
    Povm,
    check_factorization,
    compose_postprocessing,
    ons_decompose,
    rank1_min_output,
)
from .linalg import OP_TOL
from .solver import ChainCertificate, build_chain, max_delay
from .stabilizer import StabilizerCode, distillation_instrument

# ------------------------------------------------------------------ step types


@dataclass(frozen=True)
class Unitary:
    """Value-conditioned unitary; matrices sized to the current live width."""

    table: dict


@dataclass(frozen=True)
class Measure:
    """Measure the listed slots (value-dependent), resetting them to |0>."""

    slots: dict


@dataclass(frozen=True)
class Reset:
    """Discard the listed slots' values; a slot index equal to the current
    width brings a fresh |0> qubit into service instead."""

    slots: dict


@dataclass(frozen=True)
class ClassicalMap:
    """Relabel classical records; non-injective tables merge branches."""

    table: dict


@dataclass(frozen=True)
class LoadInput:
    """Project out the slots S (value-dependent) and append the input qubits
    J, which become the last live slots."""

    slots: dict
    inputs: tuple


@dataclass(frozen=True)
class Circuit:
    m: int
    n_in: int
    n_out: int
    steps: tuple = field(default_factory=tuple)


# ----------------------------------------------------------- JSON serialization


def _matrix_to_json(M: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def circuit_to_json(circuit: Circuit) -> str:
    steps = []
    for step in circuit.steps:
        if isinstance(step, Unitary):
            steps.append({
                "kind": "unitary",
                "table": {k: _matrix_to_json(M) for k, M in step.table.items()},
            })
        elif isinstance(step, Measure):
            steps.append({
                "kind": "measure",
                "slots": {k: list(v) for k, v in step.slots.items()},
            })
        elif isinstance(step, Reset):
            steps.append({
                "kind": "reset",
                "slots": {k: list(v) for k, v in step.slots.items()},
            })
        elif isinstance(step, ClassicalMap):
            steps.append({"kind": "classical", "table": dict(step.table)})
        elif isinstance(step, LoadInput):
            steps.append({
                "kind": "load",
                "slots": {k: list(v) for k, v in step.slots.items()},
                "inputs": list(step.inputs),
            })
        else:
            raise InputError(f"unknown step type {type(step).__name__}")
    payload = {
        "m": circuit.m,
        "n_in": circuit.n_in,
        "n_out": circuit.n_out,
        "steps": steps,
    }
    return json.dumps(payload, sort_keys=True, indent=1)


def circuit_from_json(text: str) -> Circuit:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"circuit JSON is malformed: {exc}") from exc
    try:
        m = int(raw["m"])
        n_in = int(raw["n_in"])
        n_out = int(raw["n_out"])
        raw_steps = raw["steps"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"circuit JSON missing field: {exc}") from exc
    steps = []
    for i, entry in enumerate(raw_steps):
        kind = entry.get("kind")
        if kind == "unitary":
            steps.append(Unitary(
                {k: _matrix_from_json(v) for k, v in entry["table"].items()}
            ))
        elif kind == "measure":
            steps.append(Measure(
                {k: tuple(int(s) for s in v) for k, v in entry["slots"].items()}
            ))
        elif kind == "reset":
            steps.append(Reset(
                {k: tuple(int(s) for s in v) for k, v in entry["slots"].items()}
            ))
        elif kind == "classical":
            steps.append(ClassicalMap(dict(entry["table"])))
        elif kind == "load":
            steps.append(LoadInput(
                {k: tuple(int(s) for s in v) for k, v in entry["slots"].items()},
                tuple(int(q) for q in entry["inputs"]),
            ))
        else:
            raise InputError(f"step {i} has unknown kind {kind!r}")
    return Circuit(m, n_in, n_out, tuple(steps))


# -------------------------------------------------------------------- helpers


def _bits(i: int, width: int) -> str:
    return format(i, f"0{width}b") if width else ""


def _e0col(dim: int) -> np.ndarray:
    col = np.zeros((dim, 1), dtype=complex)
    col[0, 0] = 1.0
    return col


def _embed_rows(A: np.ndarray, rows: int) -> np.ndarray:
    """Pad A with trailing |0> work-qubit factors until it has `rows` rows."""
    if A.shape[0] == rows:
        return np.asarray(A, dtype=complex)
    if rows % A.shape[0]:
        raise SynthesisError("row embedding requires a power-of-two pad")
    return np.kron(A, _e0col(rows // A.shape[0]))


def _stack_register(kraus: list) -> np.ndarray:
    """Sum of K_b (x) e_b with the selector register as the last factor."""
    B = len(kraus)
    r, c = kraus[0].shape
    out = np.zeros((r * B, c), dtype=complex)
    for b, K in enumerate(kraus):
        out[b::B, :] = K
    return out


def _work_qubit_unitary(S: np.ndarray) -> np.ndarray:
    """Unitary acting as the isometry S on work-qubit-in-|0> columns.

    S has shape (2d, d) with the work qubit as the last slot, so its columns
    belong at the even column positions of the result.
    """
    two_d, d = S.shape
    if two_d != 2 * d:
        raise SynthesisError("work-qubit isometry must have shape (2d, d)")
    E = linalg.extend_isometry(S)
    U = np.zeros((two_d, two_d), dtype=complex)
    U[:, 0::2] = E[:, :d]
    U[:, 1::2] = E[:, d:]
    return U


def _assert_unitary(U: np.ndarray, context: str):
    dev = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if dev > 1e-8:
        raise SynthesisError(
            f"completeness bullet failed: {context} is not unitary "
            f"(deviation {dev:.2e})"
        )


@dataclass
class _Fragment:
    """Steps of a partial circuit plus the classical record map it induces.

    outcomes maps each reachable raw record to the outcome label of the
    sub-instrument realized so far; width is the live width afterwards.
    """

    steps: list
    outcomes: dict
    width: int


# ------------------------------------------------------------ binary-tree POVM


def _tree_fragment(jobs: dict, data_width: int) -> tuple:
    """Measurement-tree rounds over per-record element lists.

    jobs maps each incoming raw record to a list of (outcome_label, element)
    pairs on the 2^data_width data space, already sorted by label.  The work
    qubit is slot data_width, grown on the first round if not live yet.
    Records whose list is a singleton pass through rounds untouched via
    identity tables and empty slot sets.

    Returns (steps, outgoing, acc) where outgoing maps each leaf record to
    (incoming record, outcome label) and acc holds the accumulated Kraus
    operator on the data slots, equal to the square root of its element.
    """
    d = 1 << data_width
    anc = data_width

    nodes = {}
    rounds = 0
    for raw, items in sorted(jobs.items()):
        if not items:
            raise SynthesisError("tree fragment needs at least one outcome")
        depth = (len(items) - 1).bit_length()
        rounds = max(rounds, depth)
        padded = list(items) + [
            (None, np.zeros((d, d))) for _ in range((1 << depth) - len(items))
        ]
        R = sum(E for _, E in padded)
        nodes[raw] = (raw, padded, linalg.sqrt_psd(R))

    steps = []
    for _ in range(rounds):
        utable, mtable, rtable = {}, {}, {}
        next_nodes = {}
        for raw in sorted(nodes):
            root, items, acc = nodes[raw]
            rtable[raw] = (anc,)
            if len(items) == 1:
                utable[raw] = np.eye(2 * d, dtype=complex)
                mtable[raw] = ()
                next_nodes[raw] = (root, items, acc)
                continue
            mtable[raw] = (anc,)
            half = len(items) // 2
            sides = (items[:half], items[half:])
            R_node = acc.conj().T @ acc
            pinv_root = linalg.pinv_sqrt_psd(R_node)
            # the defect sqrt(I - P) is the projector I - P itself
            kernel = np.eye(d) - linalg.psd_range_projector(R_node)
            kraus = []
            for b, side in enumerate(sides):
                R_child = sum(E for _, E in side)
                K = linalg.sqrt_psd(R_child) @ pinv_root
                if b == 0:
                    K = K + kernel
                kraus.append(K)
            utable[raw] = _work_qubit_unitary(_stack_register(kraus))
            for b, side in enumerate(sides):
                child_acc = kraus[b] @ acc
                R_child = sum(E for _, E in side)
                if np.max(np.abs(child_acc.conj().T @ child_acc - R_child)) > 1e-8:
                    raise SynthesisError(
                        "telescoping bullet failed: the accumulated Kraus "
                        "does not square to the subtree element sum"
                    )
                if float(np.linalg.norm(child_acc)) <= 1e-12:
                    continue
                next_nodes[raw + str(b)] = (root, side, child_acc)
        steps.append(Reset(rtable))
        steps.append(Unitary(utable))
        steps.append(Measure(mtable))
        nodes = next_nodes

    outgoing, acc_map = {}, {}
    for raw, (root, items, acc) in nodes.items():
        label = items[0][0]
        if label is None:
            continue
        outgoing[raw] = (root, label)
        acc_map[raw] = acc
    return steps, outgoing, acc_map


def synth_povm_tree(E: Povm, tol: float = OP_TOL) -> Circuit:
    """Circuit measuring the POVM with one reused work qubit.

    The realized instrument has the single Kraus sqrt(E_k) per outcome, so
    its associated POVM is E itself.  A one-element POVM needs no rounds.
    """
    data_width = int(np.log2(E.dim))
    if 1 << data_width != E.dim:
        raise InputError("POVM dimension must be a power of two")
    jobs = {"": [(label, E[label]) for label in E.labels]}
    steps, outgoing, _ = _tree_fragment(jobs, data_width)
    steps = list(steps)
    relabel = {raw: label for raw, (_, label) in sorted(outgoing.items())}
    if any(raw != label for raw, label in relabel.items()):
        steps.append(ClassicalMap(relabel))
    width = data_width + (1 if len(E.labels) > 1 else 0)
    return Circuit(m=width, n_in=data_width, n_out=data_width,
                   steps=tuple(steps))


# ------------------------------------------------------- half-cut construction


def _refine_to_rank1(target: Instrument) -> tuple:
    """Split multi-Kraus branches into indexed rank-1 outcomes.

    Returns (refined instrument, relabel map refined -> original).  Rank-1
    branches keep their labels.
    """
    branches, back = {}, {}
    for label, ops in target.branches.items():
        if len(ops) == 1:
            branches[label] = ops
            back[label] = label
            continue
        width = (len(ops) - 1).bit_length()
        for i, K in enumerate(ops):
            sub = label + _bits(i, width)
            branches[sub] = [K]
            back[sub] = label
    return Instrument(branches, padded=target.padded), back


def _wodi_fragment(jobs: dict, n_in_width: int, out_dim: int,
                   tol: float) -> tuple:
    """Half-cut blocks at live width n_in_width for per-record targets.

    jobs maps each incoming raw record to (branches, partition, projectors):
    branches is a dict label -> single Kraus matrix with 2^n_in_width columns
    and out_dim rows, partition a pair of sorted label groups, projectors the
    corresponding operator sums.  Records must agree on whether the second
    group is populated so slot usage stays uniform across classical values.

    Returns (steps, outgoing record -> outcome label map, final width).
    """
    dim = 1 << n_in_width
    d_mid = dim // 2
    check_tol = max(tol, 1e-7)

    split_flags = {bool(jobs[raw][1][1]) for raw in jobs}
    if len(split_flags) > 1:
        raise SynthesisError(
            "partition bullet failed: records disagree on whether the "
            "outcome set splits"
        )
    split = split_flags.pop()

    for raw in sorted(jobs):
        branches, (B0, B1), (P0, P1) = jobs[raw]
        for side, P in ((B0, P0), (B1, P1)):
            acc = sum(
                (branches[k].conj().T @ branches[k] for k in side),
                np.zeros((dim, dim), dtype=complex),
            )
            if np.max(np.abs(acc - P)) > check_tol:
                raise SynthesisError(
                    "partition bullet failed: grouped outcome operators do "
                    "not sum to the stated part"
                )
            if side and np.max(np.abs(P @ P - P)) > check_tol:
                raise SynthesisError(
                    "partition bullet failed: a part is not a projector"
                )

    steps = []
    tree_jobs = {}
    compressor = {}
    if split:
        gamma_table, gamma_slots = {}, {}
        for raw in sorted(jobs):
            branches, (B0, B1), (P0, P1) = jobs[raw]
            kraus_b = []
            for P in (P0, P1):
                eig = linalg.hermitian_eig(P)
                keep = eig.eigenvalues > 0.5
                r = int(np.count_nonzero(keep))
                if r > d_mid:
                    raise SynthesisError(
                        "rank bullet failed: partition projector rank "
                        f"{r} exceeds 2^(m-1) = {d_mid}"
                    )
                K = np.zeros((d_mid, dim), dtype=complex)
                K[:r, :] = eig.vectors[:, keep].conj().T
                kraus_b.append(K)
            U = _stack_register(kraus_b)
            _assert_unitary(U, "the splitting block")
            gamma_table[raw] = U
            gamma_slots[raw] = (n_in_width - 1,)
            for b, side in enumerate((B0, B1)):
                Kb = kraus_b[b]
                items = []
                for j, k in enumerate(side):
                    N = Kb @ (branches[k].conj().T @ branches[k]) @ Kb.conj().T
                    if j == 0:
                        N = N + np.eye(d_mid) - Kb @ Kb.conj().T
                    items.append((k, N))
                tree_jobs[raw + str(b)] = items
                compressor[raw + str(b)] = (Kb, branches)
        steps.append(Unitary(gamma_table))
        steps.append(Measure(gamma_slots))
        data_width = n_in_width - 1
    else:
        for raw in sorted(jobs):
            branches, (B0, _), _ = jobs[raw]
            tree_jobs[raw] = [
                (k, branches[k].conj().T @ branches[k]) for k in B0
            ]
            compressor[raw] = (np.eye(dim, dtype=complex), branches)
        data_width = n_in_width

    tree_steps, outgoing, acc_map = _tree_fragment(tree_jobs, data_width)
    steps.extend(tree_steps)

    if split:
        width = n_in_width
    else:
        width = data_width + (1 if tree_steps else 0)
    out_bits = (out_dim - 1).bit_length()
    if (1 << out_bits) != out_dim:
        raise InputError("output dimension must be a power of two")
    if out_bits > width:
        grow = tuple(range(width, out_bits))
        steps.append(Reset({raw: grow for raw in sorted(outgoing)}))
        width = out_bits
    full = 1 << width

    wtable = {}
    final = {}
    for raw, (root, label) in sorted(outgoing.items()):
        Kb, branches = compressor[root]
        reached = _embed_rows(acc_map[raw] @ Kb, full)
        wanted = _embed_rows(branches[label], full)
        try:
            wtable[raw] = linalg.connecting_unitary(reached, wanted, tol)
        except ValueError as exc:
            raise SynthesisError(
                f"output bullet failed for outcome {label!r}: {exc}"
            ) from exc
        final[raw] = label
    steps.append(Unitary(wtable))
    return steps, final, width


def synth_wodi(target: Instrument, partition: tuple, projectors: tuple,
               tol: float = OP_TOL) -> Circuit:
    """Half-cut circuit for an instrument whose inputs are all present.

    partition is a pair of disjoint outcome-label groups covering the target,
    projectors the corresponding projective sums of outcome operators.  With
    both groups populated the first block splits the state along the
    partition, freeing the work qubit in place, so the width equals the input
    size; an empty second group requests the plain tree construction with one
    extra work qubit.  Multi-Kraus branches are refined to indexed rank-1
    outcomes and merged back by the terminal relabeling.
    """
    n_in = int(np.log2(target.dim_in))
    if 1 << n_in != target.dim_in:
        raise InputError("instrument input dimension must be a power of two")
    n_out = int(np.log2(target.dim_out))
    if 1 << n_out != target.dim_out:
        raise InputError("instrument output dimension must be a power of two")

    refined, back = _refine_to_rank1(target)
    K0, K1 = sorted(partition[0]), sorted(partition[1])
    if not K0 and K1:
        K0, K1 = K1, K0
        projectors = (projectors[1], projectors[0])
    if sorted(K0 + K1) != target.labels or set(K0) & set(K1):
        raise InputError("partition does not cover the outcome set exactly")
    refined_partition = (
        sorted(k for k in refined.branches if back[k] in set(K0)),
        sorted(k for k in refined.branches if back[k] in set(K1)),
    )

    branches = {k: ops[0] for k, ops in refined.branches.items()}
    P0 = np.asarray(projectors[0], dtype=complex)
    P1 = np.asarray(projectors[1], dtype=complex)
    jobs = {"": (branches, refined_partition, (P0, P1))}
    steps, final, width = _wodi_fragment(jobs, n_in, target.dim_out, tol)
    steps = list(steps)
    steps.append(ClassicalMap(
        {raw: back[label] for raw, label in sorted(final.items())}
    ))
    return Circuit(m=width, n_in=n_in, n_out=n_out, steps=tuple(steps))


# ------------------------------------------------------ staircase construction


def _base_fragment(target: Instrument, q: int) -> _Fragment:
    """Width-q block realizing a rank-1 instrument outright: a defining
    unitary writes the outcome index onto trailing register slots, which one
    measurement then reads out."""
    dim = 1 << q
    labels = sorted(target.branches)
    r_bits = (len(labels) - 1).bit_length()
    count = 1 << r_bits
    if target.dim_out * count > dim:
        raise SynthesisError(
            "width bullet failed: output and outcome register do not fit "
            f"in {q} qubits"
        )
    block_rows = dim // count
    stacked = [_embed_rows(target[label][0], block_rows) for label in labels]
    stacked += [
        np.zeros((block_rows, dim), dtype=complex)
        for _ in range(count - len(labels))
    ]
    U0 = _stack_register(stacked)
    _assert_unitary(U0, "the base block")
    steps = [
        Unitary({"": U0}),
        Measure({"": tuple(range(q - r_bits, q))}),
    ]
    outcomes = {_bits(i, r_bits): labels[i] for i in range(len(labels))}
    return _Fragment(steps, outcomes, q)


def _level_groupings(cert: ChainCertificate) -> list:
    """Per-level outcome groupings: entry t-1 maps the labels one level finer
    (chain level t+1 cosets, or raw syndromes at the top) onto the level-t
    coset labels, derived from the certificate's syndrome groupings."""
    maps = []
    for t in range(1, cert.T + 1):
        mu_t = cert.groupings[t - 1]
        if t == cert.T:
            finer = {s: s for s in mu_t.fine_labels}
        else:
            finer = {s: cert.groupings[t].group(s) for s in mu_t.fine_labels}
        nu = {}
        for s, key in finer.items():
            val = mu_t.group(s)
            if nu.setdefault(key, val) != val:
                raise InputError(
                    f"certificate groupings are not nested at level {t}"
                )
        maps.append(nu)
    return maps


def _peel(target: Instrument, chain: list, nu_maps: list, qubits: list,
          ordering: list, t: int, tol: float) -> _Fragment:
    """Recursive staircase peel: split off the level-t coarse measurement,
    factor it over the level's delayed qubit, recurse on the remainder, then
    append the load and the refining half-cut block."""
    q = len(qubits)
    if t == 0:
        return _base_fragment(target, q)

    gamma_povm = chain[t - 1]
    rank = int(round(float(np.trace(gamma_povm[gamma_povm.labels[0]]).real)))
    if rank <= 0 or rank & (rank - 1):
        raise SynthesisError(
            f"rank bullet failed: level {t} projector rank {rank} is not a "
            "power of two"
        )
    gamma = rank1_min_output(gamma_povm, out_dim=rank)
    try:
        nu = GroupingMatrix(
            {k: nu_maps[t - 1][k] for k in target.branches},
            tuple(sorted(gamma.branches)),
        )
    except (KeyError, ValueError) as exc:
        raise InputError(
            f"certificate groupings do not match the outcomes at level {t}: "
            f"{exc}"
        ) from exc

    A_t = ordering[t - 1]
    if A_t not in qubits:
        raise InputError(f"ordering repeats or misses qubit {A_t}")
    pos = qubits.index(A_t)

    try:
        G, connect = ons_decompose(gamma, [2] * q, pos, tol)
    except ValueError as exc:
        raise SynthesisError(
            f"no-signaling bullet failed at level {t} over qubit {A_t}: {exc}"
        ) from exc
    try:
        theta = compose_postprocessing(target, gamma, nu, tol)
    except ValueError as exc:
        raise SynthesisError(
            f"composability bullet failed at level {t}: {exc}"
        ) from exc

    # refinement instruments the circuit applies after loading the level
    # qubit, with the factorization's connecting unitary absorbed
    psi = {}
    for l in gamma.labels:
        block = theta[l]
        for pad in block.padded:
            if block.branch_norm(pad) > 1e-10:
                raise SynthesisError(
                    "composability bullet failed: residual kernel branch at "
                    f"level {t}"
                )
        psi[l] = {
            k: block[k][0] @ connect[l] for k in nu.fines_of(l)
        }

    reduced = []
    for tau in range(t - 1):
        F = check_factorization(chain[tau], [2] * q, pos, tol)
        if F is None:
            raise SynthesisError(
                f"no-signaling bullet failed: the level {tau + 1} measurement "
                f"does not ignore qubit {A_t}"
            )
        reduced.append(F)

    sub = _peel(G, reduced, nu_maps, [x for x in qubits if x != A_t],
                ordering, t - 1, tol)

    steps = list(sub.steps)
    load_slot = sub.width - 1
    steps.append(LoadInput(
        {raw: (load_slot,) for raw in sorted(sub.outcomes)}, (A_t,)
    ))

    jobs = {}
    dim_cur = 1 << sub.width
    for raw, l in sub.outcomes.items():
        B = nu.fines_of(l)
        if len(B) == 1:
            part = (B, [])
        else:
            part = (B[: len(B) // 2], B[len(B) // 2:])
        P = []
        for side in part:
            P.append(sum(
                (psi[l][k].conj().T @ psi[l][k] for k in side),
                np.zeros((dim_cur, dim_cur), dtype=complex),
            ))
        jobs[raw + "0"] = (psi[l], part, (P[0], P[1]))
    frag_steps, final, width = _wodi_fragment(
        jobs, sub.width, target.dim_out, tol
    )
    steps.extend(frag_steps)
    return _Fragment(steps, final, width)


def synth_staircase(target: Instrument, cert: ChainCertificate,
                    tol: float = OP_TOL) -> Circuit:
    """Staircase circuit realizing the target with the certificate's delayed
    inputs, at live width n - T.

    The target must have single-Kraus branches whose outcome operators form a
    projective measurement of constant rank equal to the output dimension,
    refined by the certificate's coset chain.  Violated hypotheses raise
    SynthesisError naming the failed requirement.
    """
    n = int(np.log2(target.dim_in))
    if 1 << n != target.dim_in:
        raise InputError("instrument input dimension must be a power of two")
    n_out = int(np.log2(target.dim_out))
    if 1 << n_out != target.dim_out:
        raise InputError("instrument output dimension must be a power of two")
    if not target.is_rank1():
        raise InputError("staircase targets must have single-Kraus branches")
    # element-wise checks: materializing the whole associated POVM would cost
    # outcomes * dim^2 memory, prohibitive for the larger codes
    check_tol = max(tol, 1e-7)
    for k in target.labels:
        K = target[k][0]
        Ek = K.conj().T @ K
        if np.max(np.abs(Ek @ Ek - Ek)) > check_tol:
            raise SynthesisError(
                "projectivity bullet failed: the target's outcome operators "
                "are not orthogonal projectors"
            )
        r = float(np.trace(Ek).real)
        if abs(r - target.dim_out) > 1e-6 * max(target.dim_out, 1):
            raise SynthesisError(
                "rank bullet failed: outcome operator rank differs from the "
                f"output dimension at {k!r}"
            )

    T = cert.T
    if T == 0:
        frag = _base_fragment(target, n)
    else:
        if len(cert.measurements) != T or len(cert.groupings) != T:
            raise InputError("certificate is missing chain levels")
        if sorted(cert.groupings[T - 1].fine_labels) != target.labels:
            raise InputError(
                "certificate grouping labels do not match the target outcomes"
            )
        for tau, povm in enumerate(cert.measurements):
            if povm.dim != target.dim_in:
                raise InputError(
                    f"level {tau + 1} measurement dimension mismatch"
                )
        ordering = list(cert.ordering.qubits)
        if any(not 1 <= a <= n for a in ordering):
            raise InputError(
                "certificate ordering names qubits outside the input register"
            )
        nu_maps = _level_groupings(cert)
        frag = _peel(target, list(cert.measurements), nu_maps,
                     list(range(1, n + 1)), ordering, T, tol)

    steps = list(frag.steps)
    steps.append(ClassicalMap(dict(sorted(frag.outcomes.items()))))
    return Circuit(m=frag.width, n_in=n, n_out=n_out, steps=tuple(steps))


def synth_distillation(code: StabilizerCode, tol: float = OP_TOL) -> tuple:
    """End-to-end pipeline: find the deepest feasible delay, build its coset
    chain, and synthesize the staircase circuit for the code's syndrome
    measurement plus decoding.

    Returns (circuit, certificate).
    """
    T, ordering = max_delay(code)
    cert = build_chain(code, ordering)
    target = distillation_instrument(code)
    circuit = synth_staircase(target, cert, tol)
    return circuit, cert
