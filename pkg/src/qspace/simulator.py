"""Exact branch-by-branch execution of value-conditioned circuits.

Each classical record holds a list of Kraus operators mapping the loaded
input space to the live slots.  Steps split records on measurement bits,
merge them under relabeling, and append fresh input factors on loads; the
final instrument is read off after tracing the live slots beyond the declared
output register and restoring the declared input ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InputError
from .instruments import Instrument, permutation_matrix
from .synthesis import (
    Circuit,
    ClassicalMap,
    LoadInput,
    Measure,
    Reset,
    Unitary,
)

PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class RunResult:
    instrument: Instrument
    peak_width: int
    branch_counts: tuple


@dataclass
class _Branch:
    kraus: list
    width: int


def _project_keep(K: np.ndarray, width: int, slots: tuple,
                  bits: tuple) -> np.ndarray:
    """Pick the bits at the given slots and reset those slots to |0>."""
    if not slots:
        return K
    cols = K.shape[1]
    T = K.reshape((2,) * width + (cols,))
    pick = tuple(
        bits[slots.index(ax)] if ax in slots else slice(None)
        for ax in range(width)
    )
    out = np.zeros_like(T)
    put = tuple(0 if ax in slots else slice(None) for ax in range(width))
    out[put] = T[pick]
    return out.reshape(K.shape)


def _project_remove(K: np.ndarray, width: int, slots: tuple,
                    bits: tuple) -> np.ndarray:
    """Pick the bits at the given slots and drop those slots entirely."""
    if not slots:
        return K
    cols = K.shape[1]
    T = K.reshape((2,) * width + (cols,))
    pick = tuple(
        bits[slots.index(ax)] if ax in slots else slice(None)
        for ax in range(width)
    )
    return T[pick].reshape(1 << (width - len(slots)), cols)


def _checked_slots(raw, width: int, label: str, grow_ok: bool = False):
    slots = tuple(sorted(int(s) for s in raw))
    if len(set(slots)) != len(slots):
        raise InputError(f"repeated slot for record {label!r}")
    for i, s in enumerate(slots):
        if s < 0:
            raise InputError(f"negative slot for record {label!r}")
        if s >= width and not (grow_ok and s == width + sum(
            1 for t in slots[:i] if t >= width
        )):
            raise InputError(
                f"slot {s} outside the live width {width} for record {label!r}"
            )
    return slots


def _merge(store: dict, label: str, kraus: list, width: int):
    ops = [K for K in kraus if np.linalg.norm(K) > PRUNE_TOL]
    if not ops:
        return
    entry = store.get(label)
    if entry is None:
        store[label] = _Branch(ops, width)
        return
    if entry.width != width:
        raise InputError(
            f"record {label!r} reached with inconsistent live widths"
        )
    entry.kraus.extend(ops)


def _preloaded_inputs(circuit: Circuit) -> list:
    seen = []
    for step in circuit.steps:
        if isinstance(step, LoadInput):
            for qb in step.inputs:
                if not 1 <= qb <= circuit.n_in:
                    raise InputError(
                        f"load names input qubit {qb} outside 1..{circuit.n_in}"
                    )
                if qb in seen:
                    raise InputError(f"input qubit {qb} loaded twice")
                seen.append(qb)
    return sorted(set(range(1, circuit.n_in + 1)) - set(seen))


def run(circuit: Circuit, tol: float = 1e-8) -> RunResult:
    """Execute the circuit and return the instrument it realizes.

    Records below the pruning threshold disappear before table lookups, so
    only genuinely reachable classical values need table entries.
    """
    preloaded = _preloaded_inputs(circuit)
    load_order = list(preloaded)
    n_pre = len(preloaded)
    if n_pre > circuit.m:
        raise InputError(
            f"width budget exceeded: {n_pre} preloaded qubits > m = {circuit.m}"
        )

    branches = {"": _Branch([np.eye(1 << n_pre, dtype=complex)], n_pre)}
    peak = max(n_pre, circuit.n_out)
    counts = []

    for step in circuit.steps:
        out = {}
        if isinstance(step, Unitary):
            for label in sorted(branches):
                br = branches[label]
                if label not in step.table:
                    raise InputError(f"unitary table missing record {label!r}")
                U = np.asarray(step.table[label], dtype=complex)
                if U.shape != (1 << br.width, 1 << br.width):
                    raise InputError(
                        f"unitary for record {label!r} has shape {U.shape}, "
                        f"expected width {br.width}"
                    )
                _merge(out, label, [U @ K for K in br.kraus], br.width)
        elif isinstance(step, Measure):
            for label in sorted(branches):
                br = branches[label]
                if label not in step.slots:
                    raise InputError(f"measure table missing record {label!r}")
                slots = _checked_slots(step.slots[label], br.width, label)
                for bits in product((0, 1), repeat=len(slots)):
                    kids = [
                        _project_keep(K, br.width, slots, bits)
                        for K in br.kraus
                    ]
                    _merge(out, label + "".join(map(str, bits)), kids,
                           br.width)
        elif isinstance(step, Reset):
            for label in sorted(branches):
                br = branches[label]
                if label not in step.slots:
                    raise InputError(f"reset table missing record {label!r}")
                slots = _checked_slots(step.slots[label], br.width, label,
                                       grow_ok=True)
                live = tuple(s for s in slots if s < br.width)
                grow = len(slots) - len(live)
                kids = []
                for bits in product((0, 1), repeat=len(live)):
                    kids.extend(
                        _project_keep(K, br.width, live, bits)
                        for K in br.kraus
                    )
                if grow:
                    pad = np.zeros((1 << grow, 1), dtype=complex)
                    pad[0, 0] = 1.0
                    kids = [np.kron(K, pad) for K in kids]
                _merge(out, label, kids, br.width + grow)
        elif isinstance(step, ClassicalMap):
            for label in sorted(branches):
                br = branches[label]
                if label not in step.table:
                    raise InputError(
                        f"classical table missing record {label!r}"
                    )
                _merge(out, step.table[label], br.kraus, br.width)
        elif isinstance(step, LoadInput):
            load_order.extend(step.inputs)
            for label in sorted(branches):
                br = branches[label]
                if label not in step.slots:
                    raise InputError(f"load table missing record {label!r}")
                slots = _checked_slots(step.slots[label], br.width, label)
                width = br.width - len(slots) + len(step.inputs)
                eye = np.eye(1 << len(step.inputs), dtype=complex)
                for bits in product((0, 1), repeat=len(slots)):
                    kids = [
                        np.kron(_project_remove(K, br.width, slots, bits), eye)
                        for K in br.kraus
                    ]
                    _merge(out, label + "".join(map(str, bits)), kids, width)
        else:
            raise InputError(f"unknown step type {type(step).__name__}")

        branches = out
        if not branches:
            raise InputError("all records vanished; circuit is inconsistent")
        step_peak = max(br.width for br in branches.values())
        if step_peak > circuit.m:
            raise InputError(
                f"width budget exceeded: {step_peak} live qubits > m = "
                f"{circuit.m}"
            )
        peak = max(peak, step_peak)
        counts.append(len(branches))

    # read off the realized instrument: trace trailing slots, restore the
    # declared input ordering on the columns
    restore = permutation_matrix(
        [2] * circuit.n_in, [qb - 1 for qb in load_order]
    )
    final = {}
    for label in sorted(branches):
        br = branches[label]
        if br.width < circuit.n_out:
            raise InputError(
                f"record {label!r} ends below the declared output width"
            )
        ops = br.kraus
        width = br.width
        while width > circuit.n_out:
            ops = [
                _project_remove(K, width, (width - 1,), (y,))
                for y in (0, 1)
                for K in ops
            ]
            ops = [K for K in ops if np.linalg.norm(K) > PRUNE_TOL]
            width -= 1
        if not ops:
            continue
        if ops[0].shape[1] != 1 << circuit.n_in:
            raise InputError(
                f"record {label!r} saw {ops[0].shape[1]} input columns, "
                f"expected 2^{circuit.n_in}"
            )
        final[label] = [K @ restore for K in ops]
    instrument = Instrument(
        final, dim_in=1 << circuit.n_in, dim_out=1 << circuit.n_out, tol=tol
    )
    return RunResult(instrument, peak, tuple(counts))


def audit_width(circuit: Circuit) -> int:
    """Static live-width profile: the peak over the step sequence.

    Demands a uniform width trajectory across classical values; run() is the
    authority on circuits with genuinely divergent per-value widths.
    """
    width = len(_preloaded_inputs(circuit))
    peak = max(width, circuit.n_out)
    for i, step in enumerate(circuit.steps):
        if isinstance(step, Unitary):
            sizes = {M.shape for M in step.table.values()}
            if len(sizes) != 1:
                raise InputError(f"step {i}: unitary sizes disagree")
            (rows, cols), = sizes
            if rows != cols or rows != 1 << width:
                raise InputError(
                    f"step {i}: unitary is {rows}x{cols}, expected width "
                    f"{width}"
                )
        elif isinstance(step, Measure):
            pass
        elif isinstance(step, Reset):
            grows = {
                sum(1 for s in v if s >= width) for v in step.slots.values()
            }
            if len(grows) != 1:
                raise InputError(f"step {i}: reset growth disagrees")
            width += grows.pop()
        elif isinstance(step, LoadInput):
            removed = {len(v) for v in step.slots.values()}
            if len(removed) != 1:
                raise InputError(f"step {i}: load slot counts disagree")
            width = width - removed.pop() + len(step.inputs)
        elif isinstance(step, ClassicalMap):
            pass
        else:
            raise InputError(f"unknown step type {type(step).__name__}")
        if width < 0:
            raise InputError(f"step {i}: live width went negative")
        peak = max(peak, width)
    return peak
