"""Dense statevector simulation of the full protocol, used as ground truth.

Qubit 0 (the first tensor factor) is the shielded ancilla when the probe is
ancilla-assisted. Basis index i stores qubit j in bit (n - 1 - j), so the
first qubit is the most significant bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .exceptions import SizeLimitError
from .field import Basis, MagneticField, single_qubit_unitary
from .protocol import ProbeSpec
from .validation import check_positive_int, check_time

__all__ = [
    "DecodingTable",
    "SimulatedClass",
    "ghz_state",
    "apply_single_qubit",
    "build_decoding_table",
    "format_table",
    "simulate_protocol",
    "corrected_states",
    "stabilizer_expectations",
    "oracle_qfim",
    "MAX_QUBITS",
    "MAX_QFIM_QUBITS",
]

MAX_QUBITS = 14
MAX_QFIM_QUBITS = 12
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


# ---------------------------------------------------------------------------
# statevector primitives


def apply_single_qubit(state: np.ndarray, gate: np.ndarray, qubit: int, n: int) -> np.ndarray:
    psi = state.reshape((2,) * n)
    psi = np.tensordot(gate, psi, axes=([1], [qubit]))
    return np.moveaxis(psi, 0, qubit).reshape(-1)


def apply_cnot(state: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    psi = state.reshape((2,) * n).copy()
    idx = [slice(None)] * n
    idx[control] = 1
    sub = psi[tuple(idx)]
    # target axis shifts down by one once the control axis is indexed away
    axis = target - 1 if target > control else target
    psi[tuple(idx)] = np.flip(sub, axis=axis)
    return psi.reshape(-1)


def _hadamard_all(state: np.ndarray, n: int) -> np.ndarray:
    for q in range(n):
        state = apply_single_qubit(state, _HADAMARD, q, n)
    return state


def ghz_state(n: int, basis="Z") -> np.ndarray:
    """GHZ state prepared by a Hadamard and a CNOT chain, rotated for the X basis."""
    n = check_positive_int(n, "n")
    if n > MAX_QUBITS:
        raise SizeLimitError(f"{n} qubits exceeds the budget of {MAX_QUBITS}")
    state = np.zeros(2**n, dtype=complex)
    state[0] = 1.0
    state = apply_single_qubit(state, _HADAMARD, 0, n)
    for q in range(n - 1):
        state = apply_cnot(state, q, q + 1, n)
    if Basis.coerce(basis) is Basis.X:
        state = _hadamard_all(state, n)
    return state


def _bits(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    return (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


def _syndromes(n: int) -> np.ndarray:
    """Z_jZ_{j+1} outcome bits (1 means -1) for every computational basis state."""
    b = _bits(n)
    return b[:, :-1] ^ b[:, 1:]


def _mask(qubits, n: int) -> int:
    return sum(1 << (n - 1 - q) for q in qubits)


# ---------------------------------------------------------------------------
# decoding


@dataclass(frozen=True)
class DecodingTable:
    """Syndrome -> correction map. Syndromes are tuples of +-1, corrections are
    sorted tuples of 0-based qubit indices to flip."""

    n_physical: int
    basis: Basis
    ancilla_assisted: bool
    entries: dict

    def correction(self, syndrome) -> tuple:
        return self.entries[tuple(int(s) for s in syndrome)]

    def __len__(self) -> int:
        return len(self.entries)


def _syndrome_of(error, n: int) -> tuple:
    flipped = np.zeros(n, dtype=int)
    flipped[list(error)] = 1
    return tuple(int(1 - 2 * (flipped[j] ^ flipped[j + 1])) for j in range(n - 1))


def build_decoding_table(n_physical: int, basis="Z", ancilla_assisted: bool = True) -> DecodingTable:
    """Lookup table from stabilizer outcomes to the correction applied.

    Ancilla-assisted: each error on qubits 2..n has a unique syndrome. Ancilla-free:
    the minimum-weight consistent error; among equal weights, the error whose
    lowest flipped qubit has the smallest index.
    """
    n = check_positive_int(n_physical, "n_physical", minimum=2)
    if n > MAX_QUBITS:
        raise SizeLimitError(f"{n} qubits exceeds the budget of {MAX_QUBITS}")
    entries: dict = {}
    if ancilla_assisted:
        for w in range(n):
            for err in combinations(range(1, n), w):
                entries[_syndrome_of(err, n)] = err
    else:
        # weight-major, then lexicographic, so the first hit is the tie-break winner
        for w in range(n // 2 + 1):
            for err in combinations(range(n), w):
                entries.setdefault(_syndrome_of(err, n), err)
    return DecodingTable(n, Basis.coerce(basis), bool(ancilla_assisted), entries)


def _format_correction(err, basis: Basis) -> str:
    if not err:
        return "I"
    op = "X" if basis is Basis.Z else "Z"
    return "".join(f"{op}{q + 1}" for q in err)


def format_table(n_physical: int, basis="Z") -> str:
    """Both decoding columns as aligned text, one row per syndrome."""
    basis = Basis.coerce(basis)
    free = build_decoding_table(n_physical, basis, ancilla_assisted=False)
    assisted = build_decoding_table(n_physical, basis, ancilla_assisted=True)
    op = "Z" if basis is Basis.Z else "X"
    heads = [f"{op}{j + 1}{op}{j + 2}" for j in range(n_physical - 1)] + ["Ancilla-free", "Ancilla-assisted"]
    rows = []
    for syndrome in sorted(assisted.entries, reverse=True):
        cells = [f"{s:+d}" for s in syndrome]
        cells.append(_format_correction(free.entries.get(syndrome, ()), basis))
        cells.append(_format_correction(assisted.entries[syndrome], basis))
        rows.append(cells)
    widths = [max(len(r[i]) for r in rows + [heads]) for i in range(len(heads))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [heads] + rows]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# protocol simulation


@dataclass(frozen=True)
class SimulatedClass:
    k: int
    probability: float
    amplitudes: np.ndarray  # normalized (c0, c1) with c0 real and non-negative
    syndrome_probabilities: np.ndarray


def _evolved_state(probe: ProbeSpec, field: MagneticField, t: float) -> np.ndarray:
    n_tot = probe.total_qubits
    if n_tot > MAX_QUBITS:
        raise SizeLimitError(f"{n_tot} qubits exceeds the budget of {MAX_QUBITS}")
    u = single_qubit_unitary(field, t).matrix()
    state = ghz_state(n_tot, probe.basis)
    first = 1 if probe.ancilla_assisted else 0
    for q in range(first, n_tot):
        state = apply_single_qubit(state, u, q, n_tot)
    return state


@lru_cache(maxsize=64)
def _table_arrays(n_tot: int, basis: Basis, ancilla_assisted: bool):
    table = build_decoding_table(n_tot, basis, ancilla_assisted)
    syndromes = list(table.entries)
    keys = np.array([sum(1 << (n_tot - 2 - j) for j, s in enumerate(syn) if s == -1) for syn in syndromes])
    masks = np.array([_mask(table.entries[syn], n_tot) for syn in syndromes])
    weights = np.array([len(table.entries[syn]) for syn in syndromes])
    return syndromes, [table.entries[syn] for syn in syndromes], keys, masks, weights


def _project_and_correct(probe: ProbeSpec, field: MagneticField, t: float):
    """Projected amplitudes and their corrected positions for every syndrome at once.

    Returns (syndromes, corrections, weights, amplitudes, targets); the last two
    have shape (S, 2): amplitudes of the projected state in the measurement
    frame and the basis indices the correction sends them to.
    """
    t = check_time(t)
    probe.check_field(field)
    n_tot = probe.total_qubits
    state = _evolved_state(probe, field, t)
    if probe.basis is Basis.X:
        # X stabilizers become Z parities in the Hadamard frame
        state = _hadamard_all(state, n_tot)
    syndromes, corrections, keys, masks, weights = _table_arrays(n_tot, probe.basis, probe.ancilla_assisted)
    parity = _syndromes(n_tot) @ (1 << np.arange(n_tot - 2, -1, -1))
    # every syndrome is shared by exactly one string and its complement
    order = np.argsort(parity, kind="stable").reshape(-1, 2)
    members = order[keys]
    return syndromes, corrections, weights, state[members], members ^ masks[:, None]


def simulate_protocol(probe: ProbeSpec, field: MagneticField, t: float) -> list[SimulatedClass]:
    """Project onto every syndrome, correct per the lookup table, group by weight k."""
    full = 2**probe.total_qubits - 1
    _, _, weights, amps, targets = _project_and_correct(probe, field, t)
    if not np.all(np.sort(targets, axis=1) == [0, full]):
        raise RuntimeError("a lookup-table correction does not return its syndrome to the codespace")
    # put the |0..0> amplitude first
    amps = np.where((targets[:, :1] == 0), amps, amps[:, ::-1])
    probs = np.sum(np.abs(amps) ** 2, axis=1)
    out = []
    for k in np.unique(weights):
        idx = np.flatnonzero(weights == k)
        c = amps[idx[np.argmax(probs[idx])]]
        norm = np.linalg.norm(c)
        if norm > 0:
            c = c / norm
            if abs(c[0]) > 0:
                c = c * np.exp(-1j * np.angle(c[0]))
        out.append(SimulatedClass(int(k), float(probs[idx].sum()), c, probs[idx]))
    return out


def corrected_states(probe: ProbeSpec, field: MagneticField, t: float):
    """Normalized corrected statevectors per syndrome, for codespace checks."""
    n_tot = probe.total_qubits
    syndromes, _, _, amps, targets = _project_and_correct(probe, field, t)
    for syndrome, a, tgt in zip(syndromes, amps, targets):
        norm = np.linalg.norm(a)
        if norm < 1e-12:
            continue
        corrected = np.zeros(2**n_tot, dtype=complex)
        corrected[tgt] = a / norm
        if probe.basis is Basis.X:
            corrected = _hadamard_all(corrected, n_tot)
        yield syndrome, corrected


def stabilizer_expectations(state: np.ndarray, n: int, basis="Z") -> np.ndarray:
    """<S_j> for the nearest-neighbour parity stabilizers in the given basis."""
    if Basis.coerce(basis) is Basis.X:
        state = _hadamard_all(state, n)
    weights = np.abs(state) ** 2
    signs = 1 - 2 * _syndromes(n)
    return weights @ signs


# ---------------------------------------------------------------------------
# quantum Fisher information by finite differences


def oracle_qfim(basis, n: int, field: MagneticField, t: float, ancilla: bool = False,
                step: float = 1e-6) -> np.ndarray:
    """QFIM of the evolved (uncorrected) GHZ state from central differences.

    Q_ab = 4 Re[<d_a psi|d_b psi> - <d_a psi|psi><psi|d_b psi>].
    """
    n = check_positive_int(n, "n")
    t = check_time(t)
    probe = ProbeSpec(n, basis, ancilla_assisted=True)
    n_tot = n + 1 if ancilla else n
    if n_tot > MAX_QFIM_QUBITS:
        raise SizeLimitError(f"{n_tot} qubits exceeds the QFIM budget of {MAX_QFIM_QUBITS}")
    x0 = field.as_array()

    def evolve(x):
        f = MagneticField.from_array(x)
        u = single_qubit_unitary(f, t).matrix()
        state = ghz_state(n_tot, probe.basis)
        for q in range(1 if ancilla else 0, n_tot):
            state = apply_single_qubit(state, u, q, n_tot)
        return state

    psi = evolve(x0)
    derivs = []
    for j in range(x0.size):
        e = np.zeros_like(x0)
        e[j] = step
        derivs.append((evolve(x0 + e) - evolve(x0 - e)) / (2 * step))
    d = np.array(derivs)
    overlap = np.conj(d) @ d.T
    berry = np.conj(d) @ psi
    q = 4.0 * np.real(overlap - np.outer(berry, np.conj(berry)))
    return 0.5 * (q + q.T)
