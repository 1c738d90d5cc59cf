"""Outcome statistics of the error-corrected GHZ protocols.

For each probe variant this module gives the probability p_k of detecting
k errors, the relative phase phi_k of the corrected logical state, and the
outcome probabilities q_{k,+-} of the final string-operator measurement.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from enum import Enum
from math import comb

import numpy as np
from scipy.stats import binom

from .exceptions import DegenerateFieldError, VariantError
from .field import Basis, MagneticField, UnitaryElements, effective_field, single_qubit_unitary
from .validation import check_positive_int, check_time

__all__ = [
    "Dimensionality",
    "ProbeSpec",
    "OutcomeModel",
    "dual_probe",
    "Protocol",
    "syndrome_distribution",
    "pec_phases",
    "string_measurement_probs",
    "pec_state_ancilla_free",
    "ancilla_free_degeneracy",
    "outcome_model",
]

_UNDERFLOW = 1e-300


class Dimensionality(str, Enum):
    TWO_D = "2d"
    THREE_D = "3d"


@dataclass(frozen=True)
class ProbeSpec:
    """One GHZ probe: N field-exposed qubits, a basis, and an optional shielded ancilla."""

    n: int
    basis: Basis = Basis.Z
    ancilla_assisted: bool = True
    dimensionality: Dimensionality = Dimensionality.TWO_D

    def __post_init__(self):
        check_positive_int(self.n, "n")
        object.__setattr__(self, "basis", Basis.coerce(self.basis))
        object.__setattr__(self, "dimensionality", Dimensionality(self.dimensionality))
        object.__setattr__(self, "ancilla_assisted", bool(self.ancilla_assisted))
        if self.dimensionality is Dimensionality.THREE_D:
            if not self.ancilla_assisted:
                raise VariantError("the 3D protocol is only defined with a shielded ancilla")
            if self.basis is not Basis.Z:
                raise VariantError("the 3D protocol is only defined for the Z-basis probe")

    @property
    def total_qubits(self) -> int:
        return self.n + 1 if self.ancilla_assisted else self.n

    @property
    def is_3d(self) -> bool:
        return self.dimensionality is Dimensionality.THREE_D

    @property
    def k_values(self) -> np.ndarray:
        if self.ancilla_assisted:
            return np.arange(self.n + 1)
        return np.arange(self.n // 2 + 1)

    def check_field(self, field: MagneticField) -> None:
        if field.is_3d and not self.is_3d:
            raise VariantError("planar probe given a 3D field; use dimensionality='3d'")
        if field.b == 0.0:
            raise DegenerateFieldError("protocol statistics need a non-zero field")


def dual_probe(n: int) -> list[ProbeSpec]:
    """The complementary GHZ_Z + GHZ_X pair, each ancilla-assisted."""
    return [ProbeSpec(n, Basis.Z), ProbeSpec(n, Basis.X)]


class Protocol(str, Enum):
    """Named protocol variants, as accepted on the command line."""

    ANCILLA_FREE_Z = "ancilla-free-z"
    SINGLE_Z = "single-z"
    SINGLE_X = "single-x"
    DUAL = "dual"
    THREE_D = "3d"

    def probes(self, n: int) -> list[ProbeSpec]:
        if self is Protocol.ANCILLA_FREE_Z:
            return [ProbeSpec(n, Basis.Z, ancilla_assisted=False)]
        if self is Protocol.SINGLE_Z:
            return [ProbeSpec(n, Basis.Z)]
        if self is Protocol.SINGLE_X:
            return [ProbeSpec(n, Basis.X)]
        if self is Protocol.DUAL:
            return dual_probe(n)
        return [ProbeSpec(n, Basis.Z, dimensionality=Dimensionality.THREE_D)]


@dataclass(frozen=True)
class OutcomeModel:
    k_values: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    q_plus: np.ndarray
    q_minus: np.ndarray
    probe: ProbeSpec | None = dc_field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "k": [int(k) for k in self.k_values],
            "p": [float(x) for x in self.p],
            "phi": [float(x) for x in self.phi],
            "q_plus": [float(x) for x in self.q_plus],
            "q_minus": [float(x) for x in self.q_minus],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "OutcomeModel":
        return cls(
            k_values=np.asarray(data["k"], dtype=int),
            p=np.asarray(data["p"], dtype=float),
            phi=np.asarray(data["phi"], dtype=float),
            q_plus=np.asarray(data["q_plus"], dtype=float),
            q_minus=np.asarray(data["q_minus"], dtype=float),
        )


def _probe_unitary(probe: ProbeSpec, field: MagneticField, t: float) -> UnitaryElements:
    return single_qubit_unitary(field, t).in_basis(probe.basis)


def ancilla_free_degeneracy(n: int, k: int) -> float:
    """Number of distinct syndromes whose minimum-weight error has weight k.

    For even N the weight-N/2 errors pair up with their complements, so the
    middle class carries half of C(N, N/2) syndromes.
    """
    if 2 * k < n:
        return float(comb(n, k))
    if 2 * k == n:
        return comb(n, k) / 2
    raise ValueError(f"weight {k} exceeds the correctable range for N={n}")


def _logical_amplitudes(u: UnitaryElements, n: int, k: int) -> tuple[complex, complex]:
    # |0>_L picks up u00/u10 factors, |1>_L picks up u01/u11 factors
    c0 = u.u00 ** (n - k) * u.u10**k + u.u01 ** (n - k) * u.u11**k
    c1 = u.u00**k * u.u10 ** (n - k) + u.u01**k * u.u11 ** (n - k)
    return complex(c0), complex(c1)


def syndrome_distribution(probe: ProbeSpec, field: MagneticField, t: float):
    """Probabilities of each syndrome class (number of detected errors k).

    Returns ``(k_values, p)``. With a shielded ancilla every error pattern is
    correctable and k runs over 0..N with a binomial law whose single-qubit
    flip probability is |<1|U|0>|^2 in the probe basis. Without the ancilla k
    runs over the minimum-weight representatives 0..floor(N/2).
    """
    t = check_time(t)
    probe.check_field(field)
    k = probe.k_values
    u = _probe_unitary(probe, field, t)
    if probe.ancilla_assisted:
        flip = min(max(abs(u.u10) ** 2, 0.0), 1.0)
        p = binom.pmf(k, probe.n, flip)
    else:
        p = np.empty(k.size)
        for i, kk in enumerate(k):
            c0, c1 = _logical_amplitudes(u, probe.n, int(kk))
            p[i] = ancilla_free_degeneracy(probe.n, int(kk)) * (abs(c0) ** 2 + abs(c1) ** 2) / 2
    p = np.where(p < _UNDERFLOW, 0.0, np.minimum(p, 1.0))
    return k, p


def _xy_phase(field: MagneticField) -> float:
    # arg(u01 / u10) per error; zero for planar fields
    if not field.is_3d:
        return 0.0
    gamma = np.arctan2(field.ny, field.nx)
    if gamma > np.pi / 2:
        gamma -= np.pi
    elif gamma <= -np.pi / 2:
        gamma += np.pi
    return -2.0 * gamma


def pec_phases(probe: ProbeSpec, field: MagneticField, t: float) -> np.ndarray:
    """Relative phase phi_k of the corrected GHZ state for each k.

    phi_k = 2 B_eff (N - k) for planar fields. With a Y component each
    corrected error adds -2 arctan(ny/nx) (standard sigma_y orientation).
    """
    if not probe.ancilla_assisted:
        raise VariantError(
            "ancilla-free corrected states are not pure phase rotations; use pec_state_ancilla_free"
        )
    t = check_time(t)
    probe.check_field(field)
    k = probe.k_values
    beff = effective_field(field, t, probe.basis)
    return 2.0 * beff * (probe.n - k) + _xy_phase(field) * k


def string_measurement_probs(phi):
    """Outcome probabilities of the logical X (string) measurement at phase phi."""
    phi = np.asarray(phi, dtype=float)
    q_plus = np.cos(phi / 2) ** 2
    return q_plus, 1.0 - q_plus


def pec_state_ancilla_free(probe: ProbeSpec, field: MagneticField, t: float, k: int):
    """Unnormalized logical amplitudes (c0, c1) after correcting k errors.

    c0 = u00^(N-k) u10^k + u01^(N-k) u11^k and
    c1 = u00^k u10^(N-k) + u01^k u11^(N-k), in the probe basis.
    """
    if probe.ancilla_assisted:
        raise VariantError("pec_state_ancilla_free is only defined without an ancilla")
    t = check_time(t)
    probe.check_field(field)
    if not 0 <= k <= probe.n // 2:
        raise ValueError(f"k must lie in 0..{probe.n // 2} for N={probe.n}")
    return _logical_amplitudes(_probe_unitary(probe, field, t), probe.n, int(k))


def outcome_model(probe: ProbeSpec, field: MagneticField, t: float) -> OutcomeModel:
    """Full outcome statistics (p_k, phi_k, q_{k,+-}) of one probe."""
    k, p = syndrome_distribution(probe, field, t)
    if probe.ancilla_assisted:
        phi = pec_phases(probe, field, t)
        q_plus, q_minus = string_measurement_probs(phi)
    else:
        u = _probe_unitary(probe, field, t)
        phi = np.empty(k.size)
        q_plus = np.empty(k.size)
        for i, kk in enumerate(k):
            c0, c1 = _logical_amplitudes(u, probe.n, int(kk))
            norm = abs(c0) ** 2 + abs(c1) ** 2
            if norm == 0.0:
                phi[i], q_plus[i] = 0.0, 0.5
                continue
            phi[i] = np.angle(c1 * np.conj(c0))
            q_plus[i] = abs(c0 + c1) ** 2 / (2 * norm)
        q_plus = np.clip(q_plus, 0.0, 1.0)
        q_minus = 1.0 - q_plus
    return OutcomeModel(k, p, phi, q_plus, q_minus, probe=probe)
