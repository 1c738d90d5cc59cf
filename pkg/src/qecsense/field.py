"""Magnetic field, single-qubit precession and the effective logical field.

Units follow hbar = 1: field components are energies, times are inverse
energies, and every angle is in radians.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import comb

import numpy as np

from .exceptions import DegenerateFieldError
from .validation import check_time

__all__ = [
    "Basis",
    "MagneticField",
    "UnitaryElements",
    "single_qubit_unitary",
    "unitary_gradient",
    "effective_field",
    "effective_field_gradient",
    "u_sum_coefficient",
    "u_sum_norm",
]


class Basis(str, Enum):
    """Basis of the GHZ probe, i.e. which field component it protects."""

    Z = "Z"
    X = "X"

    @classmethod
    def coerce(cls, value) -> "Basis":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"basis must be 'Z' or 'X', got {value!r}") from None


@dataclass(frozen=True)
class MagneticField:
    """Uniform static field. ``by`` is None for the planar (XZ) case."""

    bx: float
    bz: float
    by: float | None = None

    def __post_init__(self):
        for name in ("bx", "bz", "by"):
            v = getattr(self, name)
            if v is None:
                continue
            v = float(v)
            if not np.isfinite(v):
                raise ValueError(f"field component {name} must be finite")
            object.__setattr__(self, name, v)

    @property
    def is_3d(self) -> bool:
        return self.by is not None

    @property
    def dim(self) -> int:
        return 3 if self.is_3d else 2

    @property
    def b(self) -> float:
        return float(np.sqrt(self.bx**2 + (self.by or 0.0) ** 2 + self.bz**2))

    def _cosine(self, comp: float) -> float:
        b = self.b
        if b == 0.0:
            raise DegenerateFieldError("direction cosines are undefined for a zero field")
        return comp / b

    @property
    def nx(self) -> float:
        return self._cosine(self.bx)

    @property
    def ny(self) -> float:
        return self._cosine(self.by or 0.0)

    @property
    def nz(self) -> float:
        return self._cosine(self.bz)

    def as_array(self) -> np.ndarray:
        """Components in parameter order: (bx, bz) or (bx, by, bz)."""
        if self.is_3d:
            return np.array([self.bx, self.by, self.bz])
        return np.array([self.bx, self.bz])

    @classmethod
    def from_array(cls, values) -> "MagneticField":
        values = np.asarray(values, dtype=float)
        if values.shape == (2,):
            return cls(values[0], values[1])
        if values.shape == (3,):
            return cls(values[0], values[2], by=values[1])
        raise ValueError(f"expected 2 or 3 components, got shape {values.shape}")

    def swapped(self) -> "MagneticField":
        """Field with the x and z components exchanged (Z <-> X basis symmetry)."""
        return MagneticField(self.bz, self.bx, self.by)


@dataclass(frozen=True)
class UnitaryElements:
    """Matrix elements of exp(-i t B.sigma) in the computational basis.

    For planar fields ``u10 == u01``; with a Y component they differ.
    """

    u00: complex
    u01: complex
    u10: complex
    u11: complex

    def matrix(self) -> np.ndarray:
        return np.array([[self.u00, self.u01], [self.u10, self.u11]], dtype=complex)

    def in_x_basis(self) -> "UnitaryElements":
        """Same operator written in the (|+>, |->) basis."""
        u00, u01, u10, u11 = self.u00, self.u01, self.u10, self.u11
        return UnitaryElements(
            u00=(u00 + u01 + u10 + u11) / 2,
            u01=(u00 - u01 + u10 - u11) / 2,
            u10=(u00 + u01 - u10 - u11) / 2,
            u11=(u00 - u01 - u10 + u11) / 2,
        )

    def in_basis(self, basis) -> "UnitaryElements":
        return self if Basis.coerce(basis) is Basis.Z else self.in_x_basis()


def _pauli_dot(n) -> np.ndarray:
    nx, ny, nz = n
    return np.array([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]], dtype=complex)


def single_qubit_unitary(field: MagneticField, t: float) -> UnitaryElements:
    """Single-qubit evolution cos(Bt) - i sin(Bt) n.sigma; identity if B = 0."""
    t = check_time(t)
    b = field.b
    if b == 0.0:
        return UnitaryElements(1.0 + 0j, 0j, 0j, 1.0 + 0j)
    theta = b * t
    n = (field.nx, field.ny, field.nz)
    m = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * _pauli_dot(n)
    return UnitaryElements(m[0, 0], m[0, 1], m[1, 0], m[1, 1])


def unitary_gradient(field: MagneticField, t: float) -> np.ndarray:
    """Derivatives of the 2x2 unitary with respect to the field components.

    Returns a complex array of shape ``(d, 2, 2)`` in parameter order
    (bx, bz) or (bx, by, bz).
    """
    t = check_time(t)
    b = field.b
    if b == 0.0:
        raise DegenerateFieldError("unitary derivatives need a non-zero field")
    theta = b * t
    s, c = np.sin(theta), np.cos(theta)
    n = np.array([field.nx, field.ny, field.nz])
    sigma = [_pauli_dot(e) for e in np.eye(3)]
    ndot = _pauli_dot(n)
    grads = []
    for j in range(3):
        dn = (np.eye(3)[j] - n * n[j]) / b
        g = (-s * t * n[j]) * np.eye(2) - 1j * c * t * n[j] * ndot
        g = g - 1j * s * sum(dn[i] * sigma[i] for i in range(3))
        grads.append(g)
    grads = np.array(grads)
    return grads if field.is_3d else grads[[0, 2]]


def _rotate_gradient(grad: np.ndarray, basis) -> np.ndarray:
    if Basis.coerce(basis) is Basis.Z:
        return grad
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    return np.einsum("ij,djk,kl->dil", h, grad, h)


def _protected_cosine(field: MagneticField, basis) -> float:
    return field.nz if Basis.coerce(basis) is Basis.Z else field.nx


def effective_field(field: MagneticField, t: float, basis="Z") -> float:
    """Effective logical precession angle arctan(n tan(Bt)).

    ``n`` is the direction cosine along the probe basis (nz for Z, nx for X).
    The principal branch is returned; at Bt = pi/2 the limit sign(n) pi/2 is used.
    """
    t = check_time(t)
    if field.b == 0.0:
        raise DegenerateFieldError("effective field is undefined for a zero field")
    n = _protected_cosine(field, basis)
    theta = field.b * t
    angle = np.arctan2(n * np.sin(theta), np.cos(theta))
    if angle > np.pi / 2:
        angle -= np.pi
    elif angle < -np.pi / 2:
        angle += np.pi
    return float(angle)


def effective_field_gradient(field: MagneticField, t: float, basis="Z") -> np.ndarray:
    # B_eff = arg(u11) in the probe basis, modulo pi
    u = single_qubit_unitary(field, t).in_basis(basis)
    du11 = _rotate_gradient(unitary_gradient(field, t), basis)[:, 1, 1]
    weight = abs(u.u11) ** 2
    if weight == 0.0:
        raise DegenerateFieldError("effective field is stationary-singular here (n = 0, cos Bt = 0)")
    return np.imag(np.conj(u.u11) * du11) / weight


def u_sum_coefficient(n: int, k: int, u: UnitaryElements) -> complex:
    """Amplitude u00^(N-k) u10^k + u01^(N-k) u11^k of a weight-k string.

    This is (up to 1/sqrt 2) the amplitude of any N-bit string with k ones in
    the evolved GHZ state. Pass ``u.in_x_basis()`` for the X-basis probe.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= N, got k={k}, N={n}")
    return complex(u.u00 ** (n - k) * u.u10**k + u.u01 ** (n - k) * u.u11**k)


def u_sum_norm(n: int, u: UnitaryElements) -> float:
    """sum_k C(N,k) |amplitude_k|^2; equals 2 for any unitary."""
    return float(sum(comb(n, k) * abs(u_sum_coefficient(n, k, u)) ** 2 for k in range(n + 1)))
