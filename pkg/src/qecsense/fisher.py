"""Classical and quantum Fisher information for the error-corrected probes.

All matrices are plain ``numpy`` arrays in parameter order (bx, bz), or
(bx, by, bz) for 3D fields. Derivatives are analytic for planar fields and
central finite differences for the 3D variant.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.special import gammaln
from scipy.stats import binom, linregress

from .exceptions import InsufficientPointsError, NoInformationError, SingularMatrixError, VariantError
from .field import (
    Basis,
    MagneticField,
    effective_field_gradient,
    single_qubit_unitary,
    unitary_gradient,
)
from .protocol import (
    ProbeSpec,
    Protocol,
    ancilla_free_degeneracy,
    outcome_model,
    syndrome_distribution,
)
from .validation import check_positive_int, check_time

__all__ = [
    "PrecisionPoint",
    "cfim_stabilizer",
    "cfim_pec",
    "cfim_pec_classes",
    "cfim_total",
    "cfim_joint_numeric",
    "qfim",
    "closed_form_inverse_diagonal",
    "closed_form_trace_inverse",
    "trace_inverse",
    "reduced_trace_inverse",
    "scaling_exponent",
]

_P_FLOOR = 1e-14
_FD_STEP = 1e-6


@dataclass(frozen=True)
class PrecisionPoint:
    n: int
    field: MagneticField
    t: float
    trace_inverse: float


# ---------------------------------------------------------------------------
# per-class probabilities and their gradients


def _basis_unitary_and_gradient(probe: ProbeSpec, field: MagneticField, t: float):
    u = single_qubit_unitary(field, t).in_basis(probe.basis)
    grad = unitary_gradient(field, t)
    if probe.basis is Basis.X:
        h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        grad = np.einsum("ij,djk,kl->dil", h, grad, h)
    return u, grad


def _dpow(x, e: int, dx):
    """Gradient of x**e given the gradient dx of x."""
    if e == 0:
        return np.zeros_like(dx)
    return e * x ** (e - 1) * dx


def _ancilla_free_amplitudes(probe, field, t):
    """(c0, c1) per class together with their gradients."""
    u, g = _basis_unitary_and_gradient(probe, field, t)
    d00, d01, d10, d11 = g[:, 0, 0], g[:, 0, 1], g[:, 1, 0], g[:, 1, 1]
    n = probe.n
    out = []
    for k in probe.k_values:
        k = int(k)

        def term(x, ex, dx, y, ey, dy):
            val = x**ex * y**ey
            grad = _dpow(x, ex, dx) * y**ey + x**ex * _dpow(y, ey, dy)
            return val, grad

        a0, ga0 = term(u.u00, n - k, d00, u.u10, k, d10)
        b0, gb0 = term(u.u01, n - k, d01, u.u11, k, d11)
        a1, ga1 = term(u.u00, k, d00, u.u10, n - k, d10)
        b1, gb1 = term(u.u01, k, d01, u.u11, n - k, d11)
        out.append((a0 + b0, ga0 + gb0, a1 + b1, ga1 + gb1))
    return out


def _class_probabilities(probe: ProbeSpec, field: MagneticField, t: float):
    """p_k and d p_k / d(field) for every syndrome class."""
    k, p = syndrome_distribution(probe, field, t)
    if probe.ancilla_assisted:
        u, g = _basis_unitary_and_gradient(probe, field, t)
        flip = min(abs(u.u10) ** 2, 1.0)
        dflip = 2.0 * np.real(np.conj(u.u10) * g[:, 1, 0])
        n = probe.n
        # d/db pmf(k; N, b) = N [pmf(k-1; N-1, b) - pmf(k; N-1, b)]
        dpk = n * (binom.pmf(k - 1, n - 1, flip) - binom.pmf(k, n - 1, flip))
        return p, np.outer(dpk, dflip)
    grads = []
    for kk, (c0, dc0, c1, dc1) in zip(k, _ancilla_free_amplitudes(probe, field, t)):
        deg = ancilla_free_degeneracy(probe.n, int(kk))
        grads.append(deg * (np.real(np.conj(c0) * dc0) + np.real(np.conj(c1) * dc1)))
    return p, np.array(grads)


def _fisher_from_outcomes(probs, grads) -> np.ndarray:
    keep = probs >= _P_FLOOR
    g = grads[keep]
    return (g / probs[keep][:, None]).T @ g


def _require_planar(probe: ProbeSpec, field: MagneticField, t: float):
    probe.check_field(field)
    check_time(t)
    if probe.is_3d or field.is_3d:
        raise VariantError("analytic derivatives cover planar fields; use cfim_joint_numeric for 3D")


# ---------------------------------------------------------------------------
# classical Fisher information


def cfim_stabilizer(probe: ProbeSpec, field: MagneticField, t: float) -> np.ndarray:
    """Fisher information of the syndrome class k alone."""
    if probe.is_3d or field.is_3d:
        return _numeric_split(probe, field, t)[0]
    _require_planar(probe, field, t)
    p, dp = _class_probabilities(probe, field, t)
    return _fisher_from_outcomes(p, dp)


def cfim_pec(probe: ProbeSpec, field: MagneticField, t: float) -> np.ndarray:
    """p_k-weighted Fisher information of the final string measurement.

    For the ancilla-assisted probe the two-outcome information of
    q_{k,+} = cos^2(B_eff (N-k)) is 4 (N-k)^2 grad(B_eff) grad(B_eff)^T at
    every field value (the 0/0 points are removable), so no q-floor is applied.
    The k = N class carries no phase and contributes nothing.
    """
    if probe.is_3d or field.is_3d:
        return _numeric_split(probe, field, t)[1]
    _require_planar(probe, field, t)
    k, p = syndrome_distribution(probe, field, t)
    if probe.ancilla_assisted:
        grad_beff = effective_field_gradient(field, t, probe.basis)
        m = (probe.n - k).astype(float)
        weight = np.sum(np.where(p >= _P_FLOOR, p, 0.0) * 4.0 * m**2)
        return weight * np.outer(grad_beff, grad_beff)

    return sum(pk * fk for pk, fk in zip(p, cfim_pec_classes(probe, field, t)) if pk >= _P_FLOOR)


def cfim_pec_classes(probe: ProbeSpec, field: MagneticField, t: float) -> list[np.ndarray]:
    """Per-class string-measurement CFIMs F_k, before weighting by p_k.

    Each is rank one (a two-outcome measurement of a single phase); only the
    ancilla-free average can regain full rank, because its classes point the
    gradient in different directions.
    """
    _require_planar(probe, field, t)
    if probe.ancilla_assisted:
        grad_beff = effective_field_gradient(field, t, probe.basis)
        return [4.0 * float(probe.n - k) ** 2 * np.outer(grad_beff, grad_beff) for k in probe.k_values]
    out = []
    for c0, dc0, c1, dc1 in _ancilla_free_amplitudes(probe, field, t):
        norm = abs(c0) ** 2 + abs(c1) ** 2
        if norm == 0.0:
            out.append(np.zeros((2, 2)))
            continue
        dnorm = 2 * (np.real(np.conj(c0) * dc0) + np.real(np.conj(c1) * dc1))
        plus = abs(c0 + c1) ** 2
        dplus = 2 * np.real(np.conj(c0 + c1) * (dc0 + dc1))
        q = plus / (2 * norm)
        dq = (dplus * norm - plus * dnorm) / (2 * norm**2)
        out.append(_fisher_from_outcomes(np.array([q, 1 - q]), np.array([dq, -dq])))
    return out


def _joint_probabilities(probe: ProbeSpec, field: MagneticField, t: float) -> np.ndarray:
    model = outcome_model(probe, field, t)
    return np.concatenate([model.p * model.q_plus, model.p * model.q_minus])


def _central_difference(func, x: np.ndarray, step: float) -> np.ndarray:
    grads = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        grads.append((func(x + e) - func(x - e)) / (2 * step))
    return np.array(grads).T


def cfim_joint_numeric(probe: ProbeSpec, field: MagneticField, t: float, step: float = _FD_STEP):
    """CFIM over the joint outcome (k, +-) by central differences.

    This is the route for 3D fields and doubles as an independent check of
    the analytic planar matrices.
    """
    probe.check_field(field)
    x0 = field.as_array()

    def probs(x):
        return _joint_probabilities(probe, MagneticField.from_array(x), t)

    return _fisher_from_outcomes(probs(x0), _central_difference(probs, x0, step))


def _numeric_split(probe, field, t, step: float = _FD_STEP):
    probe.check_field(field)
    x0 = field.as_array()

    def stab(x):
        return syndrome_distribution(probe, MagneticField.from_array(x), t)[1]

    f_stab = _fisher_from_outcomes(stab(x0), _central_difference(stab, x0, step))
    return f_stab, cfim_joint_numeric(probe, field, t, step) - f_stab


def cfim_total(probes, field: MagneticField, t: float) -> np.ndarray:
    """Sum of syndrome and post-correction information over independent probes."""
    if isinstance(probes, ProbeSpec):
        probes = [probes]
    if not probes:
        raise ValueError("cfim_total needs at least one probe")
    total = None
    for probe in probes:
        f = cfim_stabilizer(probe, field, t) + cfim_pec(probe, field, t)
        total = f if total is None else total + f
    return total


# ---------------------------------------------------------------------------
# quantum Fisher information


def _branch_amplitudes(basis, n: int, field: MagneticField, t: float):
    """sqrt(C(N,k))-weighted amplitudes of the |0..0> and |1..1> branches and gradients."""
    probe = ProbeSpec(n, basis)
    u, g = _basis_unitary_and_gradient(probe, field, t)
    d00, d01, d10, d11 = g[:, 0, 0], g[:, 0, 1], g[:, 1, 0], g[:, 1, 1]
    k = np.arange(n + 1)
    w = np.exp(0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)))

    def power(x, e):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(e > 0, x ** np.maximum(e, 0), 1.0 + 0j)

    def dpower(x, e, dx):
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(e > 0, e * x ** np.maximum(e - 1, 0), 0.0 + 0j)
        return coef[:, None] * dx[None, :]

    a = w * power(u.u00, n - k) * power(u.u10, k)
    da = w[:, None] * (
        dpower(u.u00, n - k, d00) * power(u.u10, k)[:, None]
        + power(u.u00, n - k)[:, None] * dpower(u.u10, k, d10)
    )
    b = w * power(u.u01, n - k) * power(u.u11, k)
    db = w[:, None] * (
        dpower(u.u01, n - k, d01) * power(u.u11, k)[:, None]
        + power(u.u01, n - k)[:, None] * dpower(u.u11, k, d11)
    )
    return a, da, b, db


def _pure_state_qfim(components) -> np.ndarray:
    # each component is (amplitudes, gradient) of an orthogonal sector, both scaled by sqrt 2
    overlap = sum(np.conj(d).T @ d for _, d in components)
    berry = sum(np.conj(d).T @ a for a, d in components)
    q = 2.0 * overlap - np.outer(berry, np.conj(berry))
    q = np.real(q)
    return 0.5 * (q + q.T)


def qfim(basis, n: int, field: MagneticField, t: float, ancilla: bool = False) -> np.ndarray:
    """QFIM of the GHZ probe evolved without error correction.

    ``basis`` is "Z", "X" or "dual" (the sum of both, by additivity over the
    product state). With ``ancilla=False`` this is the N-qubit GHZ state;
    ``ancilla=True`` adds the shielded qubit of the ancilla-assisted protocol,
    which changes the result only for N <= 2.
    """
    n = check_positive_int(n, "n")
    t = check_time(t)
    if field.is_3d:
        raise VariantError("qfim covers planar fields")
    ProbeSpec(n).check_field(field)
    if str(basis).lower() == "dual":
        return qfim(Basis.Z, n, field, t, ancilla) + qfim(Basis.X, n, field, t, ancilla)
    a, da, b, db = _branch_amplitudes(Basis.coerce(basis), n, field, t)
    if ancilla:
        return _pure_state_qfim([(a, da), (b, db)])
    return _pure_state_qfim([(a + b, da + db)])


# ---------------------------------------------------------------------------
# closed forms and scalar summaries


def _closed_form_parts(n: int, field: MagneticField, t: float, suppressed: float, protected: float):
    """Diagonal of F^-1 for a single ancilla-assisted probe.

    ``suppressed`` is the direction cosine of the corrected component, and
    ``protected`` the one along the probe basis. Returned in the probe's own
    (suppressed, protected) order.
    """
    bt = field.b * t
    s2 = np.sin(bt) ** 2
    if np.isclose(np.sin(bt), 0.0, atol=1e-12):
        raise NoInformationError(f"Bt = {bt} is a multiple of pi: no phase is acquired")
    den = 1.0 - suppressed**2 * s2
    if den <= 1e-15:
        raise NoInformationError("every qubit flips with certainty (n = 1 along the corrected axis, Bt = pi/2)")
    cot = np.cos(bt) / np.sin(bt)
    ns2, np2 = suppressed**2, protected**2
    f1_s = (2 * np2 * bt + ns2 * np.sin(2 * bt)) ** 2 / (4 * s2 * den)
    f1_p = ns2 * np2 * (2 * bt - np.sin(2 * bt)) ** 2 / (4 * s2 * den)
    f2_s = ns2 * np2 * (1 - bt * cot) ** 2 / den**2
    f2_p = (np2 + ns2 * bt * cot) ** 2 / den**2
    f3 = ns2 * s2 / den
    scale = 1.0 / (4 * n * t**2)
    return scale * (f1_s + f2_s / (f3 + n)), scale * (f1_p + f2_p / (f3 + n))


def closed_form_inverse_diagonal(variant, n: int, field: MagneticField, t: float) -> np.ndarray:
    """Closed-form (xx, zz) entries of F^-1 for single-z, single-x or dual."""
    n = check_positive_int(n, "n")
    t = check_time(t)
    variant = Protocol(variant)
    ProbeSpec(n).check_field(field)
    nx, nz = field.nx, field.nz
    if variant is Protocol.SINGLE_Z:
        xx, zz = _closed_form_parts(n, field, t, suppressed=nx, protected=nz)
        return np.array([xx, zz])
    if variant is Protocol.SINGLE_X:
        zz, xx = _closed_form_parts(n, field, t, suppressed=nz, protected=nx)
        return np.array([xx, zz])
    if variant is Protocol.DUAL:
        bt = field.b * t
        s2 = np.sin(bt) ** 2
        a_term = s2 * (3 - np.cos(2 * bt))
        c_term = s2 * (1 + np.cos(2 * bt))
        if a_term + c_term * n <= 1e-300 or np.isclose(np.sin(bt), 0.0, atol=1e-12):
            raise NoInformationError(f"Bt = {bt} is a multiple of pi: no phase is acquired")
        heis = 2 * t**2 / (a_term + c_term * n)
        scale = 1.0 / (4 * n * t**2)
        return scale * np.array(
            [nx**2 / (n + 1) + heis * field.bz**2, nz**2 / (n + 1) + heis * field.bx**2]
        )
    raise VariantError(f"no closed form for protocol {variant.value}")


def closed_form_trace_inverse(variant, n: int, field: MagneticField, t: float) -> float:
    return float(np.sum(closed_form_inverse_diagonal(variant, n, field, t)))


def _adjugate_inverse(m: np.ndarray):
    d = m.shape[0]
    if d == 2:
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        adj = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])
    elif d == 3:
        adj = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                minor = np.delete(np.delete(m, j, axis=0), i, axis=1)
                adj[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
        det = float(m[0] @ adj[:, 0])
    elif d == 1:
        det, adj = m[0, 0], np.ones((1, 1))
    else:
        raise ValueError(f"unsupported matrix size {d}")
    return det, adj


def trace_inverse(m, rel_tol: float = 1e-12) -> float:
    """Tr[m^-1] via the adjugate; raises SingularMatrixError below the determinant guard."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    det, adj = _adjugate_inverse(m)
    norm = np.linalg.norm(m)
    if norm == 0.0 or abs(det) < rel_tol * norm ** m.shape[0]:
        raise SingularMatrixError(f"matrix is singular (det={det:.3e}, |m|={norm:.3e})")
    return float(np.trace(adj) / det)


def reduced_trace_inverse(m, keep) -> float:
    """Tr of the inverse of the sub-block on the parameters in ``keep``.

    This is the bound when the remaining parameters are known exactly, e.g. the
    single-parameter problem of a field lying along the probe axis.
    """
    keep = list(keep)
    m = np.asarray(m, dtype=float)
    return trace_inverse(m[np.ix_(keep, keep)])


def scaling_exponent(points):
    """Fit log Tr[F^-1] = -beta log N + c. Returns (beta, intercept, r_squared)."""
    points = list(points)
    ns = np.array([p.n for p in points], dtype=float)
    vals = np.array([p.trace_inverse for p in points], dtype=float)
    if len(points) < 3 or np.unique(ns).size < 3:
        raise InsufficientPointsError("scaling fit needs at least 3 points with distinct N")
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise InsufficientPointsError("every precision value must be positive and finite")
    fit = linregress(np.log(ns), np.log(vals))
    return float(-fit.slope), float(fit.intercept), float(fit.rvalue**2)

