"""Grid-based Bayesian estimation of (bx, bz) from simulated experiments.

Each probe contributes two likelihoods: the syndrome counts, which pin the
single-qubit flip probability, and the +-1 string outcomes, which pin the
effective logical field. The second is reduced to a highest-density set of
B_eff values and used as a hard constraint on the (bx, bz) grid. Probes are
combined by multiplying their posteriors. Because the posterior at large N is
far narrower than a default grid cell, the grid is zoomed onto the dominant
mode until the posterior is resolved.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage
from scipy.special import logsumexp, xlogy
from sklearn.base import BaseEstimator

from .exceptions import EmptyOverlapError, EmptyPosteriorError, NumericalError
from .field import Basis, MagneticField
from .fisher import cfim_total, trace_inverse
from .protocol import ProbeSpec, outcome_model
from .sampling import ExperimentData, sample_experiment
from .validation import check_positive_int, check_random_state_seed, check_time

__all__ = [
    "PosteriorGrid",
    "BeffPosterior",
    "EstimationResult",
    "uniform_prior",
    "posterior_from_syndromes",
    "posterior_over_beff",
    "combine_posteriors",
    "estimate_field",
    "run_estimation",
    "BayesianFieldEstimator",
]

DEFAULT_BOX = (0.05, 1.0, 0.05, 1.0)
DEFAULT_GRID = 200
DEFAULT_BEFF_POINTS = 2001
DEFAULT_BAND = 0.99

_KEEP_NATS = 50.0  # cells this far below the maximum carry no mass at double precision
_ZOOM_NATS = 40.0
_REFINE = 20
_MIN_RESOLVED_CELLS = 200
_MAX_REFINE_LEVELS = 8
_MAX_ZOOMS = 12
_CELLS_PER_STD = 8.0


# ---------------------------------------------------------------------------
# 2D grids


@dataclass(frozen=True)
class PosteriorGrid:
    """Normalized weights on a uniform (bx, bz) grid of cell centres.

    ``log_density`` is stored alongside so that products of posteriors stay in
    log space; ``density`` is its exponential and sums to 1.
    """

    bx_axis: np.ndarray
    bz_axis: np.ndarray
    log_density: np.ndarray

    @classmethod
    def from_log(cls, bx_axis, bz_axis, log_weights) -> "PosteriorGrid":
        log_weights = np.asarray(log_weights, dtype=float)
        finite = np.isfinite(log_weights)
        if not finite.any():
            raise EmptyPosteriorError("posterior has zero weight on every grid cell")
        log_weights = log_weights - logsumexp(log_weights[finite])
        return cls(np.asarray(bx_axis, float), np.asarray(bz_axis, float), log_weights)

    @property
    def density(self) -> np.ndarray:
        return np.exp(self.log_density)

    @property
    def shape(self):
        return self.log_density.shape

    @property
    def steps(self) -> tuple[float, float]:
        return _step(self.bx_axis), _step(self.bz_axis)

    def mesh(self):
        return np.meshgrid(self.bx_axis, self.bz_axis, indexing="ij")

    def mean(self) -> np.ndarray:
        w = self.density
        bx, bz = self.mesh()
        return np.array([np.sum(w * bx), np.sum(w * bz)])

    def std(self) -> np.ndarray:
        w = self.density
        bx, bz = self.mesh()
        mu = self.mean()
        return np.sqrt(np.maximum([np.sum(w * (bx - mu[0]) ** 2), np.sum(w * (bz - mu[1]) ** 2)], 0.0))

    def mode(self) -> np.ndarray:
        i, j = np.unravel_index(np.argmax(self.log_density), self.shape)
        return np.array([self.bx_axis[i], self.bz_axis[j]])


def _step(axis: np.ndarray) -> float:
    return float(axis[1] - axis[0]) if axis.size > 1 else 1.0


def _cell_axis(lo: float, hi: float, cells: int) -> np.ndarray:
    edges = np.linspace(lo, hi, cells + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def uniform_prior(box=DEFAULT_BOX, cells: int = DEFAULT_GRID) -> PosteriorGrid:
    """Flat prior over cell centres of ``box = (bx_lo, bx_hi, bz_lo, bz_hi)``."""
    bx_lo, bx_hi, bz_lo, bz_hi = map(float, box)
    cells = check_positive_int(cells, "cells", minimum=2)
    if not (bx_lo < bx_hi and bz_lo < bz_hi):
        raise ValueError(f"prior box must have lo < hi on both axes, got {box}")
    if bx_lo <= 0.0 <= bx_hi and bz_lo <= 0.0 <= bz_hi:
        raise ValueError("prior box must exclude the zero field")
    return PosteriorGrid.from_log(
        _cell_axis(bx_lo, bx_hi, cells), _cell_axis(bz_lo, bz_hi, cells), np.zeros((cells, cells))
    )


# ---------------------------------------------------------------------------
# vectorized protocol quantities


def _cosines(bx, bz, basis: Basis):
    b = np.hypot(bx, bz)
    suppressed = (bx if basis is Basis.Z else bz) / b
    protected = (bz if basis is Basis.Z else bx) / b
    return b, suppressed, protected


def flip_probability(bx, bz, t: float, basis="Z"):
    """Single-qubit flip probability |<1|U|0>|^2 in the probe basis, elementwise."""
    b, suppressed, _ = _cosines(np.asarray(bx, float), np.asarray(bz, float), Basis.coerce(basis))
    return suppressed**2 * np.sin(b * t) ** 2


def effective_field_grid(bx, bz, t: float, basis="Z"):
    """Elementwise arctan(n tan(Bt)) folded into (-pi/2, pi/2]."""
    b, _, protected = _cosines(np.asarray(bx, float), np.asarray(bz, float), Basis.coerce(basis))
    angle = np.arctan2(protected * np.sin(b * t), np.cos(b * t))
    angle = np.where(angle > np.pi / 2, angle - np.pi, angle)
    return np.where(angle <= -np.pi / 2, angle + np.pi, angle)


def _syndrome_stats(probe: ProbeSpec, data: ExperimentData):
    k = probe.k_values
    if data.counts_k.size != k.size:
        raise ValueError(f"data has {data.counts_k.size} classes, probe expects {k.size}")
    flips = float(np.sum(k * data.counts_k))
    stays = float(np.sum((probe.n - k) * data.counts_k))
    return flips, stays


def _syndrome_loglik(probe: ProbeSpec, data: ExperimentData, t: float, bx, bz):
    # p_k = C(N,k) b^k (1-b)^(N-k); the binomial factor is constant over the grid
    flips, stays = _syndrome_stats(probe, data)
    b = np.clip(flip_probability(bx, bz, t, probe.basis), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        return xlogy(flips, b) + xlogy(stays, 1.0 - b)


def posterior_from_syndromes(probe: ProbeSpec, data: ExperimentData, t: float,
                             prior: PosteriorGrid) -> PosteriorGrid:
    """Prior times the syndrome-count likelihood, renormalized."""
    if not probe.ancilla_assisted or probe.is_3d:
        raise NotImplementedError("Bayesian estimation covers planar ancilla-assisted probes")
    t = check_time(t)
    bx, bz = prior.mesh()
    log_post = prior.log_density + _syndrome_loglik(probe, data, t, bx, bz)
    return PosteriorGrid.from_log(prior.bx_axis, prior.bz_axis, log_post)


# ---------------------------------------------------------------------------
# effective-field posterior


@dataclass(frozen=True)
class BeffPosterior:
    """Posterior over B_eff on cells of varying width covering (-pi/2, pi/2].

    Only cells within a fixed log-likelihood margin of the maximum are kept;
    the rest carry no representable mass.
    """

    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray

    def mode(self) -> float:
        return float(self.centers[np.argmax(self.weights / self.widths)])

    def hpd_intervals(self, level: float = DEFAULT_BAND) -> np.ndarray:
        """Highest-density set at the given level as disjoint sorted intervals, shape (n, 2)."""
        if not 0.0 < level <= 1.0:
            raise ValueError(f"credible level must lie in (0, 1], got {level}")
        order = np.argsort(-(self.weights / self.widths), kind="stable")
        cum = np.cumsum(self.weights[order])
        n_keep = int(np.searchsorted(cum, level * cum[-1]) + 1)
        chosen = np.sort(order[: min(n_keep, order.size)])
        lo = self.centers[chosen] - self.widths[chosen] / 2
        hi = self.centers[chosen] + self.widths[chosen] / 2
        # merge cells whose edges touch
        gap = lo[1:] > hi[:-1] + 1e-12 * np.maximum(self.widths[chosen][1:], 1e-300)
        starts = np.concatenate([[0], np.flatnonzero(gap) + 1])
        ends = np.concatenate([np.flatnonzero(gap), [chosen.size - 1]])
        return np.column_stack([lo[starts], hi[ends]])


def _beff_loglik(probe: ProbeSpec, data: ExperimentData, beta: np.ndarray) -> np.ndarray:
    arms = (probe.n - probe.k_values).astype(float)
    plus, minus = data.counts_plus.astype(float), data.counts_minus.astype(float)
    used = (plus + minus) > 0
    phase = np.outer(beta, arms[used])
    with np.errstate(divide="ignore"):
        ll = xlogy(plus[used], np.cos(phase) ** 2) + xlogy(minus[used], np.sin(phase) ** 2)
    return ll.sum(axis=1)


def posterior_over_beff(probe: ProbeSpec, data: ExperimentData, n: int | None = None,
                        points: int = DEFAULT_BEFF_POINTS) -> BeffPosterior:
    """Posterior over B_eff from the string outcomes under a flat prior.

    Starts from ``points`` equal cells and subdivides every surviving cell
    until the retained set is resolved by at least a few hundred cells.
    """
    if n is not None and n != probe.n:
        raise ValueError(f"n={n} does not match the probe size {probe.n}")
    points = check_positive_int(points, "points", minimum=3)
    width = np.pi / points
    centers = -np.pi / 2 + width * (np.arange(points) + 0.5)
    widths = np.full(points, width)
    ll = _beff_loglik(probe, data, centers)
    for _ in range(_MAX_REFINE_LEVELS):
        keep = ll >= ll.max() - _KEEP_NATS
        centers, widths, ll = centers[keep], widths[keep], ll[keep]
        if centers.size >= _MIN_RESOLVED_CELLS:
            break
        sub = (np.arange(_REFINE) + 0.5) / _REFINE - 0.5
        centers = (centers[:, None] + widths[:, None] * sub[None, :]).ravel()
        widths = np.repeat(widths / _REFINE, _REFINE)
        ll = _beff_loglik(probe, data, centers)
    keep = ll >= ll.max() - _KEEP_NATS
    centers, widths, ll = centers[keep], widths[keep], ll[keep]
    weights = np.exp(ll - ll.max()) * widths
    return BeffPosterior(centers, widths, weights / weights.sum())


def _band_indicator(intervals: np.ndarray, lo, hi):
    """True where [lo, hi] meets any of the sorted disjoint intervals."""
    idx = np.searchsorted(intervals[:, 0], hi, side="right") - 1
    ok = idx >= 0
    return ok & (intervals[np.maximum(idx, 0), 1] >= lo)


def _beff_range(probe: ProbeSpec, grid: PosteriorGrid, t: float, cellwise: bool):
    bx, bz = grid.mesh()
    if not cellwise:
        beff = effective_field_grid(bx, bz, t, probe.basis)
        return beff, beff
    dx, dz = grid.steps
    corners = [
        effective_field_grid(bx + sx * dx / 2, bz + sz * dz / 2, t, probe.basis)
        for sx in (-1, 1) for sz in (-1, 1)
    ]
    corners.append(effective_field_grid(bx, bz, t, probe.basis))
    stack = np.array(corners)
    lo, hi = stack.min(axis=0), stack.max(axis=0)
    # a cell straddling the +-pi/2 fold covers both ends of the range
    wraps = hi - lo > np.pi / 2
    lo = np.where(wraps, -np.pi / 2, lo)
    hi = np.where(wraps, np.pi / 2, hi)
    return lo, hi


def combine_posteriors(syndrome_post: PosteriorGrid, beff_post: BeffPosterior, probe: ProbeSpec,
                       t: float, band: float = DEFAULT_BAND, cellwise: bool = False) -> PosteriorGrid:
    """Keep only grid cells whose B_eff lies in the highest-density band.

    With ``cellwise=True`` a cell is kept if any point of it could map into
    the band (range over its corners), which is what a coarse grid needs when
    the band is narrower than a cell.
    """
    if not 0.0 < band < 1.0 + 1e-15:
        raise ValueError(f"band must lie in (0, 1), got {band}")
    t = check_time(t)
    intervals = beff_post.hpd_intervals(band)
    lo, hi = _beff_range(probe, syndrome_post, t, cellwise)
    inside = _band_indicator(intervals, lo, hi)
    log_post = np.where(inside, syndrome_post.log_density, -np.inf)
    if not np.isfinite(log_post).any():
        raise EmptyOverlapError("the effective-field band does not meet the syndrome posterior")
    return PosteriorGrid.from_log(syndrome_post.bx_axis, syndrome_post.bz_axis, log_post)


# ---------------------------------------------------------------------------
# zoomed joint posterior


def _joint_log_posterior(grid: PosteriorGrid, items, t: float, band: float, cellwise: bool):
    total = np.zeros(grid.shape)
    for probe, data, beff_post in items:
        post = posterior_from_syndromes(probe, data, t, grid)
        post = combine_posteriors(post, beff_post, probe, t, band, cellwise=cellwise)
        total = total + post.log_density
    return PosteriorGrid.from_log(grid.bx_axis, grid.bz_axis, total)


def _dominant_box(post: PosteriorGrid, nats: float, pad: int = 2):
    ld = post.log_density
    mask = ld >= ld.max() - nats
    labels, count = ndimage.label(mask)
    if count > 1:
        masses = [logsumexp(ld[labels == i]) for i in range(1, count + 1)]
        mask = labels == 1 + int(np.argmax(masses))
    rows, cols = np.flatnonzero(mask.any(axis=1)), np.flatnonzero(mask.any(axis=0))
    dx, dz = post.steps
    return (
        post.bx_axis[rows[0]] - (pad + 0.5) * dx,
        post.bx_axis[rows[-1]] + (pad + 0.5) * dx,
        post.bz_axis[cols[0]] - (pad + 0.5) * dz,
        post.bz_axis[cols[-1]] + (pad + 0.5) * dz,
    )


def estimate_field(probes, datasets, t: float, box=DEFAULT_BOX, cells: int = DEFAULT_GRID,
                   beff_points: int = DEFAULT_BEFF_POINTS, band: float = DEFAULT_BAND) -> PosteriorGrid:
    """Joint posterior over (bx, bz) from one dataset per probe, zoomed to resolution."""
    t = check_time(t)
    if len(probes) != len(datasets):
        raise ValueError("need exactly one dataset per probe")
    items = [(p, d, posterior_over_beff(p, d, points=beff_points)) for p, d in zip(probes, datasets)]
    prior = uniform_prior(box, cells)
    lo_x, hi_x, lo_z, hi_z = map(float, box)
    post = _joint_log_posterior(prior, items, t, band, cellwise=True)
    for _ in range(_MAX_ZOOMS):
        if np.all(post.std() >= _CELLS_PER_STD * np.array(post.steps)):
            break
        bx0, bx1, bz0, bz1 = _dominant_box(post, _ZOOM_NATS)
        bx0, bz0 = max(bx0, lo_x), max(bz0, lo_z)
        bx1, bz1 = min(bx1, hi_x), min(bz1, hi_z)
        grid = PosteriorGrid.from_log(
            _cell_axis(bx0, bx1, cells), _cell_axis(bz0, bz1, cells), np.zeros((cells, cells))
        )
        post = _joint_log_posterior(grid, items, t, band, cellwise=True)
    grid = PosteriorGrid.from_log(post.bx_axis, post.bz_axis, np.zeros(post.shape))
    try:
        return _joint_log_posterior(grid, items, t, band, cellwise=False)
    except EmptyOverlapError:
        return post


# ---------------------------------------------------------------------------
# repeated experiments


@dataclass
class EstimationResult:
    estimates: np.ndarray  # (r, 2); NaN rows for flagged repetitions
    flagged: np.ndarray  # (r,) bool
    covariance: np.ndarray | None
    m: int
    r: int
    reference_trace_inverse: float | None = None
    failures: list = dc_field(default_factory=list)

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())

    @property
    def scaled_trace(self) -> float | None:
        """M * Tr[Cov], comparable with Tr[F^-1]."""
        if self.covariance is None:
            return None
        return float(self.m * np.trace(self.covariance))

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "r": self.r,
            "n_flagged": self.n_flagged,
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "m_trace_cov": self.scaled_trace,
            "reference_trace_inverse": self.reference_trace_inverse,
            "mean_estimate": np.nanmean(self.estimates, axis=0).tolist() if self.n_flagged < self.r else None,
        }


def _sample_covariance(estimates: np.ndarray) -> np.ndarray | None:
    if estimates.shape[0] < 2:
        return None
    cov = np.cov(estimates, rowvar=False)
    return 0.5 * (cov + cov.T)


def simulate_datasets(probes, truth: MagneticField, t: float, m: int, seed: int, repetition: int):
    return [
        sample_experiment(outcome_model(p, truth, t), m, seed, repetition, stream=i)
        for i, p in enumerate(probes)
    ]


def run_estimation(probes, truth: MagneticField, t: float, m: int, r: int, seed: int = 0,
                   box=DEFAULT_BOX, cells: int = DEFAULT_GRID, beff_points: int = DEFAULT_BEFF_POINTS,
                   band: float = DEFAULT_BAND) -> EstimationResult:
    """Simulate r experiments of m shots per probe and estimate each by the posterior mean."""
    if isinstance(probes, ProbeSpec):
        probes = [probes]
    m = check_positive_int(m, "m")
    r = check_positive_int(r, "r")
    seed = check_random_state_seed(seed)
    estimator = BayesianFieldEstimator(t=t, box=box, cells=cells, beff_points=beff_points, band=band)
    experiments = [simulate_datasets(probes, truth, t, m, seed, rep) for rep in range(r)]
    estimator.fit(experiments, probes=probes)
    try:
        reference = trace_inverse(cfim_total(probes, truth, t))
    except NumericalError:
        reference = None
    return EstimationResult(
        estimates=estimator.estimates_,
        flagged=estimator.flagged_,
        covariance=estimator.covariance_,
        m=m,
        r=r,
        reference_trace_inverse=reference,
        failures=estimator.failures_,
    )


class BayesianFieldEstimator(BaseEstimator):
    """Posterior-mean estimator of a planar field from error-corrected probes.

    ``fit`` takes a sequence of experiments, each a list with one
    ExperimentData per probe, and stores per-experiment estimates and their
    sample covariance.
    """

    def __init__(self, t: float = 1.0, box=DEFAULT_BOX, cells: int = DEFAULT_GRID,
                 beff_points: int = DEFAULT_BEFF_POINTS, band: float = DEFAULT_BAND):
        self.t = t
        self.box = box
        self.cells = cells
        self.beff_points = beff_points
        self.band = band

    def _estimate_one(self, probes, datasets):
        post = estimate_field(probes, datasets, self.t, self.box, self.cells, self.beff_points, self.band)
        return post.mean()

    def fit(self, X, probes=None):
        if probes is None:
            raise ValueError("probes must be given: one ProbeSpec per dataset in each experiment")
        probes = list(probes)
        estimates, flagged, failures = [], [], []
        for rep, datasets in enumerate(X):
            try:
                estimates.append(self._estimate_one(probes, datasets))
                flagged.append(False)
            except NumericalError as exc:
                estimates.append(np.full(2, np.nan))
                flagged.append(True)
                failures.append((rep, str(exc)))
        self.probes_ = probes
        self.estimates_ = np.array(estimates).reshape(-1, 2)
        self.flagged_ = np.array(flagged, dtype=bool)
        self.failures_ = failures
        self.covariance_ = _sample_covariance(self.estimates_[~self.flagged_])
        return self

    def predict(self, X) -> np.ndarray:
        """Posterior-mean estimates for new experiments; NaN where the overlap is empty."""
        if not hasattr(self, "probes_"):
            raise AttributeError("estimator is not fitted; call fit first")
        out = []
        for datasets in X:
            try:
                out.append(self._estimate_one(self.probes_, datasets))
            except NumericalError:
                out.append(np.full(2, np.nan))
        return np.array(out).reshape(-1, 2)
