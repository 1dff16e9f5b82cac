"""
Shot-noise limited axial estimation.

Each frame detects K ~ Poisson(N) photons at positions drawn from the transverse intensity p(r, phi | z);
z is then recovered by maximum likelihood. Repeating frames with independent seeds gives an empirical
variance to set against the classical and quantum Cramer-Rao bounds.
"""
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import minimize_scalar
from scipy.special import roots_legendre
from scipy.stats import chisquare
from tqdm.auto import tqdm

from VoBAL.beam import BeamGeometry, ModeSuperposition, superposition_field
from VoBAL.CFI import QuadratureConfig, cfi_total
from VoBAL.QFI import qfi_oracle
from VoBAL.misc import spawn_seeds

logger = logging.getLogger(__name__)

SAMPLER_RADIAL_NODES = 2048
SAMPLER_AZIMUTHAL_NODES = 512
# more flagged trials than this marks a study unreliable
UNRELIABLE_FRACTION = 0.05


@dataclass(frozen=True)
class EstimationConfig:
    """
    Monte Carlo protocol. Axial positions are in units of z_R.

    :param float n_photons: Expected photons per frame.
    :param int n_trials: Number of independent frames.
    :param float z_true: Position of the detection plane.
    :param tuple(float, float) search_range: Interval searched by the estimator, containing ``z_true``.
    :param int seed: Master seed; each trial gets its own child seed.
    :param int n_coarse: Likelihood evaluations in the bracketing scan.
    :param int n_jobs: Worker processes for joblib.
    """
    n_photons: float
    n_trials: int
    z_true: float
    search_range: Tuple[float, float] = (0.0, 4.0)
    seed: int = 0
    n_coarse: int = 64
    n_jobs: int = 1

    def __post_init__(self):
        if not self.n_photons > 0:
            raise ValueError(f"n_photons must be positive, got {self.n_photons}")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be at least 1, got {self.n_trials}")
        lo, hi = self.search_range
        if not lo < self.z_true < hi:
            raise ValueError(f"z_true={self.z_true} must lie inside the search range ({lo}, {hi})")
        if self.n_coarse < 3:
            raise ValueError(f"n_coarse must be at least 3, got {self.n_coarse}")
        object.__setattr__(self, "search_range", (float(lo), float(hi)))


class MLResult(NamedTuple):
    z_hat: float
    boundary: bool
    degenerate: bool


class ChiSquareResult(NamedTuple):
    statistic: float
    pvalue: float
    n_samples: int


class PhotonSampler:
    """
    Inverse-CDF sampler of detection positions at a fixed plane.

    The radial marginal and the azimuthal conditionals are tabulated on a polar grid of the exact density.
    Radii are interpolated linearly in the radial CDF; for the angle, one of the two neighbouring radial
    nodes is picked with probability given by the distance to it and its conditional CDF is inverted.

    Example:

    >>> geom = BeamGeometry(w0=1.0, k=2.0)
    >>> sampler = PhotonSampler(ModeSuperposition.pure(0, 1), geom, z=1.0)
    >>> sampler.sample(np.random.default_rng(0), 5).shape
    (5, 2)

    """

    def __init__(self, state: ModeSuperposition, geom: BeamGeometry, z, n_radial=SAMPLER_RADIAL_NODES,
                 n_azimuthal=SAMPLER_AZIMUTHAL_NODES, r_max_factor=8.0):
        """
        :param ModeSuperposition state: The beam.
        :param BeamGeometry geom: Beam geometry.
        :param float z: Detection plane, in the length units of ``geom``.
        :param int n_radial: Radial grid nodes.
        :param int n_azimuthal: Azimuthal grid intervals.
        :param float r_max_factor: Grid radius in units of w(z).
        """
        self.state, self.geom, self.z = state, geom, z
        zeta = z / geom.z_R
        self.rho = np.linspace(0, r_max_factor * np.sqrt(1 + zeta ** 2), n_radial)
        self.phi = np.linspace(0, 2 * np.pi, n_azimuthal + 1)
        density = np.abs(superposition_field(state, self.rho[:, None], self.phi[None, :], zeta)) ** 2

        radial = self.rho * density[:, :-1].mean(axis=1) * 2 * np.pi
        self.radial_cdf = cumulative_trapezoid(radial, self.rho, initial=0)
        self.radial_cdf /= self.radial_cdf[-1]

        azimuthal_cdf = cumulative_trapezoid(density, self.phi, axis=1, initial=0)
        totals = azimuthal_cdf[:, -1:]
        uniform = np.broadcast_to(self.phi / (2 * np.pi), azimuthal_cdf.shape)
        # rows with no intensity, e.g. on a vortex core
        self.azimuthal_cdf = np.where(totals > 0, azimuthal_cdf / np.where(totals > 0, totals, 1), uniform)

    def sample(self, rng: np.random.Generator, k):
        """
        Draw ``k`` detection positions.

        :return: Array of shape ``(k, 2)`` holding ``(r, phi)``, r in the length units of the geometry.
        :rtype: np.ndarray
        """
        rho = np.interp(rng.random(k), self.radial_cdf, self.rho)
        position = rho / (self.rho[1] - self.rho[0])
        rows = np.floor(position).astype(int)
        rows = np.minimum(rows + (rng.random(k) < position - rows), len(self.rho) - 1)
        v = rng.random(k)
        phi = np.empty(k)
        order = np.argsort(rows, kind="stable")
        unique, starts = np.unique(rows[order], return_index=True)
        for row, members in zip(unique, np.split(order, starts[1:])):
            phi[members] = np.interp(v[members], self.azimuthal_cdf[row], self.phi)
        return np.column_stack([rho * self.geom.w0, np.mod(phi, 2 * np.pi)])


def sample_photons(state: ModeSuperposition, geom: BeamGeometry, z, n_expected, seed, sampler=None):
    """
    One frame of detections: K ~ Poisson(n_expected) positions drawn from p(r, phi | z).

    :param int seed: Seed of the frame; identical seeds give identical frames.
    :param PhotonSampler sampler: Reuse precomputed tables built for the same state and plane.
    :return: Array of shape ``(K, 2)`` of ``(r, phi)``.
    """
    if n_expected < 0:
        raise ValueError(f"Expected photon number must be non-negative, got {n_expected}")
    if sampler is None:
        sampler = PhotonSampler(state, geom, z)
    rng = np.random.default_rng(seed)
    k = rng.poisson(n_expected)
    return sampler.sample(rng, k)


def log_likelihood(samples, state: ModeSuperposition, geom: BeamGeometry, z):
    """Sum of log p(r_i, phi_i | z) over the detections, up to the constant -2K log(w0)."""
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    density = np.abs(superposition_field(state, samples[:, 0] / geom.w0, samples[:, 1], z / geom.z_R)) ** 2
    return float(np.sum(np.log(np.maximum(density, np.finfo(float).tiny))))


def ml_estimate(samples, state: ModeSuperposition, geom: BeamGeometry, search_range=None, n_coarse=64) -> MLResult:
    """
    Maximum-likelihood plane position.

    The log-likelihood is scanned on ``n_coarse`` planes, then the best interior bracket is refined by
    golden-section search to 1e-4 z_R. A maximum on the first or last plane is returned as is with
    ``boundary`` set; a likelihood with no resolvable maximum sets ``degenerate``.

    :param search_range: ``(z_min, z_max)`` in the length units of ``geom``; defaults to (0, 4 z_R).
    :rtype: MLResult
    """
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    if not len(samples):
        raise ValueError("Maximum-likelihood estimation needs at least one detection")
    z_R = geom.z_R
    lo, hi = (0.0, 4 * z_R) if search_range is None else search_range
    zetas = np.linspace(lo / z_R, hi / z_R, n_coarse)
    objective = lambda zeta: -log_likelihood(samples, state, geom, zeta * z_R)
    values = np.array([-objective(zeta) for zeta in zetas])
    if not np.all(np.isfinite(values)) or np.ptp(values) <= 1e-12 * max(1.0, np.abs(values).max()):
        return MLResult(float(zetas[int(np.argmax(values))] * z_R), boundary=False, degenerate=True)
    i = int(np.argmax(values))
    if i == 0 or i == n_coarse - 1:
        return MLResult(float(zetas[i] * z_R), boundary=True, degenerate=False)
    try:
        res = minimize_scalar(objective, bracket=(zetas[i - 1], zetas[i], zetas[i + 1]), method="golden",
                              tol=1e-5)
    except ValueError:
        return MLResult(float(zetas[i] * z_R), boundary=False, degenerate=True)
    return MLResult(float(res.x * z_R), boundary=False, degenerate=False)


@dataclass
class EstimationRun:
    """
    Outcome of a Monte Carlo study. Estimates and variances are in z_R and z_R^2; informations in 1/z_R^2.
    """
    config: EstimationConfig
    estimates: np.ndarray
    mean_estimate: float
    empirical_variance: float
    f_classical: float
    q_oracle: float
    crb_classical: float
    crb_quantum: float
    efficiency: float
    n_boundary_flags: int
    n_degenerate: int
    unreliable: bool = False
    variance_undefined: bool = False
    photon_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def to_dict(self, include_estimates=False):
        """Plain-typed summary; undefined quantities are ``None``."""
        def finite(x):
            return float(x) if np.isfinite(x) else None

        config = {**asdict(self.config), "search_range": list(self.config.search_range)}
        # worker count does not change results
        config.pop("n_jobs")
        summary = {
            "config": config,
            "mean_estimate": finite(self.mean_estimate),
            "empirical_variance": finite(self.empirical_variance),
            "f_classical": finite(self.f_classical),
            "q_oracle": finite(self.q_oracle),
            "crb_classical": finite(self.crb_classical),
            "crb_quantum": finite(self.crb_quantum),
            "efficiency": finite(self.efficiency),
            "n_boundary_flags": int(self.n_boundary_flags),
            "n_degenerate": int(self.n_degenerate),
            "unreliable": bool(self.unreliable),
            "variance_undefined": bool(self.variance_undefined),
            "mean_photon_count": finite(np.mean(self.photon_counts)) if len(self.photon_counts) else None,
        }
        if include_estimates:
            summary["estimates"] = [finite(z) for z in self.estimates]
        return summary


def _run_trial(sampler, state, geom, seed, n_photons, search_range, n_coarse):
    rng = np.random.default_rng(seed)
    k = rng.poisson(n_photons)
    if k == 0:
        return MLResult(np.nan, boundary=False, degenerate=True), 0
    samples = sampler.sample(rng, k)
    return ml_estimate(samples, state, geom, search_range, n_coarse), k


def _compensated_mean_variance(values):
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, np.nan
    return mean, math.fsum((v - mean) ** 2 for v in values) / (n - 1)


def crb_study(cfg: EstimationConfig, state: ModeSuperposition, geom: BeamGeometry, quadrature=QuadratureConfig(),
              progress=True) -> EstimationRun:
    """
    Repeat shot-noise frames at ``cfg.z_true`` and compare the spread of the ML estimates with the bounds
    1/(N F) and 1/(N Q).

    Results do not depend on ``cfg.n_jobs``: trial ``i`` always uses child seed ``i`` of ``cfg.seed``
    and the reduction is exact.

    Example:

    >>> cfg = EstimationConfig(n_photons=1e4, n_trials=500, z_true=1.0, seed=42)
    >>> run = crb_study(cfg, ModeSuperposition.pure(0, 0), BeamGeometry(w0=1.0, k=2.0))  # doctest: +SKIP
    >>> 0.85 < run.empirical_variance / run.crb_classical < 1.25  # doctest: +SKIP
    True

    :param EstimationConfig cfg: Monte Carlo protocol.
    :param QuadratureConfig quadrature: Settings for the classical Fisher information at ``z_true``.
    :param bool progress: Show a progress bar.
    :rtype: EstimationRun
    """
    z_R = geom.z_R
    z_true = cfg.z_true * z_R
    search_range = (cfg.search_range[0] * z_R, cfg.search_range[1] * z_R)
    sampler = PhotonSampler(state, geom, z_true)
    seeds = spawn_seeds(cfg.seed, cfg.n_trials)
    logger.info("Running %d trials at z=%g z_R with %g expected photons", cfg.n_trials, cfg.z_true, cfg.n_photons)
    trials = Parallel(n_jobs=cfg.n_jobs)(
        delayed(_run_trial)(sampler, state, geom, seed, cfg.n_photons, search_range, cfg.n_coarse)
        for seed in tqdm(seeds, desc="Trials", disable=not progress))

    estimates = np.array([r.z_hat / z_R for r, _ in trials])
    n_boundary = sum(r.boundary for r, _ in trials)
    n_degenerate = sum(r.degenerate for r, _ in trials)
    finite = [float(z) for z in estimates if np.isfinite(z)]
    mean, variance = _compensated_mean_variance(finite) if finite else (np.nan, np.nan)

    f_classical = cfi_total(state, geom, z_true, quadrature)
    q = qfi_oracle(state).value
    crb_classical = 1 / (cfg.n_photons * f_classical) if f_classical > 0 else np.inf
    crb_quantum = 1 / (cfg.n_photons * q)
    efficiency = crb_classical / variance if np.isfinite(variance) and variance > 0 else np.nan

    variance_undefined = not np.isfinite(variance)
    if variance_undefined:
        warnings.warn(f"Empirical variance is undefined with {len(finite)} usable trial(s)")
    unreliable = (n_boundary + n_degenerate) > UNRELIABLE_FRACTION * cfg.n_trials
    if unreliable:
        warnings.warn(f"{n_boundary} boundary and {n_degenerate} degenerate estimates out of {cfg.n_trials} "
                      f"trials; the variance estimate is unreliable")
    return EstimationRun(config=cfg, estimates=estimates, mean_estimate=mean, empirical_variance=variance,
                         f_classical=f_classical, q_oracle=q, crb_classical=crb_classical, crb_quantum=crb_quantum,
                         efficiency=efficiency, n_boundary_flags=int(n_boundary), n_degenerate=int(n_degenerate),
                         unreliable=bool(unreliable), variance_undefined=variance_undefined,
                         photon_counts=np.array([k for _, k in trials], dtype=int))


def _bin_probabilities(state, geom, z, rho_edges, phi_edges, n_nodes=32):
    x, w = roots_legendre(n_nodes)
    zeta = z / geom.z_R
    probabilities = np.empty((len(rho_edges) - 1, len(phi_edges) - 1))
    for i, (r0, r1) in enumerate(zip(rho_edges[:-1], rho_edges[1:])):
        rho = (r1 - r0) * (x + 1) / 2 + r0
        w_rho = w * (r1 - r0) / 2 * rho
        for j, (f0, f1) in enumerate(zip(phi_edges[:-1], phi_edges[1:])):
            phi = (f1 - f0) * (x + 1) / 2 + f0
            w_phi = w * (f1 - f0) / 2
            density = np.abs(superposition_field(state, rho[:, None], phi[None, :], zeta)) ** 2
            probabilities[i, j] = w_rho @ density @ w_phi
    return probabilities


def chi_square_check(state: ModeSuperposition, geom: BeamGeometry, z, n_samples=100_000, seed=0, n_bins=16,
                     sampler=None) -> ChiSquareResult:
    """
    Goodness of fit of sampled detections against the exact density.

    Radial bins are equiprobable under the sampler's radial table and azimuthal bins are uniform; the expected
    counts come from Gauss-Legendre integration of p over each bin.

    :rtype: ChiSquareResult
    """
    if sampler is None:
        sampler = PhotonSampler(state, geom, z)
    samples = sampler.sample(np.random.default_rng(seed), n_samples)
    rho_edges = np.interp(np.linspace(0, 1, n_bins + 1), sampler.radial_cdf, sampler.rho)
    rho_edges[0], rho_edges[-1] = 0.0, sampler.rho[-1]
    phi_edges = np.linspace(0, 2 * np.pi, n_bins + 1)
    observed, _, _ = np.histogram2d(samples[:, 0] / geom.w0, samples[:, 1], bins=[rho_edges, phi_edges])
    expected = _bin_probabilities(state, geom, z, rho_edges, phi_edges)
    expected *= n_samples / expected.sum()
    result = chisquare(observed.ravel(), expected.ravel())
    logger.debug("chi-square %g, p-value %g", result.statistic, result.pvalue)
    return ChiSquareResult(float(result.statistic), float(result.pvalue), n_samples)
