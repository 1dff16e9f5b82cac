"""
Classical Fisher information of ideal intensity detection in a transverse plane.

Densities are integrated in the dimensionless coordinates of :mod:`VoBAL.beam`, with u = rho^2 on
[0, (r_max_factor w(z)/w0)^2]. On each ring the field is a finite Fourier series in phi, so the ring
integral of (dp)^2 / p is taken exactly from the roots of that series seen as a polynomial in exp(-i phi).
The ring integral has a kink wherever a field zero crosses the ring, and the Gauss-Legendre rule in u is
split there. The azimuthal marginal uses the periodic trapezoid rule in phi. Every returned information
is per detected photon, in units of 1/z_R^2.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.optimize import minimize_scalar
from scipy.special import binom, gamma, gammaln, roots_legendre
from tqdm.auto import tqdm

from VoBAL.beam import BeamGeometry, LGIndex, ModeSuperposition, mode_field, propagate_params
from VoBAL.QFI import FisherValue, printed_qfi, qfi_oracle

logger = logging.getLogger(__name__)

# roots this close to the unit circle count as on it
_CIRCLE_TOL = 1e-9
_BISECTION_STEPS = 60


class QuadratureConvergenceError(RuntimeError):
    """
    Raised when grid doubling runs out before the estimates settle.

    :ivar numpy.ndarray previous: Total, radial and azimuthal information on the second finest grid.
    :ivar numpy.ndarray last: The same on the finest grid.
    :ivar tuple(int, int) grid: Radial and azimuthal node counts of the finest grid.
    """
    components = ("total", "radial", "azimuthal")

    def __init__(self, previous, last, grid):
        self.previous = np.broadcast_to(np.asarray(previous, dtype=float), (3,)).copy()
        self.last = np.broadcast_to(np.asarray(last, dtype=float), (3,)).copy()
        self.grid = grid
        pairs = ", ".join(f"{name} {a!r} and {b!r}" for name, a, b in zip(self.components, self.previous, self.last))
        super().__init__(f"Quadrature did not converge on a {grid[0]}x{grid[1]} grid: last two estimates {pairs}")


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Quadrature settings.

    :param int n_radial: Gauss-Legendre nodes in u = rho^2, spread over the panels between field-zero radii.
    :param int n_azimuthal: Trapezoid nodes in phi.
    :param float r_max_factor: Truncation radius in units of w(z).
    :param float density_floor: Rings and marginal nodes with density below this fraction of the maximum are
        skipped.
    :param float refine_tolerance: Relative change between successive grids accepted as converged.
    :param int max_refinements: Number of grid doublings before giving up.
    :param float abs_floor: Absolute scale below which changes count as converged, for values that vanish.
    """
    n_radial: int = 256
    n_azimuthal: int = 256
    r_max_factor: float = 8.0
    density_floor: float = 1e-13
    refine_tolerance: float = 1e-6
    max_refinements: int = 4
    abs_floor: float = 1e-12

    def __post_init__(self):
        if self.n_radial < 8 or self.n_azimuthal < 8:
            raise ValueError(f"Need at least 8 nodes per direction, got {self.n_radial}x{self.n_azimuthal}")
        if self.r_max_factor < 4:
            raise ValueError(f"r_max_factor must be at least 4, got {self.r_max_factor}")
        if not 0 < self.density_floor <= 1e-8:
            raise ValueError(f"density_floor must lie in (0, 1e-8], got {self.density_floor}")
        if not 0 < self.refine_tolerance <= 1e-3:
            raise ValueError(f"refine_tolerance must lie in (0, 1e-3], got {self.refine_tolerance}")
        if self.max_refinements < 1:
            raise ValueError(f"max_refinements must be at least 1, got {self.max_refinements}")
        if not self.abs_floor > 0:
            raise ValueError(f"abs_floor must be positive, got {self.abs_floor}")

    def refined(self):
        return replace(self, n_radial=2 * self.n_radial, n_azimuthal=2 * self.n_azimuthal)


class FisherComponents(NamedTuple):
    total: float
    radial: float
    azimuthal: float
    converged: bool
    grid: tuple


class OptimalPlane(NamedTuple):
    z_opt: float
    f_max: float


@lru_cache(maxsize=64)
def _legendre_rule(n):
    return roots_legendre(n)


def _fisher_sum(p, dp, weights, density_floor):
    p, dp = np.broadcast_arrays(p, dp)
    weights = np.broadcast_to(weights, p.shape)
    keep = p > density_floor * p.max()
    return float(np.sum(dp[keep] ** 2 / p[keep] * weights[keep]))


def angular_coefficients(state: ModeSuperposition, rho, zeta):
    """
    Fourier coefficients of the field and of its zeta-derivative on rings of radius ``rho``.

    Column j multiplies exp(-i (l_min + j) phi), where l_min is the lowest azimuthal index of the state.

    :return: Two complex arrays of shape ``(len(rho), l_max - l_min + 1)``.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    orders = [idx.l for idx in state.indices]
    l_min = min(orders)
    q = np.zeros((len(rho), max(orders) - l_min + 1), dtype=complex)
    s = np.zeros_like(q)
    for idx, c in state.terms:
        f, df = mode_field(idx, rho, 0.0, zeta, with_derivative=True)
        q[:, idx.l - l_min] += c * f
        s[:, idx.l - l_min] += c * df
    return q, s


def _polynomial_roots(q):
    """Roots of sum_j q_j w^j with the vanishing lowest and highest coefficients stripped, and the stripped power."""
    nonzero = np.flatnonzero(q)
    if nonzero.size < 2:
        return np.empty(0, dtype=complex), (nonzero[0] if nonzero.size else 0)
    j0, j1 = nonzero[0], nonzero[-1]
    return np.roots(q[j0:j1 + 1][::-1]), j0


def _roots_inside(q):
    roots, _ = _polynomial_roots(q)
    return int(np.sum(np.abs(roots) < 1 - _CIRCLE_TOL))


def _ring_cross_term(q, s):
    """
    Integral over phi of (dPsi)^2 conj(Psi) / Psi on one ring.

    With w = exp(-i phi), Psi = w^l_min Q(w) and dPsi = w^l_min S(w), the integrand is the Laurent
    polynomial N(w) = S(w)^2 conj(Q)(1/w) times 1/Q(w). The Laurent coefficients of 1/Q on |w| = 1 follow
    from its partial fractions: roots outside the circle feed the non-negative powers and roots inside
    the negative ones.
    """
    d = len(q) - 1
    N = np.convolve(np.convolve(s, s), np.conj(q[::-1]))
    n = np.arange(-d, 2 * d + 1)
    nonzero = np.flatnonzero(q)
    if nonzero.size == 0:
        return 0j
    if nonzero.size == 1:
        j = nonzero[0]
        return 2 * np.pi * N[j + d] / q[j]
    roots, j0 = _polynomial_roots(q)
    coeffs = q[j0:nonzero[-1] + 1][::-1]
    residues = 1 / np.polyval(np.polyder(coeffs), roots)
    # coefficient of w^k in 1 / (w^j0 R(w)) is that of w^(k + j0) in 1 / R(w)
    k = j0 - n
    inside = np.abs(roots) < 1
    L = np.zeros(len(k), dtype=complex)
    ahead = k >= 0
    L[ahead] = -np.sum(residues[~inside, None] * roots[~inside, None] ** (-k[ahead] - 1), axis=0)
    L[~ahead] = np.sum(residues[inside, None] * roots[inside, None] ** (-k[~ahead] - 1), axis=0)
    return 2 * np.pi * np.dot(N, L)


def ring_information(q, s):
    """
    Integral over phi of (dp)^2 / p on each ring, one ring per row of the angular coefficients.

    Uses (dp)^2 / p = 2 |dPsi|^2 + 2 Re[(dPsi)^2 conj(Psi) / Psi]. A state with a single azimuthal index has a
    phi-independent density and is integrated directly.

    :param numpy.ndarray q: Field coefficients from :func:`angular_coefficients`.
    :param numpy.ndarray s: Derivative coefficients from :func:`angular_coefficients`.
    :rtype: numpy.ndarray
    """
    q, s = np.atleast_2d(q), np.atleast_2d(s)
    if q.shape[1] == 1:
        p = np.abs(q[:, 0]) ** 2
        dp = 2 * (q[:, 0].real * s[:, 0].real + q[:, 0].imag * s[:, 0].imag)
        return 2 * np.pi * np.divide(dp ** 2, p, out=np.zeros_like(p), where=p > 0)
    out = 4 * np.pi * np.sum(np.abs(s) ** 2, axis=1)
    for i in range(len(q)):
        out[i] += 2 * _ring_cross_term(q[i], s[i]).real
    return out


def field_zero_radii(state: ModeSuperposition, zeta, u_max, n_scan=256):
    """
    Values of u = rho^2 in (0, u_max) where a zero of the field crosses a ring.

    The number of roots inside the unit circle changes exactly there. It is tracked on ``n_scan`` rings
    uniform in rho and each change is located by bisection.
    """
    if len({idx.l for idx in state.indices}) == 1:
        return []

    def count(u):
        return _roots_inside(angular_coefficients(state, np.sqrt(u), zeta)[0][0])

    scan = u_max * (np.arange(1, n_scan + 1) / n_scan) ** 2
    q, _ = angular_coefficients(state, np.sqrt(scan), zeta)
    counts = [_roots_inside(row) for row in q]
    radii = []
    for i in np.flatnonzero(np.diff(counts)):
        lo, hi, c_lo = scan[i], scan[i + 1], counts[i]
        for _ in range(_BISECTION_STEPS):
            if hi - lo <= 1e-14 * u_max:
                break
            mid = (lo + hi) / 2
            if count(mid) == c_lo:
                lo = mid
            else:
                hi = mid
        radii.append((lo + hi) / 2)
    return radii


def _radial_rule(breaks, n):
    """
    Gauss-Legendre nodes and weights in u for rho d(rho). Each panel gets n/8 nodes plus its share of the
    remaining 7n/8 by length, so a single panel gets exactly ``n``.
    """
    span = breaks[-1] - breaks[0]
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        m = max(1, n // 8 + int(round(7 * n * (b - a) / (8 * span))))
        x, w = _legendre_rule(m)
        nodes.append(a + (b - a) * (x + 1) / 2)
        # rho d(rho) = du / 2
        weights.append(w * (b - a) / 4)
    return np.concatenate(nodes), np.concatenate(weights)


def _components_on_grid(state, zeta, n_radial, n_azimuthal, cfg, breaks):
    u, w_rho = _radial_rule(breaks, n_radial)
    q, s = angular_coefficients(state, np.sqrt(u), zeta)

    ring_density = np.sum(np.abs(q) ** 2, axis=1)
    keep = ring_density > cfg.density_floor * ring_density.max()
    total = float(np.sum(w_rho[keep] * ring_information(q[keep], s[keep])))

    # marginals: derivatives taken under the integral
    ring_score = 2 * np.sum(q.real * s.real + q.imag * s.imag, axis=1)
    radial = _fisher_sum(2 * np.pi * ring_density, 2 * np.pi * ring_score, w_rho, cfg.density_floor)

    phi = 2 * np.pi * np.arange(n_azimuthal) / n_azimuthal
    E = np.exp(-1j * np.outer(np.arange(q.shape[1]), phi))
    gram = (w_rho[:, None] * q).T @ q.conj()
    d_gram = (w_rho[:, None] * s).T @ q.conj()
    d_gram = d_gram + d_gram.conj().T
    p_phi = np.einsum("jk,jl,lk->k", E, gram, E.conj()).real
    dp_phi = np.einsum("jk,jl,lk->k", E, d_gram, E.conj()).real
    azimuthal = _fisher_sum(p_phi, dp_phi, 2 * np.pi / n_azimuthal, cfg.density_floor)
    return np.array([total, radial, azimuthal])


def _fisher_at_zeta(state, zeta, cfg, strict=True):
    u_max = cfg.r_max_factor ** 2 * (1 + zeta ** 2)
    breaks = [0.0, *field_zero_radii(state, zeta, u_max, cfg.n_radial), u_max]
    n_r, n_phi = cfg.n_radial, cfg.n_azimuthal
    previous = _components_on_grid(state, zeta, n_r, n_phi, cfg, breaks)
    for _ in range(cfg.max_refinements):
        n_r, n_phi = 2 * n_r, 2 * n_phi
        last = _components_on_grid(state, zeta, n_r, n_phi, cfg, breaks)
        change = np.abs(last - previous)
        if np.all(change <= cfg.refine_tolerance * np.maximum(np.abs(last), cfg.abs_floor)):
            return FisherComponents(*last, converged=True, grid=(n_r, n_phi))
        logger.debug("zeta=%g grid %dx%d: relative change %s", zeta, n_r, n_phi,
                     change / np.maximum(np.abs(last), cfg.abs_floor))
        estimates = (previous, last)
        previous = last
    error = QuadratureConvergenceError(*estimates, (n_r, n_phi))
    if strict:
        raise error
    logger.warning("%s at z/z_R=%g", error, zeta)
    return FisherComponents(*last, converged=False, grid=(n_r, n_phi))


def fisher_components(state: ModeSuperposition, geom: BeamGeometry, z, cfg=QuadratureConfig(), strict=True):
    """
    Total, radial and azimuthal Fisher information at one detection plane.

    :param ModeSuperposition state: The beam.
    :param BeamGeometry geom: Beam geometry.
    :param float z: Distance of the detection plane from the waist.
    :param QuadratureConfig cfg: Quadrature settings.
    :param bool strict: If False, a grid that never converges yields the finest estimates with
        ``converged=False`` instead of raising :class:`QuadratureConvergenceError`.
    :rtype: FisherComponents
    """
    return _fisher_at_zeta(state, z / geom.z_R, cfg, strict)


def cfi_total(state: ModeSuperposition, geom: BeamGeometry, z, cfg=QuadratureConfig()):
    """
    Fisher information of the full transverse intensity, the integral of (dp/dz)^2 / p r dr dphi.

    Example:

    >>> geom = BeamGeometry(w0=1.0, k=2.0)
    >>> round(cfi_total(ModeSuperposition.pure(0, 0), geom, 1.0), 6)
    1.0

    """
    return fisher_components(state, geom, z, cfg).total


def cfi_radial(state: ModeSuperposition, geom: BeamGeometry, z, cfg=QuadratureConfig()):
    """Fisher information of the radial marginal, the intensity integrated over phi."""
    return fisher_components(state, geom, z, cfg).radial


def cfi_azimuthal(state: ModeSuperposition, geom: BeamGeometry, z, cfg=QuadratureConfig()):
    """Fisher information of the azimuthal marginal, the intensity integrated over r dr."""
    return fisher_components(state, geom, z, cfg).azimuthal


def cfi_pure_closed(idx: LGIndex, geom: BeamGeometry, z):
    """
    Closed form for a pure LG mode, [2p(p + |l|) + 2p + |l| + 1] / (R(z)^2 / 4), in units of 1/z_R^2.
    """
    inv_R = propagate_params(geom, idx, z).inv_R
    return 4 * idx.fisher_weight * (inv_R * geom.z_R) ** 2


def laguerre_product_integral(mu, p, l, p_prime, l_prime):
    """
    Integral over t in [0, inf) of exp(-t) t^mu L_p^l(t) L_p'^l'(t) as the finite sum

    (-1)^(p + p') Gamma(mu + 1) sum_k C(mu - l, p - k) C(mu - l', p' - k) C(mu + k, k)

    for k from 0 to min(p, p').
    """
    if not mu > -1:
        raise ValueError(f"The integral diverges for mu <= -1, got mu={mu}")
    if min(p, l, p_prime, l_prime) < 0:
        raise ValueError(f"Indices must be non-negative, got p={p}, l={l}, p'={p_prime}, l'={l_prime}")
    k = np.arange(min(p, p_prime) + 1)
    terms = binom(mu - l, p - k) * binom(mu - l_prime, p_prime - k) * binom(mu + k, k)
    return float((-1) ** (p + p_prime) * gamma(mu + 1) * terms.sum())


def intensity_fisher_coefficient(idx: LGIndex):
    """
    The constant K with F = K (w'(z)/w(z))^2 for a pure mode, assembled from six Laguerre product integrals.

    With t = 2r^2/w^2 and a = |l|, the score of the intensity is proportional to
    (2t - 2 - 2a) L_p^a(t) + 4t L_{p-1}^{a+1}(t), so K = p!/(p+a)! times the integral of its square against
    t^a exp(-t). The result equals 4 [2p(p + |l|) + 2p + |l| + 1].
    """
    p, a = idx.p, abs(idx.l)
    same = [laguerre_product_integral(mu, p, a, p, a) for mu in (a, a + 1, a + 2)]
    K = 4 * (same[2] - 2 * (1 + a) * same[1] + (1 + a) ** 2 * same[0])
    if p > 0:
        cross = [laguerre_product_integral(mu, p, a, p - 1, a + 1) for mu in (a + 1, a + 2)]
        lowered = laguerre_product_integral(a + 2, p - 1, a + 1, p - 1, a + 1)
        K += 16 * (cross[1] - (1 + a) * cross[0]) + 16 * lowered
    return float(K * np.exp(gammaln(p + 1) - gammaln(p + a + 1)))


def find_optimal_plane(state: ModeSuperposition, geom: BeamGeometry, z_range=None, cfg=QuadratureConfig(),
                       n_coarse=64, n_jobs=1, progress=False) -> OptimalPlane:
    """
    Detection plane of maximal intensity Fisher information on the positive branch.

    A coarse scan of ``n_coarse`` planes brackets the maximum, which is then refined by golden-section
    search to 1e-4 z_R.

    :param z_range: ``(z_min, z_max)`` within (0, 5 z_R]; defaults to (0.02, 5) z_R.
    :return: Maximising ``z_opt`` (same units as ``z_range``) and ``f_max`` (1/z_R^2).
    :rtype: OptimalPlane
    """
    z_R = geom.z_R
    lo, hi = (0.02 * z_R, 5 * z_R) if z_range is None else z_range
    if not 0 < lo < hi <= 5 * z_R * (1 + 1e-12):
        raise ValueError(f"z_range must satisfy 0 < z_min < z_max <= 5 z_R, got ({lo}, {hi}) with z_R={z_R}")
    zetas = np.linspace(lo / z_R, hi / z_R, n_coarse)
    coarse = Parallel(n_jobs=n_jobs)(
        delayed(_fisher_at_zeta)(state, zeta, cfg) for zeta in tqdm(zetas, desc="Coarse plane scan",
                                                                     disable=not progress))
    values = np.array([c.total for c in coarse])
    i = int(np.argmax(values))

    objective = lambda zeta: -_fisher_at_zeta(state, zeta, cfg).total
    if 0 < i < n_coarse - 1:
        try:
            res = minimize_scalar(objective, bracket=(zetas[i - 1], zetas[i], zetas[i + 1]), method="golden",
                                  tol=1e-5)
            zeta_opt, f_max = res.x, -res.fun
            if not zetas[0] <= zeta_opt <= zetas[-1]:
                # golden section may walk off a plateau
                zeta_opt = float(np.clip(zeta_opt, zetas[0], zetas[-1]))
                f_max = -objective(zeta_opt)
        except ValueError:
            logger.warning("Flat objective around z=%g, keeping the coarse maximum", zetas[i] * z_R)
            zeta_opt, f_max = zetas[i], values[i]
    else:
        logger.warning("Fisher information is maximal at the edge of the scanned range (z=%g)", zetas[i] * z_R)
        cell = (zetas[0], zetas[1]) if i == 0 else (zetas[-2], zetas[-1])
        res = minimize_scalar(objective, bounds=cell, method="bounded", options={"xatol": 1e-5})
        zeta_opt, f_max = res.x, -res.fun
    if f_max < values[i]:
        zeta_opt, f_max = zetas[i], values[i]
    return OptimalPlane(float(zeta_opt * z_R), float(f_max))


@dataclass
class FisherReport:
    """
    Intensity Fisher information along a set of detection planes.

    ``z_grid`` is in units of z_R; informations are in 1/z_R^2.
    """
    z_grid: np.ndarray
    f_total: np.ndarray
    f_radial: np.ndarray
    f_azimuthal: np.ndarray
    qfi_reference: FisherValue
    q_printed: Optional[FisherValue] = None
    converged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    columns = ["z_over_zR", "f_total", "f_radial", "f_azimuthal", "q_oracle", "q_printed", "ratio_oracle",
               "ratio_printed", "converged"]

    def __len__(self):
        return len(self.z_grid)

    def to_dataframe(self):
        q_printed = np.nan if self.q_printed is None else self.q_printed.value
        df = pd.DataFrame({
            "z_over_zR": np.asarray(self.z_grid, dtype=float),
            "f_total": self.f_total,
            "f_radial": self.f_radial,
            "f_azimuthal": self.f_azimuthal,
            "q_oracle": self.qfi_reference.value,
            "q_printed": q_printed,
        }, columns=self.columns[:6])
        df["ratio_oracle"] = df["f_total"] / df["q_oracle"]
        df["ratio_printed"] = df["f_total"] / df["q_printed"]
        df["converged"] = np.asarray(self.converged, dtype=bool)
        return df


def scan_report(state: ModeSuperposition, geom: BeamGeometry, z_grid, cfg=QuadratureConfig(), n_jobs=1,
                progress=True) -> FisherReport:
    """
    Evaluate the intensity Fisher information and its marginals on a grid of detection planes.

    Points whose quadrature does not settle are kept with ``converged=False``.

    :param z_grid: Detection plane positions, in the length units of ``geom``.
    :param int n_jobs: Worker processes for joblib.
    :param bool progress: Show a progress bar.
    :rtype: FisherReport
    """
    z_grid = np.asarray(z_grid, dtype=float)
    q = qfi_oracle(state)
    results = Parallel(n_jobs=n_jobs)(
        delayed(fisher_components)(state, geom, z, cfg, strict=False)
        for z in tqdm(z_grid, desc="Fisher scan", disable=not progress))
    columns = np.array([r[:4] for r in results], dtype=float).reshape(-1, 4)
    n_failed = int(np.sum(columns[:, 3] == 0))
    if n_failed:
        logger.warning("%d of %d planes did not converge", n_failed, len(z_grid))
    return FisherReport(z_grid=z_grid / geom.z_R, f_total=columns[:, 0], f_radial=columns[:, 1],
                        f_azimuthal=columns[:, 2], qfi_reference=q, q_printed=printed_qfi(state),
                        converged=columns[:, 3].astype(bool))


def peak_ratio_table(l_values, geom: BeamGeometry, cfg=QuadratureConfig(), z_range=None, n_jobs=1, progress=True):
    """
    Optimal-plane information of (LG_0l + LG_00)/sqrt(2) for each ``l``, against both QFI normalisations.

    :rtype: pandas.DataFrame
    """
    rows = []
    for l in tqdm(l_values, desc="Superpositions", disable=not progress):
        state = ModeSuperposition.two_mode(l, 0)
        z_opt, f_max = find_optimal_plane(state, geom, z_range, cfg, n_jobs=n_jobs)
        q = qfi_oracle(state).value
        q_printed = printed_qfi(state).value
        rows.append({"l": l, "z_opt_over_zR": z_opt / geom.z_R, "f_max": f_max, "q_oracle": q,
                     "q_printed": q_printed, "ratio_oracle": f_max / q, "ratio_printed": f_max / q_printed})
    return pd.DataFrame(rows, columns=["l", "z_opt_over_zR", "f_max", "q_oracle", "q_printed", "ratio_oracle",
                                       "ratio_printed"])
