import warnings
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy.special import gammaln


@dataclass(frozen=True)
class BeamGeometry:
    """
    Geometry of the beam waist. Fixes the length units used everywhere else.

    Example:

    >>> geom = BeamGeometry(w0=1.0, k=2.0)
    >>> geom.z_R
    1.0

    """
    w0: float
    k: float

    def __post_init__(self):
        if not self.w0 > 0:
            raise ValueError(f"Waist radius w0 must be positive, got w0={self.w0}")
        if not self.k > 0:
            raise ValueError(f"Wavenumber k must be positive, got k={self.k}")

    @classmethod
    def from_wavelength(cls, w0, wavelength):
        """
        :param float w0: Waist radius.
        :param float wavelength: Wavelength, in the same length units as ``w0``.
        """
        if not wavelength > 0:
            raise ValueError(f"Wavelength must be positive, got {wavelength}")
        return cls(w0=float(w0), k=2 * np.pi / wavelength)

    @property
    def z_R(self):
        """Rayleigh range, k w0^2 / 2."""
        return self.k * self.w0 ** 2 / 2


@dataclass(frozen=True, order=True)
class LGIndex:
    """Radial index ``p`` and azimuthal index ``l`` of a Laguerre-Gauss mode."""
    p: int
    l: int

    def __post_init__(self):
        if int(self.p) != self.p or int(self.l) != self.l:
            raise ValueError(f"LG indices must be integers, got p={self.p}, l={self.l}")
        if self.p < 0:
            raise ValueError(f"Radial index p must be non-negative, got p={self.p}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "l", int(self.l))

    @property
    def gouy_order(self):
        """Prefactor 2p + |l| + 1 of the Gouy phase."""
        return 2 * self.p + abs(self.l) + 1

    @property
    def fisher_weight(self):
        """2p(p + |l|) + 2p + |l| + 1, the pure-mode information in units of 1/z_R^2."""
        return 2 * self.p * (self.p + abs(self.l)) + 2 * self.p + abs(self.l) + 1

    @property
    def excitation(self):
        """Total oscillator excitation n+ + n- = 2p + |l|."""
        return 2 * self.p + abs(self.l)

    def __str__(self):
        return f"p{self.p}l{self.l}"


@dataclass(frozen=True)
class ModeSuperposition:
    """
    A normalised superposition of LG modes, the initial state of the axial displacement.

    Example:

    >>> state = ModeSuperposition.two_mode(2, 0)
    >>> [str(idx) for idx in state.indices]
    ['p0l2', 'p0l0']

    """
    terms: Tuple[Tuple[LGIndex, complex], ...]

    def __post_init__(self):
        terms = tuple((idx, complex(c)) for idx, c in self.terms)
        if not terms:
            raise ValueError("A superposition needs at least one term")
        indices = [idx for idx, _ in terms]
        if len(set(indices)) != len(indices):
            raise ValueError(f"Duplicate LG indices in superposition: {[str(i) for i in indices]}")
        norm = sum(abs(c) ** 2 for _, c in terms)
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"Superposition is not normalised (sum |c|^2 = {norm!r})")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def normalised(cls, terms: Iterable[Tuple[LGIndex, complex]], warn=True):
        """
        Build a superposition from unnormalised coefficients.

        :param terms: Iterable of ``(LGIndex, coefficient)`` pairs.
        :param bool warn: Emit a warning when the coefficients had to be rescaled.
        """
        terms = [(idx, complex(c)) for idx, c in terms]
        norm = sum(abs(c) ** 2 for _, c in terms)
        if norm == 0:
            raise ValueError("All superposition coefficients are zero")
        if abs(norm - 1) > 1e-12 and warn:
            warnings.warn(f"Superposition coefficients had sum |c|^2 = {norm:.6g}, normalising")
        scale = 1 / np.sqrt(norm)
        return cls(tuple((idx, c * scale) for idx, c in terms))

    @classmethod
    def pure(cls, p, l):
        return cls(((LGIndex(p, l), 1.0),))

    @classmethod
    def two_mode(cls, l, l_prime):
        """Equal-weight superposition (|LG_0l> + |LG_0l'>)/sqrt(2)."""
        c = 1 / np.sqrt(2)
        return cls(((LGIndex(0, l), c), (LGIndex(0, l_prime), c)))

    @property
    def indices(self):
        return [idx for idx, _ in self.terms]

    @property
    def coefficients(self):
        return np.array([c for _, c in self.terms], dtype=complex)

    @property
    def is_pure(self):
        return len(self.terms) == 1

    @property
    def max_excitation(self):
        return max(idx.excitation for idx in self.indices)

    def __str__(self):
        return ",".join(f"{idx}*{c.real!r}{c.imag:+}i" for idx, c in self.terms)


@dataclass(frozen=True)
class PropagatedParams:
    """Wavefront curvature, beam radius and Gouy phase at a plane z."""
    R: float
    w: float
    gouy: float
    inv_R: float


@dataclass(frozen=True)
class CylindricalPoint:
    """
    A point (or broadcastable arrays of points) of the detection volume.

    ``r`` and ``z`` are lengths in the units of the :class:`BeamGeometry`, ``phi`` is in radians.
    """
    r: object
    phi: object
    z: float

    def __post_init__(self):
        if np.any(np.asarray(self.r) < 0):
            raise ValueError("Radial coordinate r must be non-negative")


def laguerre(p, alpha, x):
    """
    Generalised Laguerre polynomial L_p^alpha(x) by the ascending three-term recurrence

    (n+1) L_{n+1} = (2n + 1 + alpha - x) L_n - (n + alpha) L_{n-1}

    Parameters
    ----------
    p : int
        Polynomial degree, non-negative.
    alpha : float
        Shaping parameter.
    x : float or numpy.ndarray
        Evaluation points.

    Returns
    -------
    float or numpy.ndarray
        L_p^alpha evaluated at ``x``.
    """
    if p < 0:
        raise ValueError(f"Laguerre degree must be non-negative, got p={p}")
    x = np.asarray(x, dtype=float)
    L_prev = np.ones_like(x)
    if p == 0:
        return L_prev if L_prev.ndim else float(L_prev)
    L = 1 + alpha - x
    for n in range(1, p):
        L, L_prev = ((2 * n + 1 + alpha - x) * L - (n + alpha) * L_prev) / (n + 1), L
    return L if L.ndim else float(L)


def propagate_params(geom: BeamGeometry, idx: LGIndex, z) -> PropagatedParams:
    """
    Curvature radius, beam radius and Gouy phase of mode ``idx`` at axial distance ``z`` from the waist.

    ``R`` is ``inf`` at the waist; use ``inv_R`` in computations.
    """
    z_R = geom.z_R
    inv_R = z / (z ** 2 + z_R ** 2)
    R = np.inf if z == 0 else z * (1 + (z_R / z) ** 2)
    w = geom.w0 * np.sqrt(1 + (z / z_R) ** 2)
    gouy = idx.gouy_order * np.arctan(z / z_R)
    return PropagatedParams(R=R, w=w, gouy=gouy, inv_R=inv_R)


def _log_norm(idx):
    # sqrt(2 p! / (pi (p+|l|)!)) without factorial overflow
    return 0.5 * (np.log(2) + gammaln(idx.p + 1) - np.log(np.pi) - gammaln(idx.p + abs(idx.l) + 1))


def mode_field(idx: LGIndex, rho, phi, zeta, with_derivative=False):
    """
    Dimensionless LG mode, rho = r/w0 and zeta = z/z_R, in units of 1/w0.

    If ``with_derivative`` is set, also returns d/dzeta of the field through w(z), 1/R(z), the Gouy
    phase and dL_p^a/dX = -L_{p-1}^{a+1}.
    """
    rho = np.asarray(rho, dtype=float)
    phi = np.asarray(phi, dtype=float)
    a = abs(idx.l)
    s2 = 1 + zeta ** 2
    g = zeta / s2  # z_R / R(z)
    X = 2 * rho ** 2 / s2
    envelope = np.exp(_log_norm(idx) - 0.5 * np.log(s2) - X / 2) * X ** (a / 2)
    phase = np.exp(1j * (rho ** 2 * g - idx.l * phi - idx.gouy_order * np.arctan(zeta)))
    L = laguerre(idx.p, a, X)
    field = envelope * L * phase
    if not with_derivative:
        return field

    d_phase = rho ** 2 * (1 - zeta ** 2) / s2 ** 2 - idx.gouy_order / s2
    bracket = L * (g * (X - a - 1) + 1j * d_phase)
    if idx.p > 0:
        bracket = bracket + 2 * g * X * laguerre(idx.p - 1, a + 1, X)
    return field, envelope * phase * bracket


def superposition_field(state: ModeSuperposition, rho, phi, zeta, with_derivative=False):
    """Dimensionless field of a superposition; same conventions as :func:`mode_field`."""
    shape = np.broadcast(np.asarray(rho), np.asarray(phi)).shape
    field = np.zeros(shape, dtype=complex)
    d_field = np.zeros(shape, dtype=complex)
    for idx, c in state.terms:
        if with_derivative:
            f, df = mode_field(idx, rho, phi, zeta, with_derivative=True)
            d_field += c * df
        else:
            f = mode_field(idx, rho, phi, zeta)
        field += c * f
    if with_derivative:
        return field, d_field
    return field


def evaluate_field(state: ModeSuperposition, geom: BeamGeometry, pt: CylindricalPoint):
    """
    Complex amplitude of the superposition at ``pt``, normalised so that the integral of |Psi|^2 r dr dphi
    over any transverse plane is one.

    Example:

    >>> geom = BeamGeometry(w0=1.0, k=2.0)
    >>> round(abs(evaluate_field(ModeSuperposition.pure(0, 0), geom, CylindricalPoint(0.0, 0.0, 0.0))), 6)
    0.797885

    """
    field = superposition_field(state, np.asarray(pt.r) / geom.w0, pt.phi, pt.z / geom.z_R) / geom.w0
    return field if field.ndim else complex(field)


def intensity(state: ModeSuperposition, geom: BeamGeometry, pt: CylindricalPoint):
    """Detection probability density p(r, phi | z) = |Psi|^2."""
    return np.abs(evaluate_field(state, geom, pt)) ** 2


def field_z_derivative(state: ModeSuperposition, geom: BeamGeometry, pt: CylindricalPoint):
    """Analytic axial derivative of :func:`evaluate_field`."""
    _, d_field = superposition_field(state, np.asarray(pt.r) / geom.w0, pt.phi, pt.z / geom.z_R,
                                     with_derivative=True)
    d_field = d_field / (geom.w0 * geom.z_R)
    return d_field if d_field.ndim else complex(d_field)


def density_and_derivative(state: ModeSuperposition, rho, phi, zeta):
    """
    Dimensionless density |Psi|^2 and its zeta-derivative 2 Re(Psi* dPsi) on broadcast (rho, phi) arrays.
    """
    field, d_field = superposition_field(state, rho, phi, zeta, with_derivative=True)
    p = field.real ** 2 + field.imag ** 2
    dp = 2 * (field.real * d_field.real + field.imag * d_field.imag)
    return p, dp
