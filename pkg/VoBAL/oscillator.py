"""
Two-dimensional harmonic oscillator picture of paraxial modes.

LG modes are the Fock states |n+, n-> with l = n+ - n- and p = min(n+, n-). With the mode phase
convention of :mod:`VoBAL.beam` the correspondence is LG_pl = (-1)^p |n+, n->. The dimensionless
generator of axial displacement is

    G~ = (a+ - a-^dag)(a+^dag - a-) = n+ + n- + 1 - a+ a- - a+^dag a-^dag

and the physical generator is G = -G~ / (2 z_R).
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np
from scipy.sparse import lil_matrix

from VoBAL.beam import LGIndex, ModeSuperposition

logger = logging.getLogger(__name__)


class CutoffTooSmallError(ValueError):
    """Raised when a state term would be clipped by the Fock-space truncation."""


@dataclass(frozen=True, order=True)
class FockState:
    n_plus: int
    n_minus: int

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0:
            raise ValueError(f"Occupation numbers must be non-negative, got {self.n_plus}, {self.n_minus}")

    @classmethod
    def from_lg(cls, idx: LGIndex):
        return cls(idx.p + max(idx.l, 0), idx.p + max(-idx.l, 0))

    @property
    def l(self):
        return self.n_plus - self.n_minus

    @property
    def p(self):
        return min(self.n_plus, self.n_minus)

    @property
    def n(self):
        return self.n_plus + self.n_minus

    @property
    def lg_index(self):
        return LGIndex(self.p, self.l)

    @property
    def lg_sign(self):
        """Sign s with LG_pl = s |n+, n->."""
        return -1 if self.p % 2 else 1


@dataclass(frozen=True)
class HLIndex:
    """A mode of the Hermite-Laguerre sphere: occupations n1, n2 of the rotated operators at (theta, phi_s)."""
    n1: int
    n2: int
    theta: float
    phi_s: float = 0.0

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError(f"Occupation numbers must be non-negative, got n1={self.n1}, n2={self.n2}")
        if not 0 <= self.theta <= np.pi:
            raise ValueError(f"Sphere polar angle must lie in [0, pi], got theta={self.theta}")
        object.__setattr__(self, "phi_s", float(np.mod(self.phi_s, 2 * np.pi)))


class GeneratorMatrix:
    """
    Sparse real symmetric matrix of G~ on the Fock states with n+ + n- <= cutoff.

    Typically built through :func:`build_generator`, which caches one matrix per cutoff.
    """

    def __init__(self, cutoff, basis, entries):
        """
        :param int cutoff: Largest n+ + n- retained.
        :param list(FockState) basis: Basis states, in matrix order.
        :param scipy.sparse.csr_matrix entries: The matrix of G~.
        """
        self.cutoff = cutoff
        self.basis = tuple(basis)
        self.entries = entries
        self._index = {state: i for i, state in enumerate(self.basis)}

    def __len__(self):
        return len(self.basis)

    def index_of(self, state: FockState):
        return self._index[state]

    def element(self, bra: FockState, ket: FockState):
        return self.entries[self.index_of(bra), self.index_of(ket)]

    def vector(self, amplitudes):
        """
        Dense coefficient vector from a ``{FockState: amplitude}`` mapping.
        """
        vec = np.zeros(len(self), dtype=complex)
        for state, c in amplitudes.items():
            if state.n > self.cutoff:
                raise CutoffTooSmallError(f"{state} lies above cutoff {self.cutoff}")
            vec[self.index_of(state)] += c
        return vec


def _fock_basis(cutoff):
    return [FockState(n - m, m) for n in range(cutoff + 1) for m in range(n + 1)]


@lru_cache(maxsize=32)
def build_generator(cutoff) -> GeneratorMatrix:
    """
    Build G~ on the truncated basis.

    Diagonal entries are n+ + n- + 1; the only couplings are |n+, n-> <-> |n+ + 1, n- + 1> with element
    -sqrt((n+ + 1)(n- + 1)).

    :param int cutoff: Largest total excitation n+ + n- kept.
    :return: The generator.
    :rtype: GeneratorMatrix
    """
    if cutoff < 0:
        raise ValueError(f"Cutoff must be non-negative, got {cutoff}")
    basis = _fock_basis(cutoff)
    index = {state: i for i, state in enumerate(basis)}
    entries = lil_matrix((len(basis), len(basis)))
    for state, i in index.items():
        entries[i, i] = state.n + 1
        raised = FockState(state.n_plus + 1, state.n_minus + 1)
        if raised.n <= cutoff:
            j = index[raised]
            element = -np.sqrt((state.n_plus + 1) * (state.n_minus + 1))
            entries[i, j] = element
            entries[j, i] = element
    logger.debug("Built generator with cutoff %d (%d basis states)", cutoff, len(basis))
    return GeneratorMatrix(cutoff, basis, entries.tocsr())


def fock_amplitudes(state: ModeSuperposition):
    """Map LG coefficients onto Fock amplitudes, applying the (-1)^p phase convention."""
    amplitudes = {}
    for idx, c in state.terms:
        fock = FockState.from_lg(idx)
        amplitudes[fock] = fock.lg_sign * c
    return amplitudes


def generator_moments(state: ModeSuperposition, cutoff=None):
    """
    First and second moments <G~>, <G~^2> of the generator in ``state``.

    :param ModeSuperposition state: Normalised state.
    :param int cutoff: Fock cutoff; defaults to the smallest exact one, ``state.max_excitation + 2``.
    """
    needed = state.max_excitation + 2
    if cutoff is None:
        cutoff = needed
    if cutoff < needed:
        raise CutoffTooSmallError(
            f"Cutoff {cutoff} clips the raising terms of a state with excitation {state.max_excitation}; "
            f"need at least {needed}")
    generator = build_generator(cutoff)
    psi = generator.vector(fock_amplitudes(state))
    g_psi = generator.entries @ psi
    mean = np.vdot(psi, g_psi).real
    second = np.vdot(g_psi, g_psi).real
    return mean, second


def generator_variance(state: ModeSuperposition, cutoff=None):
    """
    Var(G~) = <G~^2> - <G~>^2. The QFI in physical units is Var(G~) / z_R^2.

    Example:

    >>> round(generator_variance(ModeSuperposition.two_mode(2, 0)), 10)
    3.0

    """
    mean, second = generator_moments(state, cutoff)
    return second - mean ** 2


def hl_amplitudes(idx: HLIndex):
    """
    Fock amplitudes of (a1^dag)^n1 (a2^dag)^n2 |0,0> / sqrt(n1! n2!) with

    a1^dag = e^{i phi/2} cos(theta/2) a+^dag + e^{-i phi/2} sin(theta/2) a-^dag
    a2^dag = -e^{i phi/2} sin(theta/2) a+^dag + e^{-i phi/2} cos(theta/2) a-^dag
    """
    c, s = np.cos(idx.theta / 2), np.sin(idx.theta / 2)
    e_plus, e_minus = np.exp(0.5j * idx.phi_s), np.exp(-0.5j * idx.phi_s)
    # coefficients of a+^dag and a-^dag in each rotated creation operator
    alpha, beta = complex(e_plus * c), complex(e_minus * s)
    gamma, delta = complex(-e_plus * s), complex(e_minus * c)
    n_total = idx.n1 + idx.n2
    amplitudes = np.zeros(n_total + 1, dtype=complex)
    for j in range(idx.n1 + 1):
        left = comb(idx.n1, j) * alpha ** j * beta ** (idx.n1 - j)
        for k in range(idx.n2 + 1):
            right = comb(idx.n2, k) * gamma ** k * delta ** (idx.n2 - k)
            amplitudes[j + k] += left * right
    m = np.arange(n_total + 1)
    weights = np.array([np.sqrt(factorial(int(i)) * factorial(int(n_total - i))) for i in m])
    amplitudes *= weights / np.sqrt(factorial(idx.n1) * factorial(idx.n2))
    return {FockState(int(i), int(n_total - i)): amplitudes[i] for i in m}


def hl_expand(idx: HLIndex, atol=1e-14) -> ModeSuperposition:
    """
    LG expansion of a Hermite-Laguerre sphere mode. theta = 0 gives |n1, n2>, theta = pi/2 a Hermite-Gauss mode.

    :param HLIndex idx: The sphere mode.
    :param float atol: Amplitudes below this magnitude are dropped.
    """
    terms = [(fock.lg_index, fock.lg_sign * c) for fock, c in hl_amplitudes(idx).items() if abs(c) > atol]
    return ModeSuperposition.normalised(terms, warn=False)


def hl_variance_closed(n1, n2, theta):
    """
    Closed form of Var(G~) along the sphere, 4 Var = A + C cos(2 theta) with
    A = 4 + 3 n1 + 3 n2 + n1^2 + n2^2 + 4 n1 n2 and C = n1 + n2 - n1^2 - n2^2 + 4 n1 n2.
    """
    A = 4 + 3 * n1 + 3 * n2 + n1 ** 2 + n2 ** 2 + 4 * n1 * n2
    C = n1 + n2 - n1 ** 2 - n2 ** 2 + 4 * n1 * n2
    return (A + C * np.cos(2 * theta)) / 4
