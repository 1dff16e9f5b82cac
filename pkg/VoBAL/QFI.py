"""
Quantum Fisher information about the axial position of the source.

All values are per detected photon and expressed in units of 1/z_R^2. The numerical generator
variance of :mod:`VoBAL.oscillator` is the reference; the closed forms are kept next to it, evaluated
as printed, so they can be compared rather than trusted.
"""
import enum
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from VoBAL.beam import BeamGeometry, LGIndex, ModeSuperposition
from VoBAL.oscillator import HLIndex, generator_variance, hl_expand, hl_variance_closed

logger = logging.getLogger(__name__)


class FisherSource(str, enum.Enum):
    CLOSED_FORM_PURE = "closed_form_pure"
    CLOSED_FORM_HL = "closed_form_hl"
    CLOSED_FORM_SUPERPOSITION = "closed_form_superposition"
    VARIANCE_ORACLE = "variance_oracle"


@dataclass(frozen=True)
class FisherValue:
    """
    A Fisher information in units of 1/z_R^2, tagged with how it was obtained.

    Example:

    >>> q = qfi_pure(LGIndex(0, 2))
    >>> q.value, q.source.value
    (3.0, 'closed_form_pure')
    >>> q.physical(BeamGeometry(w0=1.0, k=4.0))
    0.75

    """
    value: float
    source: FisherSource

    def physical(self, geom: BeamGeometry):
        """The same information in inverse squared length units of ``geom``."""
        return self.value / geom.z_R ** 2


def qfi_pure(idx: LGIndex) -> FisherValue:
    """QFI of a pure LG mode, 2p(p + |l|) + 2p + |l| + 1."""
    return FisherValue(float(idx.fisher_weight), FisherSource.CLOSED_FORM_PURE)


def qfi_hl_printed(idx: HLIndex) -> FisherValue:
    """
    Hermite-Laguerre sphere expression as published,

    4 + n1 + n2 (3 + n2) + n1 (3 + 4 n2) + (n1 - n1^2 + n2 + 4 n1 n2 - n2^2) cos(2 theta)

    It does not depend on ``idx.phi_s``. Compare with :func:`VoBAL.oscillator.hl_variance_closed`.
    """
    n1, n2 = idx.n1, idx.n2
    value = 4 + n1 + n2 * (3 + n2) + n1 * (3 + 4 * n2) + (n1 - n1 ** 2 + n2 + 4 * n1 * n2 - n2 ** 2) * np.cos(
        2 * idx.theta)
    return FisherValue(float(value), FisherSource.CLOSED_FORM_HL)


def qfi_two_mode_printed(l, l_prime) -> FisherValue:
    """
    Published QFI of (LG_0l + LG_0l')/sqrt(2), 4 + 2(|l| + |l'|) + (|l| - |l'|)^2.

    :param int l: Azimuthal index of the first mode.
    :param int l_prime: Azimuthal index of the second mode, different from ``l``.
    """
    if l == l_prime:
        raise ValueError(f"The two-mode expression needs different azimuthal indices, got l = l' = {l}")
    a, b = abs(l), abs(l_prime)
    return FisherValue(float(4 + 2 * (a + b) + (a - b) ** 2), FisherSource.CLOSED_FORM_SUPERPOSITION)


def qfi_oracle(state: ModeSuperposition, cutoff=None) -> FisherValue:
    """
    4 Var(G) = Var(G~) / z_R^2 from the truncated generator matrix.

    Example:

    >>> round(qfi_oracle(ModeSuperposition.pure(0, 3)).value, 12)
    4.0

    """
    return FisherValue(float(generator_variance(state, cutoff)), FisherSource.VARIANCE_ORACLE)


def two_mode_indices(state: ModeSuperposition):
    """``(l, l')`` if ``state`` is an equal-weight superposition of two p = 0 modes, else None."""
    if len(state.terms) != 2:
        return None
    (a, ca), (b, cb) = state.terms
    if a.p or b.p or a.l == b.l or not np.isclose(abs(ca), abs(cb), rtol=0, atol=1e-12):
        return None
    return a.l, b.l


def printed_qfi(state: ModeSuperposition):
    """
    The published closed form that applies to ``state``, if any.

    Pure modes use :func:`qfi_pure`, equal two-mode superpositions :func:`qfi_two_mode_printed`.
    Returns None otherwise.
    """
    if state.is_pure:
        return qfi_pure(state.indices[0])
    pair = two_mode_indices(state)
    if pair is not None:
        return qfi_two_mode_printed(*pair)
    return None


def hl_theta_scan(n1, n2, thetas, phi_s=0.0):
    """
    QFI along a meridian of the Hermite-Laguerre sphere.

    :param int n1: First occupation number.
    :param int n2: Second occupation number.
    :param thetas: Polar angles in [0, pi].
    :param float phi_s: Azimuth on the sphere.
    :return: One row per angle with the oracle, the symmetric closed form and the printed expression.
    :rtype: pandas.DataFrame
    """
    rows = []
    for theta in np.asarray(thetas, dtype=float):
        idx = HLIndex(n1, n2, float(theta), phi_s)
        oracle = qfi_oracle(hl_expand(idx)).value
        printed = qfi_hl_printed(idx).value
        rows.append({"theta": float(theta), "oracle": oracle, "closed": hl_variance_closed(n1, n2, theta),
                     "printed": printed, "ratio": printed / oracle})
    return pd.DataFrame(rows, columns=["theta", "oracle", "closed", "printed", "ratio"])


def discrepancy_table(two_mode_pairs=((1, 0), (2, 0), (3, 1)), hl_modes=((0, 0), (1, 0), (1, 1), (2, 0), (2, 1)),
                      theta=0.0):
    """
    Printed closed forms against the variance oracle.

    :return: Columns ``formula``, ``case``, ``printed``, ``oracle`` and ``ratio`` (printed / oracle).
    :rtype: pandas.DataFrame
    """
    rows = []
    for l, l_prime in two_mode_pairs:
        printed = qfi_two_mode_printed(l, l_prime).value
        oracle = qfi_oracle(ModeSuperposition.two_mode(l, l_prime)).value
        rows.append({"formula": "two_mode", "case": f"l={l},l'={l_prime}", "printed": printed, "oracle": oracle})
    for n1, n2 in hl_modes:
        idx = HLIndex(n1, n2, theta)
        printed = qfi_hl_printed(idx).value
        oracle = qfi_oracle(hl_expand(idx)).value
        rows.append({"formula": "hermite_laguerre", "case": f"n1={n1},n2={n2},theta={theta:g}",
                     "printed": printed, "oracle": oracle})
    table = pd.DataFrame(rows, columns=["formula", "case", "printed", "oracle"])
    table["ratio"] = table["printed"] / table["oracle"]
    logger.debug("Printed/oracle ratios:\n%s", table)
    return table
