import hashlib
import re

import numpy as np

from VoBAL.beam import LGIndex, ModeSuperposition

_INDEX = re.compile(r"p(\d+)l([+-]?\d+)")
_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_REAL = re.compile(_NUMBER)
_IMAG = re.compile(r"([+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)i")


class StateSpecError(ValueError):
    """
    A state specification that does not parse.

    :ivar str text: The full specification.
    :ivar int position: Offset of the offending character.
    """

    def __init__(self, message, text, position):
        self.text, self.position, self.reason = text, position, message
        super().__init__(f"{message} at position {position}\n  {text}\n  {' ' * position}^")


def parse_state_spec(text, warn=True) -> ModeSuperposition:
    """
    Parse a comma-separated list of terms ``p<int>l<int>[*<re>[+<im>i]]`` into a superposition.

    Missing coefficients default to 1 and the result is normalised, with a warning when rescaling was needed.

    Example:

    >>> state = parse_state_spec("p0l2,p0l0", warn=False)
    >>> [str(idx) for idx in state.indices]
    ['p0l2', 'p0l0']

    :param str text: The specification.
    :param bool warn: Warn when the coefficients are not normalised.
    :rtype: ModeSuperposition
    """
    terms = []
    seen = {}
    pos = 0
    text = text.strip()
    if not text:
        raise StateSpecError("Empty state specification", text, 0)
    while True:
        match = _INDEX.match(text, pos)
        if match is None:
            raise StateSpecError("Expected a mode 'p<int>l<int>'", text, pos)
        idx = LGIndex(int(match.group(1)), int(match.group(2)))
        if idx in seen:
            raise StateSpecError(f"Mode {idx} already given at position {seen[idx]}", text, pos)
        seen[idx] = pos
        pos = match.end()
        coefficient = 1 + 0j
        if pos < len(text) and text[pos] == "*":
            pos += 1
            real = _REAL.match(text, pos)
            if real is None:
                raise StateSpecError("Expected a real coefficient after '*'", text, pos)
            coefficient = complex(float(real.group()), 0)
            pos = real.end()
            imag = _IMAG.match(text, pos)
            if imag is not None:
                coefficient += 1j * float(imag.group(1))
                pos = imag.end()
        terms.append((idx, coefficient))
        if pos == len(text):
            break
        if text[pos] != ",":
            raise StateSpecError(f"Unexpected character {text[pos]!r}", text, pos)
        pos += 1
    try:
        return ModeSuperposition.normalised(terms, warn=warn)
    except ValueError as e:
        raise StateSpecError(str(e), text, 0) from e


def format_state_spec(state: ModeSuperposition):
    """Inverse of :func:`parse_state_spec` up to float formatting."""
    return str(state)


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def spawn_seeds(seed, n):
    """
    Independent child seeds for ``n`` tasks, derived from ``seed`` by position only.

    :param int seed: Master seed.
    :param int n: Number of children.
    :rtype: list(numpy.random.SeedSequence)
    """
    return np.random.SeedSequence(seed).spawn(n)
