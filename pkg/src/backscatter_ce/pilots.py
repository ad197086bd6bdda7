"""Tag pilot matrices for time-spread backscatter channel estimation.

Row 0 of every pilot matrix is the all-ones sequence carried implicitly by
the RF source; rows 1..K are the tag sequences. A usable design keeps every
tag row orthogonal to the all-ones row and to every other tag row, and has
``X @ X^H == tau * I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

Design = Literal["hadamard", "zc", "dft", "custom"]

DEFAULT_TOLERANCE = 1e-10
_UNIT_MODULUS_TOL = 1e-12


class PilotValidationError(ValueError):
    """Raised when a pilot matrix violates the contamination-free conditions."""


@dataclass(frozen=True)
class PilotMatrix:
    """A ``(K+1) x tau`` pilot matrix; row 0 belongs to the RF source."""

    entries: np.ndarray
    design: Design = "custom"

    def __post_init__(self):
        x = np.array(self.entries, dtype=complex, copy=True)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"pilot matrix must be 2-D with at least one row, got shape {x.shape}")
        if x.shape[0] > x.shape[1]:
            raise ValueError(f"need tau >= K+1, got {x.shape[0]} rows and {x.shape[1]} columns")
        if np.max(np.abs(np.abs(x) - 1.0)) > _UNIT_MODULUS_TOL:
            raise ValueError("pilot entries must have unit modulus")
        if np.max(np.abs(x[0] - 1.0)) > _UNIT_MODULUS_TOL:
            raise ValueError("row 0 must be the all-ones source sequence")
        x.setflags(write=False)
        object.__setattr__(self, "entries", x)

    @property
    def num_tags(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def tau(self) -> int:
        return self.entries.shape[1]

    @property
    def gram(self) -> np.ndarray:
        return self.entries @ self.entries.conj().T


@dataclass(frozen=True)
class PilotValidationReport:
    source_orthogonality_defect: float
    mutual_orthogonality_defect: float
    gram_defect: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(self.source_orthogonality_defect,
                   self.mutual_orthogonality_defect,
                   self.gram_defect) < self.tolerance


def sylvester_hadamard(order: int) -> np.ndarray:
    """Sylvester Hadamard matrix of a power-of-two order, as int64."""
    if order < 1 or order & (order - 1):
        raise ValueError(f"Sylvester construction needs a power-of-two order, got {order}")
    h = np.ones((1, 1), dtype=np.int64)
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    return h


def hadamard_pilot(num_tags: int) -> PilotMatrix:
    """First ``K+1`` rows of the smallest Sylvester Hadamard matrix that fits."""
    if num_tags < 0:
        raise ValueError("num_tags must be non-negative")
    order = 1
    while order < num_tags + 1:
        order *= 2
    return PilotMatrix(sylvester_hadamard(order)[: num_tags + 1], design="hadamard")


def zc_sequence(root: int, length: int) -> np.ndarray:
    """Zadoff-Chu sequence ``exp(-j*pi*q*n*(n+1)/tau)`` for odd ``tau``."""
    if length < 1 or length % 2 == 0:
        raise ValueError(f"ZC length must be odd and positive, got {length}")
    if not 1 <= root <= length - 1:
        raise ValueError(f"root index must lie in [1, {length - 1}], got {root}")
    n = np.arange(length, dtype=np.int64)
    # reduce the phase index mod 2*tau before going to floating point
    k = (root * n * (n + 1)) % (2 * length)
    return np.exp(-1j * np.pi * k / length)


def modified_zc_pilot(num_tags: int, length: int | None = None, root: int = 1) -> PilotMatrix:
    """ZC cyclic shifts de-rotated by the base sequence.

    Tag ``k`` uses the base sequence cyclically shifted left by ``k``
    positions, multiplied elementwise by ``1 / z0``. Dividing by ``z0``
    maps ``z0`` itself onto the all-ones row and keeps the shifts mutually
    orthogonal, so every tag row ends up orthogonal to the source row.
    """
    if num_tags < 0:
        raise ValueError("num_tags must be non-negative")
    if length is None:
        length = smallest_odd_prime_at_least(num_tags + 1)
    if length < num_tags + 1:
        raise ValueError(f"ZC length {length} cannot host {num_tags} tags (need >= {num_tags + 1})")
    if math.gcd(root, length) != 1:
        raise ValueError(f"root {root} must be coprime with length {length}")
    z0 = zc_sequence(root, length)
    shifts = np.stack([np.roll(z0, -k) for k in range(num_tags + 1)])
    x = shifts / z0
    x[0] = 1.0
    return PilotMatrix(x, design="zc")


def raw_zc_shifts(num_sequences: int, length: int, root: int = 1) -> np.ndarray:
    """Unmodified left cyclic shifts ``1..num_sequences`` of the base ZC sequence."""
    z0 = zc_sequence(root, length)
    return np.stack([np.roll(z0, -k) for k in range(1, num_sequences + 1)])


def dft_pilot(num_tags: int, length: int | None = None) -> PilotMatrix:
    """First ``K+1`` rows of the ``tau``-point DFT matrix, ``W = exp(j*2*pi/tau)``."""
    if num_tags < 0:
        raise ValueError("num_tags must be non-negative")
    if length is None:
        length = num_tags + 1
    if length < num_tags + 1:
        raise ValueError(f"DFT length {length} cannot host {num_tags} tags")
    k = np.arange(num_tags + 1)[:, None]
    j = np.arange(length)[None, :]
    return PilotMatrix(np.exp(2j * np.pi * ((k * j) % length) / length), design="dft")


def custom_pilot(entries, tolerance: float = DEFAULT_TOLERANCE) -> PilotMatrix:
    """Ingest a user matrix; raises unless it passes :func:`validate_pilot`."""
    x = PilotMatrix(entries, design="custom")
    report = validate_pilot(x, tolerance)
    if not report.passed:
        raise PilotValidationError(f"custom pilot matrix is contaminated: {report}")
    return x


def validate_pilot(x: PilotMatrix, tolerance: float = DEFAULT_TOLERANCE) -> PilotValidationReport:
    g = x.gram
    rows = x.rows
    source = float(np.max(np.abs(g[0, 1:]))) if rows > 1 else 0.0
    if rows > 2:
        tags = g[1:, 1:]
        off = tags[~np.eye(rows - 1, dtype=bool)]
        mutual = float(np.max(np.abs(off)))
    else:
        mutual = 0.0
    gram = float(np.max(np.abs(g - x.tau * np.eye(rows))))
    return PilotValidationReport(source, mutual, gram, tolerance)


def smallest_odd_prime_at_least(n: int) -> int:
    c = max(3, n)
    if c % 2 == 0:
        c += 1
    while not _is_prime(c):
        c += 2
    return c


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


def make_pilot(design: Design, num_tags: int, tau: int | None = None, root: int = 1) -> PilotMatrix:
    """Build a pilot matrix by design name, choosing the minimal ``tau`` if omitted."""
    if design == "hadamard":
        x = hadamard_pilot(num_tags)
        if tau is not None and tau != x.tau:
            if tau < num_tags + 1 or tau & (tau - 1):
                raise ValueError(f"Hadamard length must be a power of two >= {num_tags + 1}, got {tau}")
            x = PilotMatrix(sylvester_hadamard(tau)[: num_tags + 1], design="hadamard")
        return x
    if design == "zc":
        return modified_zc_pilot(num_tags, tau, root=root)
    if design == "dft":
        return dft_pilot(num_tags, tau)
    raise ValueError(f"unknown pilot design {design!r}")
