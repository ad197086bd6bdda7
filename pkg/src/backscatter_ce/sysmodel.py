"""Received-signal synthesis for the time-spread, silent and multi-user protocols.

Every synthesizer accepts channel arrays with arbitrary leading batch axes
and draws noise for all of them from the supplied generator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .fading import ChannelSet
from .pilots import PilotMatrix, PilotValidationError, validate_pilot


@dataclass(frozen=True)
class SourcePilot:
    """Unit-modulus source sequence ``s`` sent at power ``p`` (mW)."""

    symbols: np.ndarray
    power: float

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=complex)
        if s.ndim != 1:
            raise ValueError("source pilot must be a 1-D sequence")
        if s.size and np.max(np.abs(np.abs(s) - 1.0)) > 1e-12:
            raise ValueError("source pilot symbols must have unit modulus")
        if self.power < 0:
            raise ValueError("source power must be non-negative")
        object.__setattr__(self, "symbols", s)

    @classmethod
    def constant(cls, tau: int, power: float) -> "SourcePilot":
        return cls(np.ones(tau, dtype=complex), power)

    @property
    def tau(self) -> int:
        return self.symbols.size


@dataclass(frozen=True)
class RxBlock:
    raw: np.ndarray
    source_projected: np.ndarray
    despread: np.ndarray
    noise_var: float

    @property
    def despread_noise_var(self) -> float:
        return self.noise_var / self.raw.shape[-1]


@dataclass(frozen=True)
class SilentRx:
    """Per-slot observations; ``slots[0]`` is the all-silent direct slot."""

    slots: tuple[np.ndarray, ...]
    noise_var: float

    @property
    def slot_lengths(self) -> tuple[int, ...]:
        return tuple(y.shape[-1] for y in self.slots)

    @property
    def slot_len(self) -> int:
        return self.slots[-1].shape[-1] if len(self.slots) > 1 else self.slots[0].shape[-1]


@dataclass(frozen=True)
class MultiUserRx:
    per_slot: np.ndarray   # (..., Q, M, tau')
    projected: np.ndarray  # (..., N, M, Q)
    noise_var: float

    @property
    def num_users(self) -> int:
        return self.projected.shape[-3]

    @property
    def sub_len(self) -> int:
        return self.per_slot.shape[-1]


def complex_noise(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Circular complex Gaussian samples with ``E|n|^2 = variance``."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _stacked(channels) -> np.ndarray:
    return channels.stacked if isinstance(channels, ChannelSet) else np.asarray(channels)


def project_source(raw: np.ndarray, source: SourcePilot) -> np.ndarray:
    """Remove the source modulation: ``Y' = Y S^H``."""
    if raw.shape[-1] != source.tau:
        raise ValueError(f"received block has {raw.shape[-1]} symbols, source pilot has {source.tau}")
    return raw * source.symbols.conj()


def despread(projected: np.ndarray, pilots: PilotMatrix, validate: bool = True) -> np.ndarray:
    """Correlate with the pilot matrix: ``Y_p = Y' X^H / tau``."""
    if projected.shape[-1] != pilots.tau:
        raise ValueError(f"received block has {projected.shape[-1]} symbols, pilots have {pilots.tau}")
    if validate:
        report = validate_pilot(pilots)
        if not report.passed:
            raise PilotValidationError(f"pilot matrix fails orthogonality checks: {report}")
    return projected @ pilots.entries.conj().T / pilots.tau


def synth_timespread_rx(channels, pilots: PilotMatrix, source: SourcePilot, noise_var: float,
                        rng: np.random.Generator, validate: bool = True) -> RxBlock:
    """``Y = sqrt(p) Hbar X diag(s) + N`` and its two post-processed forms."""
    hbar = _stacked(channels)
    if hbar.shape[-1] != pilots.rows:
        raise ValueError(f"channel has {hbar.shape[-1]} columns, pilot matrix has {pilots.rows} rows")
    if source.tau != pilots.tau:
        raise ValueError(f"source length {source.tau} differs from pilot length {pilots.tau}")
    clean = math.sqrt(source.power) * (hbar @ pilots.entries) * source.symbols
    raw = clean + complex_noise(rng, clean.shape, noise_var) if noise_var > 0 else clean
    projected = project_source(raw, source)
    return RxBlock(raw=raw, source_projected=projected, despread=despread(projected, pilots, validate),
                   noise_var=noise_var)


def silent_slot_lengths(tau: int, num_tags: int) -> list[int]:
    """Equal split of ``tau`` over ``K+1`` slots; the remainder goes to slot 0."""
    if tau < num_tags + 1:
        raise ValueError(f"silent protocol needs tau >= K+1, got tau={tau}, K={num_tags}")
    t = tau // (num_tags + 1)
    return [t + tau % (num_tags + 1)] + [t] * num_tags


def synth_silent_rx(channels: ChannelSet, tau: int, power: float, noise_var: float,
                    rng: np.random.Generator) -> SilentRx:
    """Baseline where one tag at a time reflects a constant pilot."""
    lengths = silent_slot_lengths(tau, channels.num_tags)
    amp = math.sqrt(power)
    h0 = channels.direct
    combined = [h0] + [h0 + math.sqrt(channels.reflection) * channels.cascaded[..., :, i]
                       for i in range(channels.num_tags)]
    slots = []
    for h, t in zip(combined, lengths):
        clean = np.repeat(amp * h[..., :, None], t, axis=-1)
        slots.append(clean + complex_noise(rng, clean.shape, noise_var) if noise_var > 0 else clean)
    return SilentRx(slots=tuple(slots), noise_var=noise_var)


def orthonormal_user_pilots(num_users: int, sub_len: int) -> np.ndarray:
    """``N`` unit-norm, mutually orthogonal length-``tau'`` rows (scaled DFT rows)."""
    if sub_len < num_users:
        raise ValueError(f"need tau' >= N, got tau'={sub_len}, N={num_users}")
    n = np.arange(num_users)[:, None]
    t = np.arange(sub_len)[None, :]
    return np.exp(2j * np.pi * ((n * t) % sub_len) / sub_len) / math.sqrt(sub_len)


def synth_multiuser_rx(stacked: np.ndarray, user_pilots: np.ndarray, tag_pilots: PilotMatrix,
                       power: float, noise_var: float, rng: np.random.Generator) -> MultiUserRx:
    """Slot ``i``: ``Y_i = sqrt(tau' p) sum_n Hbar_n x_i s_n + N_i``, then project on each ``s_n``.

    ``stacked`` has shape ``(..., N, M, K+1)``; ``user_pilots`` is ``N x tau'``.
    """
    s = np.asarray(user_pilots, dtype=complex)
    n_users, sub_len = s.shape
    if sub_len < n_users:
        raise ValueError(f"need tau' >= N, got tau'={sub_len}, N={n_users}")
    if np.max(np.abs(s @ s.conj().T - np.eye(n_users))) > 1e-10:
        raise ValueError("user pilots must be orthonormal")
    if stacked.shape[-3] != n_users or stacked.shape[-1] != tag_pilots.rows:
        raise ValueError(f"channel shape {stacked.shape} does not match {n_users} users and "
                         f"{tag_pilots.rows} pilot rows")
    hx = stacked @ tag_pilots.entries  # (..., N, M, Q)
    clean = math.sqrt(sub_len * power) * np.einsum("...nmq,nt->...qmt", hx, s)
    y = clean + complex_noise(rng, clean.shape, noise_var) if noise_var > 0 else clean
    projected = np.einsum("...qmt,nt->...nmq", y, s.conj())
    return MultiUserRx(per_slot=y, projected=projected, noise_var=noise_var)


def write_rx_csv(path, y: np.ndarray) -> None:
    """Dump one ``M x tau`` block row-major as ``re,im`` column pairs."""
    y = np.asarray(y)
    if y.ndim != 2:
        raise ValueError("expected a single 2-D received block")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in y:
            w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])
