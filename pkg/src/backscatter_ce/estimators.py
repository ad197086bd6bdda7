"""Channel estimators for the stacked matrix ``Hbar = [h0, sqrt(a) h1, ..., sqrt(a) hK]``.

Every estimator returns an estimate of ``Hbar`` itself (column ``k >= 1``
still carries the ``sqrt(alpha)`` factor); :mod:`backscatter_ce.metrics`
removes it when scoring cascaded channels. Inputs may carry leading batch
axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .pilots import PilotMatrix
from .sysmodel import SilentRx

EstimatorName = Literal["LS", "ScaledLS", "MMSE", "LMMSE", "SilentLS", "SilentLMMSE", "MultiUserLS"]
TIMESPREAD_ESTIMATORS = ("LS", "ScaledLS", "MMSE", "LMMSE")
SILENT_ESTIMATORS = ("SilentLS", "SilentLMMSE")


@dataclass(frozen=True)
class ChannelEstimate:
    stacked_est: np.ndarray
    estimator: str
    aux: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CrlbReport:
    per_element_variance: float
    covariance_diag: np.ndarray


def _right_pinv(pilots: PilotMatrix, power: float) -> np.ndarray:
    xbar = math.sqrt(power) * pilots.entries
    gram = xbar @ xbar.conj().T
    if power <= 0 or np.linalg.matrix_rank(gram) < pilots.rows:
        raise np.linalg.LinAlgError("pilot matrix scaled by the source power is rank deficient")
    return xbar.conj().T @ np.linalg.inv(gram)


def ls_estimate(projected: np.ndarray, pilots: PilotMatrix, power: float) -> ChannelEstimate:
    """Least squares ``Y' Xbar^+`` with ``Xbar = sqrt(p) X``."""
    return ChannelEstimate(projected @ _right_pinv(pilots, power), "LS")


def mvu_estimate(raw: np.ndarray, pilots: PilotMatrix, source_symbols: np.ndarray, power: float) -> np.ndarray:
    """Vectorized-model MVU solution ``(A^H A)^-1 A^H vec(Y)`` for one block.

    Builds ``A = diag(sqrt(p) s_j 1_M) (X^T kron I_M)`` explicitly; meant as an
    independent route to the LS estimate, not for bulk simulation.
    """
    m, tau = raw.shape
    s = np.asarray(source_symbols, dtype=complex)
    b = np.diag(np.repeat(math.sqrt(power) * s, m))
    a = b @ np.kron(pilots.entries.T, np.eye(m))
    y = raw.reshape(-1, order="F")
    h = np.linalg.solve(a.conj().T @ a, a.conj().T @ y)
    return h.reshape(m, pilots.rows, order="F")


def scaled_ls_gamma(trace_r, noise_var: float, pilots: PilotMatrix, power: float, num_antennas: int):
    """Optimal LS scaling ``Tr R / (sigma^2 M Tr((Xbar Xbar^H)^-1) + Tr R)``."""
    xbar = math.sqrt(power) * pilots.entries
    j_ls = noise_var * num_antennas * np.trace(np.linalg.inv(xbar @ xbar.conj().T)).real
    trace_r = np.asarray(trace_r, dtype=float)
    return trace_r / (j_ls + trace_r)


def scaled_ls_estimate(ls: ChannelEstimate, pilots: PilotMatrix, power: float, noise_var: float) -> ChannelEstimate:
    """Scale the LS estimate by ``gamma_0`` computed from its own sample trace."""
    est = ls.stacked_est
    trace_r = np.sum(np.abs(est) ** 2, axis=(-2, -1))
    gamma0 = scaled_ls_gamma(trace_r, noise_var, pilots, power, est.shape[-2])
    return ChannelEstimate(est * np.asarray(gamma0)[..., None, None], "ScaledLS", {"gamma0": gamma0})


def mmse_coefficients(betas, power: float, alpha: float, despread_noise_var: float):
    """Per-column shrinkage mapping ``Y_p`` onto the MMSE estimate of ``Hbar``.

    Returns ``(coeff, gamma)``; ``gamma`` is the per-column variance of the
    estimate of ``h_k``.
    """
    betas = np.asarray(betas, dtype=float)
    if np.any(betas <= 0):
        raise ValueError("channel second moments must be positive")
    gain = np.full(betas.shape, alpha * power)
    gain[0] = power
    denom = gain * betas + despread_noise_var
    if np.any(denom <= 0):
        raise ValueError("MMSE shrinkage undefined for zero power and zero noise")
    coeff = np.sqrt(gain) * betas / denom
    # column k >= 1 estimates sqrt(alpha) h_k
    coeff[1:] *= math.sqrt(alpha)
    gamma = gain * betas ** 2 / denom
    return coeff, gamma


def mmse_estimate(despread: np.ndarray, betas, power: float, alpha: float, despread_noise_var: float) -> ChannelEstimate:
    coeff, gamma = mmse_coefficients(betas, power, alpha, despread_noise_var)
    return ChannelEstimate(despread * coeff, "MMSE", {"gamma": gamma})


def lmmse_estimate(y: np.ndarray, prior_mean, prior_cov, power: float, despread_noise_var: float) -> np.ndarray:
    """``E{h} + sqrt(p) C (p C + s^2 I)^-1 (y - sqrt(p) E{h})`` for ``y = sqrt(p) h + n``."""
    y = np.asarray(y)
    m = y.shape[-1]
    mean = np.broadcast_to(np.asarray(prior_mean, dtype=complex), (m,))
    cov = np.asarray(prior_cov, dtype=complex)
    sp = math.sqrt(power)
    system = power * cov + despread_noise_var * np.eye(m)
    resid = (y - sp * mean).reshape(-1, m).T
    update = sp * cov @ np.linalg.solve(system, resid)
    return mean + update.T.reshape(y.shape)


def lmmse_stacked(despread: np.ndarray, betas, power: float, alpha: float, despread_noise_var: float) -> ChannelEstimate:
    """Column-wise LMMSE with zero prior mean and ``C = beta_bar_k I``."""
    m = despread.shape[-2]
    betas = np.asarray(betas, dtype=float)
    prior = betas * np.r_[1.0, np.full(betas.size - 1, alpha)]
    cols = [lmmse_estimate(despread[..., :, k], np.zeros(m), prior[k] * np.eye(m), power, despread_noise_var)
            for k in range(betas.size)]
    return ChannelEstimate(np.stack(cols, axis=-1), "LMMSE")


def silent_estimate(rx: SilentRx, power: float, alpha: float, method: str = "LS", betas=None) -> ChannelEstimate:
    """Slot-by-slot estimation followed by subtraction of the direct estimate.

    ``LMMSE`` shrinks each slot average with its own prior power: ``beta_0``
    for the direct slot and ``beta_0 + alpha beta_k`` for slot ``k``.
    """
    if not rx.slots:
        raise ValueError("silent observation has no slots")
    means = [y.mean(axis=-1) for y in rx.slots]
    lengths = rx.slot_lengths
    sp = math.sqrt(power)
    if method == "LS":
        combined = [mu / sp for mu in means]
        name = "SilentLS"
    elif method == "LMMSE":
        if betas is None:
            raise ValueError("silent LMMSE needs the channel second moments")
        betas = np.asarray(betas, dtype=float)
        prior = np.r_[betas[0], betas[0] + alpha * betas[1:]]
        combined = [sp * b / (power * b + rx.noise_var / t) * mu for b, t, mu in zip(prior, lengths, means)]
        name = "SilentLMMSE"
    else:
        raise ValueError(f"unknown silent estimation method {method!r}")
    h0 = combined[0]
    cols = [h0] + [c - h0 for c in combined[1:]]
    return ChannelEstimate(np.stack(cols, axis=-1), name)


def crlb_reference(power: float, tau: int, noise_var: float, num_antennas: int, num_tags: int) -> CrlbReport:
    """Per-element CRLB ``sigma^2 / (p tau)``, identical for every unknown."""
    if tau < num_tags + 1:
        raise ValueError("need tau >= K+1")
    v = noise_var / (power * tau)
    return CrlbReport(v, np.full(num_antennas * (num_tags + 1), v))


def multiuser_ls_estimate(projected: np.ndarray, tag_pilots: PilotMatrix, power: float, sub_len: int) -> ChannelEstimate:
    """Per-user LS: ``Ytilde_n X^H (X X^H)^-1 / sqrt(tau' p)``."""
    if projected.shape[-1] != tag_pilots.tau:
        raise ValueError(f"projected block has {projected.shape[-1]} slots, pilots have {tag_pilots.tau}")
    return ChannelEstimate(projected @ _right_pinv(tag_pilots, sub_len * power), "MultiUserLS")
