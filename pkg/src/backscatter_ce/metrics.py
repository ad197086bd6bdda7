"""Normalized MSE, Monte-Carlo aggregation and the empirical gap model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MseRecord:
    estimator: str
    channel_kind: str
    power_dbm: float
    nmse: float
    stderr: float
    trials: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("a record needs at least one trial")
        if self.nmse < 0 or self.stderr < 0:
            raise ValueError("nmse and stderr must be non-negative")


@dataclass(frozen=True)
class GapFit:
    lambda_g: float
    residual: float


def normalized_mse(true_col, est_col):
    """``||h - h_hat||^2 / ||h||^2`` along the last axis (one value per realization)."""
    h = np.asarray(true_col)
    e = np.asarray(est_col)
    if h.shape != e.shape:
        raise ValueError(f"shape mismatch: {h.shape} vs {e.shape}")
    energy = np.sum(np.abs(h) ** 2, axis=-1)
    if np.any(energy == 0):
        raise ValueError("normalized MSE is undefined for an all-zero channel")
    out = np.sum(np.abs(h - e) ** 2, axis=-1) / energy
    return float(out) if out.ndim == 0 else out


def stacked_nmse(true_stacked: np.ndarray, est_stacked: np.ndarray, cascade_scale: float):
    """Per-realization direct NMSE and tag-averaged cascaded NMSE.

    Both inputs are ``(..., M, K+1)`` in the stacked representation; columns
    ``k >= 1`` are divided by ``cascade_scale`` (``sqrt(alpha)``) before
    scoring, which cancels for the truth and the estimate alike.
    """
    direct = normalized_mse(true_stacked[..., :, 0], est_stacked[..., :, 0])
    if true_stacked.shape[-1] == 1:
        return direct, None
    t = np.swapaxes(true_stacked[..., :, 1:], -1, -2) / cascade_scale
    e = np.swapaxes(est_stacked[..., :, 1:], -1, -2) / cascade_scale
    return direct, np.mean(normalized_mse(t, e), axis=-1)


def aggregate(values, estimator: str = "", channel_kind: str = "", power_dbm: float = math.nan) -> MseRecord:
    """Mean and standard error of per-trial NMSE values, in trial order."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot aggregate an empty set of trials")
    mean = float(np.mean(v))
    stderr = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return MseRecord(estimator, channel_kind, power_dbm, mean, stderr, int(v.size))


def gap_regressor(num_tags, tau: int):
    k = np.asarray(num_tags, dtype=float)
    return tau * (1.0 - 1.0 / (k + 1.0))


def fit_gap_lambda(num_tags, gaps, tau: int) -> GapFit:
    """Least-squares ``lambda_G`` in ``gap = lambda_G * tau * (1 - 1/(K+1))``."""
    k = np.asarray(num_tags, dtype=float)
    g = np.asarray(gaps, dtype=float)
    if k.shape != g.shape or k.size < 2:
        raise ValueError("need at least two (K, gap) pairs")
    if np.any(k < 0) or np.any(k > tau - 1):
        raise ValueError(f"K must lie in [0, {tau - 1}]")
    x = gap_regressor(k, tau)
    denom = float(x @ x)
    if denom == 0:
        raise ValueError("all samples have K = 0; lambda_G is unidentifiable")
    lam = float(x @ g) / denom
    return GapFit(lam, float(np.linalg.norm(g - lam * x)))
