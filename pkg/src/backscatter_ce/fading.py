"""Large-scale path loss, noise floor and Nakagami-m channel synthesis.

All powers are linear mW; dBm appears only at conversion helpers.
Leading ``size`` dimensions let callers draw a batch of independent
realizations from one generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

THERMAL_NOISE_DBM_HZ = -174.0


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)


def umi_pathloss_db(distance: float, carrier: float, los: bool = False) -> float:
    """3GPP UMi path loss in dB, distance in metres and carrier in Hz.

    NLOS: ``22.7 + 36.7 log10(d) + 26 log10(fc/GHz)``.
    LOS:  ``28.0 + 22.0 log10(d) + 20 log10(fc/GHz)``.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if carrier <= 0:
        raise ValueError("carrier frequency must be positive")
    fc_ghz = carrier / 1e9
    if los:
        return 28.0 + 22.0 * np.log10(d) + 20.0 * math.log10(fc_ghz)
    return 22.7 + 36.7 * np.log10(d) + 26.0 * math.log10(fc_ghz)


def umi_pathloss(distance: float, carrier: float, los: bool = False):
    """Linear large-scale power gain ``zeta = 10^(-PL_dB/10)``."""
    return 10.0 ** (-umi_pathloss_db(distance, carrier, los) / 10.0)


def noise_variance_dbm(bandwidth: float, noise_figure_db: float) -> float:
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth) + noise_figure_db


def noise_variance(bandwidth: float, noise_figure_db: float) -> float:
    """Receiver noise power in mW: ``-174 + 10 log10(B) + NF`` dBm."""
    return float(dbm_to_mw(noise_variance_dbm(bandwidth, noise_figure_db)))


@dataclass(frozen=True)
class FadingParams:
    """Nakagami envelope parameters for one link.

    By default ``spread = shape * large_scale``, so ``E|a|^2`` grows with
    the shape. ``conventional=True`` uses ``spread = large_scale`` instead.
    """

    shape: float
    large_scale: float
    conventional: bool = False

    def __post_init__(self):
        if self.shape < 0.5:
            raise ValueError(f"Nakagami shape must be >= 0.5, got {self.shape}")
        if self.large_scale <= 0:
            raise ValueError("large-scale gain must be positive")

    @property
    def spread(self) -> float:
        return self.large_scale if self.conventional else self.shape * self.large_scale


def nakagami_complex_sample(params: FadingParams, rng: np.random.Generator, size=None):
    """Nakagami-m envelope with uniform phase on [-pi, pi]; ``E|a|^2 = spread``."""
    power = rng.gamma(params.shape, params.spread / params.shape, size=size)
    phase = rng.uniform(-np.pi, np.pi, size=size)
    return np.sqrt(power) * np.exp(1j * phase)


def _nakagami_array(shape: float, spread, rng: np.random.Generator, size):
    # spread may broadcast over the trailing axes of size
    power = rng.gamma(shape, 1.0, size=size) * (np.asarray(spread) / shape)
    phase = rng.uniform(-np.pi, np.pi, size=size)
    return np.sqrt(power) * np.exp(1j * phase)


@dataclass(frozen=True)
class LinkShapes:
    """Nakagami shape per link type (direct, source->tag, tag->reader)."""

    direct: float = 3.0
    forward: float = 3.0
    backscatter: float = 3.0


@dataclass(frozen=True)
class LinkGeometry:
    d_direct: float = 10.0
    d_forward: tuple[float, ...] | None = None
    d_back: tuple[float, ...] | float = 6.0
    fc: float = 3e9
    bandwidth: float = 10e6
    noise_figure_db: float = 20.0
    los: bool = False

    def __post_init__(self):
        if self.d_direct <= 0:
            raise ValueError("d_direct must be positive")
        if self.fc <= 0 or self.bandwidth <= 0:
            raise ValueError("carrier and bandwidth must be positive")
        for name in ("d_forward", "d_back"):
            v = getattr(self, name)
            if v is not None and np.any(np.asarray(v, dtype=float) <= 0):
                raise ValueError(f"{name} must be positive")

    @property
    def noise_var(self) -> float:
        return noise_variance(self.bandwidth, self.noise_figure_db)

    def back_distances(self, num_tags: int) -> np.ndarray:
        d = np.asarray(self.d_back, dtype=float)
        return np.broadcast_to(d, (num_tags,)).copy() if d.ndim == 0 else d

    def with_forward(self, d_forward) -> "LinkGeometry":
        from dataclasses import replace

        return replace(self, d_forward=tuple(float(v) for v in d_forward))


def draw_forward_distances(num_tags: int, rng: np.random.Generator, low: float = 5.0, high: float = 7.0) -> np.ndarray:
    return rng.uniform(low, high, size=num_tags)


@dataclass(frozen=True)
class LinkParams:
    """Per-link fading parameters derived from geometry and shapes."""

    direct: FadingParams
    forward: tuple[FadingParams, ...]
    backscatter: tuple[FadingParams, ...]

    @property
    def num_tags(self) -> int:
        return len(self.forward)


def link_params(geometry: LinkGeometry, shapes: LinkShapes, num_tags: int, conventional: bool = False) -> LinkParams:
    if num_tags > 0 and geometry.d_forward is None:
        raise ValueError("forward distances must be resolved before building link parameters")
    zeta = lambda d: float(umi_pathloss(d, geometry.fc, geometry.los))  # noqa: E731
    d_f = np.asarray(geometry.d_forward if num_tags else (), dtype=float)
    if d_f.shape != (num_tags,):
        raise ValueError(f"expected {num_tags} forward distances, got {d_f.shape}")
    d_g = geometry.back_distances(num_tags)
    return LinkParams(
        direct=FadingParams(shapes.direct, zeta(geometry.d_direct), conventional),
        forward=tuple(FadingParams(shapes.forward, zeta(d), conventional) for d in d_f),
        backscatter=tuple(FadingParams(shapes.backscatter, zeta(d), conventional) for d in d_g),
    )


@dataclass(frozen=True)
class ChannelSet:
    """One (or a batch of) fading realization(s).

    Arrays may carry leading batch axes; the trailing axes are
    ``direct (M,)``, ``forward (K,)``, ``backscatter (M, K)``.
    """

    direct: np.ndarray
    forward: np.ndarray
    backscatter: np.ndarray
    reflection: float
    cascaded: np.ndarray = field(init=False)
    stacked: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.reflection <= 1.0:
            raise ValueError(f"reflection coefficient must lie in (0, 1], got {self.reflection}")
        cascaded = self.forward[..., None, :] * self.backscatter
        stacked = np.concatenate([self.direct[..., :, None], math.sqrt(self.reflection) * cascaded], axis=-1)
        object.__setattr__(self, "cascaded", cascaded)
        object.__setattr__(self, "stacked", stacked)

    @property
    def num_antennas(self) -> int:
        return self.direct.shape[-1]

    @property
    def num_tags(self) -> int:
        return self.forward.shape[-1]


def gen_channels(params: LinkParams, alpha: float, num_antennas: int, rng: np.random.Generator, size=None) -> ChannelSet:
    """Draw direct, forward and backscatter channels.

    ``size`` (int or tuple) prepends batch axes; one generator then serves
    a whole batch.
    """
    if num_antennas < 1:
        raise ValueError("need at least one receive antenna")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    batch = () if size is None else ((size,) if isinstance(size, int) else tuple(size))
    k = params.num_tags
    h0 = _nakagami_array(params.direct.shape, params.direct.spread, rng, batch + (num_antennas,))
    if k:
        f = _nakagami_array(params.forward[0].shape, [p.spread for p in params.forward], rng, batch + (k,))
        g = _nakagami_array(params.backscatter[0].shape, [p.spread for p in params.backscatter], rng,
                            batch + (num_antennas, k))
    else:
        f = np.zeros(batch + (0,), dtype=complex)
        g = np.zeros(batch + (num_antennas, 0), dtype=complex)
    return ChannelSet(direct=h0, forward=f, backscatter=g, reflection=alpha)


def gamma_ratio(shape: float) -> float:
    """``Gamma(m+1) / Gamma(m)`` evaluated through log-gamma."""
    return math.exp(math.lgamma(shape + 1.0) - math.lgamma(shape))


def beta_moments(params: LinkParams) -> np.ndarray:
    """Second moments ``[beta_0, beta_1..beta_K]`` of direct and cascaded entries.

    Antennas are co-located, so every antenna shares the same moment.
    """
    d = params.direct
    out = [gamma_ratio(d.shape) * d.spread / d.shape]
    for f, g in zip(params.forward, params.backscatter):
        out.append(gamma_ratio(f.shape) * gamma_ratio(g.shape) * f.spread * g.spread / (f.shape * g.shape))
    return np.array(out)


@dataclass(frozen=True)
class MultiUserChannels:
    """Channels of ``N`` users sharing ``K`` tags at an ``M``-antenna AP.

    ``direct (N, M)`` user->AP, ``user_to_tag (N, K)`` scalar user->tag,
    ``tag_to_ap (M, K)`` tag->AP. ``stacked[n]`` is the ``M x (K+1)``
    matrix whose column ``k >= 1`` is ``alpha**exponent * f_k g_{n,k}``.
    """

    direct: np.ndarray
    user_to_tag: np.ndarray
    tag_to_ap: np.ndarray
    reflection: float
    reflection_exponent: float = 1.0
    cascaded: np.ndarray = field(init=False)
    stacked: np.ndarray = field(init=False)

    def __post_init__(self):
        cascaded = self.user_to_tag[..., :, None, :] * self.tag_to_ap[..., None, :, :]
        scale = self.reflection ** self.reflection_exponent
        stacked = np.concatenate([self.direct[..., :, :, None], scale * cascaded], axis=-1)
        object.__setattr__(self, "cascaded", cascaded)
        object.__setattr__(self, "stacked", stacked)

    @property
    def num_users(self) -> int:
        return self.direct.shape[-2]


def gen_multiuser_channels(params: LinkParams, alpha: float, num_antennas: int, num_users: int,
                           rng: np.random.Generator, reflection_exponent: float = 1.0,
                           size=None) -> MultiUserChannels:
    """Multi-user draw; ``params.forward`` holds the user->tag links."""
    if num_users < 1:
        raise ValueError("need at least one user")
    batch = () if size is None else ((size,) if isinstance(size, int) else tuple(size))
    k = params.num_tags
    h = _nakagami_array(params.direct.shape, params.direct.spread, rng, batch + (num_users, num_antennas))
    g = _nakagami_array(params.forward[0].shape if k else 1.0, [p.spread for p in params.forward], rng,
                        batch + (num_users, k))
    f = _nakagami_array(params.backscatter[0].shape if k else 1.0, [p.spread for p in params.backscatter], rng,
                        batch + (num_antennas, k))
    return MultiUserChannels(direct=h, user_to_tag=g, tag_to_ap=f, reflection=alpha,
                             reflection_exponent=reflection_exponent)
