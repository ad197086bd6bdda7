"""Scenario configuration and figure presets.

A scenario is one base configuration plus an optional list of ``variants``
(dicts of field overrides). Each variant expands into a concrete scenario;
variants share the master seed so their trials use common random numbers.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from .estimators import SILENT_ESTIMATORS, TIMESPREAD_ESTIMATORS
from .fading import LinkGeometry, LinkShapes
from .pilots import make_pilot

PROTOCOLS = ("timespread", "silent", "both")
DESIGNS = ("hadamard", "zc", "dft")
PATHLOSS_MODELS = ("umi-nlos", "umi-los")
ALL_ESTIMATORS = TIMESPREAD_ESTIMATORS + SILENT_ESTIMATORS + ("MultiUserLS",)
DEFAULT_POWERS_DBM = tuple(float(p) for p in np.linspace(0.0, 30.0, 10))


class ConfigError(ValueError):
    """Malformed or unknown configuration values."""


class InfeasibleScenarioError(ValueError):
    """A well-formed configuration that cannot be simulated (e.g. tau < K+1)."""


@dataclass(frozen=True)
class MultiUserConfig:
    num_users: int = 2
    sub_len: int = 2
    slots: int | None = None
    reflection_exponent: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    num_tags: int = 7
    num_antennas: int = 10
    pilot_design: str = "hadamard"
    tau: int | None = None
    zc_root: int = 1
    power_dbm: tuple[float, ...] = DEFAULT_POWERS_DBM
    alpha: float = 0.6
    shape_direct: float = 3.0
    shape_forward: float = 3.0
    shape_backscatter: float = 3.0
    d_direct: float = 10.0
    d_forward: tuple[float, ...] | None = None
    d_forward_range: tuple[float, float] = (5.0, 7.0)
    d_back: float = 6.0
    fc: float = 3e9
    bandwidth: float = 10e6
    noise_figure_db: float = 20.0
    pathloss: str = "umi-nlos"
    conventional_power_normalization: bool = False
    source_phases: tuple[float, ...] | None = None
    protocol: str = "both"
    estimators: tuple[str, ...] | None = None
    multiuser: MultiUserConfig | None = None
    trials: int = 10_000
    seed: int = 42
    variants: tuple[dict, ...] = field(default_factory=tuple)

    # -- construction -------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("power_dbm", "d_forward", "d_forward_range", "source_phases", "estimators"):
            if kwargs.get(key) is not None:
                v = kwargs[key]
                kwargs[key] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
        if kwargs.get("multiuser") is not None and not isinstance(kwargs["multiuser"], MultiUserConfig):
            try:
                kwargs["multiuser"] = MultiUserConfig(**kwargs["multiuser"])
            except TypeError as exc:
                raise ConfigError(f"bad multiuser block: {exc}") from None
        if "variants" in kwargs:
            kwargs["variants"] = tuple(dict(v) for v in kwargs["variants"] or ())
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.check()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["variants"] = [dict(v) for v in self.variants]
        return d

    def override(self, **changes) -> "ScenarioConfig":
        data = self.to_dict()
        data.update({k: v for k, v in changes.items() if v is not None})
        return ScenarioConfig.from_dict(data)

    # -- checks ---------------------------------------------------------
    def check(self) -> None:
        """Raise :class:`ConfigError` for malformed values."""
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.pilot_design not in DESIGNS:
            raise ConfigError(f"pilot_design must be one of {DESIGNS}, got {self.pilot_design!r}")
        if self.pathloss not in PATHLOSS_MODELS:
            raise ConfigError(f"pathloss must be one of {PATHLOSS_MODELS}, got {self.pathloss!r}")
        if self.estimators is not None:
            bad = [e for e in self.estimators if e not in ALL_ESTIMATORS]
            if bad:
                raise ConfigError(f"unknown estimators {bad}; choose from {ALL_ESTIMATORS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.power_dbm or not all(math.isfinite(p) for p in self.power_dbm):
            raise ConfigError("power_dbm must be a non-empty list of finite values")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.num_tags < 0 or self.num_antennas < 1:
            raise ConfigError("num_tags must be >= 0 and num_antennas >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for s in (self.shape_direct, self.shape_forward, self.shape_backscatter):
            if s < 0.5:
                raise ConfigError("Nakagami shapes must be >= 0.5")
        known = {f.name for f in fields(self)} - {"variants", "name"}
        for v in self.variants:
            unknown = set(v) - known
            if unknown:
                raise ConfigError(f"unknown keys in variant: {sorted(unknown)}")

    def expand(self) -> list["ScenarioConfig"]:
        """Concrete scenarios, one per variant (or just this one)."""
        if not self.variants:
            return [self]
        base = self.to_dict()
        base["variants"] = []
        return [ScenarioConfig.from_dict({**base, **v}) for v in self.variants]

    # -- derived pieces -------------------------------------------------
    @property
    def active_estimators(self) -> tuple[str, ...]:
        if self.estimators is not None:
            chosen = self.estimators
        else:
            chosen = ()
            if self.protocol in ("timespread", "both"):
                chosen += TIMESPREAD_ESTIMATORS
            if self.protocol in ("silent", "both"):
                chosen += SILENT_ESTIMATORS
            if self.multiuser is not None:
                chosen += ("MultiUserLS",)
        return chosen

    def build_pilots(self):
        try:
            return make_pilot(self.pilot_design, self.num_tags, self.tau, root=self.zc_root)
        except ValueError as exc:
            raise InfeasibleScenarioError(str(exc)) from None

    def multiuser_pilots(self):
        mu = self.multiuser
        slots = mu.slots
        try:
            if slots is None:
                return make_pilot(self.pilot_design, self.num_tags, None, root=self.zc_root)
            return make_pilot(self.pilot_design, self.num_tags, slots, root=self.zc_root)
        except ValueError as exc:
            raise InfeasibleScenarioError(str(exc)) from None

    def geometry(self) -> LinkGeometry:
        return LinkGeometry(d_direct=self.d_direct, d_forward=self.d_forward, d_back=self.d_back,
                            fc=self.fc, bandwidth=self.bandwidth, noise_figure_db=self.noise_figure_db,
                            los=self.pathloss == "umi-los")

    def shapes(self) -> LinkShapes:
        return LinkShapes(self.shape_direct, self.shape_forward, self.shape_backscatter)

    def check_feasible(self) -> None:
        """Raise :class:`InfeasibleScenarioError` when the scenario cannot run."""
        for cfg in self.expand():
            x = cfg.build_pilots()
            if cfg.protocol in ("silent", "both") and x.tau < cfg.num_tags + 1:
                raise InfeasibleScenarioError("silent protocol needs tau >= K+1")
            if cfg.d_forward is not None and len(cfg.d_forward) != cfg.num_tags:
                raise InfeasibleScenarioError(f"{len(cfg.d_forward)} forward distances for {cfg.num_tags} tags")
            if cfg.source_phases is not None and len(cfg.source_phases) != x.tau:
                raise InfeasibleScenarioError(f"source_phases has {len(cfg.source_phases)} entries, tau is {x.tau}")
            if cfg.multiuser is not None:
                mu = cfg.multiuser
                if mu.num_users < 1 or mu.sub_len < mu.num_users:
                    raise InfeasibleScenarioError("multi-user mode needs tau' >= N >= 1")
                cfg.multiuser_pilots()
            if "MultiUserLS" in cfg.active_estimators and cfg.multiuser is None:
                raise InfeasibleScenarioError("MultiUserLS requested without a multiuser block")


def _powers(start=0.0, stop=30.0, num=10):
    return tuple(float(p) for p in np.linspace(start, stop, num))


PRESETS: dict[str, dict[str, Any]] = {
    "fig3": dict(num_tags=7, tau=8),
    "fig4": dict(tau=16, variants=({"num_tags": 7}, {"num_tags": 15})),
    "fig5": dict(num_tags=31, variants=({"tau": 32}, {"tau": 64})),
    "fig6": dict(tau=64, power_dbm=(20.0,), variants=tuple({"num_tags": k} for k in range(64))),
    # Hadamard of order 32 holds at most 31 tags, so both designs use K = 31
    "fig7": dict(num_tags=31, variants=({"pilot_design": "hadamard", "tau": 32},
                                        {"pilot_design": "zc", "tau": 33})),
    "fig8": dict(num_tags=7, tau=16, variants=({"alpha": 0.6}, {"alpha": 0.8})),
    "multiuser-demo": dict(num_tags=3, protocol="timespread", estimators=("MultiUserLS",),
                           multiuser=MultiUserConfig(num_users=2, sub_len=2, slots=4)),
}


def preset(name: str) -> ScenarioConfig:
    """Figure configuration on top of the default simulation settings."""
    try:
        overrides = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    return ScenarioConfig.from_dict({"name": name, **overrides})
