"""Seeded Monte-Carlo execution of scenarios and CSV/manifest output.

Trials are grouped into fixed-size chunks whose boundaries do not depend
on the worker count; chunk results are reassembled in
``(variant, power_index, trial_index)`` order before aggregation, so the
CSV is byte-identical for any number of workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .estimators import (
    lmmse_stacked,
    ls_estimate,
    mmse_estimate,
    multiuser_ls_estimate,
    scaled_ls_estimate,
    silent_estimate,
)
from .fading import (
    LinkParams,
    beta_moments,
    dbm_to_mw,
    draw_forward_distances,
    gen_channels,
    gen_multiuser_channels,
    link_params,
)
from .metrics import MseRecord, aggregate, stacked_nmse
from .pilots import PilotMatrix
from .sysmodel import (
    SourcePilot,
    orthonormal_user_pilots,
    synth_multiuser_rx,
    synth_silent_rx,
    synth_timespread_rx,
    write_rx_csv,
)

CHUNK = 250
CSV_COLUMNS = ("estimator", "channel_kind", "power_dbm", "nmse", "stderr", "trials",
               "tau", "K", "M", "design", "seed", "alpha")
SEED_RULE = ("trial seed = SeedSequence(entropy=master_seed, spawn_key=(power_index, trial_index))"
             ".generate_state(1, uint64); shared by all variants; forward distances drawn once from "
             "SeedSequence(master_seed, spawn_key=(2**32-1,))")
_GEOMETRY_KEY = 2 ** 32 - 1


def derive_trial_seed(master: int, power_index: int, trial_index: int) -> int:
    """64-bit seed for one trial, mixed through numpy's SeedSequence hash."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(power_index), int(trial_index)))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_rng(master: int, power_index: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(derive_trial_seed(master, power_index, trial_index))


@dataclass(frozen=True)
class VariantPlan:
    """Everything a worker needs to simulate trials of one concrete scenario."""

    config: ScenarioConfig
    pilots: PilotMatrix
    params: LinkParams
    betas: np.ndarray
    noise_var: float
    mu_pilots: PilotMatrix | None = None
    mu_params: LinkParams | None = None


def plan_variant(cfg: ScenarioConfig) -> VariantPlan:
    geometry = cfg.geometry()
    if geometry.d_forward is None:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_GEOMETRY_KEY,)))
        geometry = geometry.with_forward(draw_forward_distances(cfg.num_tags, rng, *cfg.d_forward_range))
    conventional = cfg.conventional_power_normalization
    params = link_params(geometry, cfg.shapes(), cfg.num_tags, conventional)
    mu_pilots = cfg.multiuser_pilots() if cfg.multiuser is not None else None
    return VariantPlan(cfg, cfg.build_pilots(), params, beta_moments(params), geometry.noise_var,
                       mu_pilots, params if mu_pilots is not None else None)


def _source(cfg: ScenarioConfig, tau: int, power: float) -> SourcePilot:
    if cfg.source_phases is None:
        return SourcePilot.constant(tau, power)
    return SourcePilot(np.exp(1j * np.asarray(cfg.source_phases)), power)


def simulate_chunk(plan: VariantPlan, power_index: int, start: int, stop: int) -> dict:
    """Per-trial NMSE arrays keyed by ``(estimator, channel_kind)``."""
    cfg = plan.config
    power = float(dbm_to_mw(cfg.power_dbm[power_index]))
    estimators = cfg.active_estimators
    want_ts = any(e in estimators for e in ("LS", "ScaledLS", "MMSE", "LMMSE"))
    want_silent = any(e.startswith("Silent") for e in estimators)
    want_mu = "MultiUserLS" in estimators
    x = plan.pilots
    source = _source(cfg, x.tau, power)
    sigma2 = plan.noise_var

    truth, projected, despread, silent_slots, mu_truth, mu_proj = [], [], [], [], [], []
    for trial in range(start, stop):
        rng = trial_rng(cfg.seed, power_index, trial)
        ch = gen_channels(plan.params, cfg.alpha, cfg.num_antennas, rng)
        truth.append(ch.stacked)
        if want_ts:
            rx = synth_timespread_rx(ch, x, source, sigma2, rng)
            projected.append(rx.source_projected)
            despread.append(rx.despread)
        if want_silent:
            silent_slots.append(synth_silent_rx(ch, x.tau, power, sigma2, rng).slots)
        if want_mu:
            mu = cfg.multiuser
            mch = gen_multiuser_channels(plan.mu_params, cfg.alpha, cfg.num_antennas, mu.num_users, rng,
                                         mu.reflection_exponent)
            s = orthonormal_user_pilots(mu.num_users, mu.sub_len)
            mu_truth.append(mch.stacked)
            mu_proj.append(synth_multiuser_rx(mch.stacked, s, plan.mu_pilots, power, sigma2, rng).projected)

    h = np.stack(truth)
    scale = math.sqrt(cfg.alpha)
    out: dict = {}

    def score(name, est):
        d, c = stacked_nmse(h, est, scale)
        out[(name, "direct")] = d
        if c is not None:
            out[(name, "cascaded")] = c

    if want_ts:
        yp = np.stack(projected)
        ydes = np.stack(despread)
        sp2 = sigma2 / x.tau
        ls = ls_estimate(yp, x, power)
        for name in estimators:
            if name == "LS":
                score(name, ls.stacked_est)
            elif name == "ScaledLS":
                score(name, scaled_ls_estimate(ls, x, power, sigma2).stacked_est)
            elif name == "MMSE":
                score(name, mmse_estimate(ydes, plan.betas, power, cfg.alpha, sp2).stacked_est)
            elif name == "LMMSE":
                score(name, lmmse_stacked(ydes, plan.betas, power, cfg.alpha, sp2).stacked_est)
    if want_silent:
        from .sysmodel import SilentRx

        n_slots = len(silent_slots[0])
        batch = SilentRx(tuple(np.stack([s[i] for s in silent_slots]) for i in range(n_slots)), sigma2)
        for name in estimators:
            if name.startswith("Silent"):
                est = silent_estimate(batch, power, cfg.alpha, name.removeprefix("Silent"), plan.betas)
                score(name, est.stacked_est)
    if want_mu:
        mu = cfg.multiuser
        th = np.stack(mu_truth)
        est = multiuser_ls_estimate(np.stack(mu_proj), plan.mu_pilots, power, mu.sub_len).stacked_est
        d, c = stacked_nmse(th, est, cfg.alpha ** mu.reflection_exponent)
        out[("MultiUserLS", "direct")] = d.mean(axis=-1)
        if c is not None:
            out[("MultiUserLS", "cascaded")] = c.mean(axis=-1)
    return out


def _run_task(task):
    plan, power_index, start, stop = task
    return simulate_chunk(plan, power_index, start, stop)


@dataclass
class RunResult:
    records: list[tuple[ScenarioConfig, MseRecord]]
    csv_text: str
    manifest: dict

    def series(self, estimator: str, kind: str, **match) -> list[MseRecord]:
        """Records of one estimator/channel kind, filtered by config fields."""
        out = []
        for cfg, rec in self.records:
            if rec.estimator == estimator and rec.channel_kind == kind and all(
                    getattr(cfg, k) == v for k, v in match.items()):
                out.append(rec)
        return out


def run_scenario(config: ScenarioConfig, workers: int = 1, out_path=None, dump_rx_dir=None) -> RunResult:
    """Simulate every variant, power point and trial; aggregate into CSV rows."""
    config.check()
    config.check_feasible()
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    plans = [plan_variant(cfg) for cfg in config.expand()]
    tasks = [(plan, pi, start, min(start + CHUNK, plan.config.trials))
             for plan in plans
             for pi in range(len(plan.config.power_dbm))
             for start in range(0, plan.config.trials, CHUNK)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        chunks = [_run_task(t) for t in tasks]

    records = []
    it = iter(chunks)
    for plan in plans:
        cfg = plan.config
        for pi, p_dbm in enumerate(cfg.power_dbm):
            parts = [next(it) for _ in range(0, cfg.trials, CHUNK)]
            for name in cfg.active_estimators:
                for kind in ("direct", "cascaded"):
                    key = (name, kind)
                    if key in parts[0]:
                        values = np.concatenate([p[key] for p in parts])
                        records.append((cfg, aggregate(values, name, kind, float(p_dbm))))
        if dump_rx_dir is not None:
            _dump_rx(plan, dump_rx_dir)

    csv_text = records_to_csv(records)
    manifest = {
        "config": config.to_dict(),
        "seed_rule": SEED_RULE,
        "chunk_size": CHUNK,
        "software_version": __version__,
        "numpy_version": np.__version__,
        "workers": workers,
        "started_utc": started.isoformat(),
        "elapsed_s": round(time.perf_counter() - t0, 3),
        "csv_sha256": hashlib.sha256(csv_text.encode()).hexdigest(),
    }
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            fh.write(csv_text)
        with open(manifest_path(out_path), "w") as fh:
            json.dump(manifest, fh, indent=2)
    return RunResult(records, csv_text, manifest)


def manifest_path(out_path) -> str:
    root, _ = os.path.splitext(str(out_path))
    return root + ".manifest.json"


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for cfg, rec in records:
        tau = cfg.multiuser_pilots().tau if rec.estimator == "MultiUserLS" else cfg.build_pilots().tau
        w.writerow([rec.estimator, rec.channel_kind, repr(rec.power_dbm), repr(rec.nmse), repr(rec.stderr),
                    rec.trials, tau, cfg.num_tags, cfg.num_antennas, cfg.pilot_design, cfg.seed, repr(cfg.alpha)])
    return buf.getvalue()


def _dump_rx(plan: VariantPlan, directory) -> None:
    """Write the raw block of trial 0 at every power point (debug aid)."""
    cfg = plan.config
    os.makedirs(directory, exist_ok=True)
    for pi, p_dbm in enumerate(cfg.power_dbm):
        power = float(dbm_to_mw(p_dbm))
        rng = trial_rng(cfg.seed, pi, 0)
        ch = gen_channels(plan.params, cfg.alpha, cfg.num_antennas, rng)
        rx = synth_timespread_rx(ch, plan.pilots, _source(cfg, plan.pilots.tau, power), plan.noise_var, rng)
        tag = f"{cfg.name}_K{cfg.num_tags}_tau{plan.pilots.tau}_{cfg.pilot_design}_a{cfg.alpha}_p{pi}"
        write_rx_csv(os.path.join(directory, f"rx_{tag}.csv"), rx.raw)
