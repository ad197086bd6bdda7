"""Acceptance criteria, one test per criterion.

Each test records a one-line PASS/FAIL verdict with the measured numbers;
the lines are printed in the terminal summary (see conftest).
"""

import math
import time

import numpy as np
import pytest

from backscatter_ce.config import preset
from backscatter_ce.estimators import (
    ls_estimate,
    mmse_estimate,
    multiuser_ls_estimate,
    scaled_ls_estimate,
    scaled_ls_gamma,
    silent_estimate,
    lmmse_stacked,
)
from backscatter_ce.fading import dbm_to_mw, gen_channels, gen_multiuser_channels
from backscatter_ce.pilots import PilotMatrix, make_pilot, raw_zc_shifts, validate_pilot
from backscatter_ce.runner import run_scenario
from backscatter_ce.sysmodel import (
    SourcePilot,
    orthonormal_user_pilots,
    synth_multiuser_rx,
    synth_silent_rx,
    synth_timespread_rx,
)

from .conftest import ACCEPTANCE_LINES, default_params

# reference NMSE values read off the tau=8, K=7 direct-channel curves
REF_LS_13 = 1.0433e-5
REF_LS_20 = 2.2259e-6
REF_SILENT_20 = 1.8124e-5
TRIALS_1E5 = 100_000
CHUNK = 10_000


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _cross_dbm(powers, nmse, target):
    """Power (dBm) at which a decreasing NMSE curve crosses ``target`` (log-linear interpolation)."""
    logs = np.log10(nmse)
    t = math.log10(target)
    for i in range(len(powers) - 1):
        if logs[i] >= t >= logs[i + 1]:
            f = (logs[i] - t) / (logs[i] - logs[i + 1])
            return powers[i] + f * (powers[i + 1] - powers[i])
    raise AssertionError(f"curve never crosses {target}")


@pytest.fixture(scope="module")
def fig3_run():
    return run_scenario(preset("fig3"))


def test_c01_orthogonality_suite():
    t0 = time.perf_counter()
    worst = 0.0
    for k in (1, 2, 7, 15, 31):
        for design in ("hadamard", "zc", "dft"):
            x = make_pilot(design, k)
            worst = max(worst, float(np.max(np.abs(x.gram - x.tau * np.eye(k + 1)))))
    raw = validate_pilot(PilotMatrix(np.vstack([np.ones(5), raw_zc_shifts(3, 5)])))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and raw.source_orthogonality_defect > 1e-3 and not raw.passed and elapsed < 1.0
    report(1, "orthogonality suite", ok,
           f"max |XX^H - tau I| = {worst:.2e}; raw ZC source defect = {raw.source_orthogonality_defect:.3f}; "
           f"{elapsed:.3f} s")
    assert ok


def _tau8_setup():
    params, betas, sigma2 = default_params(7)
    return params, betas, sigma2, make_pilot("hadamard", 7)


def test_c02_crlb_attainment():
    t0 = time.perf_counter()
    params, _, sigma2, x = _tau8_setup()
    ratios = []
    for p_dbm in (0.0, 20.0):
        p = float(dbm_to_mw(p_dbm))
        rng = np.random.default_rng(1000 + int(p_dbm))
        acc = 0.0
        for _ in range(TRIALS_1E5 // CHUNK):
            ch = gen_channels(params, 0.6, 10, rng, size=CHUNK)
            rx = synth_timespread_rx(ch, x, SourcePilot.constant(8, p), sigma2, rng)
            err = ls_estimate(rx.source_projected, x, p).stacked_est - ch.stacked
            acc += float(np.sum(np.abs(err) ** 2))
        ratios.append(acc / (TRIALS_1E5 * 80) / (sigma2 / (p * 8)))
    elapsed = time.perf_counter() - t0
    ok = all(abs(r - 1) <= 0.03 for r in ratios) and elapsed < 30
    report(2, "CRLB attainment", ok,
           f"empirical/bound = {ratios[0]:.4f} (0 dBm), {ratios[1]:.4f} (20 dBm); {elapsed:.1f} s")
    assert ok


def test_c03_silent_variance():
    params, _, sigma2, _ = _tau8_setup()
    ratios = []
    for p_dbm in (0.0, 20.0):
        p = float(dbm_to_mw(p_dbm))
        rng = np.random.default_rng(2000 + int(p_dbm))
        acc = 0.0
        for _ in range(TRIALS_1E5 // CHUNK):
            ch = gen_channels(params, 0.6, 10, rng, size=CHUNK)
            rx = synth_silent_rx(ch, 8, p, sigma2, rng)
            assert rx.slot_len == 1
            err = silent_estimate(rx, p, 0.6).stacked_est[..., 0] - ch.direct
            acc += float(np.sum(np.abs(err) ** 2))
        ratios.append(acc / (TRIALS_1E5 * 10) / (8 * sigma2 / (p * 8)))
    ok = all(abs(r - 1) <= 0.03 for r in ratios)
    report(3, "silent direct-slot variance", ok,
           f"empirical / (K+1) sigma^2/(p tau) = {ratios[0]:.4f} (0 dBm), {ratios[1]:.4f} (20 dBm)")
    assert ok


def test_c04_fig3_points(fig3_run):
    t0 = time.perf_counter()
    ls = {round(r.power_dbm, 2): r.nmse for r in fig3_run.series("LS", "direct")}
    silent = {round(r.power_dbm, 2): r.nmse for r in fig3_run.series("SilentLS", "direct")}
    a13, a20 = ls[13.33], ls[20.0]
    abs_ok = abs(a13 / REF_LS_13 - 1) <= 0.2 and abs(a20 / REF_LS_20 - 1) <= 0.2
    off13 = 10 * math.log10(a13 / REF_LS_13)
    off20 = 10 * math.log10(a20 / REF_LS_20)
    # fallback: constant dB offset, matching slope, matching silent/LS gap
    slope, ref_slope = a13 / a20, REF_LS_13 / REF_LS_20
    gap, ref_gap = silent[20.0] / a20, REF_SILENT_20 / REF_LS_20
    constant = abs(off13 - off20) < 0.5
    fallback_ok = constant and abs(slope / ref_slope - 1) <= 0.2 and abs(gap / ref_gap - 1) <= 0.2
    ok = abs_ok or fallback_ok
    mode = "absolute" if abs_ok else "fallback"
    report(4, f"LS direct NMSE points ({mode})", ok,
           f"13.33 dBm {a13:.3e} vs {REF_LS_13:.3e} ({off13:+.2f} dB), 20 dBm {a20:.3e} vs {REF_LS_20:.3e} "
           f"({off20:+.2f} dB); absolute within 20%: {abs_ok}; slope ratio {slope:.3f} vs {ref_slope:.3f}; "
           f"silent/LS {gap:.2f} vs {ref_gap:.2f}; fig3 run {fig3_run.manifest['elapsed_s']:.0f} s "
           f"+ {time.perf_counter() - t0:.1f} s")
    assert ok


def test_c05_power_saving_gap():
    powers = tuple(float(p) for p in range(0, 75, 5))
    res = run_scenario(preset("fig3").override(trials=2000, power_dbm=powers,
                                               estimators=["LS", "SilentLS", "SilentLMMSE"]))

    def cross(name, kind, target):
        recs = res.series(name, kind)
        return _cross_dbm([r.power_dbm for r in recs], [r.nmse for r in recs], target)

    ls_d, ls_c = cross("LS", "direct", 1e-5), cross("LS", "cascaded", 1e-1)
    gaps_d = {s: cross(s, "direct", 1e-5) - ls_d for s in ("SilentLS", "SilentLMMSE")}
    gaps_c = {s: cross(s, "cascaded", 1e-1) - ls_c for s in ("SilentLS", "SilentLMMSE")}
    ok = min(gaps_d.values()) >= 8.0 and min(gaps_c.values()) >= 10.0
    report(5, "power saving vs silent baseline", ok,
           f"direct @1e-5: {gaps_d['SilentLS']:.2f} dB (LS), {gaps_d['SilentLMMSE']:.2f} dB (LMMSE); "
           f"cascaded @1e-1: {gaps_c['SilentLS']:.2f} dB (LS), {gaps_c['SilentLMMSE']:.2f} dB (LMMSE)")
    assert ok


def test_c06_mmse_low_snr(fig3_run):
    ls = fig3_run.series("LS", "cascaded")[0]
    mm = fig3_run.series("MMSE", "cascaded")[0]
    assert ls.power_dbm == mm.power_dbm == 0.0
    ratio = ls.nmse / mm.nmse
    ok = ratio >= 10
    report(6, "MMSE dominance at 0 dBm", ok,
           f"cascaded LS {ls.nmse:.3g} / MMSE {mm.nmse:.3g} = {ratio:.1f} over {ls.trials} paired trials")
    assert ok


def test_c07_tag_count_independence():
    # fixed forward distances so K=7 and K=15 share per-tag statistics
    cfg = preset("fig4").override(variants=[{"num_tags": 7, "d_forward": [6.0] * 7},
                                            {"num_tags": 15, "d_forward": [6.0] * 15}],
                                  estimators=["LS"])
    res = run_scenario(cfg)
    worst = 0.0
    for kind in ("direct", "cascaded"):
        a, b = res.series("LS", kind, num_tags=7), res.series("LS", kind, num_tags=15)
        for ra, rb in zip(a, b):
            worst = max(worst, abs(ra.nmse - rb.nmse) / math.hypot(ra.stderr, rb.stderr))
    ok = worst < 3.0
    report(7, "K-independence (tau=16, K=7 vs 15)", ok,
           f"max |difference| = {worst:.2f} combined stderr over 10 powers x 2 channel kinds")
    assert ok


def test_c08_tau_scaling():
    res = run_scenario(preset("fig5").override(trials=2000, power_dbm=[15.0, 20.0, 25.0, 30.0],
                                               estimators=["LS"]))
    a, b = res.series("LS", "cascaded", tau=32), res.series("LS", "cascaded", tau=64)
    shifts = [10 * math.log10(ra.nmse / rb.nmse) for ra, rb in zip(a, b)]
    ok = all(2.5 <= s <= 3.5 for s in shifts)
    report(8, "tau 32 -> 64 cascaded shift", ok,
           "shifts " + ", ".join(f"{s:.2f}" for s in shifts) + " dB at 15/20/25/30 dBm")
    assert ok


def test_c09_noiseless_exactness():
    rng = np.random.default_rng(9)
    params, betas, _, x = _tau8_setup()
    ch = gen_channels(params, 0.6, 10, rng, size=50)
    p = 100.0
    rx = synth_timespread_rx(ch, x, SourcePilot.constant(8, p), 0.0, rng)
    ls = ls_estimate(rx.source_projected, x, p)
    scaled = scaled_ls_estimate(ls, x, p, 0.0)
    silent_rx = synth_silent_rx(ch, 8, p, 0.0, rng)
    ests = {
        "LS": ls.stacked_est,
        "ScaledLS": scaled.stacked_est,
        "MMSE": mmse_estimate(rx.despread, betas, p, 0.6, 0.0).stacked_est,
        "LMMSE": lmmse_stacked(rx.despread, betas, p, 0.6, 0.0).stacked_est,
        "SilentLS": silent_estimate(silent_rx, p, 0.6, "LS").stacked_est,
        "SilentLMMSE": silent_estimate(silent_rx, p, 0.6, "LMMSE", betas).stacked_est,
    }
    errs = {k: float(np.linalg.norm(v - ch.stacked) / np.linalg.norm(ch.stacked)) for k, v in ests.items()}
    ok = max(errs.values()) < 1e-10 and np.all(scaled.aux["gamma0"] == 1.0)
    report(9, "noiseless exactness", ok, "max relative error " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
    assert ok


def test_c10_scaled_ls_optimality():
    # tau=8, K=7, M=10 at 0 dBm: closed-form gamma0 is about 0.98 here
    rng = np.random.default_rng(10)
    params, betas, sigma2, x = _tau8_setup()
    p = 1.0
    ch = gen_channels(params, 0.6, 10, rng, size=1000)
    rx = synth_timespread_rx(ch, x, SourcePilot.constant(8, p), sigma2, rng)
    est = ls_estimate(rx.source_projected, x, p).stacked_est
    grid = np.round(np.arange(0.0, 2.0 + 1e-9, 0.001), 3)
    # ||g est - H||^2 summed over trials, expanded as a quadratic in g
    e2 = np.sum(np.abs(est) ** 2)
    cross = np.sum((est.conj() * ch.stacked).real)
    mse = grid ** 2 * e2 - 2 * grid * cross
    best = grid[np.argmin(mse)]
    trace_r = 10 * (betas[0] + 0.6 * betas[1:].sum())
    gamma0 = float(scaled_ls_gamma(trace_r, sigma2, x, p, 10))
    sample = float(np.mean(scaled_ls_estimate(ls_estimate(rx.source_projected, x, p), x, p, sigma2).aux["gamma0"]))
    ok = abs(best - gamma0) <= 0.001 + 1e-12
    report(10, "scaled-LS grid optimum", ok,
           f"grid argmin {best:.3f} vs closed form {gamma0:.4f} (ensemble Tr R); "
           f"mean per-trial sample gamma0 {sample:.4f}")
    assert ok


def test_c11_multiuser_variance():
    params, _, sigma2 = default_params(3)
    x = make_pilot("hadamard", 3)
    s = orthonormal_user_pilots(2, 2)
    rng = np.random.default_rng(11)
    p = 10.0
    acc = 0.0
    for _ in range(TRIALS_1E5 // CHUNK):
        mch = gen_multiuser_channels(params, 0.6, 10, 2, rng, size=CHUNK)
        rx = synth_multiuser_rx(mch.stacked, s, x, p, sigma2, rng)
        err = multiuser_ls_estimate(rx.projected, x, p, 2).stacked_est - mch.stacked
        acc += float(np.sum(np.abs(err) ** 2))
    ratio = acc / (TRIALS_1E5 * 2 * 10 * 4) / (sigma2 / (p * 2 * 4))
    ok = abs(ratio - 1) <= 0.03
    report(11, "multi-user LS variance", ok, f"empirical / sigma^2/(p tau' Q) = {ratio:.4f} (N=2, K=3, tau'=2, Q=4)")
    assert ok


def test_c12_determinism():
    checks = []
    for name in ("fig3", "fig7", "multiuser-demo"):
        cfg = preset(name).override(trials=300, power_dbm=[0.0, 20.0])
        one = run_scenario(cfg, workers=1).csv_text
        again = run_scenario(cfg, workers=1).csv_text
        eight = run_scenario(cfg, workers=8).csv_text
        checks.append((name, one == again, one == eight))
    ok = all(a and b for _, a, b in checks)
    report(12, "byte-identical CSV", ok,
           "; ".join(f"{n}: rerun {'same' if a else 'DIFF'}, 1 vs 8 workers {'same' if b else 'DIFF'}"
                     for n, a, b in checks))
    assert ok
