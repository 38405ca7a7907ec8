"""Acceptance suite: one test per criterion, one printed line per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines inline.
Criterion 7 (scheduling-mode ordering) is implemented faithfully and is an
expected failure in this reconstruction; see the analysis referenced in its
message.
"""

import time

import numpy as np
import pytest

from tsdrive import models
from tsdrive.config import RunConfig
from tsdrive.mhe import MheConfig, TsMheUio, build_uio
from tsdrive.models import (DYNAMIC_DOMAIN, KINEMATIC_DOMAIN, DynamicInput,
                            DynamicState, VehicleParams, dynamic_polytope,
                            kinematic_polytope, plant_step)
from tsdrive.simulate import run
from tsdrive.synthesis import augment_dynamic_model, certify

PARAMS = VehicleParams()


def report(num: int, passed: bool, detail: str):
    tag = "PASS" if passed else "FAIL"
    line = f"[{tag}] criterion {num}: {detail}"
    print(line)
    assert passed, line


@pytest.fixture(scope="module")
def default_run(artifact):
    """Criterion-6 run (default config, REF mode, paper-style profile)."""
    cfg = RunConfig.from_dict({})
    t0 = time.perf_counter()
    simlog, metrics = run(cfg, artifact)
    return simlog, metrics, time.perf_counter() - t0


def test_criterion_01_membership_partition():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    ok = True
    for domain, build in ((KINEMATIC_DOMAIN, kinematic_polytope),
                          (DYNAMIC_DOMAIN, None)):
        pts = domain.sample(rng, 10_000)
        for values in pts:
            w = domain.membership(values)
            if abs(w.sum() - 1.0) > 1e-12 or np.any(w < 0.0):
                ok = False
        for i in range(domain.n_vertices):
            w = domain.membership(domain.vertex_values(i))
            exact = np.zeros(domain.n_vertices)
            exact[i] = 1.0
            if not np.array_equal(w, exact):
                ok = False
    elapsed = time.perf_counter() - t0
    report(1, ok and elapsed < 1.0,
           f"partition of unity on 2x10^4 points, exact vertex recovery "
           f"({elapsed:.2f} s < 1 s)")


def test_criterion_02_uio_algebra():
    t0 = time.perf_counter()
    model = dynamic_polytope(params=PARAMS, Td=0.01)
    uio = build_uio(model)
    CE = uio.C @ model.E
    exact_inverse = float(uio.Theta @ CE) == 1.0
    exact_annihilation = bool(np.all(uio.projector @ model.E == 0.0))
    first_rows_zero = bool(np.all(uio.A_o[:, 0, :] == 0.0))
    theta_value = (abs(uio.Theta[0] + 68300.0) < 1e-6 * 68300.0
                   and uio.Theta[1] == 0.0)
    elapsed = time.perf_counter() - t0
    report(2, exact_inverse and exact_annihilation and first_rows_zero
           and theta_value and elapsed < 1.0,
           f"Theta(C E) = 1 exactly, (I - E Theta C)E = 0 exactly, first "
           f"rows of A_o zero, Theta = [-68300, 0] ({elapsed:.2f} s < 1 s)")


def test_criterion_03_synthesis_certification(artifact, default_config):
    t0 = time.perf_counter()
    syn = default_config.data["synthesis"]
    kin_model = kinematic_polytope(
        models.SchedulingDomain(tuple(tuple(b) for b in syn["kinematic"]["bounds"])), 0.1)
    kin_report = certify(kin_model, artifact["kinematic"], artifact["terminal"],
                         n_samples=1000, seed=1)
    dyn_model = dynamic_polytope(
        models.SchedulingDomain(tuple(tuple(b) for b in syn["dynamic"]["bounds"])),
        PARAMS, 0.01)
    aug = augment_dynamic_model(
        dyn_model, artifact["dynamic_meta"]["filter_pole"],
        nominal_columns={0: np.array([0.01 / PARAMS.M, 0.0, 0.0])})
    dyn_report = certify(aug, artifact["dynamic"], n_samples=1000, seed=1)
    elapsed = time.perf_counter() - t0
    ok = (kin_report.passed and dyn_report.passed
          and kin_report.max_vertex_rho < 1.0 and kin_report.max_blend_rho < 1.0
          and dyn_report.max_vertex_rho < 1.0 and dyn_report.max_blend_rho < 1.0
          and kin_report.max_boundary_quadratic <= 1.0 + 1e-9
          and kin_report.max_input_excess <= 1e-9
          and elapsed < 120.0)
    report(3, ok,
           f"Eq.(10) feasible for both models with Table-2/Table-4 weights; "
           f"vertex/blend spectral radii < 1 (kin {kin_report.max_blend_rho:.4f}, "
           f"dyn {dyn_report.max_blend_rho:.4f}); terminal invariance and input "
           f"admissibility with zero witnesses on 1000 boundary samples "
           f"({elapsed:.1f} s < 120 s)")


def test_criterion_04_terminal_set_sanity(artifact):
    S = artifact["terminal"].S
    pd = bool(np.linalg.eigvalsh(S).min() > 0)
    c01 = abs(S[0, 1]) / np.sqrt(S[0, 0] * S[1, 1])
    c02 = abs(S[0, 2]) / np.sqrt(S[0, 0] * S[2, 2])
    block_structured = c01 < 0.01 and c02 < 0.01
    ev = np.linalg.eigvalsh(S[1:, 1:])
    ratio = float(np.sqrt(ev[1] / ev[0]))
    paper = np.array([[23.813, 76.596], [76.596, 257.251]])
    evp = np.linalg.eigvalsh(paper)
    paper_ratio = float(np.sqrt(evp[1] / evp[0]))
    within = paper_ratio / 3.0 <= ratio <= paper_ratio * 3.0
    report(4, pd and block_structured and within,
           f"S positive definite, x_e decoupled (couplings {c01:.1e}, {c02:.1e}), "
           f"(y_e, theta_e) axis ratio {ratio:.2f} within 3x of the published "
           f"{paper_ratio:.2f}")


def test_criterion_05_mhe_interpolation_and_decoupling():
    t0 = time.perf_counter()
    dyn_model = dynamic_polytope(params=PARAMS, Td=0.01)

    def trace(F_profile, steps=200):
        state = DynamicState(10.0, 0.0, 0.0)
        pose = (0.0, 0.0, 0.0)
        xs, ys, us = [], [], []
        for k in range(steps):
            xs.append(state.as_array())
            ys.append(state.as_array()[[0, 2]])
            u = np.array([3300.0 + 200.0 * np.sin(0.04 * k), 0.06 * np.sin(0.017 * k)])
            us.append(u)
            res = plant_step(pose, state, DynamicInput(*u), F_profile(k), PARAMS, 0.01)
            pose, state = res.pose, res.state
        return np.array(xs), np.array(ys), np.array(us)

    def estimate(xs, ys, us):
        est = TsMheUio(MheConfig(), PARAMS, dyn_model, x0=xs[0])
        errs, smoothed = [], []
        for k in range(len(ys)):
            out = est.step(ys[k], us[k - 1] if k else np.zeros(2))
            errs.append(out.estimates[-1] - xs[k])
            smoothed.append(est.F_smoothed)
        return np.array(errs), np.array(smoothed)

    xs0, ys0, us0 = trace(lambda k: 0.0)
    err0, _ = estimate(xs0, ys0, us0)
    interp_ok = np.abs(err0).max() < 1e-6

    step_at = 60
    xs1, ys1, us1 = trace(lambda k: -3015.0 if k >= step_at else 0.0)
    err1, smooth1 = estimate(xs1, ys1, us1)
    decouple_ok = np.abs(err1[:, [0, 2]] - err0[:, [0, 2]]).max() < 1e-6
    settle = [k for k in range(step_at, len(smooth1))
              if abs(smooth1[k] + 3015.0) < 0.05 * 3015.0]
    settle_ok = bool(settle) and (settle[0] - step_at) * 0.01 <= 0.5
    elapsed = time.perf_counter() - t0
    report(5, interp_ok and decouple_ok and settle_ok and elapsed < 30.0,
           f"noiseless interpolation to {np.abs(err0).max():.1e} (< 1e-6); "
           f"v/omega estimation error unchanged under -3015 N step "
           f"({np.abs(err1[:, [0, 2]] - err0[:, [0, 2]]).max():.1e}); "
           f"F_hat within 5% in {(settle[0] - step_at) * 0.01 if settle else 99:.2f} s "
           f"(<= 0.5 s) ({elapsed:.1f} s < 30 s)")


def test_criterion_06_cascade_regression(default_run):
    simlog, metrics, elapsed = default_run
    d = metrics.to_dict()
    ok = (0.1 <= d["rmse_x"] <= 1.0 and 0.1 <= d["rmse_y"] <= 1.0
          and d["rmse_theta"] < 0.05 and elapsed < 300.0)
    report(6, ok,
           f"default circuit, REF mode, paper-style friction profile: "
           f"RMSE_x = {d['rmse_x']:.3f} m, RMSE_y = {d['rmse_y']:.3f} m in "
           f"[0.1, 1.0]; RMSE_theta = {d['rmse_theta']:.4f} < 0.05 rad "
           f"({elapsed:.0f} s < 300 s)")


def test_criterion_07_scheduling_mode_ordering(artifact):
    means = {}
    for mode in ("reference", "frozen"):
        vals = []
        for seed in (1, 2, 3, 4, 5):
            cfg = RunConfig.from_dict({"mpc": {"scheduling_mode": mode},
                                       "sim": {"seed": seed}})
            _, m = run(cfg, artifact)
            d = m.to_dict()
            vals.append([d["rmse_x"], d["rmse_y"], d["rmse_theta"],
                         d["rmse_v"], d["rmse_omega"]])
        means[mode] = np.asarray(vals).mean(axis=0)
    wins = means["reference"] <= means["frozen"]
    detail = (f"REF vs FZN mean RMSE over 5 seeds: REF <= FZN on "
              f"{int(wins.sum())}/5 metrics (need >= 4); "
              f"REF {np.round(means['reference'], 4).tolist()} vs "
              f"FZN {np.round(means['frozen'], 4).tolist()}. "
              f"Known honest failure of this reconstruction: the theta_e-decay "
              f"suspect is exonerated (sinc(theta_e) ~ 1), the deficit traces to "
              f"the v_d previews interacting with inner-loop lag; see the "
              f"decisions ledger for the full ablation.")
    report(7, int(wins.sum()) >= 4, detail)


def test_criterion_08_realtime_feasibility_proxy(default_run):
    _, metrics, _ = default_run
    t = metrics.timing
    ok = t["mpc"]["p95_ms"] < 100.0 and t["mhe"]["p95_ms"] < 10.0
    report(8, ok,
           f"MPC QP p95 = {t['mpc']['p95_ms']:.2f} ms < 100 ms; "
           f"MHE QP p95 = {t['mhe']['p95_ms']:.2f} ms < 10 ms "
           f"(substituted property for the 40-50x claim; NL baseline out of scope)")


def test_criterion_09_feedforward_effort(artifact):
    # long-straight circuit: the default rectangle never reaches steady
    # cruise (its straights are exactly accel+decel length), so steady-state
    # e_v would be undefined there.  The friction profile is the default
    # paper-style one.
    runs = {}
    for ff in (True, False):
        cfg = RunConfig.from_dict({
            "lqr": {"feedforward": ff},
            "planner": {"waypoints": [[0, 0], [400, 0], [400, 60], [0, 60]]},
            "sim": {"noise_sigma_v": 0.0, "noise_sigma_omega": 0.0, "seed": 0}})
        simlog, _ = run(cfg, artifact)
        runs[ff] = simlog

    def earth_effort(simlog):
        t = simlog.inner["t"]
        mask = (t >= 30.5) & (t < 45.0)      # dry-earth segment (+670 N)
        return float(np.abs(simlog.inner["FxR_feedback"][mask]).sum() * 0.01)

    eff_on, eff_off = earth_effort(runs[True]), earth_effort(runs[False])
    effort_ok = eff_on < eff_off

    def steady_ev(simlog):
        # cruise: planner speed steady over +-1.5 s windows
        t = simlog.inner["t"]
        ev = simlog.inner["v"] - simlog.inner["v_ref"]
        vd = simlog.inner["v_d"]
        steady = np.ones(len(t), bool)
        for lag in (50, 100, 150):
            steady[lag:] &= np.abs(vd[lag:] - vd[:-lag]) < 0.02
            steady[:-lag] &= np.abs(vd[:-lag] - vd[lag:]) < 0.02
        steady[:150] = False
        steady[-150:] = False
        worst = 0.0
        segments = 0
        for seg_start, seg_end in ((0.0, 15.0), (15.0, 30.0), (30.0, 45.0), (45.0, 60.0)):
            idx = np.where(steady & (t >= seg_start + 3.0) & (t < seg_end))[0]
            if len(idx) >= 100:
                segments += 1
                worst = max(worst, abs(float(ev[idx[-100:]].mean())))
        return worst, segments

    ev_worst, segments = steady_ev(runs[True])
    ev_ok = ev_worst < 1e-3 and segments == 4
    report(9, effort_ok and ev_ok,
           f"feedback-force effort on the increased-friction segment: "
           f"{eff_on:.0f} N s with compensation < {eff_off:.0f} N s without; "
           f"worst steady-state |e_v| = {ev_worst:.1e} m/s < 1e-3 over "
           f"{segments}/4 constant-friction segments")


def test_criterion_10_determinism(artifact, tmp_path):
    blobs = []
    for attempt in ("a", "b"):
        cfg = RunConfig.from_dict({"sim": {"duration": 10.0, "seed": 11}})
        simlog, _ = run(cfg, artifact)
        out = tmp_path / attempt
        simlog.save(out)
        blobs.append(((out / "inner.csv").read_bytes(),
                      (out / "outer.csv").read_bytes()))
    ok = blobs[0][0] == blobs[1][0] and blobs[0][1] == blobs[1][1]
    report(10, ok, "identical config + seed produce bitwise-identical SimLog CSVs")
