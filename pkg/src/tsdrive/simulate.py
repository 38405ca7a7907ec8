"""Two-rate closed-loop executive: MPC at Tc, LQR + MHE-UIO at Td.

Per outer period: planner lookup, tracking error, MPC -> (v, omega)
setpoint.  Per inner period: noisy speed/yaw-rate sampling, MHE step,
friction estimate, LQR step, plant integration with the injected friction
profile.  Everything lands in a SimLog; wall-clock solve times go to a
separate timing table so the SimLog itself is deterministic.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from . import models
from .config import RunConfig
from .lqr import DynamicSetpoint, TsLqr
from .mhe import TsMheUio
from .mpc import TsMpc
from .planner import plan, tracking_error
from .synthesis import load_artifact

log = logging.getLogger("tsdrive")

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class FrictionProfile:
    """Piecewise-constant friction-force deviation with first-order smoothing."""

    segments: tuple[tuple[float, float], ...]
    tau: float = 0.3

    def target(self, t: float) -> float:
        value = 0.0
        for start, F in self.segments:
            if t >= start:
                value = F
        return value

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "FrictionProfile":
        f = cfg.data["friction"]
        return cls(tuple((float(t), float(F)) for t, F in f["segments"]), float(f["tau"]))


@dataclass
class SimLog:
    """Deterministic per-step records (inner at Td, outer at Tc)."""

    inner: dict[str, np.ndarray]
    outer: dict[str, np.ndarray]
    timing: dict[str, np.ndarray]

    INNER_COLUMNS = ("t", "X", "Y", "theta", "v", "alpha", "omega",
                     "v_hat", "alpha_hat", "omega_hat",
                     "F_fr_true", "F_fr_raw", "F_fr_smoothed",
                     "FxR", "delta", "FxR_feedback", "FxR_proportional",
                     "v_ref", "omega_ref", "v_d", "omega_d",
                     "mhe_fallback", "force_saturated", "steer_saturated", "v_clamped")
    OUTER_COLUMNS = ("t", "X_d", "Y_d", "theta_d", "v_d", "omega_d",
                     "x_e", "y_e", "theta_e", "eX", "eY",
                     "v_cmd", "omega_cmd",
                     "mpc_cost", "mpc_status_ok", "terminal_active",
                     "warm_started", "fallback")

    def save(self, out_dir) -> None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        self._write_csv(os.path.join(out_dir, "inner.csv"), self.INNER_COLUMNS, self.inner)
        self._write_csv(os.path.join(out_dir, "outer.csv"), self.OUTER_COLUMNS, self.outer)
        self._write_csv(os.path.join(out_dir, "timing.csv"),
                        tuple(self.timing.keys()), self.timing)

    @staticmethod
    def _write_csv(path, columns, table) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            n = len(table[columns[0]])
            for i in range(n):
                writer.writerow([FLOAT_FMT % table[c][i] for c in columns])


@dataclass
class Metrics:
    rmse_x: float
    rmse_y: float
    rmse_theta: float
    rmse_v: float
    rmse_omega: float
    effort_FxR: float                 # integral |FxR| dt
    effort_FxR_feedback: float        # integral |feedback component| dt
    effort_FxR_proportional: float    # integral |proportional component| dt
    effort_steer_rate: float          # integral |d delta / dt| dt
    mpc_failures: int
    mhe_fallbacks: int
    aborted: bool = False
    abort_reason: str = ""
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_file(cls, path) -> "Metrics":
        import dataclasses

        with open(path) as fh:
            d = json.load(fh)
        required = {f.name for f in dataclasses.fields(cls)
                    if f.default is dataclasses.MISSING
                    and f.default_factory is dataclasses.MISSING}
        missing = required - set(d)
        if missing:
            raise ValueError(f"metrics file {path} missing fields {sorted(missing)}")
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"metrics file {path} has unknown fields {sorted(unknown)}")
        return cls(**d)


class SimulationError(RuntimeError):
    pass


def run(config: RunConfig, artifact: dict) -> tuple[SimLog, Metrics]:
    """Execute the closed-loop simulation; deterministic given config + seed."""
    params = config.vehicle
    Tc, Td = config.Tc, config.Td
    inner_per_outer = config.inner_steps
    sim = config.data["sim"]
    duration = float(sim["duration"])
    rng = np.random.default_rng(int(sim["seed"]))
    sigma = np.array([float(sim["noise_sigma_v"]), float(sim["noise_sigma_omega"])])

    mpc_cfg = config.mpc_config()
    kin_model = models.kinematic_polytope(
        models.SchedulingDomain(tuple(tuple(b) for b in
                                      config.data["synthesis"]["kinematic"]["bounds"])), Tc)
    mpc = TsMpc(mpc_cfg, kin_model, artifact["kinematic"], artifact["terminal"])

    lqr = TsLqr(config.lqr_config(), artifact["dynamic"])

    dyn_model = models.dynamic_polytope(models.DYNAMIC_DOMAIN, params, Td)
    profile = FrictionProfile.from_config(config)

    path = plan(config.circuit(), a_max=float(config.data["planner"]["a_max"]),
                Tc=Tc, duration=duration + (mpc_cfg.N + 2) * Tc,
                a_lat_max=float(config.data["planner"]["a_lat_max"]))

    n_outer = int(round(duration / Tc))
    n_inner = n_outer * inner_per_outer

    ref0 = path[0]
    pose = (ref0.X_d, ref0.Y_d, ref0.theta_d)
    state = models.DynamicState(ref0.v_d, 0.0, ref0.omega_d)
    estimator = TsMheUio(config.mhe_config(), params, dyn_model,
                         x0=state.as_array())
    u_prev = models.KinematicInput(ref0.v_d, ref0.omega_d)
    u_inner_prev = np.zeros(2)
    F_applied = 0.0

    inner = {c: np.zeros(n_inner) for c in SimLog.INNER_COLUMNS}
    outer = {c: np.zeros(n_outer) for c in SimLog.OUTER_COLUMNS}
    timing = {"t": np.zeros(n_inner), "mhe_solve_s": np.zeros(n_inner),
              "mpc_solve_s": np.full(n_inner, np.nan)}

    mpc_failures = 0
    mhe_fallbacks = 0
    consecutive_mpc_failures = 0
    abort_reason = ""
    steps_done = 0
    for k in range(n_outer):
        t_outer = k * Tc
        ref = path[k]
        err = tracking_error(pose, ref)
        window = path.window(k, mpc_cfg.N)
        cmd, diag = mpc.step(err, u_prev, window,
                             omega_now=estimator.predicted_estimate.omega)
        u_prev = cmd
        if diag.fallback:
            mpc_failures += 1
            consecutive_mpc_failures += 1
            if consecutive_mpc_failures >= 20:
                abort_reason = (f"controller failed {consecutive_mpc_failures} "
                                f"consecutive periods at t = {t_outer:.1f} s")
                break
        else:
            consecutive_mpc_failures = 0
        setpoint = DynamicSetpoint(cmd.v, cmd.omega)

        outer["t"][k] = t_outer
        outer["X_d"][k] = ref.X_d
        outer["Y_d"][k] = ref.Y_d
        outer["theta_d"][k] = ref.theta_d
        outer["v_d"][k] = ref.v_d
        outer["omega_d"][k] = ref.omega_d
        outer["x_e"][k] = err.x_e
        outer["y_e"][k] = err.y_e
        outer["theta_e"][k] = err.theta_e
        outer["eX"][k] = ref.X_d - pose[0]
        outer["eY"][k] = ref.Y_d - pose[1]
        outer["v_cmd"][k] = cmd.v
        outer["omega_cmd"][k] = cmd.omega
        outer["mpc_cost"][k] = diag.cost
        outer["mpc_status_ok"][k] = 0.0 if diag.fallback else 1.0
        outer["terminal_active"][k] = float(diag.terminal_active)
        outer["warm_started"][k] = float(diag.warm_started)
        outer["fallback"][k] = float(diag.fallback)

        for j in range(inner_per_outer):
            i = k * inner_per_outer + j
            t = t_outer + j * Td

            y = state.as_array()[[0, 2]] + sigma * rng.standard_normal(2)
            mhe_out = estimator.step(y, u_inner_prev)
            if mhe_out.status.startswith("fallback"):
                mhe_fallbacks += 1
            x_hat = models.DynamicState(*mhe_out.x_pred)

            u_d, lqr_diag = lqr.step(setpoint, x_hat, estimator.F_smoothed)

            F_applied += (Td / profile.tau) * (profile.target(t) - F_applied)
            try:
                result = models.plant_step(pose, state, u_d, F_applied, params, Td)
            except models.SimulationDiverged as e:
                abort_reason = str(e)
                break

            inner["t"][i] = t
            inner["X"][i], inner["Y"][i], inner["theta"][i] = pose
            inner["v"][i], inner["alpha"][i], inner["omega"][i] = state.as_array()
            inner["v_hat"][i], inner["alpha_hat"][i], inner["omega_hat"][i] = mhe_out.x_pred
            inner["F_fr_true"][i] = F_applied
            inner["F_fr_raw"][i] = estimator.F_raw
            inner["F_fr_smoothed"][i] = estimator.F_smoothed
            inner["FxR"][i] = u_d.FxR
            inner["delta"][i] = u_d.delta
            inner["FxR_feedback"][i] = lqr_diag.FxR_feedback
            inner["FxR_proportional"][i] = lqr_diag.FxR_proportional
            inner["v_ref"][i] = setpoint.v_ref
            inner["omega_ref"][i] = setpoint.omega_ref
            inner["v_d"][i] = ref.v_d
            inner["omega_d"][i] = ref.omega_d
            inner["mhe_fallback"][i] = float(mhe_out.status.startswith("fallback"))
            inner["force_saturated"][i] = float(lqr_diag.force_saturated)
            inner["steer_saturated"][i] = float(lqr_diag.steer_saturated)
            inner["v_clamped"][i] = float(result.v_clamped)
            timing["t"][i] = t
            timing["mhe_solve_s"][i] = mhe_out.solve_time
            if j == 0:
                timing["mpc_solve_s"][i] = diag.solve_time

            pose, state = result.pose, result.state
            u_inner_prev = u_d.as_array()
        else:
            steps_done = k + 1
            continue
        break      # inner loop aborted

    if abort_reason:
        log.error("simulation aborted: %s (partial log, %d of %d outer steps)",
                  abort_reason, steps_done, n_outer)
        n_keep_o = max(steps_done, 1)
        n_keep_i = n_keep_o * inner_per_outer
        inner = {c: v[:n_keep_i] for c, v in inner.items()}
        outer = {c: v[:n_keep_o] for c, v in outer.items()}
        timing = {c: v[:n_keep_i] for c, v in timing.items()}

    simlog = SimLog(inner, outer, timing)
    metrics = compute_metrics(simlog, warmup=float(sim["warmup"]), Td=Td,
                              mpc_failures=mpc_failures, mhe_fallbacks=mhe_fallbacks)
    metrics.aborted = bool(abort_reason)
    metrics.abort_reason = abort_reason
    return simlog, metrics


def compute_metrics(simlog: SimLog, warmup: float, Td: float,
                    mpc_failures: int = 0, mhe_fallbacks: int = 0) -> Metrics:
    outer = simlog.outer
    inner = simlog.inner
    om = outer["t"] >= warmup
    im = inner["t"] >= warmup

    def rmse(x):
        if len(x) == 0:
            return float("nan")
        return float(np.sqrt(np.mean(np.square(x))))

    delta_rate = np.diff(inner["delta"]) / Td
    timing_summary = {}
    for name, key in (("mpc", "mpc_solve_s"), ("mhe", "mhe_solve_s")):
        vals = simlog.timing[key]
        vals = vals[np.isfinite(vals)]
        if len(vals):
            timing_summary[name] = {
                "p50_ms": float(np.percentile(vals, 50) * 1e3),
                "p95_ms": float(np.percentile(vals, 95) * 1e3),
                "max_ms": float(vals.max() * 1e3),
            }
    # position RMSEs are world-frame (the body-frame errors stay in the log)
    return Metrics(
        rmse_x=rmse(outer["eX"][om]),
        rmse_y=rmse(outer["eY"][om]),
        rmse_theta=rmse(outer["theta_e"][om]),
        rmse_v=rmse((inner["v"] - inner["v_d"])[im]),
        rmse_omega=rmse((inner["omega"] - inner["omega_d"])[im]),
        effort_FxR=float(np.sum(np.abs(inner["FxR"])) * Td),
        effort_FxR_feedback=float(np.sum(np.abs(inner["FxR_feedback"])) * Td),
        effort_FxR_proportional=float(np.sum(np.abs(inner["FxR_proportional"])) * Td),
        effort_steer_rate=float(np.sum(np.abs(delta_rate)) * Td),
        mpc_failures=mpc_failures,
        mhe_fallbacks=mhe_fallbacks,
        timing=timing_summary,
    )


METRIC_COLUMNS = ("rmse_x", "rmse_y", "rmse_theta", "rmse_v", "rmse_omega")


@dataclass
class ComparisonTable:
    labels: list[str]
    rows: dict[str, list[float]]          # metric -> per-label values

    def winners(self) -> dict[str, str]:
        return {metric: self.labels[int(np.argmin(vals))]
                for metric, vals in self.rows.items()}

    def to_text(self) -> str:
        width = max(12, *(len(l) for l in self.labels))
        header = "metric".ljust(12) + "".join(l.rjust(width + 2) for l in self.labels) + "  winner"
        lines = [header, "-" * len(header)]
        winners = self.winners()
        for metric, vals in self.rows.items():
            line = metric.ljust(12) + "".join(f"{v:>{width + 2}.6g}" for v in vals)
            lines.append(line + f"  {winners[metric]}")
        return "\n".join(lines)

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", *self.labels, "winner"])
            winners = self.winners()
            for metric, vals in self.rows.items():
                writer.writerow([metric, *(FLOAT_FMT % v for v in vals), winners[metric]])


def compare(metrics_list: list[Metrics], labels: list[str]) -> ComparisonTable:
    """Aligned metric table with per-metric winners (lower is better)."""
    if len(metrics_list) < 2:
        raise ValueError("need at least two metrics sets to compare")
    if len(metrics_list) != len(labels):
        raise ValueError("labels must match metrics")
    rows = {}
    for metric in METRIC_COLUMNS:
        rows[metric] = [getattr(m, metric) for m in metrics_list]
    return ComparisonTable(list(labels), rows)


def run_and_compare(configs: list[RunConfig], artifact: dict,
                    labels: list[str] | None = None) -> ComparisonTable:
    """Run each config against the same artifact and tabulate the metrics.

    Configs must share the synthesis-relevant sections (same artifact hash);
    differing durations are allowed but flagged, since whole-run RMSEs then
    aggregate over different horizons.
    """
    if len(configs) < 2:
        raise ValueError("need at least two configs to compare")
    hashes = {c.config_hash() for c in configs}
    if len(hashes) > 1:
        raise ValueError("configs disagree on synthesis sections; "
                         "they cannot share one artifact")
    durations = {float(c.data["sim"]["duration"]) for c in configs}
    if len(durations) > 1:
        log.warning("compare: run durations differ (%s); metrics aggregate "
                    "over different horizons", sorted(durations))
    labels = labels or [f"run{i}" for i in range(len(configs))]
    metrics = [run(c, artifact)[1] for c in configs]
    return compare(metrics, labels)


def run_from_files(config_path, artifact_path, out_dir,
                   mode: str | None = None, seed: int | None = None) -> Metrics:
    """CLI-facing wrapper: load, hash-check, run, save."""
    import os

    config = RunConfig.from_file(config_path) if config_path else RunConfig.from_dict({})
    if mode is not None:
        config.data["mpc"]["scheduling_mode"] = mode
    if seed is not None:
        config.data["sim"]["seed"] = int(seed)
    config.validate()
    artifact = load_artifact(artifact_path, expected_hash=config.config_hash())
    simlog, metrics = run(config, artifact)
    os.makedirs(out_dir, exist_ok=True)
    simlog.save(out_dir)
    metrics.save(os.path.join(out_dir, "metrics.json"))
    return metrics
