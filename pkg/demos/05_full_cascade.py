"""The complete experiment: two-rate cascade on the circuit with surface changes.

Synthesizes (or reuses) the artifact, runs the closed loop in both
scheduling modes with the paper-style friction profile, prints the RMSE
comparison table, and draws the trajectory, velocity tracking, error and
friction-estimation figures.

This is the script equivalent of:

    tsdrive synthesize --out artifact.json
    tsdrive simulate --artifact artifact.json --mode reference --out ref/
    tsdrive simulate --artifact artifact.json --mode frozen    --out fzn/
    tsdrive compare ref/metrics.json fzn/metrics.json
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tsdrive.config import RunConfig
from tsdrive.simulate import compare, run
from tsdrive.synthesis import (load_artifact, save_artifact,
                               synthesize_from_config)

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)
ARTIFACT = os.path.join(OUT, "artifact.json")

base = RunConfig.from_dict({})
if not os.path.exists(ARTIFACT):
    print("synthesizing gains and terminal set ...")
    result = synthesize_from_config(base)
    save_artifact(ARTIFACT, result["config_hash"],
                  (result["kinematic"], result["terminal"],
                   result["kinematic_certification"]),
                  (result["dynamic"], result["dynamic_certification"]),
                  result["dynamic_meta"])
artifact = load_artifact(ARTIFACT, base.config_hash())

logs, metrics = {}, {}
for mode in ("reference", "frozen"):
    cfg = RunConfig.from_dict({"mpc": {"scheduling_mode": mode},
                               "sim": {"seed": 1}})
    print(f"running 60 s closed loop, {mode} scheduling ...")
    logs[mode], metrics[mode] = run(cfg, artifact)

table = compare([metrics["reference"], metrics["frozen"]], ["REF", "FZN"])
print()
print(table.to_text())
table.save_csv(os.path.join(OUT, "05_comparison.csv"))

sl = logs["reference"]
t_i = sl.inner["t"]
t_o = sl.outer["t"]

fig, ax = plt.subplots(figsize=(7, 5))
ax.plot(sl.outer["X_d"], sl.outer["Y_d"], "k--", lw=1, label="reference")
ax.plot(sl.inner["X"], sl.inner["Y"], lw=1, label="vehicle")
ax.axis("equal")
ax.set_xlabel("X [m]")
ax.set_ylabel("Y [m]")
ax.set_title("circuit and driven trajectory (REF mode)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "05_trajectory.png"), dpi=120)

fig, axes = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
axes[0].plot(t_i, sl.inner["v_d"], "k--", lw=1, label="v_d")
axes[0].plot(t_i, sl.inner["v"], lw=1, label="v")
axes[0].set_ylabel("speed [m/s]")
axes[0].legend()
axes[0].set_title("velocity tracking through four road surfaces")
axes[1].plot(t_i, sl.inner["omega_d"], "k--", lw=1, label="omega_d")
axes[1].plot(t_i, sl.inner["omega"], lw=1, label="omega")
axes[1].set_ylabel("yaw rate [rad/s]")
axes[1].set_xlabel("t [s]")
axes[1].legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "05_velocities.png"), dpi=120)

fig, axes = plt.subplots(3, 1, figsize=(10, 8), sharex=True)
axes[0].plot(t_o, sl.outer["x_e"], label="x_e")
axes[0].plot(t_o, sl.outer["y_e"], label="y_e")
axes[0].set_ylabel("position error [m]")
axes[0].legend()
axes[0].set_title("tracking errors and friction estimation (REF mode)")
axes[1].plot(t_o, sl.outer["theta_e"])
axes[1].set_ylabel("heading error [rad]")
axes[2].plot(t_i, sl.inner["F_fr_true"], "k", label="true")
axes[2].plot(t_i, sl.inner["F_fr_smoothed"], label="estimated (smoothed)")
axes[2].set_ylabel("F_fr [N]")
axes[2].set_xlabel("t [s]")
axes[2].legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "05_errors_friction.png"), dpi=120)

fig, ax = plt.subplots(figsize=(8, 4))
mpc_ms = sl.timing["mpc_solve_s"]
mpc_ms = mpc_ms[np.isfinite(mpc_ms)] * 1e3
mhe_ms = sl.timing["mhe_solve_s"] * 1e3
ax.hist(mpc_ms, bins=40, alpha=0.6, label=f"MPC QP (p95 {np.percentile(mpc_ms, 95):.2f} ms)")
ax.hist(mhe_ms, bins=40, alpha=0.6, label=f"MHE QP (p95 {np.percentile(mhe_ms, 95):.2f} ms)")
ax.set_yscale("log")
ax.set_xlabel("solve time [ms]")
ax.set_ylabel("count")
ax.set_title("online solve times (budgets: 100 ms outer, 10 ms inner)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "05_solve_times.png"), dpi=120)

print("figures and comparison written to", OUT)
