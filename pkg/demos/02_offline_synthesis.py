"""Offline stage: vertex LQR gains and the terminal ellipsoid.

Solves the two LMI problems for the default configuration, prints the
certification summaries, and draws the terminal set with a few closed-loop
trajectories under the blended vertex gains (which must stay inside).
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tsdrive import models
from tsdrive.config import RunConfig
from tsdrive.synthesis import synthesize_from_config

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

config = RunConfig.from_dict({})
result = synthesize_from_config(config)

for name in ("kinematic", "dynamic"):
    rep = result[f"{name}_certification"]
    print(f"{name}: vertex rho {rep.max_vertex_rho:.4f}, "
          f"blend rho {rep.max_blend_rho:.4f} over {rep.n_blend_samples} samples, "
          f"Lyapunov slack {rep.lyapunov_slack:.2e}, certified {rep.passed}")

terminal = result["terminal"]
S = terminal.S
print("terminal S =\n", np.round(S, 3))

# --- (y_e, theta_e) slice of the ellipsoid with invariant trajectories ------

kin = models.kinematic_polytope()
table = result["kinematic"]
phis = np.linspace(0, 2 * np.pi, 200)
Sblock = S[1:, 1:]
L = np.linalg.cholesky(Sblock)
ring = np.linalg.solve(L.T, np.stack([np.cos(phis), np.sin(phis)]))

fig, ax = plt.subplots(figsize=(6, 5))
ax.plot(ring[0], ring[1], "k-", lw=2, label="terminal set boundary (x_e = 0 slice)")
rng = np.random.default_rng(4)
for x0 in terminal.boundary_samples(6, rng):
    x = x0.copy()
    traj = [x[1:]]
    for _ in range(60):
        values = rng.uniform([-1.42, 0.1, -0.05], [1.42, 20.0, 0.05])
        A, B = kin.blend(values)
        K = table.blend(values)
        x = (A + B @ K) @ x
        traj.append(x[1:])
    traj = np.array(traj)
    ax.plot(traj[:, 0], traj[:, 1], alpha=0.7)
ax.set_xlabel("y_e [m]")
ax.set_ylabel("theta_e [rad]")
ax.set_title("vertex-gain closed loop contracts inside the terminal set\n"
             "(random scheduling every step)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "02_terminal_set.png"), dpi=120)

# --- gain surfaces over speed ------------------------------------------------

dyn_table = result["dynamic"]
vs = np.linspace(1.5, 20.0, 100)
K_ev = [dyn_table.blend([0.0, v, 0.0])[0, 0] for v in vs]
K_int = [dyn_table.blend([0.0, v, 0.0])[0, 4] for v in vs]

fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(vs, K_ev, label="force gain on e_v")
ax.plot(vs, K_int, label="force gain on int e_v")
ax.set_xlabel("v [m/s]")
ax.set_ylabel("gain [N per unit]")
ax.set_title("gain scheduling of the inner loop across speed")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "02_gain_schedule.png"), dpi=120)
print("figures written to", OUT)
