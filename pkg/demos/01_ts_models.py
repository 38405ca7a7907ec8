"""Membership machinery and the two TS vehicle models.

Walks through the building blocks: membership weights over the scheduling
box, vertex systems, the blended-vs-pointwise gap of the kinematic model
(confined to the single bilinear entry), and the ground-truth plant running
a lane-change-like open-loop maneuver.

Writes figures into demos/output/.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tsdrive import models

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

# --- membership weights along a scheduling sweep ---------------------------

domain = models.KINEMATIC_DOMAIN
omegas = np.linspace(-1.42, 1.42, 200)
weights = np.array([domain.membership([w, 10.0, 0.0]) for w in omegas])

fig, ax = plt.subplots(figsize=(7, 4))
for i in range(8):
    ax.plot(omegas, weights[:, i], label=f"vertex {i}")
ax.set_xlabel("omega [rad/s]")
ax.set_ylabel("membership weight")
ax.set_title("membership weights along the omega axis (v_d = 10, theta_e = 0)")
ax.legend(ncol=4, fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(OUT, "01_membership.png"), dpi=120)
print("partition of unity check:", weights.sum(axis=1).min(), weights.sum(axis=1).max())

# --- blended vs pointwise kinematic matrices --------------------------------

pm = models.kinematic_polytope()
rng = np.random.default_rng(0)
devs = []
for values in domain.sample(rng, 2000):
    A_blend, _ = pm.blend(values)
    A_point, _ = models.kinematic_matrices_at(values, 0.1)
    devs.append(np.abs(A_blend - A_point).max())
print(f"kinematic blend-vs-pointwise deviation: max {max(devs):.2e} "
      "(only the v_d*sinc(theta_e) entry differs)")

# --- the dynamic model's speed dependence -----------------------------------

params = models.VehicleParams()
vs = np.linspace(1.0, 20.0, 100)
a22 = [models.dynamic_entries(0.0, v, 0.0, params)["A22"] for v in vs]
a33 = [models.dynamic_entries(0.0, v, 0.0, params)["A33"] for v in vs]

fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(vs, a22, label="A22 (slip dynamics)")
ax.plot(vs, a33, label="A33 (yaw dynamics)")
ax.set_xlabel("v [m/s]")
ax.set_ylabel("continuous-time entry [1/s]")
ax.set_title("tire-dynamics entries are hyperbolic in speed")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "01_dynamic_entries.png"), dpi=120)

# --- ground-truth plant: open-loop swerve -----------------------------------

state = models.DynamicState(12.0, 0.0, 0.0)
pose = (0.0, 0.0, 0.0)
Td = 0.01
X, Y, alphas = [], [], []
for k in range(800):
    delta = 0.08 * np.sin(2 * np.pi * k * Td / 4.0)
    u = models.DynamicInput(3500.0, delta)
    res = models.plant_step(pose, state, u, 0.0, params, Td)
    pose, state = res.pose, res.state
    X.append(pose[0])
    Y.append(pose[1])
    alphas.append(state.alpha)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(X, Y)
ax1.set_xlabel("X [m]")
ax1.set_ylabel("Y [m]")
ax1.set_title("open-loop swerve, slip-augmented unicycle pose")
ax1.axis("equal")
ax2.plot(np.arange(800) * Td, alphas)
ax2.set_xlabel("t [s]")
ax2.set_ylabel("slip angle alpha [rad]")
ax2.set_title("slip angle during the swerve")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "01_plant_swerve.png"), dpi=120)
print("figures written to", OUT)
