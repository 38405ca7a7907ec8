"""Inner-loop gain-scheduled LQR with friction feedforward.

Tracks the outer MPC's (v_ref, omega_ref) setpoint on the dynamic model.
The feedback gain is the membership blend of the offline vertex gains over
the augmented state [e_v, alpha, e_omega, x_f, int_ev, int_eo]; the
steering actuator is the synthesis filter state x_f, and the friction
feedforward cancels the disturbance channel through the force input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import DynamicInput, DynamicState
from .synthesis import GainTable


@dataclass
class LqrConfig:
    Td: float = 0.01
    filter_pole: float = 0.6
    force_limit: float = 6000.0          # |FxR| cap [N]
    steer_limit: float = 1.42            # |delta| cap [rad]
    integral_clamp: float = 10.0         # anti-windup clamp on integral states
    feedforward: bool = True
    alpha_clip: float = 0.1              # cos(alpha) clip range in the feedforward


@dataclass
class DynamicSetpoint:
    v_ref: float
    omega_ref: float


@dataclass
class LqrDiagnostics:
    FxR_feedback: float          # feedback component (before feedforward)
    FxR_proportional: float      # feedback excluding the integral states
    feedforward: float
    force_saturated: bool
    steer_saturated: bool
    held: bool = False


def blend_gain(values, table: GainTable) -> np.ndarray:
    """K(theta) = sum_i mu_i(theta) K_i over the gain table's domain."""
    return table.blend(values)


class TsLqr:
    """Stateful inner-loop controller (filter state, integrators)."""

    def __init__(self, config: LqrConfig, table: GainTable):
        if not table.certified:
            raise ValueError("gain table must be certified before online use")
        if table.n_states != 6:
            raise ValueError("expected a 6-state augmented gain table")
        self.config = config
        self.table = table
        self.x_f = 0.0
        self.int_ev = 0.0
        self.int_eo = 0.0
        self._last = DynamicInput(0.0, 0.0)

    def reset(self):
        self.x_f = 0.0
        self.int_ev = 0.0
        self.int_eo = 0.0
        self._last = DynamicInput(0.0, 0.0)

    def step(self,
             setpoint: DynamicSetpoint,
             estimate: DynamicState,
             F_fr_hat: float = 0.0) -> tuple[DynamicInput, LqrDiagnostics]:
        cfg = self.config
        est = estimate.as_array()
        if not np.all(np.isfinite(est)) or not math.isfinite(F_fr_hat):
            return self._last, LqrDiagnostics(0.0, 0.0, 0.0, False, False, held=True)

        e_v = estimate.v - setpoint.v_ref
        e_o = estimate.omega - setpoint.omega_ref
        x_aug = np.array([e_v, estimate.alpha, e_o, self.x_f, self.int_ev, self.int_eo])
        K = self.table.blend([self.x_f, estimate.v, estimate.alpha])
        u_fb = K @ x_aug

        K_prop = K.copy()
        K_prop[:, 4:] = 0.0
        F_prop = float((K_prop @ x_aug)[0])

        ff = 0.0
        if cfg.feedforward:
            alpha_c = min(max(estimate.alpha, -cfg.alpha_clip), cfg.alpha_clip)
            ff = F_fr_hat / math.cos(alpha_c)
        F_total = u_fb[0] + ff
        F_applied = min(max(F_total, -cfg.force_limit), cfg.force_limit)
        force_sat = F_applied != F_total

        delta_cmd = min(max(u_fb[1], -cfg.steer_limit), cfg.steer_limit)
        steer_sat = delta_cmd != u_fb[1]
        delta_applied = self.x_f                      # actuator = filter state

        x_f_next = cfg.filter_pole * self.x_f + (1.0 - cfg.filter_pole) * delta_cmd
        if abs(x_f_next) > cfg.steer_limit:
            x_f_next = math.copysign(cfg.steer_limit, x_f_next)
            steer_sat = True
        self.x_f = x_f_next

        # anti-windup: integrators freeze while their actuator is saturated
        if not force_sat:
            self.int_ev = _clamp(self.int_ev + cfg.Td * e_v, cfg.integral_clamp)
        if not steer_sat:
            self.int_eo = _clamp(self.int_eo + cfg.Td * e_o, cfg.integral_clamp)

        out = DynamicInput(F_applied, delta_applied)
        self._last = out
        return out, LqrDiagnostics(float(u_fb[0]), F_prop, ff, force_sat, steer_sat)


def _clamp(x: float, limit: float) -> float:
    return min(max(x, -limit), limit)
