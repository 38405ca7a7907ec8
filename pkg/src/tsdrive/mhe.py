"""Moving-horizon estimator with unknown-input (friction) decoupling.

Measured outputs are speed and yaw rate, y = [v, omega]; slip angle is
inferred.  The friction force enters the speed dynamics through the column
E; projecting the model with I - E Theta C (Theta the pseudo-inverse of
C E) removes that channel from the window dynamics, so the state estimates
are independent of the disturbance.  The friction estimate itself is the
algebraic residual of the newest transition, scaled by Theta.

Window transitions pair E Theta with the arrival-time output y_{i+1}: the
substitution x+ = (I - E Theta C)(A x + B u) + E Theta y+ is exact on
noiseless data for any disturbance, which is what the interpolation and
decoupling properties rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import (DynamicState, PolytopicModel, VehicleParams,
                     dynamic_matrices_at)
from .solvers import QuadraticProgram, solve_qp

C_OUTPUT = np.array([[1.0, 0.0, 0.0],
                     [0.0, 0.0, 1.0]])


@dataclass
class MheConfig:
    N: int = 30
    Td: float = 0.01
    Q: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0, 2.0]))
    R: np.ndarray = field(default_factory=lambda: np.diag([0.033, 0.033]))
    P: np.ndarray = field(default_factory=lambda: np.diag([2.0, 2.0, 2.0]))
    x_min: np.ndarray = field(default_factory=lambda: np.array([0.0, -0.1, -1.4]))
    x_max: np.ndarray = field(default_factory=lambda: np.array([18.0, 0.1, 1.4]))
    friction_lowpass_pole: float = 0.9
    qp_tolerance: float = 1e-6

    def __post_init__(self):
        for name in ("Q", "R", "P", "x_min", "x_max"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.N < 1:
            raise ValueError("window length must be >= 1")
        if not (0.0 <= self.friction_lowpass_pole < 1.0):
            raise ValueError("low-pass pole must lie in [0, 1)")


@dataclass(frozen=True)
class UioMatrices:
    """Decoupling data: Theta = (C E)^+, projector I - E Theta C, vertex A_o/B_o."""

    Theta: np.ndarray          # (2,)
    C: np.ndarray              # (2, 3)
    E: np.ndarray              # (3,)
    projector: np.ndarray      # (3, 3)
    A_o: np.ndarray            # (2^r, 3, 3)
    B_o: np.ndarray            # (2^r, 3, 2)


def build_uio(model: PolytopicModel, C: np.ndarray = C_OUTPUT) -> UioMatrices:
    """Decoupling matrices for a model with a single disturbance column.

    Theta is computed analytically as (CE)' / |CE|^2 so that Theta (C E) = 1
    and (I - E Theta C) E = 0 hold exactly in floating point.
    """
    if model.E is None:
        raise ValueError("model has no disturbance column")
    E = np.asarray(model.E, dtype=float)
    CE = C @ E
    nrm2 = float(CE @ CE)
    if nrm2 == 0.0:
        raise ValueError("C E = 0: the disturbance channel is unobservable")
    Theta = CE / nrm2
    projector = np.eye(len(E)) - np.outer(E, Theta) @ C
    A_o = np.einsum("jk,ikl->ijl", projector, model.vertex_A)
    B_o = np.einsum("jk,ikl->ijl", projector, model.vertex_B)
    return UioMatrices(Theta, C, E, projector, A_o, B_o)


def estimate_friction(y_next: np.ndarray,
                      x_hat: np.ndarray,
                      u: np.ndarray,
                      values,
                      params: VehicleParams,
                      Td: float,
                      uio: UioMatrices) -> float:
    """Algebraic disturbance estimate from one transition residual.

    F_hat = Theta (y_{k+1} - C (A(theta_k) x_hat_k + B(theta_k) u_k)).
    """
    A, B, _ = dynamic_matrices_at(values, params, Td)
    residual = np.asarray(y_next, dtype=float) - uio.C @ (A @ x_hat + B @ np.asarray(u, dtype=float))
    return float(uio.Theta @ residual)


@dataclass(frozen=True)
class MeasurementWindow:
    """Measurements y_{k-T+1..k}, inputs aligned with transitions, and prior.

    us has the same length as ys; us[i] is the input applied on the
    transition ys[i] -> ys[i+1], and us[-1] is the newest input (used only
    for the one-step prediction; zero-order hold when not yet decided).
    """

    ys: np.ndarray             # (T, 2)
    us: np.ndarray             # (T, 2)
    x_prior: np.ndarray        # (3,)

    def __post_init__(self):
        if len(self.ys) != len(self.us):
            raise ValueError("ys and us must have equal length")
        if len(self.ys) < 1:
            raise ValueError("window must hold at least one measurement")


@dataclass
class MheStepResult:
    x_pred: np.ndarray         # one-step-ahead estimate (control-consumable)
    estimates: np.ndarray      # (T, 3) smoothed window estimates
    status: str
    solve_time: float
    fast_path: bool
    bound_clipped: bool


def mhe_step(window: MeasurementWindow,
             schedule: np.ndarray,
             config: MheConfig,
             uio: UioMatrices,
             params: VehicleParams,
             F_fr_hat: float = 0.0,
             warm_start: np.ndarray | None = None) -> MheStepResult:
    """Solve the window least-squares problem; w and s are eliminated.

    Decision variables are the window states only.  `schedule` holds the
    scheduling values [delta, v, alpha] per window index (delta from the
    known inputs, v/alpha from previous estimates).  The one-step-ahead
    prediction uses the full model with the latest raw friction estimate.
    """
    ys = window.ys
    us = window.us
    T = len(ys)
    if schedule.shape != (T, 3):
        raise ValueError(f"schedule must be ({T}, 3)")
    n = 3
    nz = n * T

    A_seq = np.empty((T, n, n))
    B_seq = np.empty((T, n, 2))
    for i in range(T):
        A, B, _ = dynamic_matrices_at(schedule[i], params, config.Td)
        A_seq[i] = A
        B_seq[i] = B

    ETheta = np.outer(uio.E, uio.Theta)
    H = np.zeros((nz, nz))
    f = np.zeros(nz)
    # arrival cost
    H[:n, :n] += 2.0 * config.P
    f[:n] += -2.0 * config.P @ window.x_prior
    # output residuals s_i = y_i - C x_i
    CtRC = 2.0 * uio.C.T @ config.R @ uio.C
    for i in range(T):
        sl = slice(n * i, n * (i + 1))
        H[sl, sl] += CtRC
        f[sl] += -2.0 * uio.C.T @ config.R @ ys[i]
    # decoupled dynamics residuals w_i = x_{i+1} - A_o x_i - B_o u_i - ETheta y_{i+1}
    for i in range(T - 1):
        Ao = uio.projector @ A_seq[i]
        Bo = uio.projector @ B_seq[i]
        off = -Bo @ us[i] - ETheta @ ys[i + 1]
        sl_i = slice(n * i, n * (i + 1))
        sl_j = slice(n * (i + 1), n * (i + 2))
        Q2 = 2.0 * config.Q
        H[sl_i, sl_i] += Ao.T @ Q2 @ Ao
        H[sl_j, sl_j] += Q2
        H[sl_i, sl_j] += -Ao.T @ Q2
        H[sl_j, sl_i] += -Q2 @ Ao
        f[sl_i] += -Ao.T @ Q2 @ off
        f[sl_j] += Q2 @ off
    H = 0.5 * (H + H.T)

    A_rows = np.eye(nz)
    lb = np.tile(config.x_min, T)
    ub = np.tile(config.x_max, T)
    res = solve_qp(QuadraticProgram(H, f, A_rows, lb, ub),
                   warm_start=warm_start, tolerance=config.qp_tolerance)

    if res.ok:
        # project away solver-tolerance bound violations (~1e-8)
        estimates = np.clip(res.x.reshape(T, n), config.x_min, config.x_max)
        status = res.status
    else:
        # fall back: measurement-consistent window with the schedule's alpha,
        # clamped to the state box (never feed the loop unbounded values)
        estimates = np.empty((T, n))
        estimates[:, 0] = ys[:, 0]
        estimates[:, 1] = schedule[:, 2]
        estimates[:, 2] = ys[:, 1]
        estimates = np.clip(estimates, config.x_min, config.x_max)
        status = f"fallback({res.status})"

    x_last = estimates[-1]
    pred_values = np.array([us[-1][1], x_last[0], x_last[1]])
    A_p, B_p, _ = dynamic_matrices_at(pred_values, params, config.Td)
    x_pred_raw = A_p @ x_last + B_p @ us[-1] + uio.E * F_fr_hat
    x_pred = np.clip(x_pred_raw, config.x_min, config.x_max)
    clipped = bool(np.any(x_pred != x_pred_raw))
    return MheStepResult(x_pred, estimates, status, res.solve_time, res.fast_path, clipped)


class TsMheUio:
    """Stateful estimator: window buffers, scheduling bootstrap, friction filter."""

    def __init__(self,
                 config: MheConfig,
                 params: VehicleParams,
                 model: PolytopicModel,
                 x0: np.ndarray | None = None):
        self.config = config
        self.params = params
        self.uio = build_uio(model)
        self._ys: list[np.ndarray] = []
        self._us: list[np.ndarray] = []
        self._prior = np.zeros(3) if x0 is None else np.asarray(x0, dtype=float)
        self._est: np.ndarray | None = None
        self._pred: np.ndarray | None = None
        self.F_raw = 0.0
        self.F_smoothed = 0.0

    def step(self, y: np.ndarray, u_prev: np.ndarray) -> MheStepResult:
        """Feed the newest measurement and the input applied since the last one.

        On the first call `u_prev` is ignored (no transition exists yet).
        """
        cfg = self.config
        y = np.asarray(y, dtype=float)
        u_prev = np.asarray(u_prev, dtype=float)
        if self._ys:
            self._us.append(u_prev)
        self._ys.append(y)
        if len(self._ys) > cfg.N + 1:
            self._ys.pop(0)
            self._us.pop(0)
            if self._est is not None:
                # arrival prior: smoothed estimate of the window's new oldest time
                self._prior = self._est[1].copy()
        T = len(self._ys)

        # scheduling: delta from the known inputs; v/alpha from the previous
        # window's estimates (shifted by one when the window slid), the
        # previous one-step prediction for the newest index, measurements on
        # the very first calls.
        schedule = np.empty((T, 3))
        for i in range(T):
            delta = self._us[i][1] if i < len(self._us) else (self._us[-1][1] if self._us else 0.0)
            prev = None
            if self._est is not None:
                if len(self._est) == T - 1:          # window still growing
                    if i <= T - 2:
                        prev = self._est[i]
                elif i + 1 < len(self._est):         # window slid by one
                    prev = self._est[i + 1]
            if prev is not None:
                v_s, a_s = prev[0], prev[1]
            elif i == T - 1 and self._pred is not None:
                v_s, a_s = self._pred[0], self._pred[1]
            else:
                v_s, a_s = self._ys[i][0], 0.0
            schedule[i] = (delta, v_s, a_s)

        us_aligned = np.array(self._us + [self._us[-1] if self._us else np.zeros(2)])
        window = MeasurementWindow(np.array(self._ys), us_aligned, self._prior.copy())
        warm = None
        if self._est is not None and self._pred is not None:
            if len(self._est) == T - 1:                 # growing window
                warm = np.vstack([self._est, self._pred]).reshape(-1)
            elif len(self._est) == T:                   # window slid by one
                warm = np.vstack([self._est[1:], self._pred]).reshape(-1)
        result = mhe_step(window, schedule, cfg, self.uio, self.params,
                          F_fr_hat=self.F_raw, warm_start=warm)

        self._est = result.estimates
        self._pred = result.x_pred

        if len(self._us) >= 1:
            i = T - 2
            values = (self._us[i][1], result.estimates[i][0], result.estimates[i][1])
            self.F_raw = estimate_friction(self._ys[-1], result.estimates[i],
                                           self._us[i], values, self.params,
                                           cfg.Td, self.uio)
            p = cfg.friction_lowpass_pole
            self.F_smoothed = p * self.F_smoothed + (1.0 - p) * self.F_raw
        return result

    @property
    def current_estimate(self) -> DynamicState:
        """Smoothed estimate at the latest measurement time."""
        if self._est is None:
            return DynamicState(*self._prior)
        return DynamicState(*self._est[-1])

    @property
    def predicted_estimate(self) -> DynamicState:
        """One-step-ahead estimate (the control-consumable one)."""
        if self._pred is None:
            return DynamicState(*self._prior)
        return DynamicState(*self._pred)
