"""Outer-loop kinematic TS-MPC.

The horizon-N tracking problem is condensed into a dense QP over the input
increments DU = [du_k ... du_{k+N-1}]: the time-varying prediction matrices
A(rho_{k+i}) are membership blends of the kinematic vertex systems along a
scheduling sequence that is either frozen at the current measurement or
follows the planner references.  Input magnitude/rate bounds and an inner
polyhedral approximation of the terminal ellipsoid keep the problem a QP.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .models import KinematicErrorState, KinematicInput, PolytopicModel
from .planner import ReferenceWindow
from .solvers import QuadraticProgram, solve_qp
from .synthesis import GainTable, TerminalSet

log = logging.getLogger("tsdrive")


@dataclass
class MpcConfig:
    N: int = 40
    Tc: float = 0.1
    Q: np.ndarray = field(default_factory=lambda: np.diag([1.133, 0.067, 13.333]))
    R: np.ndarray = field(default_factory=lambda: np.diag([5e-6, 5.5]))
    u_min: np.ndarray = field(default_factory=lambda: np.array([0.0, -1.4]))
    u_max: np.ndarray = field(default_factory=lambda: np.array([18.0, 1.4]))
    du_min: np.ndarray = field(default_factory=lambda: np.array([-5.0, -0.3]))
    du_max: np.ndarray = field(default_factory=lambda: np.array([5.0, 0.3]))
    scheduling_mode: str = "reference"       # or "frozen"
    theta_decay: float = 0.9                 # theta_e shrink per step along the horizon
    terminal_cost: str = "terminal_set"      # or "lyapunov"
    terminal_scale: float = 1.0
    qp_tolerance: float = 1e-6

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon must be >= 1")
        if self.scheduling_mode not in ("frozen", "reference"):
            raise ValueError(f"unknown scheduling mode {self.scheduling_mode!r}")
        if self.terminal_cost not in ("terminal_set", "lyapunov"):
            raise ValueError(f"unknown terminal cost {self.terminal_cost!r}")
        for name in ("Q", "R", "u_min", "u_max", "du_min", "du_max"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.linalg.eigvalsh(self.R).min() <= 0:
            raise ValueError("R must be positive definite")
        if np.linalg.eigvalsh(self.Q).min() < 0:
            raise ValueError("Q must be positive semidefinite")


@dataclass
class MpcDiagnostics:
    cost: float
    solve_time: float
    status: str
    terminal_active: bool
    warm_started: bool
    fallback: bool
    consecutive_failures: int


def scheduling_sequence(mode: str,
                        state: KinematicErrorState,
                        omega_now: float,
                        window: ReferenceWindow,
                        N: int,
                        theta_decay: float = 0.9) -> np.ndarray:
    """Scheduling values rho_{k+i} = [omega, v_d, theta_e] for i = 0..N-1.

    frozen:    every step keeps the current measured point.
    reference: the sequence starts at the measured point, then planner
               previews drive omega and v_d; theta_e decays geometrically
               toward zero (the controller is expected to shrink it; the
               planner has no preview of it).
    """
    point = np.array([omega_now, window.v_d[0], state.theta_e])
    if mode == "frozen":
        return np.tile(point, (N, 1))
    rows = np.empty((N, 3))
    rows[0] = point
    rows[1:, 0] = window.omega_d[1:N]
    rows[1:, 1] = window.v_d[1:N]
    rows[1:, 2] = state.theta_e * theta_decay ** np.arange(1, N)
    return rows


def build_qp(state: KinematicErrorState,
             last_input: KinematicInput,
             window: ReferenceWindow,
             schedule: np.ndarray,
             config: MpcConfig,
             model: PolytopicModel,
             terminal: TerminalSet,
             P: np.ndarray) -> tuple[QuadraticProgram, dict]:
    """Condense the horizon into a dense QP over DU."""
    N = config.N
    if schedule.shape != (N, 3):
        raise ValueError(f"schedule must be ({N}, 3)")
    if len(window.v_d) < N + 1:
        raise ValueError("reference window shorter than horizon")
    n, m = 3, 2
    nz = N * m
    B = model.vertex_B[0]
    u_prev = last_input.as_array()

    phi = state.as_array()
    Gamma = np.zeros((n, nz))
    H = np.zeros((nz, nz))
    f = np.zeros(nz)
    offset = float(phi @ config.Q @ phi)      # stage cost of the known x_k
    phi_N = None
    Gamma_N = None
    for i in range(N):
        A_i, _ = model.blend(schedule[i])
        r_i = np.array([window.v_d[i] * math.cos(schedule[i, 2]), window.omega_d[i]])
        # u_{k+i} = u_prev + sum_{l<=i} du_l
        Gamma = A_i @ Gamma
        Gamma[:, :m * (i + 1)] += np.tile(B, (1, i + 1))
        phi = A_i @ phi + B @ u_prev - B @ r_i
        Wq = P if i == N - 1 else config.Q
        H += 2.0 * Gamma.T @ Wq @ Gamma
        f += 2.0 * Gamma.T @ Wq @ phi
        offset += float(phi @ Wq @ phi)
        if i == N - 1:
            phi_N, Gamma_N = phi, Gamma
    for i in range(N):
        H[m * i:m * (i + 1), m * i:m * (i + 1)] += 2.0 * config.R
    H = 0.5 * (H + H.T)

    # rows: DU box; U cumulative bounds; terminal polytope
    T_cum = np.kron(np.tril(np.ones((N, N))), np.eye(m))
    G_term, h_term = terminal.halfspaces()
    A_rows = np.vstack([np.eye(nz), T_cum, G_term @ Gamma_N])
    lb = np.concatenate([np.tile(config.du_min, N),
                         np.tile(config.u_min - u_prev, N),
                         np.full(len(h_term), -np.inf)])
    ub = np.concatenate([np.tile(config.du_max, N),
                         np.tile(config.u_max - u_prev, N),
                         h_term - G_term @ phi_N])
    qp = QuadraticProgram(H, f, A_rows, lb, ub)
    aux = {"phi_N": phi_N, "Gamma_N": Gamma_N, "G_term": G_term, "h_term": h_term,
           "cost_offset": offset}
    return qp, aux


class TsMpc:
    """Stateful MPC instance: owns warm start and failure bookkeeping."""

    def __init__(self,
                 config: MpcConfig,
                 model: PolytopicModel,
                 gains: GainTable,
                 terminal: TerminalSet):
        if not gains.certified:
            raise ValueError("gain table must be certified before online use")
        self.config = config
        self.model = model
        self.gains = gains
        self.terminal = terminal
        self.P = self._terminal_cost_matrix()
        self._warm: np.ndarray | None = None
        self._failures = 0

    def _terminal_cost_matrix(self) -> np.ndarray:
        cfg = self.config
        if cfg.terminal_cost == "terminal_set":
            return cfg.terminal_scale * self.terminal.S
        # "lyapunov": scale inv(Y) so the vertex-wise cost-decrease condition
        # c*(P0 - Acl' P0 Acl) >= Q + (K(Acl - I))' R (K(Acl - I)) holds
        import scipy.linalg as sla

        P0 = np.linalg.inv(self.gains.Y)
        B = self.model.vertex_B[0]
        c = 0.0
        for Ai, Ki in zip(self.model.vertex_A, self.gains.gains):
            acl = Ai + B @ Ki
            lhs = P0 - acl.T @ P0 @ acl
            dK = Ki @ (acl - np.eye(3))
            rhs = self.config.Q + dK.T @ self.config.R @ dK
            eigs = sla.eigh(rhs, lhs, eigvals_only=True)
            c = max(c, float(eigs.max()))
        return cfg.terminal_scale * 1.2 * c * P0

    def step(self,
             state: KinematicErrorState,
             last_input: KinematicInput,
             window: ReferenceWindow,
             omega_now: float | None = None) -> tuple[KinematicInput, MpcDiagnostics]:
        """One controller period; `omega_now` is the measured/estimated yaw
        rate used as the current scheduling value (defaults to the last
        commanded one)."""
        cfg = self.config
        if omega_now is None:
            omega_now = last_input.omega
        schedule = scheduling_sequence(cfg.scheduling_mode, state, omega_now,
                                       window, cfg.N, cfg.theta_decay)
        qp, aux = build_qp(state, last_input, window, schedule, cfg,
                           self.model, self.terminal, self.P)
        warm = self._warm
        res = solve_qp(qp, warm_start=warm, tolerance=cfg.qp_tolerance)
        accepted = res.status == "optimal" or (
            res.status == "max_iter" and max(res.kkt_stationarity, res.kkt_primal) < 1e-4)

        if accepted:
            self._failures = 0
            du = res.x[:2]
            u = np.clip(last_input.as_array() + du, cfg.u_min, cfg.u_max)
            self._warm = np.concatenate([res.x[2:], np.zeros(2)])
            x_N = aux["phi_N"] + aux["Gamma_N"] @ res.x
            terminal_active = bool(np.any(
                aux["G_term"] @ x_N >= aux["h_term"] - 1e-6))
            cost = res.objective + aux["cost_offset"]   # full predicted J
            diag = MpcDiagnostics(cost, res.solve_time, res.status,
                                  terminal_active, warm is not None, False, 0)
            return KinematicInput(*u), diag

        self._failures += 1
        self._warm = None
        u_prev = last_input.as_array()
        if self._failures >= 2:
            # safety stop ramp within the rate bounds
            du = np.clip(np.array([-0.5, -0.5 * u_prev[1]]), cfg.du_min, cfg.du_max)
            u = np.clip(u_prev + du, cfg.u_min, cfg.u_max)
            log.warning("MPC failure x%d: safety ramp engaged (v -> %.2f)",
                        self._failures, u[0])
        else:
            u = u_prev
            log.warning("MPC solve failed (%s); holding last input", res.status)
        diag = MpcDiagnostics(res.objective, res.solve_time, res.status,
                              False, warm is not None, True, self._failures)
        return KinematicInput(*u), diag
