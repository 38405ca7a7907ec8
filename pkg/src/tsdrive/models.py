"""Vehicle models: kinematic tracking-error and dynamic bicycle TS forms.

Both models are quasi-LPV: the matrices depend on a vector of bounded
scheduling variables.  Two evaluation routes exist and are both exposed:

* pointwise -- evaluate the matrix entries at the scheduling values
  (`kinematic_matrices_at`, `dynamic_matrices_at`).  This is exact and is
  what the ground-truth plant uses.
* polytopic -- blend the 2^r vertex systems with the membership weights of
  the scheduling point (`PolytopicModel.blend`).  For the kinematic model
  the blend matches the pointwise matrices except in the single bilinear
  entry A[1][2]; for the dynamic model the blend is a coarse outer hull
  (entries are hyperbolic in v) and is used offline for gain synthesis.

Vertex ordering is little-endian over the scheduling vector in declared
order: bit j of vertex index i selects the lower (0) or upper (1) extreme
of scheduling variable j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

GRAVITY = 9.81


@dataclass(frozen=True)
class VehicleParams:
    """Dynamic bicycle-model parameters (defaults: 683 kg city vehicle)."""

    a: float = 0.758        # CG -> front axle [m]
    b: float = 1.036        # CG -> rear axle [m]
    M: float = 683.0        # mass [kg]
    I: float = 560.94       # yaw inertia [kg m^2]
    Cx: float = 25000.0     # cornering stiffness [N/rad]
    Ar: float = 1.91        # frontal area [m^2]
    rho_air: float = 1.184  # air density [kg/m^3]
    Cd_drag: float = 0.36   # drag coefficient [-]
    mu0: float = 0.5        # nominal friction coefficient [-]
    g: float = GRAVITY      # gravity [m/s^2]

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"VehicleParams.{f.name} must be a positive finite number, got {value!r}")

    @property
    def nominal_friction_force(self) -> float:
        """mu0 * M * g, the friction force the model treats as nominal [N]."""
        return self.mu0 * self.M * self.g

    @classmethod
    def from_dict(cls, d: dict) -> "VehicleParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown vehicle parameter keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class KinematicErrorState:
    """Body-frame tracking errors (x_e, y_e ahead/left of vehicle, theta_e wrapped)."""

    x_e: float
    y_e: float
    theta_e: float

    def __post_init__(self):
        arr = (self.x_e, self.y_e, self.theta_e)
        if not all(math.isfinite(v) for v in arr):
            raise ValueError(f"non-finite kinematic error state {arr}")
        object.__setattr__(self, "theta_e", wrap_angle(self.theta_e))

    def as_array(self) -> np.ndarray:
        return np.array([self.x_e, self.y_e, self.theta_e])


@dataclass(frozen=True)
class KinematicInput:
    """Outer-loop command: linear and angular speed setpoints."""

    v: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega])


@dataclass(frozen=True)
class DynamicState:
    """Body speed, slip angle and yaw rate."""

    v: float
    alpha: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.alpha, self.omega])


@dataclass(frozen=True)
class DynamicInput:
    """Rear longitudinal force [N] and steering angle [rad]."""

    FxR: float
    delta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.FxR, self.delta])


# scheduling lower bound on v; below this 1/v terms are evaluated at the clamp
V_MIN = 0.1
STEER_LIMIT = 1.42


@dataclass(frozen=True)
class SchedulingDomain:
    """Box of scheduling variables; owns membership evaluation and vertices."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"degenerate scheduling bound [{lo}, {hi}]")

    @property
    def n_vars(self) -> int:
        return len(self.bounds)

    @property
    def n_vertices(self) -> int:
        return 2 ** len(self.bounds)

    def clamp(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.clip(values, lo, hi)

    def vertex_values(self, index: int) -> np.ndarray:
        """Scheduling values at extreme combination `index` (little-endian bits)."""
        return np.array([self.bounds[j][(index >> j) & 1] for j in range(self.n_vars)])

    @property
    def _vertex_bits(self) -> np.ndarray:
        # (2^r, r) little-endian bit table; cached on first use
        bits = getattr(self, "_bits_cache", None)
        if bits is None:
            idx = np.arange(self.n_vertices)
            bits = (idx[:, None] >> np.arange(self.n_vars)) & 1
            object.__setattr__(self, "_bits_cache", bits)
        return bits

    def membership(self, values) -> np.ndarray:
        """Membership weights mu_i(values), a partition of unity over vertices.

        Per-variable factors eta0 = (hi - x)/(hi - lo) on the lower extreme
        and eta1 = 1 - eta0 on the upper; vertex weight is their product.
        Out-of-bounds values are saturated first.
        """
        x = self.clamp(values)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        eta0 = (hi - x) / (hi - lo)
        bits = self._vertex_bits
        factors = np.where(bits == 0, eta0, 1.0 - eta0)   # (2^r, r)
        return factors.prod(axis=1)

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return lo + rng.random((n, self.n_vars)) * (hi - lo)


# scheduling boxes from the model derivation: rho = [omega, v_d, theta_e],
# vartheta = [delta, v, alpha]
KINEMATIC_DOMAIN = SchedulingDomain(((-1.42, 1.42), (V_MIN, 20.0), (-0.05, 0.05)))
DYNAMIC_DOMAIN = SchedulingDomain(((-STEER_LIMIT, STEER_LIMIT), (V_MIN, 20.0), (-0.1, 0.1)))


@dataclass(frozen=True)
class SchedulingPoint:
    """A scheduling vector together with its box."""

    values: np.ndarray
    domain: SchedulingDomain

    def __post_init__(self):
        object.__setattr__(self, "values", self.domain.clamp(self.values))

    def membership(self) -> np.ndarray:
        return self.domain.membership(self.values)


def membership_weights(point: SchedulingPoint) -> np.ndarray:
    """Membership weights of `point` (thin wrapper kept for API symmetry)."""
    return point.membership()


@dataclass(frozen=True)
class PolytopicModel:
    """Vertex systems of a quasi-LPV model over a scheduling box.

    vertex_A: (2^r, n, n); vertex_B: (2^r, n, m); E: optional disturbance
    column (n,), shared by all vertices.
    """

    vertex_A: np.ndarray
    vertex_B: np.ndarray
    domain: SchedulingDomain
    sample_time: float
    E: np.ndarray | None = None

    def __post_init__(self):
        nv = self.domain.n_vertices
        if self.vertex_A.shape[0] != nv or self.vertex_B.shape[0] != nv:
            raise ValueError("vertex count must equal 2^r")
        if self.vertex_A.shape[1] != self.vertex_A.shape[2]:
            raise ValueError("vertex A matrices must be square")
        if self.vertex_B.shape[1] != self.vertex_A.shape[1]:
            raise ValueError("vertex B row count must match state dimension")

    @property
    def n_states(self) -> int:
        return self.vertex_A.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.vertex_B.shape[2]

    def constant_B(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.vertex_B - self.vertex_B[0]) <= tol))

    def blend(self, values) -> tuple[np.ndarray, np.ndarray]:
        """Membership-blended (A, B) at the given scheduling values."""
        mu = self.domain.membership(values)
        A = np.einsum("i,ijk->jk", mu, self.vertex_A)
        B = np.einsum("i,ijk->jk", mu, self.vertex_B)
        return A, B


def sinc_ratio(theta: float) -> float:
    """sin(theta)/theta with a series branch near zero."""
    if abs(theta) < 1e-4:
        return 1.0 - theta * theta / 6.0
    return math.sin(theta) / theta


def kinematic_matrices_at(values, Tc: float) -> tuple[np.ndarray, np.ndarray]:
    """Discrete tracking-error model (A_c, B_c) at scheduling values [omega, v_d, theta_e]."""
    omega, v_d, theta_e = np.asarray(values, dtype=float)
    A = np.array([
        [1.0, omega * Tc, 0.0],
        [-omega * Tc, 1.0, v_d * sinc_ratio(theta_e) * Tc],
        [0.0, 0.0, 1.0],
    ])
    B = Tc * np.array([
        [-1.0, 0.0],
        [0.0, 0.0],
        [0.0, -1.0],
    ])
    return A, B


def kinematic_polytope(domain: SchedulingDomain = KINEMATIC_DOMAIN, Tc: float = 0.1) -> PolytopicModel:
    """Eight-vertex polytopic form of the kinematic error model (constant B)."""
    As, Bs = [], []
    for i in range(domain.n_vertices):
        A, B = kinematic_matrices_at(domain.vertex_values(i), Tc)
        As.append(A)
        Bs.append(B)
    return PolytopicModel(np.array(As), np.array(Bs), domain, Tc)


def dynamic_entries(delta: float, v: float, alpha: float, params: VehicleParams) -> dict[str, float]:
    """Continuous-time entry blocks of the dynamic bicycle model.

    v is clamped to V_MIN before any 1/v evaluation.
    """
    v = max(v, V_MIN)
    sa, ca = math.sin(alpha), math.cos(alpha)
    cd = math.cos(delta)
    sda = math.sin(delta - alpha)
    cda = math.cos(delta - alpha)
    p = params
    return {
        "A11": -(0.5 * p.Cd_drag * p.rho_air * p.Ar * v * v + p.mu0 * p.M * p.g) / (p.M * v),
        "A12": p.Cx * (sda - sa) / p.M,
        "A13": p.Cx * (p.a * sda + p.b * sa) / (p.M * v),
        "A22": -p.Cx * (cda + ca) / (p.M * v),
        "A23": p.Cx * (p.b * ca - p.a * cda) / (p.M * v * v) - 1.0,
        "A32": p.Cx * (p.b - p.a * cd) / p.I,
        "A33": -p.Cx * (p.b * p.b + p.a * p.a * cd) / (p.I * v),
        "B11": ca / p.M,
        "B12": -p.Cx * sda / p.M,
        "B21": -sa / (p.M * v),
        "B22": p.Cx * cda / (p.M * v),
        "B32": p.Cx * p.a * cd / p.I,
    }


def dynamic_matrices_at(values, params: VehicleParams, Td: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Discrete dynamic model (A_d, B_d, E_d) at scheduling values [delta, v, alpha]."""
    delta, v, alpha = np.asarray(values, dtype=float)
    e = dynamic_entries(delta, v, alpha, params)
    A = np.array([
        [1.0 + e["A11"] * Td, e["A12"] * Td, e["A13"] * Td],
        [0.0, 1.0 + e["A22"] * Td, e["A23"] * Td],
        [0.0, e["A32"] * Td, 1.0 + e["A33"] * Td],
    ])
    B = Td * np.array([
        [e["B11"], e["B12"]],
        [e["B21"], e["B22"]],
        [0.0, e["B32"]],
    ])
    E = np.array([-Td / params.M, 0.0, 0.0])
    return A, B, E


def dynamic_polytope(domain: SchedulingDomain = DYNAMIC_DOMAIN,
                     params: VehicleParams = VehicleParams(),
                     Td: float = 0.01) -> PolytopicModel:
    """Eight-vertex polytopic form of the dynamic model (vertex-dependent B)."""
    As, Bs = [], []
    E = None
    for i in range(domain.n_vertices):
        A, B, E = dynamic_matrices_at(domain.vertex_values(i), params, Td)
        As.append(A)
        Bs.append(B)
    return PolytopicModel(np.array(As), np.array(Bs), domain, Td, E=E)


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


class SimulationDiverged(RuntimeError):
    """Raised when the plant produces a non-finite state."""


@dataclass
class PlantStepResult:
    pose: tuple[float, float, float]
    state: DynamicState
    v_clamped: bool = False


def plant_step(pose: tuple[float, float, float],
               state: DynamicState,
               inp: DynamicInput,
               F_fr: float,
               params: VehicleParams,
               Td: float) -> PlantStepResult:
    """Ground-truth integration step.

    The dynamic states advance through the quasi-LPV matrices evaluated at
    the true scheduling point (delta, v, alpha); the global pose integrates
    a slip-augmented unicycle (velocity along theta + alpha).
    """
    x = state.as_array()
    v_clamped = state.v < V_MIN
    A, B, E = dynamic_matrices_at([inp.delta, state.v, state.alpha], params, Td)
    x_next = A @ x + B @ inp.as_array() + E * F_fr

    X, Y, theta = pose
    X += Td * state.v * math.cos(theta + state.alpha)
    Y += Td * state.v * math.sin(theta + state.alpha)
    theta = wrap_angle(theta + Td * state.omega)

    if not (np.all(np.isfinite(x_next)) and math.isfinite(X) and math.isfinite(Y)):
        raise SimulationDiverged(
            f"plant diverged: state={x_next}, pose=({X}, {Y}, {theta}), input={inp}")
    return PlantStepResult((X, Y, theta), DynamicState(*x_next), v_clamped)
