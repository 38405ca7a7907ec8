"""Reference trajectory generation and body-frame tracking errors.

The path is built by integrating a curvature profile kappa(s) along arc
length: straights have kappa = 0 and corners a trapezoidal kappa blend
(clothoid-like ramps) whose integral equals the turn angle exactly.  The
speed profile limits lateral acceleration and scheduling bounds pointwise,
then runs cyclic forward/backward passes so |dv/dt| <= a_max, and the
result is sampled at the outer control period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import KinematicErrorState, wrap_angle

OMEGA_SCHED_LIMIT = 1.42


@dataclass(frozen=True)
class Circuit:
    """Closed waypoint circuit with rounded corners."""

    waypoints: tuple[tuple[float, float], ...]
    corner_radius: float = 15.0
    speed_cap: float = 15.0
    closed: bool = True

    def __post_init__(self):
        if self.closed and len(self.waypoints) < 3:
            raise ValueError("a closed circuit needs at least 3 waypoints")
        if len(self.waypoints) < 2:
            raise ValueError("need at least 2 waypoints")
        pts = np.asarray(self.waypoints, dtype=float)
        seglen = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]) if self.closed else pts,
                                        axis=0), axis=1)
        if np.any(seglen < 1e-9):
            raise ValueError("degenerate circuit segment")
        if self.corner_radius <= 0 or self.speed_cap <= 0:
            raise ValueError("corner_radius and speed_cap must be positive")


def default_circuit() -> Circuit:
    """Rounded-rectangle 120 m x 60 m test circuit."""
    return Circuit(waypoints=((0.0, 0.0), (120.0, 0.0), (120.0, 60.0), (0.0, 60.0)),
                   corner_radius=15.0, speed_cap=15.0)


@dataclass(frozen=True)
class ReferenceSample:
    t: float
    X_d: float
    Y_d: float
    theta_d: float
    v_d: float
    omega_d: float


@dataclass
class ReferencePath:
    """Sequence of reference samples at the outer period, with window views."""

    samples: list[ReferenceSample]
    Tc: float
    lap_length: float

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, k: int) -> ReferenceSample:
        return self.samples[k]

    def window(self, k: int, N: int) -> "ReferenceWindow":
        if k + N >= len(self.samples):
            raise IndexError(f"window [{k}, {k + N}] exceeds planned horizon "
                             f"({len(self.samples)} samples); plan a longer duration")
        sl = self.samples[k:k + N + 1]
        return ReferenceWindow(
            v_d=np.array([s.v_d for s in sl]),
            omega_d=np.array([s.omega_d for s in sl]),
            theta_d=np.array([s.theta_d for s in sl]),
        )

    def to_csv(self, path) -> None:
        """Export the reference samples for external plotting."""
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "X_d", "Y_d", "theta_d", "v_d", "omega_d"])
            for s in self.samples:
                writer.writerow(["%.17g" % v for v in
                                 (s.t, s.X_d, s.Y_d, s.theta_d, s.v_d, s.omega_d)])


@dataclass(frozen=True)
class ReferenceWindow:
    """Planner previews for steps k..k+N (lengths N+1)."""

    v_d: np.ndarray
    omega_d: np.ndarray
    theta_d: np.ndarray

    def __post_init__(self):
        if not (len(self.v_d) == len(self.omega_d) == len(self.theta_d)):
            raise ValueError("window arrays must share length")


@dataclass
class _Geometry:
    s_grid: np.ndarray
    kappa: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    theta: np.ndarray
    length: float


def _curvature_profile(circuit: Circuit, ds: float) -> _Geometry:
    """Integrate the trapezoidal-corner curvature profile into a path."""
    pts = [np.asarray(p, dtype=float) for p in circuit.waypoints]
    n = len(pts)
    R = circuit.corner_radius
    if not circuit.closed:
        raise NotImplementedError("only closed circuits are supported")

    headings = []
    for i in range(n):
        d = pts[(i + 1) % n] - pts[i]
        headings.append(math.atan2(d[1], d[0]))

    # per corner: turn angle, curvature sign, blend/flat lengths
    corners = []
    for i in range(n):
        turn = wrap_angle(headings[(i + 1) % n] - headings[i])
        if abs(turn) < 1e-12:
            corners.append(None)
            continue
        Lb = min(4.0, 0.25 * R * abs(turn))
        Lf = abs(turn) * R - Lb
        if Lf < 0:
            Lb = abs(turn) * R / 2.0
            Lf = 0.0
        corners.append((turn, Lb, Lf))

    # straight lengths: waypoint gaps minus half of each adjacent corner
    pieces = []   # (length, kappa_fn) in traversal order
    for i in range(n):
        gap = float(np.linalg.norm(pts[(i + 1) % n] - pts[i]))
        t_in = 0.0 if corners[i] is None else (corners[i][2] + 2 * corners[i][1]) / 2.0
        prev = corners[(i - 1) % n]
        t_out = 0.0 if prev is None else (prev[2] + 2 * prev[1]) / 2.0
        straight = gap - t_in - t_out
        if straight <= 0:
            raise ValueError(f"corner radius {R} too large for segment {i} (length {gap:.1f})")
        pieces.append(("straight", straight, 0.0))
        if corners[i] is not None:
            turn, Lb, Lf = corners[i]
            pieces.append(("corner", Lf + 2 * Lb, (turn, Lb, Lf)))

    total = sum(p[1] for p in pieces)
    m = int(math.ceil(total / ds))
    s_grid = np.linspace(0.0, total, m + 1)
    kappa = np.zeros(m + 1)
    s0 = 0.0
    for kind, length, data in pieces:
        mask = (s_grid >= s0) & (s_grid < s0 + length)
        if kind == "corner":
            turn, Lb, Lf = data
            k_max = math.copysign(1.0 / R, turn)
            ss = s_grid[mask] - s0
            prof = np.where(ss < Lb, ss / Lb,
                            np.where(ss < Lb + Lf, 1.0, np.maximum(0.0, (2 * Lb + Lf - ss) / Lb)))
            kappa[mask] = k_max * prof
        s0 += length

    dtheta = kappa[:-1] * np.diff(s_grid)
    theta = np.concatenate([[headings[0]], headings[0] + np.cumsum(dtheta)])
    mid = theta[:-1] + 0.5 * dtheta
    X = np.concatenate([[pts[0][0]], pts[0][0] + np.cumsum(np.cos(mid) * np.diff(s_grid))])
    Y = np.concatenate([[pts[0][1]], pts[0][1] + np.cumsum(np.sin(mid) * np.diff(s_grid))])
    return _Geometry(s_grid, kappa, X, Y, theta, total)


def _speed_profile(geom: _Geometry, circuit: Circuit, a_max: float,
                   a_lat_max: float, v_floor: float) -> np.ndarray:
    """Pointwise speed limits plus cyclic accel-limited forward/backward passes."""
    kap = np.abs(geom.kappa)
    vlim = np.full_like(kap, circuit.speed_cap)
    curved = kap > 1e-9
    vlim[curved] = np.minimum(vlim[curved],
                              np.sqrt(a_lat_max / kap[curved]))
    vlim[curved] = np.minimum(vlim[curved], 0.95 * OMEGA_SCHED_LIMIT / kap[curved])
    vlim = np.maximum(vlim, v_floor)

    ds = np.diff(geom.s_grid)
    a_eff = 0.95 * a_max   # margin so time-sampled |dv| stays under a_max*Tc
    v = vlim.copy()
    for _ in range(3):  # cyclic fixpoint: straights decouple the loop quickly
        for i in range(len(v) - 1):          # forward: accel limit
            v[i + 1] = min(v[i + 1], math.sqrt(v[i] ** 2 + 2 * a_eff * ds[i]))
        v[0] = min(v[0], v[-1])
        for i in range(len(v) - 2, -1, -1):  # backward: decel limit
            v[i] = min(v[i], math.sqrt(v[i + 1] ** 2 + 2 * a_eff * ds[i]))
        v[-1] = min(v[-1], v[0])
    return v


def plan(circuit: Circuit,
         a_max: float = 2.0,
         Tc: float = 0.1,
         duration: float | None = None,
         a_lat_max: float = 3.0,
         v_floor: float = 0.5,
         ds: float = 0.05) -> ReferencePath:
    """Generate reference samples at the outer period.

    Without `duration` exactly one lap is produced; with it, the lap is
    traversed repeatedly (arc length continues through the wrap, so the
    references stay smooth across laps).
    """
    geom = _curvature_profile(circuit, ds)
    v_of_s = _speed_profile(geom, circuit, a_max, a_lat_max, v_floor)
    L = geom.length

    def lookup(s: float) -> tuple[float, float, float, float, float]:
        s_mod = s % L
        i = min(int(s_mod / (geom.s_grid[1] - geom.s_grid[0])), len(geom.s_grid) - 2)
        w = (s_mod - geom.s_grid[i]) / (geom.s_grid[i + 1] - geom.s_grid[i])
        X = geom.X[i] * (1 - w) + geom.X[i + 1] * w
        Y = geom.Y[i] * (1 - w) + geom.Y[i + 1] * w
        th = geom.theta[i] + w * (geom.theta[i + 1] - geom.theta[i])
        kap = geom.kappa[i] * (1 - w) + geom.kappa[i + 1] * w
        v = v_of_s[i] * (1 - w) + v_of_s[i + 1] * w
        return X, Y, wrap_angle(th), v, kap

    samples = []
    s = 0.0
    t = 0.0
    k = 0
    while True:
        X, Y, th, v, kap = lookup(s)
        samples.append(ReferenceSample(t, X, Y, th, v, v * kap))
        s += v * Tc
        k += 1
        t = k * Tc
        if duration is None:
            if s >= L:
                break
        elif t > duration + 1e-9:
            break
    return ReferencePath(samples, Tc, L)


def tracking_error(pose: tuple[float, float, float], ref: ReferenceSample) -> KinematicErrorState:
    """Body-frame position/heading errors of `pose` w.r.t. the reference."""
    X, Y, theta = pose
    dX = ref.X_d - X
    dY = ref.Y_d - Y
    c, s = math.cos(theta), math.sin(theta)
    return KinematicErrorState(
        x_e=c * dX + s * dY,
        y_e=-s * dX + c * dY,
        theta_e=wrap_angle(ref.theta_d - theta),
    )
