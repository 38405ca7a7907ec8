"""Offline synthesis: vertex LQR gains, terminal ellipsoid, certification.

The gain LMI is the guaranteed-cost form with a common Y and per-vertex W_i

    [ Y            (A_i Y + B W_i)'   Y        W_i'      ]
    [ A_i Y + B W_i        Y          0        0         ]  >= 0
    [ Y                    0          Qts^-1   0         ]
    [ W_i                  0          0        Rts^-1    ]

with K_i = W_i Y^-1 and closed loop A_i + B K_i (u = +K x).  It requires a
constant input matrix B; the dynamic model is made to comply by the filter
augmentation below.

Two solve strategies:

* "logdet" maximizes log det Y.  In the single-vertex case the feasible P
  = Y^-1 set is bounded below (Loewner) by the DARE solution, so this
  recovers the exact discrete LQR gain; used for the kinematic model.
* "cost_scale" bisects the smallest tau such that the blocks with
  (Qts/tau, Rts/tau) plus a fixed contraction constraint
  Acl Y Acl' <= (1-gamma) Y are feasible, then rescales (Y, W) by 1/tau so
  the literal blocks above hold with the true weights.  Used for the
  dynamic model, whose guaranteed-cost matrix is too ill-conditioned for
  expansive objectives (see decisions ledger).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .models import PolytopicModel, SchedulingDomain
from .solvers import LmiProblem, LmiConstraint, LmiTerm, cell, solve_lmi

log = logging.getLogger("tsdrive")

ARTIFACT_VERSION = 1


class SynthesisError(RuntimeError):
    """Infeasible or uncertifiable synthesis problem."""


@dataclass
class GainTable:
    """Vertex feedback gains with their common-Lyapunov certificate data."""

    gains: np.ndarray            # (2^r, m, n), u = K x
    Y: np.ndarray                # common Lyapunov-like decision matrix
    W: np.ndarray                # (2^r, m, n) LMI decision matrices (audit)
    Q_ts: np.ndarray
    R_ts: np.ndarray
    domain: SchedulingDomain
    certified: bool = False

    @property
    def n_states(self) -> int:
        return self.gains.shape[2]

    def blend(self, values) -> np.ndarray:
        """Membership-interpolated gain K(theta) = sum_i mu_i K_i."""
        mu = self.domain.membership(values)
        return np.einsum("i,ijk->jk", mu, self.gains)


@dataclass
class TerminalSet:
    """Invariant ellipsoid {x : x'Sx <= 1} under the vertex feedback gains."""

    S: np.ndarray
    u_bound: np.ndarray
    planes_per_pair: int = 16

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return float(x @ self.S @ x) <= 1.0 + tol

    def boundary_samples(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n points uniformly distributed on the S-ellipsoid boundary directionwise."""
        dim = self.S.shape[0]
        L = np.linalg.cholesky(self.S)
        u = rng.standard_normal((n, dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return np.linalg.solve(L.T, u.T).T

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Inner polyhedral approximation {x : Gx <= h} of the ellipsoid.

        Supporting hyperplanes of the unit ball per whitened axis pair,
        with offsets shrunk by cos(pi/q) * sqrt(2/3) so the polytope is
        certified inside the ellipsoid (3-state case).
        """
        dim = self.S.shape[0]
        if dim != 3:
            raise ValueError("halfspace encoding implemented for 3 states")
        q = self.planes_per_pair
        L = np.linalg.cholesky(self.S)       # S = L L'
        scale = math.cos(math.pi / q) * math.sqrt(2.0 / 3.0)
        rows = []
        for (i, j) in ((0, 1), (0, 2), (1, 2)):
            for k in range(q):
                phi = 2.0 * math.pi * k / q
                d = np.zeros(dim)
                d[i], d[j] = math.cos(phi), math.sin(phi)
                rows.append(d @ L.T)         # d' L' x <= scale
        G = np.array(rows)
        h = np.full(len(rows), scale)
        return G, h


@dataclass
class CertificationReport:
    max_vertex_rho: float = np.nan
    max_blend_rho: float = np.nan
    lyapunov_slack: float = np.nan       # max eig of Acl Y Acl' - Y over vertices
    n_blend_samples: int = 0
    terminal_checked: bool = False
    max_boundary_quadratic: float = np.nan   # max x+' S x+ over boundary samples
    max_input_excess: float = np.nan         # max |K x|_l - u_bound_l over samples
    witnesses: list = field(default_factory=list)
    passed: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["witnesses"] = [list(map(float, w)) if isinstance(w, (list, tuple, np.ndarray)) else w
                          for w in d["witnesses"][:10]]
        return d


def _equilibration(Q: np.ndarray, R: np.ndarray):
    dx = np.sqrt(np.diag(Q))
    du = np.sqrt(np.diag(R))
    Dx, Dxi = np.diag(dx), np.diag(1.0 / dx)
    Du, Dui = np.diag(du), np.diag(1.0 / du)
    return Dx, Dxi, Du, Dui


def _gain_blocks(A_list, B, n, m, tau: float | None, gamma: float | None,
                 y_cap: bool) -> LmiProblem:
    """LMI problem for the gain synthesis in equilibrated coordinates."""
    nv = len(A_list)
    problem = LmiProblem(
        variables={"Y": (n, n), **{f"W{i}": (m, n) for i in range(nv)}},
        symmetric={"Y"},
    )
    Zs = np.zeros((n, n))
    Znm = np.zeros((n, m))
    Zmn = np.zeros((m, n))
    In, Im = np.eye(n), np.eye(m)
    t = 1.0 if tau is None else tau
    for i, Ai in enumerate(A_list):
        W = f"W{i}"
        acl = [LmiTerm("Y", left=Ai), LmiTerm(W, left=B)]
        acl_T = [LmiTerm("Y", right=Ai.T), LmiTerm(W, right=B.T, transpose=True)]
        blocks = [
            [cell(LmiTerm("Y")), cell(*acl_T), cell(LmiTerm("Y")), cell(LmiTerm(W, transpose=True))],
            [cell(*acl), cell(LmiTerm("Y")), cell(constant=Zs), cell(constant=Znm)],
            [cell(LmiTerm("Y")), cell(constant=Zs), cell(constant=t * In), cell(constant=Znm)],
            [cell(LmiTerm(W)), cell(constant=Zmn), cell(constant=Zmn), cell(constant=t * Im)],
        ]
        problem.add(LmiConstraint(blocks))
        if gamma is not None:
            problem.add(LmiConstraint([
                [cell(LmiTerm("Y", left=1.0 - gamma)), cell(*acl_T)],
                [cell(*acl), cell(LmiTerm("Y"))],
            ]))
    problem.add(LmiConstraint([[cell(LmiTerm("Y"), constant=-1e-6 * In)]]))
    if y_cap:
        problem.add(LmiConstraint([[cell(LmiTerm("Y", left=-1.0), constant=In)]]))
    return problem


def synthesize_vertex_gains(model: PolytopicModel,
                            Q_ts: np.ndarray,
                            R_ts: np.ndarray,
                            objective: str = "logdet",
                            gamma: float = 0.01) -> GainTable:
    """Solve the vertex-gain LMI; raises SynthesisError when infeasible."""
    if not model.constant_B(tol=1e-12):
        raise SynthesisError("gain LMI requires a constant input matrix; "
                             "augment the model first (filter route)")
    Q_ts = np.asarray(Q_ts, dtype=float)
    R_ts = np.asarray(R_ts, dtype=float)
    n, m = model.n_states, model.n_inputs
    if Q_ts.shape != (n, n) or R_ts.shape != (m, m):
        raise SynthesisError(f"weight shapes must be ({n},{n}) and ({m},{m})")
    if np.linalg.eigvalsh(Q_ts).min() <= 0 or np.linalg.eigvalsh(R_ts).min() <= 0:
        raise SynthesisError("Q_ts and R_ts must be positive definite")

    Dx, Dxi, Du, Dui = _equilibration(Q_ts, R_ts)
    A_scaled = [Dx @ Ai @ Dxi for Ai in model.vertex_A]
    B_scaled = Dx @ model.vertex_B[0] @ Dui
    nv = len(A_scaled)

    if objective == "logdet":
        problem = _gain_blocks(A_scaled, B_scaled, n, m, tau=None, gamma=None, y_cap=False)
        problem.objective = ("maximize_logdet", "Y")
        res = solve_lmi(problem, tolerance=1e-6)
        if res.status == "infeasible":
            raise SynthesisError(
                f"gain LMI infeasible for Q_ts=diag{np.diag(Q_ts).tolist()}, "
                f"R_ts=diag{np.diag(R_ts).tolist()}, bounds={model.domain.bounds}")
        if not res.ok:
            raise SynthesisError(f"gain LMI solve failed ({res.status})")
        Yv = res.values["Y"]
        Wv = [res.values[f"W{i}"] for i in range(nv)]
    elif objective == "cost_scale":
        Yv, Wv, tau = _solve_cost_scale(A_scaled, B_scaled, n, m, gamma, model, Q_ts, R_ts)
        Yv = Yv / tau
        Wv = [W / tau for W in Wv]
    else:
        raise ValueError(f"unknown objective {objective!r}")

    Y = Dxi @ Yv @ Dxi
    Yinv_scaled = np.linalg.inv(Yv)
    K = np.array([Dui @ (w @ Yinv_scaled) @ Dx for w in Wv])
    W = np.array([k @ Y for k in K])
    table = GainTable(K, Y, W, Q_ts, R_ts, model.domain)
    _check_gain_blocks(model, table)
    return table


def _solve_cost_scale(A_scaled, B_scaled, n, m, gamma, model, Q_ts, R_ts):
    """Bisection on the guaranteed-cost scale tau (see module docstring)."""
    best = None
    lo, hi = 1.0, None
    tau = 1.0
    while hi is None and tau < 1e12:
        got = _feasible_at_tau(A_scaled, B_scaled, n, m, tau, gamma)
        if got is not None:
            hi = tau
            best = (tau, *got)
        else:
            lo = tau
            tau *= 10.0
    if hi is None:
        raise SynthesisError(
            f"gain LMI infeasible at any cost scale for bounds={model.domain.bounds}, "
            f"Q_ts=diag{np.diag(Q_ts).tolist()}, R_ts=diag{np.diag(R_ts).tolist()}; "
            f"widen weights or shrink the scheduling box")
    for _ in range(10):
        mid = math.sqrt(lo * hi)
        got = _feasible_at_tau(A_scaled, B_scaled, n, m, mid, gamma)
        if got is not None:
            hi = mid
            best = (mid, *got)
        else:
            lo = mid
    tau, Yv, Wv = best
    log.info("cost-scale synthesis: tau = %.4e", tau)
    return Yv, Wv, tau


def _feasible_at_tau(A_scaled, B_scaled, n, m, tau, gamma):
    problem = _gain_blocks(A_scaled, B_scaled, n, m, tau=tau, gamma=gamma, y_cap=True)
    res = solve_lmi(problem, solver_order=("CLARABEL",))
    if not res.ok:
        return None
    return res.values["Y"], [res.values[f"W{i}"] for i in range(len(A_scaled))]


def _check_gain_blocks(model: PolytopicModel, table: GainTable, tol: float = 1e-5):
    """Verify the literal LMI blocks hold at the returned (Y, W)."""
    n, m = model.n_states, model.n_inputs
    Qi = np.linalg.inv(table.Q_ts)
    Ri = np.linalg.inv(table.R_ts)
    B = model.vertex_B[0]
    worst = np.inf
    for Ai, Wi in zip(model.vertex_A, table.W):
        acl = Ai @ table.Y + B @ Wi
        Mb = np.block([
            [table.Y, acl.T, table.Y, Wi.T],
            [acl, table.Y, np.zeros((n, n)), np.zeros((n, m))],
            [table.Y, np.zeros((n, n)), Qi, np.zeros((n, m))],
            [Wi, np.zeros((m, n)), np.zeros((m, n)), Ri],
        ])
        worst = min(worst, float(np.linalg.eigvalsh(0.5 * (Mb + Mb.T)).min()))
    scale = float(np.abs(table.Y).max())
    if worst < -tol * max(1.0, scale):
        raise SynthesisError(f"returned gains do not satisfy the LMI blocks "
                             f"(worst eigenvalue {worst:.3e})")


def synthesize_terminal_set(model: PolytopicModel,
                            gains: GainTable,
                            u_bound,
                            margin: float = 1e-3) -> TerminalSet:
    """Largest-volume invariant ellipsoid under the vertex gains.

    maximize log det Z subject to, for every vertex,
      [ -(1-margin) Z   Z Acl_i' ]
      [ Acl_i Z        -Z        ] <= 0     (invariance)
      (K_i Z K_i')_ll <= (1-margin) u_bound_l^2   (input admissibility)
    with S = Z^-1.  The relative margin keeps the certified properties
    strictly inside the feasible boundary the volume objective pushes
    against, so solver round-off cannot invalidate them.
    """
    u_bound = np.atleast_1d(np.asarray(u_bound, dtype=float))
    n, m = model.n_states, model.n_inputs
    if u_bound.shape != (m,):
        raise SynthesisError(f"u_bound must have {m} entries")
    if np.any(u_bound <= 0):
        raise SynthesisError("u_bound must be strictly positive (channelwise)")
    B = model.vertex_B[0]
    problem = LmiProblem(variables={"Z": (n, n)}, symmetric={"Z"},
                         objective=("maximize_logdet", "Z"))
    for Ai, Ki in zip(model.vertex_A, gains.gains):
        acl = Ai + B @ Ki
        problem.add(LmiConstraint([
            [cell(LmiTerm("Z", left=-(1.0 - margin))), cell(LmiTerm("Z", right=acl.T))],
            [cell(LmiTerm("Z", left=acl)), cell(LmiTerm("Z", left=-1.0))],
        ], sense="<="))
        for l in range(m):
            k = Ki[l:l + 1, :]
            problem.add(LmiConstraint(
                [[cell(LmiTerm("Z", left=-k, right=k.T),
                       constant=(1.0 - margin) * u_bound[l] ** 2)]]))
    res = solve_lmi(problem, tolerance=1e-6)
    if res.status == "infeasible":
        raise SynthesisError(f"terminal-set SDP infeasible for u_bound={u_bound.tolist()}")
    if not res.ok:
        raise SynthesisError(f"terminal-set SDP failed ({res.status})")
    Z = res.values["Z"]
    S = np.linalg.inv(Z)
    S = 0.5 * (S + S.T)
    if np.linalg.eigvalsh(S).min() <= 0:
        raise SynthesisError("terminal-set solution is not positive definite")
    return TerminalSet(S, u_bound)


def certify(model: PolytopicModel,
            gains: GainTable,
            terminal: TerminalSet | None = None,
            n_samples: int = 1000,
            tol: float = 1e-9,
            seed: int = 0) -> CertificationReport:
    """Independent verification of the synthesis outputs.

    Spectral radii at every vertex and at random membership blends; the
    common-Y Lyapunov recheck; and, when a terminal set is given, one-step
    invariance plus input admissibility on ellipsoid-boundary samples.
    """
    rng = np.random.default_rng(seed)
    report = CertificationReport(n_blend_samples=n_samples)
    B = model.vertex_B[0]

    rhos = []
    slack = -np.inf
    for Ai, Ki in zip(model.vertex_A, gains.gains):
        acl = Ai + B @ Ki
        rho = float(np.max(np.abs(np.linalg.eigvals(acl))))
        rhos.append(rho)
        if rho >= 1.0:
            report.witnesses.append(("vertex_rho", rho))
        slack = max(slack, float(np.linalg.eigvalsh(acl @ gains.Y @ acl.T - gains.Y).max()))
    report.max_vertex_rho = max(rhos)
    report.lyapunov_slack = slack
    if slack >= 0:
        report.witnesses.append(("lyapunov_slack", slack))

    points = model.domain.sample(rng, n_samples)
    worst_blend = 0.0
    for values in points:
        A_blend, B_blend = model.blend(values)
        K_blend = gains.blend(values)
        rho = float(np.max(np.abs(np.linalg.eigvals(A_blend + B_blend @ K_blend))))
        if rho > worst_blend:
            worst_blend = rho
        if rho >= 1.0:
            report.witnesses.append(("blend_rho", rho, *values))
    report.max_blend_rho = worst_blend

    if terminal is not None:
        report.terminal_checked = True
        xs = terminal.boundary_samples(n_samples, rng)
        points = model.domain.sample(rng, n_samples)
        worst_quad = 0.0
        worst_excess = -np.inf
        for x, values in zip(xs, points):
            A_blend, B_blend = model.blend(values)
            K_blend = gains.blend(values)
            u = K_blend @ x
            x_next = A_blend @ x + B_blend @ u
            quad = float(x_next @ terminal.S @ x_next)
            worst_quad = max(worst_quad, quad)
            excess = float(np.max(np.abs(u) - terminal.u_bound))
            worst_excess = max(worst_excess, excess)
            if quad > 1.0 + tol:
                report.witnesses.append(("invariance", quad, *x))
            if excess > tol:
                report.witnesses.append(("admissibility", excess, *x))
        report.max_boundary_quadratic = worst_quad
        report.max_input_excess = worst_excess

    report.passed = not report.witnesses
    gains.certified = report.passed
    return report


def augment_dynamic_model(model: PolytopicModel,
                          filter_pole: float,
                          integral_channels: tuple[int, ...] = (0, 2),
                          filter_channels: tuple[int, ...] = (1,),
                          nominal_columns: dict[int, np.ndarray] | None = None) -> PolytopicModel:
    """Filter-augment a varying-B model into a constant-B one.

    Each filtered input channel becomes a state x_f driven by a new command
    through (1 - pole); its vertex B column moves into the vertex A matrix.
    Non-filtered channels must have a constant column (or a nominal column
    supplied).  Integral states accumulate sample_time * x[channel].

    State layout: [x (n); x_f per filtered channel; integrals].
    """
    if filter_channels and not (0.0 < filter_pole < 1.0):
        raise SynthesisError(f"filter pole must lie in (0, 1), got {filter_pole}")
    n, m = model.n_states, model.n_inputs
    Ts = model.sample_time
    nominal_columns = nominal_columns or {}
    n_f = len(filter_channels)
    n_i = len(integral_channels)
    n_aug = n + n_f + n_i

    if not filter_channels and not integral_channels:
        return model

    for ch in range(m):
        if ch in filter_channels or ch in nominal_columns:
            continue
        col = model.vertex_B[:, :, ch]
        if not np.allclose(col, col[0], atol=1e-12):
            raise SynthesisError(
                f"input channel {ch} has a varying column; filter it or supply a nominal column")

    As = []
    for Av, Bv in zip(model.vertex_A, model.vertex_B):
        Aa = np.zeros((n_aug, n_aug))
        Aa[:n, :n] = Av
        for fi, ch in enumerate(filter_channels):
            Aa[:n, n + fi] = Bv[:, ch]
            Aa[n + fi, n + fi] = filter_pole
        for ii, ch in enumerate(integral_channels):
            Aa[n + n_f + ii, ch] = Ts
            Aa[n + n_f + ii, n + n_f + ii] = 1.0
        As.append(Aa)

    Ba = np.zeros((n_aug, m))
    for ch in range(m):
        if ch in filter_channels:
            fi = filter_channels.index(ch)
            Ba[n + fi, ch] = 1.0 - filter_pole
        else:
            col = nominal_columns.get(ch, model.vertex_B[0][:, ch])
            Ba[:n, ch] = col
    Bs = np.repeat(Ba[None, :, :], model.domain.n_vertices, axis=0)

    E_aug = None
    if model.E is not None:
        E_aug = np.concatenate([model.E, np.zeros(n_f + n_i)])
    return PolytopicModel(np.array(As), Bs, model.domain, Ts, E=E_aug)


def synthesize_from_config(config) -> dict:
    """Full offline pipeline for a RunConfig: both models, certified.

    Returns a dict with the gain tables, terminal set, reports and the
    dynamic augmentation metadata; raises SynthesisError on infeasibility
    or failed certification.
    """
    from . import models

    syn = config.data["synthesis"]
    params = config.vehicle

    kin_domain = SchedulingDomain(tuple(tuple(b) for b in syn["kinematic"]["bounds"]))
    kin_model = models.kinematic_polytope(kin_domain, config.Tc)
    kin_table = synthesize_vertex_gains(
        kin_model, np.diag(syn["kinematic"]["Q_ts"]), np.diag(syn["kinematic"]["R_ts"]))
    terminal = synthesize_terminal_set(kin_model, kin_table, syn["kinematic"]["u_bound"])
    kin_report = certify(kin_model, kin_table, terminal)

    dyn_domain = SchedulingDomain(tuple(tuple(b) for b in syn["dynamic"]["bounds"]))
    dyn_model = models.dynamic_polytope(dyn_domain, params, config.Td)
    pole = float(syn["dynamic"]["filter_pole"])
    aug = augment_dynamic_model(
        dyn_model, pole,
        nominal_columns={0: np.array([config.Td / params.M, 0.0, 0.0])})
    dyn_table = synthesize_vertex_gains(
        aug, np.diag(syn["dynamic"]["Q_ts"]), np.diag(syn["dynamic"]["R_ts"]),
        objective="cost_scale", gamma=float(syn["dynamic"]["gamma"]))
    dyn_report = certify(aug, dyn_table)

    if not (kin_report.passed and dyn_report.passed):
        bad = [(n, r.witnesses[:3]) for n, r in
               (("kinematic", kin_report), ("dynamic", dyn_report)) if not r.passed]
        raise SynthesisError(f"certification failed: {bad}")
    return {
        "kinematic": kin_table,
        "terminal": terminal,
        "kinematic_certification": kin_report,
        "dynamic": dyn_table,
        "dynamic_certification": dyn_report,
        "dynamic_meta": {"filter_pole": pole, "integral_channels": [0, 2],
                         "filter_channels": [1], "Td": config.Td},
        "config_hash": config.config_hash(),
    }


# --- artifact I/O -----------------------------------------------------------


def _matrix(x) -> list:
    return np.asarray(x, dtype=float).tolist()


def save_artifact(path,
                  config_hash: str,
                  kinematic: tuple[GainTable, TerminalSet, CertificationReport],
                  dynamic: tuple[GainTable, CertificationReport],
                  dynamic_meta: dict) -> None:
    """Write the versioned synthesis artifact consumed by the online layer."""
    kin_table, terminal, kin_report = kinematic
    dyn_table, dyn_report = dynamic
    if not (kin_table.certified and dyn_table.certified):
        raise SynthesisError("refusing to save an uncertified artifact")
    doc = {
        "version": ARTIFACT_VERSION,
        "config_hash": config_hash,
        "kinematic": {
            "bounds": _matrix(kin_table.domain.bounds),
            "gains": _matrix(kin_table.gains),
            "Y": _matrix(kin_table.Y),
            "W": _matrix(kin_table.W),
            "Q_ts": _matrix(kin_table.Q_ts),
            "R_ts": _matrix(kin_table.R_ts),
            "terminal_S": _matrix(terminal.S),
            "terminal_u_bound": _matrix(terminal.u_bound),
            "planes_per_pair": terminal.planes_per_pair,
            "certification": kin_report.to_dict(),
        },
        "dynamic": {
            "bounds": _matrix(dyn_table.domain.bounds),
            "gains": _matrix(dyn_table.gains),
            "Y": _matrix(dyn_table.Y),
            "W": _matrix(dyn_table.W),
            "Q_ts": _matrix(dyn_table.Q_ts),
            "R_ts": _matrix(dyn_table.R_ts),
            "certification": dyn_report.to_dict(),
            **dynamic_meta,
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


class ArtifactError(RuntimeError):
    """Bad, stale, or uncertified artifact file."""


def load_artifact(path, expected_hash: str | None = None) -> dict:
    """Load and validate an artifact; returns a dict with live objects."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != ARTIFACT_VERSION:
        raise ArtifactError(f"artifact version {doc.get('version')} != {ARTIFACT_VERSION}")
    if expected_hash is not None and doc["config_hash"] != expected_hash:
        raise ArtifactError("artifact config hash does not match the current configuration")
    out = {"config_hash": doc["config_hash"]}
    for name in ("kinematic", "dynamic"):
        sec = doc[name]
        if not sec["certification"]["passed"]:
            raise ArtifactError(f"{name} certification did not pass; re-run synthesis")
        domain = SchedulingDomain(tuple(tuple(b) for b in sec["bounds"]))
        table = GainTable(
            gains=np.array(sec["gains"]),
            Y=np.array(sec["Y"]),
            W=np.array(sec["W"]),
            Q_ts=np.array(sec["Q_ts"]),
            R_ts=np.array(sec["R_ts"]),
            domain=domain,
            certified=True,
        )
        out[name] = table
        out[f"{name}_certification"] = sec["certification"]
    out["terminal"] = TerminalSet(
        S=np.array(doc["kinematic"]["terminal_S"]),
        u_bound=np.array(doc["kinematic"]["terminal_u_bound"]),
        planes_per_pair=doc["kinematic"]["planes_per_pair"],
    )
    out["dynamic_meta"] = {k: v for k, v in doc["dynamic"].items()
                           if k in ("filter_pole", "integral_channels", "filter_channels", "Td")}
    return out
