"""Optimization backends: a convex-QP contract and an LMI/SDP contract.

Controllers and estimators talk to these two canonical forms only, so the
concrete solvers (OSQP for QPs, cvxpy/CLARABEL or SCS for LMIs) stay an
implementation detail.  Every solution is re-checked outside the solver:
KKT residuals for QPs, per-block eigenvalues for LMIs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

QP_TOLERANCE = 1e-6
LMI_TOLERANCE = 1e-8


@dataclass
class QuadraticProgram:
    """min 1/2 x'Hx + f'x  s.t.  lb <= A x <= ub.

    Equality rows have lb == ub; one-sided rows use +/-inf.  Variable box
    bounds are expressed as identity rows of A.
    """

    H: np.ndarray
    f: np.ndarray
    A: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        n = self.H.shape[0]
        if self.H.shape != (n, n) or self.f.shape != (n,):
            raise ValueError("H must be (n, n) and f (n,)")
        if self.A.ndim != 2 or self.A.shape[1] != n:
            raise ValueError("A must have n columns")
        if self.lb.shape != (self.A.shape[0],) or self.ub.shape != (self.A.shape[0],):
            raise ValueError("lb/ub must match A row count")
        if not np.allclose(self.H, self.H.T, atol=1e-10 * max(1.0, np.abs(self.H).max())):
            raise ValueError("H must be symmetric")
        # positive semidefiniteness probe: Cholesky of H + tiny jitter
        scale = max(1.0, float(np.abs(self.H).max()))
        try:
            np.linalg.cholesky(self.H + 1e-10 * scale * np.eye(n))
        except np.linalg.LinAlgError:
            raise ValueError("H must be positive semidefinite") from None

    @property
    def n_var(self) -> int:
        return self.H.shape[0]


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    status: str                      # optimal | max_iter | infeasible
    solve_time: float                # seconds
    kkt_stationarity: float = np.nan
    kkt_primal: float = np.nan
    fast_path: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def kkt_residuals(qp: QuadraticProgram, x: np.ndarray, y: np.ndarray | None) -> tuple[float, float]:
    """(stationarity, primal) residuals, computed independently of the solver."""
    primal = 0.0
    if qp.A.shape[0]:
        Ax = qp.A @ x
        primal = float(max(np.max(np.maximum(qp.lb - Ax, 0.0), initial=0.0),
                           np.max(np.maximum(Ax - qp.ub, 0.0), initial=0.0)))
    grad = qp.H @ x + qp.f
    if y is not None and qp.A.shape[0]:
        grad = grad + qp.A.T @ y
    stationarity = float(np.max(np.abs(grad), initial=0.0))
    return stationarity, primal


def _try_unconstrained(qp: QuadraticProgram) -> np.ndarray | None:
    """Unconstrained minimizer if H is PD and all constraints hold strictly."""
    import scipy.linalg as sla

    try:
        chol = sla.cho_factor(qp.H, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    x = sla.cho_solve(chol, -qp.f, check_finite=False)
    x -= sla.cho_solve(chol, qp.H @ x + qp.f, check_finite=False)  # one refinement
    if qp.A.shape[0]:
        Ax = qp.A @ x
        margin = 1e-9 * (1.0 + np.abs(Ax))
        if np.any(Ax < qp.lb + margin) or np.any(Ax > qp.ub - margin):
            return None
    return x


def solve_qp(qp: QuadraticProgram,
             warm_start: np.ndarray | None = None,
             tolerance: float = QP_TOLERANCE,
             fast_path: bool = True) -> QpResult:
    """Solve the QP with OSQP (polished, tight tolerances, warm-startable).

    A strictly-interior unconstrained minimizer short-circuits OSQP: it is a
    valid KKT point with zero multipliers.
    """
    import osqp

    t0 = time.perf_counter()
    if fast_path:
        x = _try_unconstrained(qp)
        if x is not None:
            stat, prim = kkt_residuals(qp, x, None)
            obj = float(0.5 * x @ qp.H @ x + qp.f @ x)
            return QpResult(x, obj, "optimal", time.perf_counter() - t0,
                            stat, prim, fast_path=True)

    prob = osqp.OSQP()
    prob.setup(sp.csc_matrix(qp.H), qp.f, sp.csc_matrix(qp.A), qp.lb, qp.ub,
               verbose=False, eps_abs=tolerance * 1e-2, eps_rel=tolerance * 1e-2,
               max_iter=20000, polishing=True)
    if warm_start is not None:
        warm = np.asarray(warm_start, dtype=float)
        if warm.shape == (qp.n_var,) and np.all(np.isfinite(warm)):
            prob.warm_start(x=warm)
    res = prob.solve()
    elapsed = time.perf_counter() - t0

    raw = res.info.status
    if "solved" in raw:
        status = "optimal"
    elif "infeasible" in raw:
        status = "infeasible"
    else:
        status = "max_iter"
    x = res.x if res.x is not None and np.all(np.isfinite(np.atleast_1d(res.x))) else np.zeros(qp.n_var)
    y = res.y if res.y is not None else None
    stat, prim = kkt_residuals(qp, x, y)
    if status == "optimal":
        # relative acceptance: residuals judged against the gradient-term and
        # constraint-value magnitudes, so large cost matrices do not make the
        # tolerance unattainable
        parts = [1.0, _norm_inf(qp.H @ x), _norm_inf(qp.f)]
        if y is not None and qp.A.shape[0]:
            parts.append(_norm_inf(qp.A.T @ y))
        stat_scale = max(parts)
        prim_scale = max(1.0, _norm_inf(qp.A @ x) if qp.A.shape[0] else 0.0)
        if stat > tolerance * stat_scale or prim > tolerance * prim_scale:
            status = "max_iter"
    obj = float(0.5 * x @ qp.H @ x + qp.f @ x)
    return QpResult(x, obj, status, elapsed, stat, prim)


def _norm_inf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v), initial=0.0))


# --- LMI layer -------------------------------------------------------------
#
# A constraint block is a matrix of cells; each cell is an affine expression
# sum_k L_k @ var_k(') @ R_k + C.  Variables are declared with shapes;
# square variables may be marked symmetric.


@dataclass(frozen=True)
class LmiTerm:
    """L @ var(.T) @ R, with either factor optional."""

    var: str
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    transpose: bool = False


@dataclass
class LmiCell:
    terms: list[LmiTerm] = field(default_factory=list)
    constant: np.ndarray | float = 0.0


def cell(*terms: LmiTerm, constant: np.ndarray | float = 0.0) -> LmiCell:
    return LmiCell(list(terms), constant)


@dataclass
class LmiConstraint:
    """Block matrix of cells, constrained PSD (sense '>=') or NSD ('<=')."""

    blocks: list[list[LmiCell]]
    sense: str = ">="
    shift: float = 0.0               # require M - shift*I >= 0 (or <= for NSD)

    def __post_init__(self):
        if self.sense not in (">=", "<="):
            raise ValueError("sense must be '>=' or '<='")


@dataclass
class LmiProblem:
    """Declarative container for an LMI feasibility/optimization problem."""

    variables: dict[str, tuple[int, int]]
    symmetric: set[str] = field(default_factory=set)
    constraints: list[LmiConstraint] = field(default_factory=list)
    objective: tuple[str, str] | None = None     # ("maximize_logdet"|"minimize_trace"|"minimize_scalar", var)

    def add(self, constraint: LmiConstraint) -> None:
        self.constraints.append(constraint)


@dataclass
class LmiResult:
    values: dict[str, np.ndarray]
    status: str                      # optimal | inaccurate | infeasible | error
    min_block_eig: float = np.nan

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "inaccurate")


def _build_cvxpy(problem: LmiProblem):
    import cvxpy as cp

    cvars = {}
    for name, shape in problem.variables.items():
        if name in problem.symmetric:
            cvars[name] = cp.Variable(shape, symmetric=True, name=name)
        else:
            cvars[name] = cp.Variable(shape, name=name)

    def cell_expr(c: LmiCell):
        expr = None
        for t in c.terms:
            v = cvars[t.var]
            e = v.T if t.transpose else v
            if t.left is not None:
                e = t.left @ e if not np.isscalar(t.left) else t.left * e
            if t.right is not None:
                e = e @ t.right
            expr = e if expr is None else expr + e
        const = c.constant
        if expr is None:
            return cp.Constant(np.atleast_2d(const)) if not np.isscalar(const) else cp.Constant(const)
        if np.isscalar(const):
            return expr if const == 0.0 else expr + const
        return expr + const

    constraints = []
    for con in problem.constraints:
        rows = [[cell_expr(c) for c in row] for row in con.blocks]
        Mexpr = cp.bmat(rows) if (len(rows) > 1 or len(rows[0]) > 1) else rows[0][0]
        dim = Mexpr.shape[0]
        shift = con.shift * np.eye(dim)
        if con.sense == ">=":
            constraints.append(Mexpr >> shift)
        else:
            constraints.append(Mexpr << -shift if con.shift else Mexpr << 0)

    if problem.objective is None:
        objective = cp.Minimize(0)
    else:
        kind, var = problem.objective
        if kind == "maximize_logdet":
            objective = cp.Maximize(cp.log_det(cvars[var]))
        elif kind == "minimize_trace":
            objective = cp.Minimize(cp.trace(cvars[var]))
        else:
            raise ValueError(f"unknown objective {kind}")
    return cp.Problem(objective, constraints), cvars


def _block_eigs(problem: LmiProblem, values: dict[str, np.ndarray]) -> float:
    """Worst signed eigenvalue margin over all blocks, evaluated in numpy."""

    def cell_value(c: LmiCell):
        total = None
        for t in c.terms:
            v = values[t.var]
            e = v.T if t.transpose else v
            if t.left is not None:
                e = t.left @ e if not np.isscalar(t.left) else t.left * e
            if t.right is not None:
                e = e @ t.right
            total = e if total is None else total + e
        const = c.constant
        if total is None:
            return np.atleast_2d(np.asarray(const, dtype=float))
        total = np.atleast_2d(total)
        if np.isscalar(const):
            return total if const == 0.0 else total + const * np.eye(total.shape[0])
        return total + const

    worst = np.inf
    for con in problem.constraints:
        M = np.block([[cell_value(c) for c in row] for row in con.blocks])
        M = 0.5 * (M + M.T)
        eigs = np.linalg.eigvalsh(M)
        if con.sense == ">=":
            worst = min(worst, eigs.min() - con.shift)
        else:
            worst = min(worst, -(eigs.max() + con.shift))
    return float(worst)


def solve_lmi(problem: LmiProblem,
              tolerance: float = LMI_TOLERANCE,
              solver_order: tuple[str, ...] = ("CLARABEL", "SCS")) -> LmiResult:
    """Solve the LMI problem and certify each block by eigenvalue check.

    Tries solvers in order; accepts a solution only if every constraint
    block's signed eigenvalue margin is >= -tolerance at the returned point.
    """
    last_status = "error"
    for solver in solver_order:
        prob, cvars = _build_cvxpy(problem)
        kwargs = {"solver": solver}
        if solver == "SCS":
            kwargs.update(max_iters=50000, eps=1e-8)
        try:
            prob.solve(**kwargs)
        except Exception:
            last_status = "error"
            continue
        if prob.status in ("infeasible", "infeasible_inaccurate"):
            return LmiResult({}, "infeasible")
        if prob.status not in ("optimal", "optimal_inaccurate"):
            last_status = "error"
            continue
        values = {}
        bad = False
        for name, var in cvars.items():
            v = var.value
            if v is None:
                bad = True
                break
            v = np.atleast_2d(np.asarray(v, dtype=float))
            if name in problem.symmetric:
                v = 0.5 * (v + v.T)
            values[name] = v
        if bad:
            last_status = "error"
            continue
        margin = _block_eigs(problem, values)
        if margin < -tolerance:
            last_status = "error"
            continue
        status = "optimal" if prob.status == "optimal" else "inaccurate"
        return LmiResult(values, status, margin)
    return LmiResult({}, last_status)
