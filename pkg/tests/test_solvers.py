import numpy as np
import pytest
import scipy.linalg as sla

from tsdrive.solvers import (LmiConstraint, LmiProblem, LmiTerm,
                             QuadraticProgram, cell, kkt_residuals, solve_lmi,
                             solve_qp)


def box_qp(H, f, lb, ub):
    n = len(f)
    return QuadraticProgram(H, f, np.eye(n), np.asarray(lb, float), np.asarray(ub, float))


class TestQp:
    def test_projection_onto_box(self):
        # min ||x||^2 s.t. x >= [1, 1]
        qp = box_qp(2.0 * np.eye(2), np.zeros(2), [1.0, 1.0], [np.inf, np.inf])
        res = solve_qp(qp)
        assert res.status == "optimal"
        assert np.allclose(res.x, [1.0, 1.0], atol=1e-6)

    def test_unconstrained_quadratic(self):
        f = np.array([2.0, -3.0, 0.5])
        qp = QuadraticProgram(np.eye(3), f, np.zeros((0, 3)), np.zeros(0), np.zeros(0))
        res = solve_qp(qp)
        assert res.status == "optimal"
        assert res.fast_path
        assert np.allclose(res.x, -f, atol=1e-10)

    def test_one_step_mpc_toy(self):
        # scalar x' = x + u, N = 1, Q = R = 1: min (x+u)^2 + u^2 -> u = -x/2
        x0 = 3.0
        H = np.array([[2.0 * (1.0 + 1.0)]])
        f = np.array([2.0 * x0])
        qp = QuadraticProgram(H, f, np.zeros((0, 1)), np.zeros(0), np.zeros(0))
        res = solve_qp(qp)
        assert res.x[0] == pytest.approx(-x0 / 2.0, rel=1e-9)

    def test_infeasible_detected(self):
        A = np.array([[1.0], [-1.0]])
        qp = QuadraticProgram(np.eye(1), np.zeros(1), A,
                              np.array([1.0, 1.0]), np.array([np.inf, np.inf]))
        res = solve_qp(qp)
        assert res.status == "infeasible"

    def test_kkt_residuals_below_tolerance(self):
        rng = np.random.default_rng(5)
        M = rng.standard_normal((6, 6))
        H = M.T @ M + np.eye(6)
        f = rng.standard_normal(6)
        qp = box_qp(H, f, -0.2 * np.ones(6), 0.2 * np.ones(6))
        res = solve_qp(qp)
        assert res.status == "optimal"
        assert res.kkt_stationarity < 1e-6
        assert res.kkt_primal < 1e-6

    def test_warm_start_accepted(self):
        rng = np.random.default_rng(7)
        M = rng.standard_normal((5, 5))
        H = M.T @ M + np.eye(5)
        f = rng.standard_normal(5)
        qp = box_qp(H, f, -0.1 * np.ones(5), 0.1 * np.ones(5))
        cold = solve_qp(qp, fast_path=False)
        warm = solve_qp(qp, warm_start=cold.x, fast_path=False)
        assert warm.status == "optimal"
        assert np.allclose(warm.x, cold.x, atol=1e-6)

    def test_indefinite_H_rejected(self):
        with pytest.raises(ValueError, match="positive semidefinite"):
            QuadraticProgram(np.diag([1.0, -1.0]), np.zeros(2),
                             np.zeros((0, 2)), np.zeros(0), np.zeros(0))

    def test_asymmetric_H_rejected(self):
        H = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            QuadraticProgram(H, np.zeros(2), np.zeros((0, 2)), np.zeros(0), np.zeros(0))

    def test_kkt_residuals_flag_bad_point(self):
        qp = box_qp(np.eye(2), np.zeros(2), [1.0, 1.0], [np.inf, np.inf])
        stat, prim = kkt_residuals(qp, np.zeros(2), None)
        assert prim == pytest.approx(1.0)


def lyapunov_problem(A, sense_margin=0.0):
    n = A.shape[0]
    p = LmiProblem(variables={"P": (n, n)}, symmetric={"P"})
    p.add(LmiConstraint([[cell(LmiTerm("P"), constant=-1e-6 * np.eye(n))]]))
    p.add(LmiConstraint([[cell(LmiTerm("P", left=A.T, right=A),
                               LmiTerm("P", left=-1.0))]], sense="<=", shift=1e-9))
    return p


class TestLmi:
    def test_stable_system_feasible(self):
        res = solve_lmi(lyapunov_problem(0.5 * np.eye(2)))
        assert res.ok
        P = res.values["P"]
        assert np.linalg.eigvalsh(0.25 * P - P).max() < 0

    def test_unstable_system_infeasible(self):
        res = solve_lmi(lyapunov_problem(2.0 * np.eye(2)))
        assert res.status == "infeasible"

    def test_lyapunov_oracle(self):
        A = np.array([[0.9, 0.2], [0.0, 0.8]])
        res = solve_lmi(lyapunov_problem(A))
        assert res.ok
        P = res.values["P"]
        # independent certificate: returned P decreases along the dynamics
        assert np.linalg.eigvalsh(A.T @ P @ A - P).max() < 0
        # discrete Lyapunov equation oracle confirms such a P must exist
        P_star = sla.solve_discrete_lyapunov(A.T, np.eye(2))
        assert np.linalg.eigvalsh(A.T @ P_star @ A - P_star).max() < 0

    def test_block_margin_reported(self):
        res = solve_lmi(lyapunov_problem(0.5 * np.eye(2)))
        assert np.isfinite(res.min_block_eig)
        assert res.min_block_eig >= -1e-8
