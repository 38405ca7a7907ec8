import json

import numpy as np
import pytest
import scipy.linalg as sla

from tsdrive import models
from tsdrive.models import SchedulingDomain, VehicleParams
from tsdrive.synthesis import (ArtifactError, GainTable, SynthesisError,
                               TerminalSet, augment_dynamic_model, certify,
                               load_artifact, save_artifact,
                               synthesize_terminal_set, synthesize_vertex_gains)

Q_KIN = np.diag([1.0, 1.5, 3.0])
R_KIN = np.diag([1.0, 3.0])
U_BOUND = [18.0, 1.4]


@pytest.fixture(scope="module")
def kin_model():
    return models.kinematic_polytope()


@pytest.fixture(scope="module")
def kin_table(kin_model):
    return synthesize_vertex_gains(kin_model, Q_KIN, R_KIN)


@pytest.fixture(scope="module")
def terminal(kin_model, kin_table):
    return synthesize_terminal_set(kin_model, kin_table, U_BOUND)


def scalar_model(a, b, Ts=1.0):
    domain = SchedulingDomain(((0.0, 1.0),))
    A = np.array([[[a]], [[a]]])
    B = np.array([[[b]], [[b]]])
    return models.PolytopicModel(A, B, domain, Ts)


class TestVertexGains:
    def test_scalar_system_stabilized(self):
        model = scalar_model(1.0 + 0.5, -0.5)
        table = synthesize_vertex_gains(model, np.eye(1), np.eye(1))
        for K in table.gains:
            assert abs(1.5 - 0.5 * K[0, 0]) < 1.0

    def test_single_vertex_recovers_dare(self, kin_model):
        # one-vertex model: the LMI optimum is the discrete LQR solution
        domain = SchedulingDomain(((0.0, 1.0),))
        A0, _ = models.kinematic_matrices_at([0.7, 10.0, 0.01], 0.1)
        B = kin_model.vertex_B[0]
        model = models.PolytopicModel(np.array([A0, A0]), np.array([B, B]), domain, 0.1)
        table = synthesize_vertex_gains(model, Q_KIN, R_KIN)
        P = sla.solve_discrete_are(A0, B, Q_KIN, R_KIN)
        K_dare = -np.linalg.solve(R_KIN + B.T @ P @ B, B.T @ P @ A0)
        assert np.allclose(table.gains[0], K_dare, atol=5e-4)

    def test_table2_weights_feasible_and_stable(self, kin_model, kin_table):
        B = kin_model.vertex_B[0]
        for Ai, Ki in zip(kin_model.vertex_A, kin_table.gains):
            rho = max(abs(np.linalg.eigvals(Ai + B @ Ki)))
            assert rho < 1.0

    def test_weights_change_gains(self, kin_model, kin_table):
        table10 = synthesize_vertex_gains(kin_model, 10.0 * Q_KIN, R_KIN)
        assert not np.allclose(table10.gains, kin_table.gains, atol=1e-4)

    def test_varying_B_rejected(self):
        dm = models.dynamic_polytope()
        with pytest.raises(SynthesisError, match="constant input matrix"):
            synthesize_vertex_gains(dm, np.eye(3), np.eye(2))

    def test_literal_blocks_hold(self, kin_model, kin_table):
        # common-Y Lyapunov recheck in Y-form, outside the solver
        B = kin_model.vertex_B[0]
        Y = kin_table.Y
        for Ai, Ki in zip(kin_model.vertex_A, kin_table.gains):
            acl = Ai + B @ Ki
            assert np.linalg.eigvalsh(acl @ Y @ acl.T - Y).max() < 0


class TestTerminalSet:
    def test_scalar_analytic_radius(self):
        # stable scalar loop, |K x| <= ubar: largest interval radius = ubar/|K|
        a_cl = 0.5
        K = np.array([[-0.6]])
        model = scalar_model(a_cl - (-0.5) * K[0, 0], -0.5)  # A + BK = 0.5 with B = -0.5
        A_open = model.vertex_A[0][0, 0]
        assert A_open + (-0.5) * K[0, 0] == pytest.approx(a_cl)
        table = GainTable(np.array([K, K]), np.eye(1), np.array([K, K]),
                          np.eye(1), np.eye(1), model.domain, certified=True)
        ubar = 2.0
        term = synthesize_terminal_set(model, table, [ubar])
        radius = 1.0 / np.sqrt(term.S[0, 0])
        assert radius == pytest.approx(ubar / abs(K[0, 0]), rel=2e-3)

    def test_paper_like_structure(self, terminal):
        S = terminal.S
        assert np.linalg.eigvalsh(S).min() > 0
        # x_e decoupled from (y_e, theta_e), as in the published matrix
        assert abs(S[0, 1]) / np.sqrt(S[0, 0] * S[1, 1]) < 0.01
        assert abs(S[0, 2]) / np.sqrt(S[0, 0] * S[2, 2]) < 0.01
        ev = np.linalg.eigvalsh(S[1:, 1:])
        ratio = np.sqrt(ev[1] / ev[0])
        paper = np.array([[23.813, 76.596], [76.596, 257.251]])
        evp = np.linalg.eigvalsh(paper)
        paper_ratio = np.sqrt(evp[1] / evp[0])
        assert paper_ratio / 3.0 <= ratio <= paper_ratio * 3.0

    def test_shrinking_bound_shrinks_volume(self, kin_model, kin_table):
        big = synthesize_terminal_set(kin_model, kin_table, [18.0, 1.4])
        small = synthesize_terminal_set(kin_model, kin_table, [18.0, 0.7])
        vol_big = 1.0 / np.sqrt(np.linalg.det(big.S))
        vol_small = 1.0 / np.sqrt(np.linalg.det(small.S))
        assert vol_small < vol_big

    def test_zero_bound_infeasible(self, kin_model, kin_table):
        with pytest.raises(SynthesisError):
            synthesize_terminal_set(kin_model, kin_table, [0.0, 0.0])

    def test_halfspaces_inner_approximation(self, terminal):
        from scipy.spatial import HalfspaceIntersection

        G, h = terminal.halfspaces()
        assert G.shape == (48, 3)
        hs = HalfspaceIntersection(np.hstack([G, -h[:, None]]), np.zeros(3))
        worst = max(float(v @ terminal.S @ v) for v in hs.intersections)
        assert worst <= 1.0 + 1e-9

    def test_boundary_samples_on_boundary(self, terminal):
        rng = np.random.default_rng(0)
        xs = terminal.boundary_samples(100, rng)
        quads = np.einsum("ij,jk,ik->i", xs, terminal.S, xs)
        assert np.allclose(quads, 1.0, atol=1e-9)


class TestCertify:
    def test_certified_synthesis_has_no_witnesses(self, kin_model, kin_table, terminal):
        report = certify(kin_model, kin_table, terminal)
        assert report.passed
        assert report.max_vertex_rho < 1.0
        assert report.max_blend_rho < 1.0
        assert report.lyapunov_slack < 0.0
        assert report.max_boundary_quadratic <= 1.0 + 1e-9
        assert report.max_input_excess <= 1e-9

    def test_identity_gains_fail_with_witness(self, kin_model):
        bad = GainTable(np.array([np.zeros((2, 3))] * 8), np.eye(3),
                        np.zeros((8, 2, 3)), Q_KIN, R_KIN, kin_model.domain)
        report = certify(kin_model, bad)
        assert not report.passed
        assert report.witnesses

    def test_inflated_terminal_set_fails(self, kin_model, kin_table, terminal):
        # ellipsoid contraction is scale-free, so inflation breaks the
        # certificate through input admissibility on the larger boundary
        inflated = TerminalSet(terminal.S / 1.5, terminal.u_bound)
        report = certify(kin_model, kin_table, inflated)
        assert not report.passed
        assert any(w[0] == "admissibility" for w in report.witnesses)


class TestAugmentation:
    def test_constant_B_no_channels_is_identity(self, kin_model):
        out = augment_dynamic_model(kin_model, 0.6, integral_channels=(),
                                    filter_channels=())
        assert out is kin_model

    def test_augmented_B_constant_and_6_states(self):
        dm = models.dynamic_polytope()
        aug = augment_dynamic_model(dm, 0.6,
                                    nominal_columns={0: np.array([0.01 / 683.0, 0.0, 0.0])})
        assert aug.n_states == 6
        assert aug.constant_B(tol=0.0)
        assert aug.E is not None and len(aug.E) == 6

    def test_bad_pole_rejected(self):
        dm = models.dynamic_polytope()
        with pytest.raises(SynthesisError, match="pole"):
            augment_dynamic_model(dm, 1.5,
                                  nominal_columns={0: np.array([1e-5, 0.0, 0.0])})

    def test_varying_unfiltered_column_rejected(self):
        dm = models.dynamic_polytope()
        with pytest.raises(SynthesisError, match="varying column"):
            augment_dynamic_model(dm, 0.6)

    def test_layout_matches_lqr_state_order(self):
        # [e_v, alpha, e_omega, x_f, int_ev, int_eo]: the steering column of
        # the vertex B lands in column 3, integrators accumulate Td * state
        dm = models.dynamic_polytope()
        aug = augment_dynamic_model(dm, 0.6,
                                    nominal_columns={0: np.array([0.01 / 683.0, 0.0, 0.0])})
        for i in range(8):
            assert np.allclose(aug.vertex_A[i][:3, 3], dm.vertex_B[i][:, 1])
            assert aug.vertex_A[i][3, 3] == 0.6
            assert aug.vertex_A[i][4, 0] == 0.01
            assert aug.vertex_A[i][5, 2] == 0.01
        assert aug.vertex_B[0][3, 1] == pytest.approx(0.4)


class TestDynamicSynthesis:
    def test_cost_scale_route_certifies(self, artifact):
        table = artifact["dynamic"]
        assert table.certified
        assert table.gains.shape == (8, 2, 6)

    def test_pointwise_plant_locally_stable(self, artifact):
        # blended gains on the quasi-LPV plant at random operating points
        params = VehicleParams()
        table = artifact["dynamic"]
        pole = artifact["dynamic_meta"]["filter_pole"]
        rng = np.random.default_rng(11)
        for values in table.domain.sample(rng, 1000):
            A, B, _ = models.dynamic_matrices_at(values, params, 0.01)
            Aa = np.zeros((6, 6))
            Aa[:3, :3] = A
            Aa[:3, 3] = B[:, 1]
            Aa[3, 3] = pole
            Aa[4, 0] = 0.01
            Aa[4, 4] = 1.0
            Aa[5, 2] = 0.01
            Aa[5, 5] = 1.0
            Ba = np.zeros((6, 2))
            Ba[:3, 0] = B[:, 0]
            Ba[3, 1] = 1.0 - pole
            K = table.blend(values)
            rho = max(abs(np.linalg.eigvals(Aa + Ba @ K)))
            assert rho < 1.0


class TestArtifactIO:
    def test_roundtrip(self, artifact_path, default_config):
        art = load_artifact(artifact_path, default_config.config_hash())
        assert art["kinematic"].gains.shape == (8, 2, 3)
        assert art["dynamic"].gains.shape == (8, 2, 6)
        assert art["terminal"].S.shape == (3, 3)
        assert art["kinematic"].certified and art["dynamic"].certified

    def test_hash_mismatch_rejected(self, artifact_path):
        with pytest.raises(ArtifactError, match="hash"):
            load_artifact(artifact_path, expected_hash="deadbeef")

    def test_tampered_certification_rejected(self, artifact_path, tmp_path):
        doc = json.loads(open(artifact_path).read())
        doc["dynamic"]["certification"]["passed"] = False
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        with pytest.raises(ArtifactError, match="certification"):
            load_artifact(bad)

    def test_uncertified_save_refused(self, kin_model, kin_table, terminal, tmp_path):
        report = certify(kin_model, kin_table, terminal)
        uncert = GainTable(kin_table.gains, kin_table.Y, kin_table.W,
                           kin_table.Q_ts, kin_table.R_ts, kin_table.domain,
                           certified=False)
        with pytest.raises(SynthesisError, match="uncertified"):
            save_artifact(tmp_path / "a.json", "h", (uncert, terminal, report),
                          (uncert, report), {})
