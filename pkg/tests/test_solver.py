import numpy as np
import pytest

from fracwave.elliptic import CoefficientField, Mesh, assemble
from fracwave.errors import DefectiveClusterError
from fracwave.fraccalc import TimeGrid, mittag_leffler
from fracwave.solver import (
    LaplaceContour,
    SourcePair,
    growth_probe,
    laplace_identity_check,
    route_difference,
    solve_resolvent,
    solve_spectral_oracle,
    solve_timestep,
    states_at,
)
from fracwave.spectral import compute_riesz_data, eigendecompose

ALPHA = 1.5


def scalar_exact(lam, alpha, a, b, t):
    z = -lam * t**alpha
    return a * mittag_leffler(alpha, 1.0, z).real + b * t * mittag_leffler(alpha, 2.0, z).real


@pytest.fixture(scope="module")
def reference():
    """1D advection-diffusion problem shared by the route tests."""
    mesh = Mesh((0.0,), (1.0,), (32,))
    op = assemble(mesh, CoefficientField.from_callables(mesh, b1=1.0))
    x = mesh.axis_nodes(0)
    source = SourcePair(np.sin(np.pi * x), x * (1.0 - x))
    riesz = compute_riesz_data(op, eigendecompose(op))
    return op, source, riesz


class TestTimestep:
    def test_zero_operator_exact(self):
        grid = TimeGrid(2.0, 16)
        src = SourcePair(np.arange(1.0, 5.0), np.ones(4))
        u = solve_timestep(np.zeros((4, 4)), src, ALPHA, grid)
        exact = src.a[None, :] + src.b[None, :] * grid.nodes[:, None]
        np.testing.assert_array_equal(u.states, exact)

    def test_initial_state_exact(self, reference):
        op, src, _ = reference
        u = solve_timestep(op, src, ALPHA, TimeGrid(1.0, 128))
        np.testing.assert_array_equal(u.states[0], src.a)

    def test_scalar_mittag_leffler_refinement(self):
        A = np.array([[1.0]])
        src = SourcePair([1.0], [0.0])
        exact = scalar_exact(1.0, ALPHA, 1.0, 0.0, 1.0)
        errs = []
        for K in (256, 512):
            u = solve_timestep(A, src, ALPHA, TimeGrid(1.0, K))
            errs.append(abs(u.states[-1, 0] - exact))
        assert errs[0] < 1e-5
        assert errs[1] < 0.6 * errs[0]

    def test_wave_limit_surrogate(self):
        # alpha -> 2 with lambda = 4: the classical limit is cos(2 t)
        u = solve_timestep(np.array([[4.0]]), SourcePair([1.0], [0.0]), 1.99, TimeGrid(1.0, 2048))
        assert abs(u.states[-1, 0] - np.cos(2.0)) < 0.05 * abs(np.cos(2.0))

    def test_initial_slope_approaches_b(self):
        A = np.array([[2.0]])
        src = SourcePair([1.0], [3.0])
        errs = []
        for K in (512, 1024):
            u = solve_timestep(A, src, ALPHA, TimeGrid(1.0, K))
            slope = (u.states[1, 0] - u.states[0, 0]) / u.grid.dt
            errs.append(abs(slope - 3.0))
        assert errs[1] < 0.85 * errs[0]  # O(dt^(alpha-1)) vanishing slope defect

    def test_stiff_mode_guard_and_resolution_fix(self):
        # a huge eigenvalue on a coarse grid would blow up; the solver refuses
        # and names a grid size that restores stability
        from fracwave.errors import NumericsError

        A = np.array([[1e6]])
        src = SourcePair([1.0], [0.0])
        with pytest.raises(NumericsError, match="K >="):
            solve_timestep(A, src, ALPHA, TimeGrid(1.0, 200))
        u = solve_timestep(A, src, ALPHA, TimeGrid(1.0, 12000))
        assert np.all(np.isfinite(u.states))
        assert np.max(np.abs(u.states[1:, 0])) <= 1.0

    def test_linearity(self, reference):
        op, src, _ = reference
        grid = TimeGrid(1.0, 128)
        u_both = solve_timestep(op, src, ALPHA, grid)
        u_a = solve_timestep(op, SourcePair(src.a, np.zeros(32)), ALPHA, grid)
        u_b = solve_timestep(op, SourcePair(np.zeros(32), src.b), ALPHA, grid)
        np.testing.assert_allclose(u_a.states + u_b.states, u_both.states, atol=1e-13)

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            solve_timestep(np.eye(2), SourcePair([1, 0.0], [0, 0.0]), 2.0, TimeGrid(1.0, 8))

    def test_source_size_mismatch(self):
        with pytest.raises(ValueError):
            solve_timestep(np.eye(3), SourcePair([1.0, 0.0], [0.0, 0.0]), ALPHA, TimeGrid(1.0, 8))


class TestResolvent:
    def test_scalar_a_source(self):
        u = solve_resolvent(np.array([[1.0]]), SourcePair([1.0], [0.0]), ALPHA, [1.0])
        assert abs(u.states[0, 0] - scalar_exact(1.0, ALPHA, 1.0, 0.0, 1.0)) < 1e-10

    def test_scalar_b_source(self):
        u = solve_resolvent(np.array([[1.0]]), SourcePair([0.0], [1.0]), ALPHA, [1.0])
        assert abs(u.states[0, 0] - scalar_exact(1.0, ALPHA, 0.0, 1.0, 1.0)) < 1e-10

    def test_zero_data(self):
        u = solve_resolvent(np.eye(3), SourcePair(np.zeros(3), np.zeros(3)), ALPHA, [0.5, 1.0])
        np.testing.assert_allclose(u.states, 0.0, atol=1e-14)

    def test_node_doubling_gains_accuracy_until_floor(self):
        A = np.array([[1.0]])
        src = SourcePair([1.0], [0.0])
        exact = scalar_exact(1.0, ALPHA, 1.0, 0.0, 1.0)
        errs = []
        for nodes in (8, 16, 32, 64):
            u = solve_resolvent(A, src, ALPHA, [1.0], contour=LaplaceContour(nodes))
            errs.append(abs(u.states[0, 0] - exact))
        floor = 1e-11
        for coarse, fine in zip(errs, errs[1:]):
            assert fine <= 0.1 * coarse or fine < floor

    def test_positive_times_required(self):
        with pytest.raises(ValueError):
            solve_resolvent(np.eye(2), SourcePair([1, 0.0], [0, 0.0]), ALPHA, [0.0, 1.0])

    def test_contour_node_count_validation(self):
        with pytest.raises(ValueError):
            LaplaceContour(nodes=7)

    def test_wave_limit_surrogate(self):
        u = solve_resolvent(np.array([[4.0]]), SourcePair([1.0], [0.0]), 1.99, [1.0])
        assert abs(u.states[0, 0] - np.cos(2.0)) < 0.03 * abs(np.cos(2.0))


class TestSpectralOracle:
    def test_diagonal_matches_scalar_formula(self):
        A = np.diag([1.0, 4.0, 9.0])
        rd = compute_riesz_data(A, eigendecompose(A, cluster_tol=1e-8))
        src = SourcePair([1.0, 2.0, -1.0], [0.5, 0.0, 1.0])
        times = [0.3, 1.2]
        u = solve_spectral_oracle(rd, src, ALPHA, times)
        for it, t in enumerate(times):
            for i, lam in enumerate([1.0, 4.0, 9.0]):
                assert abs(
                    u.states[it, i] - scalar_exact(lam, ALPHA, src.a[i], src.b[i], t)
                ) < 1e-11

    def test_initial_limit_recovers_a(self, reference):
        op, src, riesz = reference
        u = solve_spectral_oracle(riesz, SourcePair(src.a, np.zeros(32)), ALPHA, [0.0, 1e-8])
        np.testing.assert_allclose(u.states[0], src.a, atol=1e-12)
        np.testing.assert_allclose(u.states[1], src.a, atol=1e-6)

    def test_refuses_defective_cluster(self):
        J = np.array([[5.0, 1.0], [0.0, 5.0]])
        rd = compute_riesz_data(J, eigendecompose(J, cluster_tol=1e-6))
        with pytest.raises(DefectiveClusterError):
            solve_spectral_oracle(rd, SourcePair([1.0, 0.0], [0.0, 0.0]), ALPHA, [1.0])

    def test_complex_pair_real_output(self):
        # rotation-like block has complex conjugate eigenvalues
        A = np.array([[2.0, 1.0], [-1.0, 2.0]])
        rd = compute_riesz_data(A, eigendecompose(A, cluster_tol=1e-8))
        src = SourcePair([1.0, 0.0], [0.0, 0.0])
        u = solve_spectral_oracle(rd, src, ALPHA, [0.7])
        ref = solve_resolvent(A, src, ALPHA, [0.7])
        np.testing.assert_allclose(u.states, ref.states, atol=1e-9)


class TestCrossRoute:
    def test_three_routes_agree(self, reference):
        op, src, riesz = reference
        times = [0.25, 0.5, 1.0]
        u_step = solve_timestep(op, src, ALPHA, TimeGrid(1.0, 1024))
        u_res = solve_resolvent(op, src, ALPHA, times)
        u_spec = solve_spectral_oracle(riesz, src, ALPHA, times)
        assert route_difference(u_step, u_res, times).max() < 1e-3
        assert route_difference(u_step, u_spec, times).max() < 1e-3
        assert route_difference(u_res, u_spec, times).max() < 1e-6

    def test_states_at_rejects_off_grid_times(self, reference):
        op, src, _ = reference
        u = solve_timestep(op, src, ALPHA, TimeGrid(1.0, 128))
        with pytest.raises(ValueError):
            states_at(u, [0.3])


class TestLaplaceIdentity:
    def test_zero_operator(self):
        grid = TimeGrid(20.0, 2000)
        src = SourcePair([2.0], [1.0])
        u = solve_timestep(np.zeros((1, 1)), src, ALPHA, grid)
        rows = laplace_identity_check(u, src, np.zeros((1, 1)), ALPHA, [2.0])
        assert rows[0].residual < 1e-4  # transform quadrature accuracy at K=2000
        assert rows[0].conclusive

    def test_scalar(self):
        grid = TimeGrid(20.0, 2048)
        src = SourcePair([1.0], [0.0])
        A = np.array([[1.0]])
        u = solve_timestep(A, src, ALPHA, grid)
        rows = laplace_identity_check(u, src, A, ALPHA, [3.0])
        assert rows[0].residual < 1e-2

    def test_random_operator_with_transform_cross_check(self):
        rng = np.random.default_rng(12)
        mesh = Mesh((0.0,), (1.0,), (16,))
        op = assemble(mesh, CoefficientField.from_callables(mesh, b1=lambda x: 1 + x))
        x = mesh.axis_nodes(0)
        src = SourcePair(np.sin(np.pi * x), rng.standard_normal(16) * x * (1 - x))
        grid = TimeGrid(20.0, 2048)
        u = solve_timestep(op, src, ALPHA, grid)
        rows = laplace_identity_check(u, src, op, ALPHA, [2.0, 3.0, 4.0])
        assert all(r.residual < 1e-2 for r in rows)
        # transform of the trajectory vs the resolvent formula evaluated directly
        for p in (2.0, 3.0):
            t = grid.nodes
            uhat = np.trapezoid(np.exp(-p * t)[:, None] * u.states, dx=grid.dt, axis=0)
            direct = np.linalg.solve(
                p**ALPHA * np.eye(16) + op.matrix,
                p ** (ALPHA - 1.0) * src.a + p ** (ALPHA - 2.0) * src.b,
            )
            assert np.linalg.norm(uhat - direct) / np.linalg.norm(direct) < 1e-3

    def test_truncation_flagged_inconclusive(self):
        # short horizon: the tail bound dominates the requested tolerance
        grid = TimeGrid(1.0, 64)
        src = SourcePair([1.0], [0.0])
        A = np.array([[1.0]])
        u = solve_timestep(A, src, ALPHA, grid)
        rows = laplace_identity_check(u, src, A, ALPHA, [0.5], tol=1e-6)
        assert not rows[0].conclusive


class TestGrowthProbe:
    def test_zero_solution_degenerate(self):
        u = solve_timestep(np.eye(2), SourcePair(np.zeros(2), np.zeros(2)), ALPHA, TimeGrid(5.0, 64))
        fit = growth_probe(u)
        assert fit.degenerate and fit.C1 == 0.0 and fit.C2 == 0.0

    def test_dissipative_envelope(self, reference):
        op, src, _ = reference
        u = solve_timestep(op, src, ALPHA, TimeGrid(5.0, 512))
        fit = growth_probe(u)
        norms = np.linalg.norm(u.states, axis=1)
        assert fit.C2 <= 0.1
        assert np.all(norms <= fit.C1 * np.exp(fit.C2 * u.grid.nodes) * (1 + 1e-12))

    def test_unstable_mode_rate(self):
        # -A with positive eigenvalue mu: the envelope rate approaches mu^(1/alpha)
        mu = 2.0
        u = solve_timestep(np.array([[-mu]]), SourcePair([1.0], [0.0]), ALPHA, TimeGrid(8.0, 1024))
        fit = growth_probe(u)
        assert fit.C2 == pytest.approx(mu ** (1.0 / ALPHA), rel=0.2)
        assert fit.C2 > 0

    def test_horizon_precondition(self):
        u = solve_timestep(np.eye(1), SourcePair([1.0], [0.0]), ALPHA, TimeGrid(2.0, 32))
        with pytest.raises(ValueError):
            growth_probe(u)
