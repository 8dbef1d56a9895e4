import numpy as np
import pytest

from daestruct import expr as ex
from daestruct.errors import NoConvergence, NonFinite, SingularJacobian
from daestruct.numlin import (equilibrate, gauss_newton, newton_solve,
                              pinv_step, pivoted_qr, svd_rank)
from daestruct.prolong import block_jacobian, prolong
from daestruct.structure import build_signature, solve_offsets

import fixtures as fx


class TestSvdRank:
    def test_exactly_rank_one(self):
        # rows are proportional: rank 1 analytically
        r = svd_rank(np.array([[8.0, -2.0], [-4.0, 1.0]]), tol=1e-8)
        assert r.rank == 1
        assert r.singular_values[1] <= 1e-14 * r.singular_values[0]

    def test_identity(self):
        r = svd_rank(np.eye(7))
        assert r.rank == 7

    def test_zero_matrix(self):
        assert svd_rank(np.zeros((3, 3))).rank == 0

    def test_amplifier_leading_jacobian_rank_5(self):
        sys = fx.amplifier()
        ps = prolong(sys, solve_offsets(build_signature(sys)))
        bj = block_jacobian(ps, ps.k_c)
        M = bj.evaluate(ex.Binding())  # entries are constants
        assert svd_rank(M, tol=1e-8).rank == 5

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            svd_rank(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestPivotedQr:
    def test_rank_one_picks_dominant_entry(self):
        M = np.array([[8.0, -2.0], [-4.0, 1.0]])
        f = pivoted_qr(M, eps=1e-8)
        assert f.r == 1
        assert f.col_perm[0] == 0
        assert f.row_perm[0] == 0
        # permuted leading 1x1 block is the entry 8
        assert M[f.row_perm[0], f.col_perm[0]] == 8.0

    def test_identity(self):
        f = pivoted_qr(np.eye(4))
        assert f.r == 4
        assert f.row_perm == (0, 1, 2, 3)
        assert f.col_perm == (0, 1, 2, 3)

    def test_amplifier_leading_block_nonsingular(self):
        sys = fx.amplifier()
        ps = prolong(sys, solve_offsets(build_signature(sys)))
        M = block_jacobian(ps, ps.k_c).evaluate(ex.Binding())
        f = pivoted_qr(M, eps=1e-8)
        assert f.r == 5
        sub = M[np.ix_(f.row_perm[:5], f.col_perm[:5])]
        assert svd_rank(sub, tol=1e-8).rank == 5

    def test_agrees_with_svd_on_random_rank_deficient(self, rng):
        for _ in range(500):
            m = int(rng.integers(2, 9))
            n = int(rng.integers(2, 9))
            r = int(rng.integers(1, min(m, n) + 1))
            M = rng.normal(size=(m, r)) @ rng.normal(size=(r, n))
            s = svd_rank(M, tol=1e-8)
            q = pivoted_qr(M, eps=1e-8)
            assert q.r == s.rank

    def test_svd_reconstruction(self, rng):
        for _ in range(20):
            m = int(rng.integers(2, 51))
            n = int(rng.integers(2, 51))
            M = rng.normal(size=(m, n))
            U, s, Vt = np.linalg.svd(M, full_matrices=False)
            err = np.linalg.norm(U @ np.diag(s) @ Vt - M)
            assert err <= 1e-10 * np.linalg.norm(M)


class TestEquilibrate:
    def test_scaling_preserves_rank_decision(self):
        # mixed-scale matrix: tiny but independent row would be lost at rel tol
        M = np.diag([1e3, 1.0, 1e-8])
        assert svd_rank(M, tol=1e-8).rank == 2  # raw: 1e-8/1e3 below tol
        _, _, S = equilibrate(M)
        assert svd_rank(S, tol=1e-8).rank == 3


class TestNewton:
    def test_linear_in_one_unknown(self):
        # y - x^2 with x frozen at 2
        F = lambda y: np.array([y[0] - 4.0])
        Jf = lambda y: np.array([[1.0]])
        out = newton_solve(F, Jf, np.array([3.9]))
        assert out[0] == pytest.approx(4.0, abs=1e-12)

    def test_projection_with_frozen_x(self):
        # project (2.1, 4.2) onto y = x^2 holding x fixed: y -> 2.1^2
        F = lambda y: np.array([y[0] - 2.1**2])
        Jf = lambda y: np.array([[1.0]])
        out = newton_solve(F, Jf, np.array([4.2]), abstol=1e-12)
        assert out[0] == pytest.approx(4.41, abs=1e-10)

    def test_beam_constraints_refine_perturbed_witness(self):
        # paper's witness coordinates on the y1 = y2 branch, perturbed by 1e-3
        p = np.array([-0.43092053722, -0.43092060160, -0.27565041470, -0.27565030340])

        def F(v):
            y1, y2, d1, d2 = v
            return np.array([y1**2 - y2**2, 2 * y1 * d1 - 2 * y2 * d2])

        def Jf(v):
            y1, y2, d1, d2 = v
            return np.array([[2 * y1, -2 * y2, 0, 0],
                             [2 * d1, -2 * d2, 2 * y1, -2 * y2]])

        out = gauss_newton(F, Jf, p + 1e-3, abstol=1e-10)
        assert np.max(np.abs(F(out))) <= 1e-10
        assert np.max(np.abs(out - p)) < 5e-3

    def test_quadratic_convergence(self):
        # x^2 - 2 = 0: error ratios e_{k+1}/e_k^2 stay bounded near the root
        F = lambda x: np.array([x[0] ** 2 - 2.0])
        Jf = lambda x: np.array([[2 * x[0]]])
        trace = []

        def F_traced(x):
            trace.append(x[0])
            return F(x)

        newton_solve(F_traced, Jf, np.array([1.3]), abstol=1e-14)
        root = np.sqrt(2.0)
        errs = [abs(v - root) for v in trace if abs(v - root) > 1e-13]
        ratios = [errs[k + 1] / errs[k] ** 2 for k in range(len(errs) - 1)]
        assert all(r < 2.0 for r in ratios)

    def test_singular_jacobian(self):
        F = lambda x: np.array([x[0] ** 2 + 1.0])
        Jf = lambda x: np.array([[2 * x[0]]])
        with pytest.raises(SingularJacobian):
            newton_solve(F, Jf, np.array([0.0]))

    def test_pseudo_fallback_handles_near_singular_jacobian(self):
        # second row is numerically dead: LU pivot check trips, the
        # truncated-SVD step still solves the live direction
        F = lambda x: np.array([x[0] + x[1] - 3.0, 1e-20 * (x[0] - x[1])])
        Jf = lambda x: np.array([[1.0, 1.0], [1e-20, -1e-20]])
        with pytest.raises(SingularJacobian):
            newton_solve(F, Jf, np.array([0.0, 0.0]))
        out = newton_solve(F, Jf, np.array([0.0, 0.0]), abstol=1e-12,
                           pseudo_fallback=True)
        assert out[0] + out[1] == pytest.approx(3.0, abs=1e-12)

    def test_no_convergence(self):
        F = lambda x: np.array([x[0] ** 3 - 1e9])
        Jf = lambda x: np.array([[3 * x[0] ** 2]])
        with pytest.raises(NoConvergence):
            newton_solve(F, Jf, np.array([1.0]), max_iter=3)


class TestPinvStep:
    def test_minimum_norm(self, rng):
        J = rng.normal(size=(2, 5))
        r = rng.normal(size=2)
        step = pinv_step(J, r)
        # step solves J s = r and is orthogonal to null(J)
        np.testing.assert_allclose(J @ step, r, atol=1e-12)
        lstsq = np.linalg.lstsq(J, r, rcond=None)[0]
        np.testing.assert_allclose(step, lstsq, atol=1e-12)
