import numpy as np
import pytest

from daestruct import expr as ex
from daestruct.prolong import block_jacobian, evaluate_jacobian, prolong
from daestruct.structure import build_signature, solve_offsets
from daestruct.system import DaeSystem

from conftest import assert_equiv, random_binding
import fixtures as fx


def prolonged(sys):
    return prolong(sys, solve_offsets(build_signature(sys)))


class TestProlong:
    def test_example4_blocks_match_paper(self):
        ps = prolonged(fx.example4())
        assert ps.k_c == 1 and ps.k_d == 1
        # B_0 = {y - x^2}, B_1 = {F_1, D(y - x^2)}
        assert [(j, r) for j, r, _ in ps.blocks[0]] == [(1, 0)]
        assert [(j, r) for j, r, _ in ps.blocks[1]] == [(0, 0), (1, 1)]
        d_constraint = ps.blocks[1][1][2]
        assert_equiv(d_constraint, ex.jet(1, 1) - 2 * ex.jet(0) * ex.jet(0, 1))

    def test_beam_constraints(self):
        ps = prolonged(fx.beam())
        cons = ps.algebraic_constraints()
        assert len(cons) == 2
        assert_equiv(cons[0], ex.jet(0) ** 2 - ex.jet(1) ** 2)
        assert_equiv(cons[1], 2 * ex.jet(0) * ex.jet(0, 1) - 2 * ex.jet(1) * ex.jet(1, 1))
        assert len(ps.top_block) == 2

    def test_zero_offset_single_block(self):
        ps = prolonged(fx.amplifier())
        assert ps.k_c == 0
        assert len(ps.blocks) == 1
        assert ps.algebraic_constraints() == []
        assert [e for _, _, e in ps.top_block] == list(fx.amplifier().equations)

    @pytest.mark.parametrize("make", [fx.example4, fx.beam, fx.pendulum,
                                      fx.amplifier, fx.ring_modulator])
    def test_counting_invariants(self, make):
        sys = make()
        ps = prolonged(sys)
        n = sys.n_vars
        c, d = ps.offsets.c, ps.offsets.d
        assert sum(len(b) for b in ps.blocks) == n + sum(c)
        # every block has the Eq.-9 cardinality
        for p, block in enumerate(ps.blocks):
            assert len(block) == sum(1 for j in range(n) if p + c[j] - ps.k_c >= 0)
        # top block holds all n equations at their full offsets
        assert [(j, r) for j, r, _ in ps.top_block] == [(j, c[j]) for j in range(n)]
        # highest derivative of x_j across the prolongation is exactly d_j
        seen = {}
        for e in ps.all_equations():
            for v in ex.jet_vars(e):
                seen[v.var_index] = max(seen.get(v.var_index, 0), v.order)
        for j in range(n):
            assert seen[j] == d[j]
        # jet count including orders 0..d_j
        jets = {ex.JetVar(j, k) for j in range(n) for k in range(d[j] + 1)}
        assert len(jets) == n + sum(d)

    def test_block_nesting_shares_derivative_chain(self):
        ps = prolonged(fx.beam())
        # F_j^(r) in B_p with r > 0 is the total derivative of the B_{p-1} member
        for p in range(1, len(ps.blocks)):
            prev = {(j, r): e for j, r, e in ps.blocks[p - 1]}
            for j, r, e in ps.blocks[p]:
                if r > 0 and (j, r - 1) in prev:
                    assert e is ex.total_derivative(prev[(j, r - 1)])


class TestBlockJacobian:
    def test_example4_top_jacobian_matches_paper(self):
        ps = prolonged(fx.example4())
        bj = block_jacobian(ps, 1)
        assert bj.cols == (ex.JetVar(0, 1), ex.JetVar(1, 1))
        assert_equiv(bj.entries[0][0], 2 * ex.jet(1))
        assert_equiv(bj.entries[0][1], -1 * ex.jet(0))
        assert_equiv(bj.entries[1][0], -2 * ex.jet(0))
        assert bj.entries[1][1] is ex.ONE

    def test_example4_value_at_point(self):
        ps = prolonged(fx.example4())
        bj = block_jacobian(ps, 1)
        M = evaluate_jacobian(bj, ex.Binding(values={ex.JetVar(0, 0): 2.0,
                                                     ex.JetVar(1, 0): 4.0}))
        np.testing.assert_array_equal(M, [[8.0, -2.0], [-4.0, 1.0]])
        assert np.linalg.det(M) == pytest.approx(0.0, abs=1e-14)

    def test_identity_structure(self):
        ps = prolonged(fx.identity_structure())
        bj = block_jacobian(ps, ps.k_c)
        b = ex.Binding(values={ex.JetVar(0, 0): 0.3, ex.JetVar(1, 0): -1.2})
        np.testing.assert_allclose(bj.evaluate(b), np.eye(2))

    def test_beam_determinant_factors(self, rng):
        ps = prolonged(fx.beam())
        bj = block_jacobian(ps, ps.k_c)
        for _ in range(10):
            b = random_binding([fx.beam().equations[1]], rng)
            M = bj.evaluate(b)
            y1, y2 = b.values[ex.JetVar(0, 0)], b.values[ex.JetVar(1, 0)]
            assert np.linalg.det(M) == pytest.approx(-2 * (y2 + y1), rel=1e-12)

    def test_lower_block_is_submatrix_rows_and_cols(self):
        ps = prolonged(fx.example4())
        b0 = block_jacobian(ps, 0)
        assert b0.shape == (1, 2)
        top = block_jacobian(ps, ps.k_c)
        # entries are literally shared objects
        row_of = {jr[0]: i for i, jr in enumerate(top.rows)}
        col_of = {c.var_index: i for i, c in enumerate(top.cols)}
        for i, (j, r) in enumerate(b0.rows):
            for k, cv in enumerate(b0.cols):
                assert b0.entries[i][k] is top.entries[row_of[j]][col_of[cv.var_index]]

    @pytest.mark.parametrize("make", [fx.example4, fx.beam, fx.pendulum])
    def test_submatrix_property_evaluated_exactly(self, make, rng):
        ps = prolonged(make())
        top = block_jacobian(ps, ps.k_c)
        exprs = [e for row in top.entries for e in row]
        for i in range(ps.k_c):
            bj = block_jacobian(ps, i)
            row_of = {jr[0]: q for q, jr in enumerate(top.rows)}
            col_of = {c.var_index: q for q, c in enumerate(top.cols)}
            for _ in range(20):
                b = random_binding(exprs, rng)
                Mi = bj.evaluate(b)
                Mt = top.evaluate(b)
                want = np.array([[Mt[row_of[j], col_of[c.var_index]]
                                  for c in bj.cols] for j, _ in bj.rows])
                np.testing.assert_array_equal(Mi, want)

    @pytest.mark.parametrize("make", [fx.example4, fx.beam, fx.pendulum,
                                      fx.ring_modulator])
    def test_canonical_entries_match_direct_differentiation(self, make, rng):
        # independent oracle: differentiate the prolonged equation itself
        ps = prolonged(make())
        for i in range(ps.k_c + 1):
            bj = block_jacobian(ps, i)
            for (row_i, (j, r)) in enumerate(bj.rows):
                prolonged_eq = ps.blocks[i][row_i][2]
                for (col_i, cv) in enumerate(bj.cols):
                    direct = ex.partial(prolonged_eq, cv)
                    canonical = bj.entries[row_i][col_i]
                    for _ in range(3):
                        b = random_binding([direct, canonical], rng)
                        va = ex.evaluate(direct, b)
                        vb = ex.evaluate(canonical, b)
                        assert abs(va - vb) <= 1e-9 * (1 + abs(va))
