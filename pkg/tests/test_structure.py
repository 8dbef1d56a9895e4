import itertools

import numpy as np
import pytest
import scipy.optimize

from daestruct import expr as ex
from daestruct.errors import EmptyRow, NoPerfectMatching, NotSquare
from daestruct.structure import (MINUS_INF, OffsetPair, SignatureMatrix,
                                 build_signature, extended_delta, solve_offsets)
from daestruct.system import DaeSystem

import fixtures as fx

NI = MINUS_INF


def sig(rows):
    return SignatureMatrix(len(rows), tuple(tuple(r) for r in rows))


class TestBuildSignature:
    def test_example4(self):
        s = build_signature(fx.example4())
        assert s.entries == ((1, 1), (0, 0))

    def test_beam(self):
        s = build_signature(fx.beam())
        assert s.entries == ((2, 2), (0, 0))

    def test_trivial(self):
        s = build_signature(DaeSystem((ex.jet(0) - ex.tvar(),), ("x",)))
        assert s.entries == ((0,),)

    def test_not_square(self):
        with pytest.raises(NotSquare):
            build_signature(DaeSystem((ex.jet(0) + ex.jet(1),), ("x", "y")))

    def test_empty_row(self):
        with pytest.raises(EmptyRow):
            build_signature(DaeSystem((ex.jet(1) - 1, ex.call("sin", ex.tvar())),
                                      ("x", "y")))


class TestSolveOffsets:
    def test_example4(self):
        off = solve_offsets(build_signature(fx.example4()))
        assert off.c == (0, 1)
        assert off.d == (1, 1)
        assert off.delta == 1

    def test_beam(self):
        off = solve_offsets(build_signature(fx.beam()))
        assert (off.c, off.d, off.delta) == ((0, 2), (2, 2), 2)

    def test_pendulum(self):
        off = solve_offsets(build_signature(fx.pendulum()))
        assert off.c == (0, 0, 1, 0, 0)
        assert off.d == (1, 1, 1, 1, 1)
        assert off.delta == 4

    def test_amplifier(self):
        off = solve_offsets(build_signature(fx.amplifier()))
        assert off.c == (0,) * 8
        assert off.d == (1,) * 8
        assert off.delta == 8

    def test_ring_modulator(self):
        off = solve_offsets(build_signature(fx.ring_modulator()))
        assert off.c == (0,) * 15
        assert off.d == (1, 1, 0, 0, 0, 0) + (1,) * 9
        assert off.delta == 11

    def test_no_perfect_matching(self):
        # y never appears: structurally singular
        with pytest.raises(NoPerfectMatching):
            solve_offsets(sig([[1, NI], [0, NI]]))

    def test_canonical_under_row_permutation(self, rng):
        for _ in range(50):
            n = 4
            m = rng.integers(-1, 3, size=(n, n))
            rows = [[NI if v < 0 else int(v) for v in row] for row in m]
            for j in range(n):  # ensure feasibility via the diagonal
                rows[j][j] = int(rng.integers(0, 3))
            try:
                base = solve_offsets(sig(rows))
            except NoPerfectMatching:
                continue
            perm = rng.permutation(n)
            permuted = solve_offsets(sig([rows[i] for i in perm]))
            assert tuple(permuted.c[list(perm).index(i)] for i in range(n)) == base.c
            assert permuted.d == base.d

    def test_delta_equals_vars_minus_eqs_of_prolongation(self):
        # delta = (n + sum d) - (n + sum c) on every benchmark fixture
        for f in [fx.example4, fx.beam, fx.pendulum, fx.amplifier, fx.ring_modulator]:
            off = solve_offsets(build_signature(f()))
            assert off.delta == sum(off.d) - sum(off.c)
            assert min(off.c) == 0


def brute_force_delta(rows, cmax=8):
    """Exhaustive minimal delta: for fixed c the smallest feasible d is
    d_j = max_i(sigma_ij + c_i), so enumerate c only."""
    n = len(rows)
    best = None
    for c in itertools.product(range(cmax + 1), repeat=n):
        d = []
        ok = True
        for j in range(n):
            col = [rows[i][j] + c[i] for i in range(n) if rows[i][j] != NI]
            if not col:
                ok = False
                break
            d.append(max(col))
        if not ok:
            continue
        val = sum(d) - sum(c)
        if best is None or val < best:
            best = val
    return best


class TestMinimality:
    def test_brute_force_on_random_4x4(self, rng):
        checked = 0
        trials = 0
        while checked < 500 and trials < 5000:
            trials += 1
            rows = [[int(v) if v >= 0 else NI for v in rng.integers(-1, 3, size=4)]
                    for _ in range(4)]
            try:
                off = solve_offsets(sig(rows))
            except NoPerfectMatching:
                # brute force must agree there is no finite perfect matching
                perms_ok = any(all(rows[i][p[i]] != NI for i in range(4))
                               for p in itertools.permutations(range(4)))
                assert not perms_ok
                continue
            assert max(off.c) <= 8
            assert off.delta == brute_force_delta(rows)
            checked += 1
        assert checked == 500

    def test_matching_weight_against_scipy(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 7))
            m = rng.integers(0, 9, size=(n, n))
            rows = [[int(v) for v in r] for r in m]
            off = solve_offsets(sig(rows))
            weight = sum(rows[i][off.transversal[i]] for i in range(n))
            r_ix, c_ix = scipy.optimize.linear_sum_assignment(m, maximize=True)
            assert weight == m[r_ix, c_ix].sum()


class TestExtendedDelta:
    def test_values(self):
        assert extended_delta(2, 1) == 1
        assert extended_delta(5, 0) == 5
        with pytest.raises(ValueError):
            extended_delta(3, -1)


class TestOffsetPairInvariants:
    def test_rejects_noncanonical(self):
        with pytest.raises(ValueError):
            OffsetPair((1, 1), (1, 1), 0, (0, 1))
        with pytest.raises(ValueError):
            OffsetPair((0, 0), (1, 1), 3, (0, 1))
