"""Degeneration detection at witness points and Implicit Index Reduction.

Detection substitutes each witness point into the top-block Jacobian and
ranks it by SVD (after scale equilibration); a point is degenerate when the
rank drops below n, and by the measure-zero argument the verdict extends to
the point's whole component with probability one.

IIR restores regularity: sort the top block so the leading r x r minor is
nonsingular at the point, copy all n top-block equations with the pivot
leading derivatives replaced by fresh variables u and the non-pivot ones by
frozen constants xi, and keep the first r original equations.  The new
square core F_aug has n + r equations; the old algebraic constraints ride
along unchanged.  Each round cuts the degrees of freedom by at least n - r,
so the loop terminates (or proves the DAE unsolvable when the DOF would go
negative).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import (IterationLimit, NoConvergence, NoSolution, RankMismatch,
                     SingularJacobian)
from .numlin import equilibrate, gauss_newton, pivoted_qr, svd_rank
from .prolong import BlockJacobian, ProlongedSystem, block_jacobian, prolong
from .structure import build_signature, extended_delta, solve_offsets
from .system import DaeSystem
from .tape import Tape
from .witness import WitnessSet

PointValues = dict[tuple[str, int], float]  # (variable name, order) -> value


@dataclass
class PointVerdict:
    rank: int
    min_singular_value: float
    verdict: str  # "regular" | "degenerate"


@dataclass
class DegenerationReport:
    n: int
    points: list[PointVerdict]
    global_verdict: str  # regular-everywhere | degenerate-everywhere |
    # component-dependent | unknown


def _jacobian_binding(ps: ProlongedSystem, bj: BlockJacobian,
                      point: PointValues, t0: float,
                      xi_values: dict[str, float], rng) -> ex.Binding:
    """Bind every leaf of the Jacobian: point values where known, random
    draws elsewhere (the rank verdict is a probability-one test)."""
    names = ps.source.var_names
    need: set[ex.JetVar] = set()
    for row in bj.entries:
        for e in row:
            need |= ex.jet_vars(e)
    values = {}
    for v in sorted(need, key=lambda v: (v.var_index, v.order)):
        key = (names[v.var_index], v.order)
        if key in point:
            values[v] = point[key]
        else:
            values[v] = float(rng.uniform(-1.0, 1.0))
    return ex.Binding(t=t0, values=values, frozen=dict(xi_values))


def point_values_from_witness(ws: WitnessSet, ps: ProlongedSystem,
                              pt) -> PointValues:
    names = ps.source.var_names
    return {(names[v.var_index], v.order): float(c)
            for v, c in zip(ws.unknowns, pt.coords)}


def detect_degeneration(ps: ProlongedSystem, ws: WitnessSet, tol: float,
                        t0: float = 0.0, rng=None) -> DegenerationReport:
    """Rank the top-block Jacobian at every witness point.

    Also fills each witness point's min_singular_value field (smallest
    singular value of the unscaled Jacobian).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    n = ps.n
    bj = block_jacobian(ps, ps.k_c)
    verdicts = []
    for pt in ws.points:
        point = point_values_from_witness(ws, ps, pt)
        b = _jacobian_binding(ps, bj, point, t0, {}, rng)
        M = bj.evaluate(b)
        raw = svd_rank(M, tol)
        _, _, Ms = equilibrate(M)
        rank = svd_rank(Ms, tol).rank
        min_sv = raw.singular_values[-1] if raw.singular_values else 0.0
        pt.min_singular_value = float(min_sv)
        verdicts.append(PointVerdict(rank, float(min_sv),
                                     "degenerate" if rank < n else "regular"))
    if not verdicts:
        glob = "unknown"
    elif all(v.verdict == "degenerate" for v in verdicts):
        glob = "degenerate-everywhere"
    elif all(v.verdict == "regular" for v in verdicts):
        glob = "regular-everywhere"
    else:
        glob = "component-dependent"
    return DegenerationReport(n, verdicts, glob)


def _reindex_exprs(exprs, old_to_new: dict[int, int]):
    out = []
    for e in exprs:
        m = {v: ex.jetvar(ex.JetVar(old_to_new[v.var_index], v.order))
             for v in ex.jet_vars(e)}
        out.append(ex.substitute(e, jet_map=m))
    return out


def sort_top_block(ps: ProlongedSystem, binding: ex.Binding, eps: float,
                   tol: float | None = None):
    """Permute equations and variables so the evaluated top-block Jacobian
    has a nonsingular leading r x r minor.

    Returns (sorted ProlongedSystem, row_perm, col_perm, r).  Rank from the
    pivoted QR is verified against the SVD; on disagreement the QR is re-run
    with a tightened eps, then RankMismatch is raised.
    """
    tol = eps if tol is None else tol
    bj = block_jacobian(ps, ps.k_c)
    M = bj.evaluate(binding)
    raw = svd_rank(M, tol)
    _, _, Ms = equilibrate(M)
    r_svd = svd_rank(Ms, tol).rank
    # pivot on the raw matrix (Algorithm-4 style); rank decisions use the
    # equilibrated copy.  If the QR rank estimate disagrees, retry with an
    # eps placed inside the singular-value gap before failing.
    fac = pivoted_qr(M, eps)
    if fac.r != r_svd and 0 < r_svd:
        s = raw.singular_values
        hi = s[r_svd - 1] / s[0]
        lo = s[r_svd] / s[0] if r_svd < len(s) else 0.0
        gap_eps = max(np.sqrt(hi * lo), hi * 1e-4, 1e-18)
        fac = pivoted_qr(M, gap_eps)
    if fac.r != r_svd:
        raise RankMismatch(
            f"QR rank {fac.r} vs SVD rank {r_svd} for the top block")
    r = r_svd
    if r > 0:
        sub = Ms[np.ix_(fac.row_perm[:r], fac.col_perm[:r])]
        if svd_rank(sub, tol).rank < r:
            raise RankMismatch("pivoted leading block is singular")

    sys = ps.source
    old_to_new = {old: new for new, old in enumerate(fac.col_perm)}
    eqs = _reindex_exprs([sys.equations[i] for i in fac.row_perm], old_to_new)
    names = tuple(sys.var_names[j] for j in fac.col_perm)
    sorted_sys = DaeSystem(tuple(eqs), names, name=sys.name)
    off = solve_offsets(build_signature(sorted_sys))
    return prolong(sorted_sys, off), fac.row_perm, fac.col_perm, r


def _fresh(base: str, taken: set[str]) -> str:
    name = base
    while name in taken:
        name += "_"
    taken.add(name)
    return name


@dataclass
class IirSystem:
    core: DaeSystem                  # F_aug, square in old vars + u
    carried: tuple[ex.Expr, ...]     # accumulated constraints F^(c-1)
    u_names: tuple[str, ...]
    xi_names: tuple[str, ...]
    # provenance: new symbol -> (replaced variable name, derivative order)
    var_map: dict[str, tuple[str, int]]
    cbar: tuple[int, ...]
    dbar: tuple[int, ...]
    r: int
    dof: int


def iir_step(ps: ProlongedSystem, r: int, carried, taken_names: set[str],
             u_start: int, xi_start: int) -> IirSystem:
    """One Implicit Index Reduction round on an already-sorted system."""
    sys = ps.source
    n = sys.n_vars
    d = ps.offsets.d

    u_names = tuple(_fresh(f"u{u_start + k}", taken_names) for k in range(r))
    xi_names = tuple(_fresh(f"xi{xi_start + k}", taken_names)
                     for k in range(n - r))
    var_map = {}
    sub = {}
    for j in range(r):
        sub[ex.JetVar(j, d[j])] = ex.jetvar(ex.JetVar(n + j, 0))
        var_map[u_names[j]] = (sys.var_names[j], d[j])
    for j in range(r, n):
        sub[ex.JetVar(j, d[j])] = ex.frozen(xi_names[j - r])
        var_map[xi_names[j - r]] = (sys.var_names[j], d[j])

    top = [e for _, _, e in ps.top_block]
    f_hat = [ex.substitute(e, jet_map=sub) for e in top]
    kept = top[:r]
    core = DaeSystem(tuple(kept + f_hat), sys.var_names + u_names,
                     name=sys.name)

    cbar = (0,) * r + (1,) * n
    dbar = tuple(d) + (1,) * r
    carried_new = tuple(carried) + tuple(ps.algebraic_constraints())

    sig = build_signature(core)
    for i in range(core.n_vars):
        for j in range(core.n_vars):
            s = sig.entries[i][j]
            if s > dbar[j] - cbar[i]:
                raise RuntimeError("(cbar, dbar) infeasible for F_aug")
    off = solve_offsets(sig)
    dof = extended_delta(off.delta, len(carried_new))
    return IirSystem(core, carried_new, u_names, xi_names, var_map,
                     cbar, dbar, r, dof)


@dataclass
class RoundInfo:
    n: int
    rank: int
    min_singular_value: float
    dof_before: int
    row_perm: tuple[int, ...] = ()
    col_perm: tuple[int, ...] = ()
    u_names: tuple[str, ...] = ()
    xi_names: tuple[str, ...] = ()


@dataclass
class RegularizationResult:
    core: DaeSystem
    carried: tuple[ex.Expr, ...]
    prolonged: ProlongedSystem
    rounds: list[RoundInfo]
    dof_trace: list[int]
    xi: dict[str, float]                  # final bound values
    var_map: dict[str, tuple[str, int]]   # u/xi -> (replaced var, order)
    point: PointValues                    # consistent initial point
    rank_at_exit: int

    @property
    def n_rounds(self) -> int:
        return sum(1 for r in self.rounds if r.u_names or r.xi_names)


def _consistent_point(core: DaeSystem, carried, ps: ProlongedSystem,
                      point: PointValues, xi_values: dict[str, float],
                      t0: float, rng) -> tuple[PointValues, dict[str, float]]:
    """Re-solve the final constraints at t0, treating the frozen constants
    as unknowns.

    Fast path: damped Gauss-Newton from the detection point.  When that
    diverges (the consistent manifold can be far from the constraint-only
    witness point), fall back to a full homotopy witness solve of the final
    constraint system and take the real point closest to the detection
    point in the shared coordinates.
    """
    constraints = list(carried) + list(ps.algebraic_constraints())
    names = core.var_names
    if not constraints:
        out = dict(point)
        for j, dj in enumerate(ps.offsets.d):
            for k in range(dj):
                out.setdefault((names[j], k), 0.0)
        return out, dict(xi_values)

    frozen = [ex.substitute(f, t_value=ex.const(t0)) for f in constraints]
    xi_names = sorted({nm for f in frozen for nm in ex.frozen_names(f)})
    base = core.n_vars
    xi_slot = {nm: ex.JetVar(base + i, 0) for i, nm in enumerate(xi_names)}
    frozen = [ex.substitute(f, frozen_map={nm: ex.jetvar(v)
                                           for nm, v in xi_slot.items()})
              for f in frozen]

    jets = set()
    for f in frozen:
        jets |= ex.jet_vars(f)
    unknowns = sorted(jets, key=lambda v: (v.var_index, v.order))

    x0 = []
    for v in unknowns:
        if v.var_index >= base:
            x0.append(xi_values.get(xi_names[v.var_index - base], 0.0))
        else:
            x0.append(point.get((names[v.var_index], v.order), 0.0))
    x0 = np.asarray(x0, dtype=float)

    leaves = [ex.jetvar(v) for v in unknowns]
    jac = [ex.partial(f, v) for f in frozen for v in unknowns]
    tape = Tape(frozen + jac, leaves)
    nf = len(frozen)

    def F(x):
        return tape.eval_real(x)[:nf]

    def J(x):
        return tape.eval_real(x)[nf:].reshape(nf, len(unknowns))

    try:
        sol = gauss_newton(F, J, x0, abstol=1e-11, max_iter=200)
    except NoConvergence:
        sol = _rebind_by_witness(frozen, unknowns, x0, base, rng)

    out = dict(point)
    xi_out = dict(xi_values)
    for v, val in zip(unknowns, sol):
        if v.var_index >= base:
            xi_out[xi_names[v.var_index - base]] = float(val)
        else:
            out[(names[v.var_index], v.order)] = float(val)
    for j, dj in enumerate(ps.offsets.d):
        for k in range(dj):
            out.setdefault((names[j], k), 0.0)
    return out, xi_out


def _rebind_by_witness(frozen, unknowns, x0, base, rng) -> np.ndarray:
    from .witness import build_critical_system, track_paths

    anchor = rng.uniform(-1.0, 1.0, size=len(unknowns))
    cs = build_critical_system(frozen, anchor, tuple(unknowns))
    ws = track_paths(cs, seed=int(rng.integers(1 << 31)))
    if not ws.points:
        raise NoConvergence("no real consistent point of the final constraints")
    shared = np.array([v.var_index < base for v in unknowns])

    def dist(p):
        return float(np.max(np.abs((p.coords - x0)[shared]))) if shared.any() else 0.0

    return min(ws.points, key=dist).coords


def regularize_loop(sys: DaeSystem, point: PointValues, t0: float,
                    tol: float, eps: float, rng,
                    max_rounds: int = 10) -> RegularizationResult:
    """Iterate {structural analysis, rank test, IIR} until the top-block
    Jacobian is nonsingular at the point, then re-solve the consistent point
    of the final constraints and bind the frozen constants from it."""
    core = sys
    carried: tuple[ex.Expr, ...] = ()
    xi_values: dict[str, float] = {}
    var_map: dict[str, tuple[str, int]] = {}
    taken = set(sys.var_names)
    rounds: list[RoundInfo] = []
    dof_trace: list[int] = []
    u_count = 0
    xi_count = 0
    current_point = dict(point)

    for _ in range(max_rounds + 1):
        off = solve_offsets(build_signature(core))
        ps = prolong(core, off)
        dof = extended_delta(off.delta, len(carried))
        dof_trace.append(dof)

        bj = block_jacobian(ps, ps.k_c)
        binding = _jacobian_binding(ps, bj, current_point, t0, xi_values, rng)
        M = bj.evaluate(binding)
        raw = svd_rank(M, tol)
        _, _, Ms = equilibrate(M)
        rank = svd_rank(Ms, tol).rank
        min_sv = float(raw.singular_values[-1]) if raw.singular_values else 0.0
        n = core.n_vars

        if rank == n:
            rounds.append(RoundInfo(n, rank, min_sv, dof))
            new_point, xi_final = _consistent_point(
                core, carried, ps, current_point, xi_values, t0, rng)
            return RegularizationResult(core, carried, ps, rounds, dof_trace,
                                        xi_final, var_map, new_point, rank)

        if dof - (n - rank) < 0:
            raise NoSolution(
                f"rank deficiency {n - rank} would drop the DOF below zero "
                f"(dof={dof}): the DAE has no solution")

        ps_sorted, row_perm, col_perm, r = sort_top_block(ps, binding, eps, tol)
        step = iir_step(ps_sorted, r, _reindex_exprs(
            carried, {old: new for new, old in enumerate(col_perm)}),
            taken, u_count + 1, xi_count + 1)
        u_count += r
        xi_count += core.n_vars - r
        for nm in step.xi_names:
            xi_values[nm] = float(rng.uniform(-1.0, 1.0))
        var_map.update(step.var_map)
        rounds.append(RoundInfo(n, rank, min_sv, dof, tuple(row_perm),
                                tuple(col_perm), step.u_names, step.xi_names))
        core = step.core
        carried = step.carried

    raise IterationLimit(f"not regular after {max_rounds} IIR rounds")
