"""Real witness points of polynomial constraint sets.

A witness point of V_R(f) is a critical point of the squared distance to a
random anchor, found by solving the Lagrange-multiplier system

    f(x) = 0,
    x - a + sum_k lambda_k grad f_k(x) = 0,

which is square in (x, lambda).  All solutions of the square system are
located by a total-degree homotopy: the start system z_k^(deg_k) - 1 = 1 is
deformed into the target through H(z, s) = (1-s) gamma g(z) + s F(z) with a
random complex gamma, and every start root (a product of roots of unity) is
tracked from s = 0 to s = 1 with an Euler predictor and a Newton corrector
in complex arithmetic.  Real endpoints are refined in real arithmetic,
filtered by constraint residual, and deduplicated.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import expr as ex
from .errors import DaestructError, NoConvergence, NonPolynomialConstraint, SingularJacobian
from .numlin import newton_solve
from .tape import Tape

RESIDUAL_TOL = 1e-8
IMAG_TOL = 1e-6
DEDUP_TOL = 1e-6

# adaptive step control
DS_INIT = 0.05
DS_FLOOR = 1e-7
DS_CAP = 0.2
CORRECTOR_TOL = 1e-10
DIVERGENCE_BOUND = 1e8
MAX_STEPS = 20_000


@dataclass(frozen=True)
class CriticalSystem:
    """Square Lagrange system for distance-to-anchor critical points."""

    constraints: tuple[ex.Expr, ...]
    unknowns: tuple[ex.JetVar, ...]
    anchor: tuple[float, ...]
    lam_vars: tuple[ex.JetVar, ...]
    equations: tuple[ex.Expr, ...]
    degrees: tuple[int, ...]

    @property
    def n_unknowns(self) -> int:
        return len(self.unknowns)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def size(self) -> int:
        return len(self.equations)

    def bezout_number(self) -> int:
        out = 1
        for d in self.degrees:
            out *= d
        return out


@dataclass
class WitnessPoint:
    coords: np.ndarray          # values of the unknowns, in order
    residual: float             # inf-norm of the constraints at the point
    min_singular_value: float | None = None  # of the DAE top-block Jacobian,
    # filled in during degeneration detection
    component_id: str | None = None
    singular: bool = False      # critical-system Jacobian singular at s = 1
    start_index: int = -1

    def as_binding(self, t: float, unknowns) -> ex.Binding:
        return ex.Binding(t=t, values={v: float(c)
                                       for v, c in zip(unknowns, self.coords)})


@dataclass
class WitnessSet:
    unknowns: tuple[ex.JetVar, ...]
    points: list[WitnessPoint] = field(default_factory=list)
    anchor: tuple[float, ...] = ()
    n_paths: int = 0
    n_failed: int = 0
    n_diverged: int = 0

    def __len__(self):
        return len(self.points)


def default_unknowns(constraints) -> tuple[ex.JetVar, ...]:
    jets = set()
    for f in constraints:
        jets |= ex.jet_vars(f)
    return tuple(sorted(jets, key=lambda v: (v.var_index, v.order)))


def build_critical_system(
    constraints,
    anchor,
    unknowns: tuple[ex.JetVar, ...] | None = None,
) -> CriticalSystem:
    """Set up the square Lagrange system.  Constraints must be polynomial in
    the unknowns and already have t (and any frozen constants) substituted."""
    constraints = tuple(constraints)
    if not constraints:
        raise NonPolynomialConstraint("no constraints: witness set is undefined")
    for f in constraints:
        for node in ex.postorder(f):
            if node.kind == ex.TVAR:
                raise ValueError("substitute t before building the critical system")
            if node.kind == ex.FROZEN:
                raise ValueError(
                    f"frozen constant {node.payload!r} must be substituted first")
    if unknowns is None:
        unknowns = default_unknowns(constraints)
    unknowns = tuple(unknowns)
    uset = set(unknowns)
    m = len(constraints)
    n = len(unknowns)
    for f in constraints:
        if not ex.is_polynomial(f):
            raise NonPolynomialConstraint(
                "constraint applies an elementary function to an unknown")
        ex.poly_degree(f, uset)  # raises on rational structure

    anchor = tuple(float(v) for v in anchor)
    if len(anchor) != n:
        raise ValueError(f"anchor length {len(anchor)} != {n} unknowns")

    base = max((v.var_index for v in unknowns), default=-1) + 1
    lam = tuple(ex.JetVar(base + k, 0) for k in range(m))

    grads = [[ex.partial(f, v) for v in unknowns] for f in constraints]
    lagrange = []
    for i, v in enumerate(unknowns):
        e = ex.jetvar(v) - ex.const(anchor[i])
        for k in range(m):
            e = e + ex.jetvar(lam[k]) * grads[k][i]
        lagrange.append(e)

    equations = constraints + tuple(lagrange)
    allvars = uset | set(lam)
    degrees = tuple(max(ex.poly_degree(e, allvars), 1) for e in equations)
    return CriticalSystem(constraints, unknowns, anchor, lam, equations, degrees)


def _fused_tape(cs: CriticalSystem) -> Tape:
    """One tape computing [equations, Jacobian entries] at (x, lambda)."""
    vars_all = list(cs.unknowns) + list(cs.lam_vars)
    jac = [ex.partial(e, v) for e in cs.equations for v in vars_all]
    leaves = [ex.jetvar(v) for v in vars_all]
    return Tape(list(cs.equations) + jac, leaves)


def _start_root(index: int, degrees) -> np.ndarray:
    z = np.empty(len(degrees), dtype=complex)
    rest = index
    for k in range(len(degrees) - 1, -1, -1):
        d = degrees[k]
        rest, m = divmod(rest, d)
        z[k] = np.exp(2j * np.pi * m / d)
    return z


def _track_one(tape: Tape, degrees: np.ndarray, gamma: complex, z0: np.ndarray,
               size: int):
    """Track one path from s=0 to s=1.  Returns (status, endpoint)."""
    z = z0.astype(complex)
    s = 0.0
    ds = DS_INIT
    successes = 0
    dm1 = degrees - 1

    def eval_FJ(zz):
        out = tape.eval_complex(zz)
        return out[:size], out[size:].reshape(size, size)

    for _ in range(MAX_STEPS):
        if s >= 1.0:
            break
        if np.max(np.abs(z)) > DIVERGENCE_BOUND:
            return "diverged", z
        s_target = min(s + ds, 1.0)

        ok = False
        F, JF = eval_FJ(z)
        g = z ** degrees - 1.0
        Hz = (1.0 - s) * gamma * np.diag(degrees * z ** dm1) + s * JF
        Hs = F - gamma * g
        try:
            zdot = np.linalg.solve(Hz, -Hs)
            z_new = z + zdot * (s_target - s)
            for it in range(4):
                F, JF = eval_FJ(z_new)
                g = z_new ** degrees - 1.0
                H = (1.0 - s_target) * gamma * g + s_target * F
                if not np.all(np.isfinite(H.view(float))):
                    break
                if np.max(np.abs(H)) <= CORRECTOR_TOL:
                    ok = True
                    break
                if it == 3:
                    break
                Hz = (1.0 - s_target) * gamma * np.diag(degrees * z_new ** dm1) + s_target * JF
                z_new = z_new - np.linalg.solve(Hz, H)
        except np.linalg.LinAlgError:
            ok = False

        if ok:
            z = z_new
            s = s_target
            successes += 1
            if successes >= 5:
                ds = min(ds * 2.0, DS_CAP)
                successes = 0
        else:
            ds *= 0.5
            successes = 0
            if ds < DS_FLOOR:
                return "failed", z
    else:
        return "failed", z

    # polish at s = 1
    for _ in range(5):
        F, JF = eval_FJ(z)
        if np.max(np.abs(F)) <= 1e-13:
            break
        try:
            z = z - np.linalg.solve(JF, F)
        except np.linalg.LinAlgError:
            break
    return "ok", z


def track_paths(cs: CriticalSystem, seed: int, workers: int = 1,
                max_paths: int = 100_000) -> WitnessSet:
    """Track all total-degree paths and collect refined real endpoints.

    Per-path failures are recorded, not raised; an empty witness set is a
    legal return (empty real variety).
    """
    n_paths = cs.bezout_number()
    if n_paths > max_paths:
        raise DaestructError(
            f"Bezout number {n_paths} exceeds the path cap {max_paths}")
    rng = np.random.default_rng(seed)
    gamma = np.exp(2j * np.pi * rng.uniform())

    tape = _fused_tape(cs)
    degrees = np.asarray(cs.degrees, dtype=float)
    size = cs.size

    def run(p):
        return _track_one(tape, degrees, gamma, _start_root(p, cs.degrees), size)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(n_paths)))
    else:
        results = [run(p) for p in range(n_paths)]

    ws = WitnessSet(unknowns=cs.unknowns, anchor=cs.anchor, n_paths=n_paths)
    n = cs.n_unknowns
    m = cs.n_constraints

    def F_real(v):
        return tape.eval_real(v)[:size]

    def J_real(v):
        return tape.eval_real(v)[size:].reshape(size, size)

    for p, (status, z) in enumerate(results):
        if status == "diverged":
            ws.n_diverged += 1
            continue
        if status == "failed":
            ws.n_failed += 1
            continue
        if np.max(np.abs(z.imag)) > IMAG_TOL:
            continue
        x0 = z.real.copy()
        singular = False
        try:
            v = newton_solve(F_real, J_real, x0, abstol=1e-11, reltol=1e-9,
                             max_iter=60)
        except SingularJacobian:
            singular = True
            try:
                v = newton_solve(F_real, J_real, x0, abstol=1e-9, reltol=1e-7,
                                 max_iter=60, pseudo_fallback=True)
            except (SingularJacobian, NoConvergence):
                ws.n_failed += 1
                continue
        except NoConvergence:
            ws.n_failed += 1
            continue
        coords = v[:n]
        residual = float(np.max(np.abs(F_real(v)[:m])))
        if residual > RESIDUAL_TOL:
            ws.n_failed += 1
            continue
        if any(np.max(np.abs(coords - q.coords)) <= DEDUP_TOL for q in ws.points):
            continue
        ws.points.append(WitnessPoint(coords=coords, residual=residual,
                                      singular=singular, start_index=p))
    return ws


def classify_components(ws: WitnessSet, factors, tol: float = 1e-6) -> WitnessSet:
    """Label points by the sign vector of user-declared factor polynomials:
    '0' on the factor's zero set, '+'/'-' off it.  Without factors the points
    stay unlabeled."""
    factors = list(factors or [])
    if not factors:
        return ws
    tapes = Tape(factors, [ex.jetvar(v) for v in ws.unknowns])
    out = []
    for pt in ws.points:
        vals = tapes.eval_real(pt.coords)
        tag = "".join("0" if abs(v) <= tol else ("+" if v > 0 else "-")
                      for v in vals)
        out.append(replace(pt, component_id=tag))
    return WitnessSet(unknowns=ws.unknowns, points=out, anchor=ws.anchor,
                      n_paths=ws.n_paths, n_failed=ws.n_failed,
                      n_diverged=ws.n_diverged)


def witness_of_constraints(
    constraints,
    t0: float,
    seed: int,
    unknowns: tuple[ex.JetVar, ...] | None = None,
    workers: int = 1,
) -> WitnessSet:
    """Convenience wrapper: freeze t at t0, draw the anchor uniformly from
    [-1, 1]^n with the given seed, build and track."""
    frozen = [ex.substitute(f, t_value=ex.const(t0)) for f in constraints]
    if unknowns is None:
        unknowns = default_unknowns(frozen)
    rng = np.random.default_rng(seed)
    anchor = rng.uniform(-1.0, 1.0, size=len(unknowns))
    cs = build_critical_system(frozen, anchor, unknowns)
    return track_paths(cs, seed=seed + 1, workers=workers)
