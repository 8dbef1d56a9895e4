"""Predict-project integration of a regularized prolonged system.

The state holds every jet of order below its variable's offset d_j; the
top-order jets are not integrated but solved from the (square) top block at
each stage by Newton iteration, which reduces to a single LU solve when the
equations are linear in the leading derivatives.  After each ODE step the
state is projected back onto the algebraic constraints by minimum-norm
Gauss-Newton; the projection only fires when the predicted residual exceeds
abstol, so for small steps the method behaves exactly like the underlying
one-step scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import expr as ex
from .errors import (InconsistentInitialPoint, NoConvergence,
                     SingularTopBlock)
from .numlin import equilibrate, pinv_step
from .prolong import ProlongedSystem, block_jacobian
from .tape import Tape

TOP_SOLVE_TOL = 1e-11
WEAK_SPLIT = 1e-5  # singular values below this fraction of sigma_max are
# treated as a degenerate direction of the top block


@dataclass(frozen=True)
class SolveConfig:
    t0: float
    t_end: float
    h: float = 1e-3
    abstol: float = 1e-6
    reltol: float = 1e-3
    max_newton: int = 50
    method: str = "rk4"

    def __post_init__(self):
        if self.t_end < self.t0:
            raise ValueError("t_end must not precede t0")
        if self.h <= 0 or self.abstol <= 0 or self.reltol <= 0:
            raise ValueError("h and tolerances must be positive")
        if self.method not in ("euler", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray              # original dependent variables per time
    var_names: tuple[str, ...]
    residuals: np.ndarray           # max |F_AE| per accepted step
    # auxiliary record: every jet (state and top) per time, for diagnostics
    jet_names: tuple[tuple[str, int], ...]
    jets: np.ndarray

    def __len__(self):
        return len(self.times)


class SplitSystem:
    """Square differential part (top block) and algebraic part, compiled.

    The differential part maps (t, state, top) to top-block residuals and
    their Jacobian with respect to the top jets; the algebraic part maps
    (t, state) to constraint residuals and their state Jacobian.
    """

    def __init__(self, ps: ProlongedSystem, carried=(), xi=None):
        xi = xi or {}
        xi_map = {k: ex.const(v) for k, v in xi.items()}

        def fix(e):
            return ex.substitute(e, frozen_map=xi_map) if xi_map else e

        self.ps = ps
        self.names = ps.source.var_names
        self.state_jets = ps.state_jets()
        self.top_jets = ps.top_jets()

        de = [fix(e) for _, _, e in ps.top_block]
        bj = block_jacobian(ps, ps.k_c)
        de_jac = [fix(e) for row in bj.entries for e in row]
        ae = [fix(e) for e in carried] + [fix(e) for e in ps.algebraic_constraints()]

        t = ex.tvar()
        state_leaves = [ex.jetvar(v) for v in self.state_jets]
        top_leaves = [ex.jetvar(v) for v in self.top_jets]
        allowed_de = set(self.state_jets) | set(self.top_jets)
        for e in de + de_jac:
            extra = ex.jet_vars(e) - allowed_de
            if extra:
                raise ValueError(f"differential part references {extra}")
        allowed_ae = set(self.state_jets)
        for e in ae:
            extra = ex.jet_vars(e) - allowed_ae
            if extra:
                raise ValueError(f"algebraic part references {extra}")

        self.n_top = len(self.top_jets)
        self.n_state = len(self.state_jets)
        self.n_ae = len(ae)
        self.f_de = tuple(de)
        self.f_ae = tuple(ae)
        self._de_tape = Tape(de + de_jac, [t] + state_leaves + top_leaves)
        if ae:
            ae_jac = [ex.partial(e, v) for e in ae for v in self.state_jets]
            self._ae_tape = Tape(ae + ae_jac, [t] + state_leaves)
        else:
            self._ae_tape = None

        self.rescue_events = 0  # degenerate-direction solves seen so far

        # state derivative wiring: state jet (j,k) advances to (j,k+1),
        # found either later in the state or among the top jets
        pos_state = {v: i for i, v in enumerate(self.state_jets)}
        pos_top = {v: i for i, v in enumerate(self.top_jets)}
        self._shift = []
        for v in self.state_jets:
            nxt = ex.JetVar(v.var_index, v.order + 1)
            if nxt in pos_state:
                self._shift.append((0, pos_state[nxt]))
            else:
                self._shift.append((1, pos_top[nxt]))

    def de_eval(self, t, state, top):
        out = self._de_tape.eval_real(np.concatenate(([t], state, top)))
        n = self.n_top
        return out[:n], out[n:].reshape(n, n)

    def ae_eval(self, t, state):
        if self._ae_tape is None:
            return np.zeros(0), np.zeros((0, self.n_state))
        out = self._ae_tape.eval_real(np.concatenate(([t], state)))
        m = self.n_ae
        return out[:m], out[m:].reshape(m, self.n_state)

    def ae_residual(self, t, state) -> float:
        r, _ = self.ae_eval(t, state)
        return float(np.max(np.abs(r))) if r.size else 0.0

    def _strong_residual(self, t, state, z):
        """Split the equilibrated residual by singular value: the strong
        part is solvable, the weak part is a degenerate direction."""
        r, J = self.de_eval(t, state, z)
        dr, _, Js = equilibrate(J)
        U, s, _ = np.linalg.svd(Js, full_matrices=False)
        if s.size == 0 or s[0] <= 1e-150:
            return float(np.max(np.abs(r), initial=0.0)), r
        c = U.T @ (r * dr)
        strong = s >= WEAK_SPLIT * s[0]
        return float(np.max(np.abs(c[strong]), initial=0.0)), r

    def solve_top(self, t, state, guess, max_iter=30):
        """Newton-solve the top block for the leading derivatives; a single
        LU solve per iteration when the block is well conditioned (and one
        iteration total when it is linear in the leading derivatives).

        The solves are equilibrated, since circuit systems mix 1e-8 and 1e3
        scales.  Near a degenerate crossing the weak singular directions are
        excluded from the update (they keep their warm-start values) and
        convergence is judged on the solvable strong directions only; the
        weak-direction inconsistency is a state-level matter that the
        constraint projection handles.  A block whose *strong* residual
        cannot converge raises SingularTopBlock.
        """
        z = guess.copy()
        rescued = False
        for _ in range(max_iter):
            r, J = self.de_eval(t, state, z)
            if not np.all(np.isfinite(r)):
                raise SingularTopBlock(f"non-finite top-block residual at t={t}")
            nr = np.max(np.abs(r)) if r.size else 0.0
            if nr <= TOP_SOLVE_TOL:
                return z
            dr, dc, Js = equilibrate(J)
            rs = r * dr
            use_svd = True
            if Js.size and np.min(np.max(np.abs(Js), axis=1)) > 0.0:
                try:
                    lu, piv = scipy.linalg.lu_factor(Js, check_finite=False)
                    diag = np.abs(np.diag(lu))
                    if diag.min() >= WEAK_SPLIT * max(diag.max(), 1.0):
                        w = scipy.linalg.lu_solve((lu, piv), rs,
                                                  check_finite=False)
                        use_svd = False
                except (ValueError, scipy.linalg.LinAlgError):
                    pass
            if use_svd:
                U, s, Vt = np.linalg.svd(Js, full_matrices=False)
                if s.size == 0 or s[0] <= 1e-150:
                    break
                strong = s >= WEAK_SPLIT * s[0]
                if not strong.all():
                    rescued = True
                c = U.T @ rs
                if np.max(np.abs(c[strong]), initial=0.0) <= 1e-9:
                    self.rescue_events += rescued
                    return z
                w = Vt[strong].T @ (c[strong] / s[strong])
            z = z - dc * w
        strong_res, r = self._strong_residual(t, state, z)
        nr = np.max(np.abs(r), initial=0.0)
        if nr <= 1e3 * TOP_SOLVE_TOL or strong_res <= 1e-8:
            self.rescue_events += rescued
            return z
        raise SingularTopBlock(f"top-block Jacobian singular at t={t}")

    def rhs(self, t, state, top_guess):
        top = self.solve_top(t, state, top_guess)
        ds = np.empty(self.n_state)
        for i, (where, k) in enumerate(self._shift):
            ds[i] = state[k] if where == 0 else top[k]
        return ds, top


def split_system(ps: ProlongedSystem, carried=(), xi=None,
                 initial_state: np.ndarray | None = None,
                 t0: float = 0.0) -> SplitSystem:
    """Build the split (F_DE, F_AE) form; with an initial state given, fail
    fast when the top block is singular there."""
    ss = SplitSystem(ps, carried, xi)
    if initial_state is not None:
        ss.solve_top(t0, initial_state, np.zeros(ss.n_top))
    return ss


def project(ss: SplitSystem, t, state, abstol, max_newton, trigger=None):
    """Minimum-norm Gauss-Newton onto the constraints, holding t fixed.

    The state is returned unchanged while its residual is below the trigger
    (abstol by default), so well-resolved predictions pass through
    untouched.  Iteration aims well below abstol and stops early when the
    line search stalls at its attainable floor; only a floor above abstol
    is an error.
    """
    r, J = ss.ae_eval(t, state)
    if r.size == 0:
        return state, 0.0
    nr = float(np.max(np.abs(r)))
    if nr <= (abstol if trigger is None else trigger):
        return state, nr
    s = state.copy()
    for _ in range(max_newton):
        step_v = pinv_step(J, r)
        tau = 1.0
        stalled = False
        for _ in range(30):
            s_new = s - tau * step_v
            r_new, J_new = ss.ae_eval(t, s_new)
            n_new = float(np.max(np.abs(r_new)))
            if np.isfinite(n_new) and n_new < nr:
                break
            tau *= 0.5
        else:
            stalled = True
        if stalled:
            break
        s, r, J, nr = s_new, r_new, J_new, n_new
        if nr <= 0.01 * abstol:
            return s, nr
    if nr <= abstol:
        return s, nr
    raise NoConvergence(f"projection did not reach abstol at t={t}")


def step(ss: SplitSystem, t: float, state: np.ndarray, top: np.ndarray,
         h: float, cfg: SolveConfig):
    """One predict-project step; returns (state, top, residual) at t + h.

    A step whose stage solves crossed a degenerate direction is always
    projected (tight trigger): the weak direction left unresolved by the
    top block is pinned by the constraints instead.
    """
    mark = ss.rescue_events
    if cfg.method == "euler":
        k1, top = ss.rhs(t, state, top)
        s1 = state + h * k1
    else:
        k1, top = ss.rhs(t, state, top)
        k2, top = ss.rhs(t + 0.5 * h, state + 0.5 * h * k1, top)
        k3, top = ss.rhs(t + 0.5 * h, state + 0.5 * h * k2, top)
        k4, top = ss.rhs(t + h, state + h * k3, top)
        s1 = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    trigger = 1e-13 if ss.rescue_events > mark else None
    s1, res = project(ss, t + h, s1, cfg.abstol, cfg.max_newton, trigger=trigger)
    top = ss.solve_top(t + h, s1, top)
    return s1, top, res


def dae_solve(ss: SplitSystem, point: dict[tuple[str, int], float],
              cfg: SolveConfig,
              original_vars: tuple[str, ...] | None = None) -> Trajectory:
    """Integrate from a consistent point; the trajectory reports the
    original dependent variables, with every jet kept in the aux record."""
    names = ss.names
    state = np.array([point.get((names[v.var_index], v.order), 0.0)
                      for v in ss.state_jets])

    r0 = ss.ae_residual(cfg.t0, state)
    if r0 > cfg.abstol:
        try:
            state, r0 = project(ss, cfg.t0, state, cfg.abstol, cfg.max_newton)
        except NoConvergence:
            raise InconsistentInitialPoint(
                f"initial constraint residual {r0:.3e} exceeds abstol")
    top = ss.solve_top(cfg.t0, state, np.zeros(ss.n_top))

    if original_vars is None:
        original_vars = names
    col_src = []
    pos_state = {v: i for i, v in enumerate(ss.state_jets)}
    pos_top = {v: i for i, v in enumerate(ss.top_jets)}
    for nm in original_vars:
        j = names.index(nm)
        v = ex.JetVar(j, 0)
        col_src.append((0, pos_state[v]) if v in pos_state else (1, pos_top[v]))

    jet_names = tuple((names[v.var_index], v.order)
                      for v in list(ss.state_jets) + list(ss.top_jets))

    times = [cfg.t0]
    rows = [np.concatenate([state, top])]
    residuals = [r0]

    n_steps = int(np.floor((cfg.t_end - cfg.t0) / cfg.h + 1e-9))
    t = cfg.t0
    for k in range(n_steps):
        state, top, res = step(ss, t, state, top, cfg.h, cfg)
        t = cfg.t0 + (k + 1) * cfg.h
        times.append(t)
        rows.append(np.concatenate([state, top]))
        residuals.append(res)
    if t < cfg.t_end - 1e-12 * max(1.0, abs(cfg.t_end)):
        hh = cfg.t_end - t
        state, top, res = step(ss, t, state, top, hh, cfg)
        times.append(cfg.t_end)
        rows.append(np.concatenate([state, top]))
        residuals.append(res)

    jets = np.asarray(rows)
    states = np.empty((len(times), len(original_vars)))
    for c, (where, k) in enumerate(col_src):
        states[:, c] = jets[:, k if where == 0 else ss.n_state + k]
    return Trajectory(np.asarray(times), states, tuple(original_vars),
                      np.asarray(residuals), jet_names, jets)
