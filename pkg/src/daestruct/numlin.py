"""Dense linear-algebra kernels: numerical rank, rank-revealing pivots,
damped Newton and Gauss-Newton solvers.

SVD, column-pivoted Householder QR and LU come from LAPACK via numpy/scipy;
this module owns the rank decisions, pivot bookkeeping and iteration logic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NonFinite, SingularJacobian

DEFAULT_RANK_TOL = 1e-8
ABS_FLOOR = 1e-14


@dataclass(frozen=True)
class RankResult:
    rank: int
    singular_values: tuple[float, ...]  # descending
    tol_used: float


@dataclass(frozen=True)
class PivotedFactorization:
    row_perm: tuple[int, ...]
    col_perm: tuple[int, ...]
    r: int


def _check_finite(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NonFinite("matrix has non-finite entries")
    return M


def svd_rank(M: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> RankResult:
    """Numerical rank: number of singular values above tol * sigma_1, with
    rank 0 when sigma_1 is below the absolute floor."""
    M = _check_finite(M)
    if M.size == 0:
        return RankResult(0, (), tol)
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] <= ABS_FLOOR:
        return RankResult(0, tuple(s), tol)
    rank = int(np.sum(s > tol * s[0]))
    return RankResult(rank, tuple(s), tol)


def pivoted_qr(M: np.ndarray, eps: float = DEFAULT_RANK_TOL) -> PivotedFactorization:
    """Row and column permutations from Householder QR with column pivoting
    applied to M and to M^T, plus the rank read off the R diagonal.

    The caller should confirm r against svd_rank; QR rank estimates can be
    off for adversarial matrices.
    """
    M = _check_finite(M)
    _, R, col_perm = scipy.linalg.qr(M, mode="economic", pivoting=True)
    _, _, row_perm = scipy.linalg.qr(M.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] <= ABS_FLOOR:
        r = 0
    else:
        r = 0
        for k in range(diag.size):
            if diag[k] > eps * diag[0]:
                r = k + 1
            else:
                break
    return PivotedFactorization(tuple(int(i) for i in row_perm),
                                tuple(int(j) for j in col_perm), r)


def equilibrate(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One pass of row then column inf-norm scaling.

    Rank is invariant under positive diagonal scaling, but relative-tolerance
    rank decisions are not; badly scaled physical systems (circuit equations
    mixing 1e-8 capacitances with 1e3 conductances) need this before SVD.
    Returns (dr, dc, dr*M*dc).
    """
    M = np.asarray(M, dtype=float)
    rn = np.max(np.abs(M), axis=1)
    dr = np.where(rn > 0, 1.0 / np.where(rn > 0, rn, 1.0), 1.0)
    Ms = M * dr[:, None]
    cn = np.max(np.abs(Ms), axis=0)
    dc = np.where(cn > 0, 1.0 / np.where(cn > 0, cn, 1.0), 1.0)
    return dr, dc, Ms * dc[None, :]


def _lu_solve(J: np.ndarray, r: np.ndarray) -> np.ndarray:
    if J.size and np.min(np.max(np.abs(J), axis=1)) == 0.0:
        raise SingularJacobian("zero row in the Jacobian")
    lu, piv = scipy.linalg.lu_factor(J, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.min() < 1e-14 * max(diag.max(), 1.0):
        raise SingularJacobian(f"LU pivot {diag.min():.3e} below threshold")
    return scipy.linalg.lu_solve((lu, piv), r, check_finite=False)


def pinv_step(J: np.ndarray, r: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Minimum-norm least-squares step via truncated SVD."""
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    keep = s > rcond * (s[0] if s.size and s[0] > 0 else 1.0)
    Ui = U[:, keep]
    si = s[keep]
    Vi = Vt[keep]
    return Vi.T @ ((Ui.T @ r) / si)


def newton_solve(
    F: Callable[[np.ndarray], np.ndarray],
    J: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    abstol: float = 1e-12,
    reltol: float = 1e-12,
    max_iter: int = 50,
    pseudo_fallback: bool = False,
) -> np.ndarray:
    """Damped Newton for a square system: halving line search on ||F||,
    stops when ||F||_inf <= abstol and the step is below reltol*(1+||x||).

    With pseudo_fallback=True a truncated-SVD step replaces a failed LU
    factorization (used for refining near-singular witness endpoints).
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(F(x), dtype=float)
    for _ in range(max_iter):
        nr = np.max(np.abs(r)) if r.size else 0.0
        if not np.isfinite(nr):
            raise NoConvergence("residual became non-finite")
        try:
            step = _lu_solve(np.asarray(J(x), dtype=float), r)
        except SingularJacobian:
            if not pseudo_fallback:
                raise
            step = pinv_step(np.asarray(J(x), dtype=float), r)
        t = 1.0
        for _ in range(30):
            x_new = x - t * step
            r_new = np.asarray(F(x_new), dtype=float)
            n_new = np.max(np.abs(r_new)) if r_new.size else 0.0
            if np.isfinite(n_new) and (n_new < nr or nr <= abstol):
                break
            t *= 0.5
        else:
            raise NoConvergence("line search failed to reduce the residual")
        x, r = x_new, r_new
        if (np.max(np.abs(r)) if r.size else 0.0) <= abstol and \
                t * np.max(np.abs(step), initial=0.0) <= reltol * (1.0 + np.max(np.abs(x), initial=0.0)):
            return x
    raise NoConvergence(f"no convergence after {max_iter} Newton iterations")


def gauss_newton(
    F: Callable[[np.ndarray], np.ndarray],
    J: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    abstol: float = 1e-10,
    max_iter: int = 100,
) -> np.ndarray:
    """Damped minimum-norm Gauss-Newton for underdetermined systems."""
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        r = np.asarray(F(x), dtype=float)
        nr = np.max(np.abs(r)) if r.size else 0.0
        if nr <= abstol:
            return x
        step = pinv_step(np.asarray(J(x), dtype=float), r)
        t = 1.0
        for _ in range(30):
            x_new = x - t * step
            n_new = np.max(np.abs(np.asarray(F(x_new), dtype=float)))
            if np.isfinite(n_new) and n_new < nr:
                break
            t *= 0.5
        else:
            raise NoConvergence("Gauss-Newton line search stalled")
        x = x_new
    r = np.asarray(F(x), dtype=float)
    if np.max(np.abs(r)) <= abstol:
        return x
    raise NoConvergence(f"no convergence after {max_iter} Gauss-Newton iterations")
