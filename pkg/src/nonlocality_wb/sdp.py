"""Dense primal-dual interior-point solver for block-diagonal LMI programs.

Solves

    maximize    b . y
    subject to  M(y) = F0 + sum_k y_k F_k  is positive semidefinite,

where all matrices are symmetric with a common block-diagonal structure.
This is the dual side of the standard conic pair

    (P) min <F0, X>  s.t.  <F_k, X> = -b_k,  X >= 0
    (D) max  b . y   s.t.  Z = F0 + sum_k y_k F_k >= 0,

with duality gap ``<X, Z> = <F0, X> - b . y`` at feasible points.  The
algorithm is the usual infeasible-start Mehrotra predictor-corrector with the
HKM direction: linearized complementarity ``dX = sigma*mu*Z^-1 - X -
X dZ Z^-1`` (symmetrized), Schur complement ``H_ij = tr(F_i X F_j Z^-1)``
(symmetric positive definite for symmetric data), one Cholesky of ``H`` per
iteration shared by predictor and corrector.

Constraint matrices are given sparsely as entry lists per variable; the
per-iteration Schur assembly exploits that each ``F_k`` has few entries by
forming ``U F_k V`` as a thin product of gathered columns.  Problem sizes up
to a few hundred rows per block and ~10^4 variables stay within desk-scale
memory; no sparsity is assumed in ``H`` itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITERATIONS = "max_iterations"
STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class LmiBlockData:
    """Sparse entries of all F_k restricted to one block.

    ``var``, ``row``, ``col``, ``val`` are parallel arrays listing every
    nonzero of every constraint matrix in this block; off-diagonal entries
    must appear in both (row, col) and (col, row) orientation so each F_k is
    stored as a full symmetric matrix.
    """

    dim: int
    var: np.ndarray
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray


@dataclass
class LmiSolution:
    y: np.ndarray
    matrix_blocks: list[np.ndarray]  # Z = M(y) at the returned iterate
    primal_blocks: list[np.ndarray]  # X, the certificate side
    objective: float  # b . y
    primal_objective: float  # <F0, X>
    status: str
    iterations: int
    rel_gap: float
    primal_infeasibility: float
    dual_infeasibility: float


class LmiProblem:
    """Preprocessed problem data with fast scatter/gather operators."""

    def __init__(self, f0_blocks: Sequence[np.ndarray], blocks: Sequence[LmiBlockData], b: np.ndarray):
        self.b = np.asarray(b, dtype=float)
        self.m = len(self.b)
        self.dims = [blk.dim for blk in blocks]
        self.f0 = [np.asarray(f, dtype=float) for f in f0_blocks]
        for f, nb in zip(self.f0, self.dims):
            if f.shape != (nb, nb):
                raise ValueError("F0 block shape mismatch")
        # scatter matrices: vec(M_b) = vec(F0_b) + S_b @ y
        self.scatter = []
        self.gather = []
        self.block_entries = []
        for blk in blocks:
            flat = blk.row.astype(np.int64) * blk.dim + blk.col.astype(np.int64)
            s = scipy.sparse.csr_matrix(
                (blk.val.astype(float), (flat, blk.var.astype(np.int64))),
                shape=(blk.dim * blk.dim, self.m),
            )
            self.scatter.append(s)
            self.gather.append(s.T.tocsr())
            # gathering tr(F_i U F_j V) evaluates T = U F_j V at (col, row),
            # i.e. T.ravel() indexed at col*dim + row
            self.block_entries.append(
                (
                    blk.var.astype(np.int64),
                    (blk.col.astype(np.int64) * blk.dim + blk.row.astype(np.int64)),
                    blk.val.astype(float),
                )
            )
        # per-variable slices for Schur assembly, per block
        self.per_var = []
        for blk in blocks:
            order = np.argsort(blk.var, kind="stable")
            var_sorted = blk.var[order]
            ptr = np.searchsorted(var_sorted, np.arange(self.m + 1))
            self.per_var.append(
                (
                    ptr,
                    blk.row[order].astype(np.int64),
                    blk.col[order].astype(np.int64),
                    blk.val[order].astype(float),
                )
            )

    def mat(self, y: np.ndarray, include_f0: bool = True) -> list[np.ndarray]:
        """M(y) blocks (or ``sum_k y_k F_k`` when ``include_f0`` is false)."""
        out = []
        for f0, s, nb in zip(self.f0, self.scatter, self.dims):
            m = (s @ y).reshape(nb, nb)
            if include_f0:
                m = m + f0
            out.append(m)
        return out

    def inner(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        """Vector of ``<F_k, A>`` for block-diagonal symmetric-ish A."""
        total = np.zeros(self.m)
        for g, a in zip(self.gather, blocks):
            total += g @ a.ravel()
        return total

    def schur(self, u_blocks: Sequence[np.ndarray], v_blocks: Sequence[np.ndarray]) -> np.ndarray:
        """Dense ``H_ij = sum_blocks tr(F_i U F_j V)`` for symmetric U, V."""
        h = np.zeros((self.m, self.m))
        for bi, (u, v) in enumerate(zip(u_blocks, v_blocks)):
            ptr, rows, cols, vals = self.per_var[bi]
            evar, eflat_t, evals = self.block_entries[bi]
            for j in range(self.m):
                lo, hi = ptr[j], ptr[j + 1]
                if lo == hi:
                    continue
                r, c, w = rows[lo:hi], cols[lo:hi], vals[lo:hi]
                t = (u[:, r] * w[None, :]) @ v[c, :]  # U F_j V
                # H[i, j] += sum over entries (p, q, w') of F_i of w' * t[q, p]
                h[:, j] += np.bincount(evar, weights=evals * t.ravel()[eflat_t], minlength=self.m)
        return 0.5 * (h + h.T)


def _max_step(chol_lower: np.ndarray, direction: np.ndarray) -> float:
    """Largest alpha with ``A + alpha * D`` PSD, given ``A = L L^T``."""
    w = scipy.linalg.solve_triangular(chol_lower, direction, lower=True, check_finite=False)
    w = scipy.linalg.solve_triangular(chol_lower, w.T, lower=True, check_finite=False)
    lam = scipy.linalg.eigvalsh(0.5 * (w + w.T), check_finite=False)[0]
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def _chol_blocks(blocks: Sequence[np.ndarray]):
    out = []
    for a in blocks:
        try:
            out.append(scipy.linalg.cholesky(a, lower=True, check_finite=False))
        except scipy.linalg.LinAlgError:
            return None
    return out


def solve_lmi(
    problem: LmiProblem,
    max_iterations: int = 100,
    gap_tol: float = 1e-7,
    feas_tol: float = 1e-7,
    trace: bool = False,
) -> LmiSolution:
    """Run the predictor-corrector iteration on a preprocessed problem."""
    dims = problem.dims
    n_total = sum(dims)
    m = problem.m
    b = problem.b

    scale = max(10.0, float(np.sqrt(n_total)), float(np.abs(b).max(initial=1.0)))
    x_blocks = [scale * np.eye(nb) for nb in dims]
    z_blocks = [scale * np.eye(nb) for nb in dims]
    y = np.zeros(m)

    f0_norm = 1.0 + np.sqrt(sum(float((f * f).sum()) for f in problem.f0))
    b_norm = 1.0 + float(np.linalg.norm(b))

    status = STATUS_MAX_ITERATIONS
    it = 0
    rel_gap = np.inf
    pinf = dinf = np.inf
    best_score = np.inf
    best_it = 0
    best = (y, x_blocks, z_blocks, rel_gap, pinf, dinf)
    for it in range(1, max_iterations + 1):
        my = problem.mat(y)
        rd = [mb - zb for mb, zb in zip(my, z_blocks)]  # dual residual matrices
        rp = -b - problem.inner(x_blocks)  # primal residuals <F_k, X> = -b_k
        gap = sum(float(np.tensordot(xb, zb)) for xb, zb in zip(x_blocks, z_blocks))
        mu = gap / n_total

        pobj = sum(float(np.tensordot(f, xb)) for f, xb in zip(problem.f0, x_blocks))
        dobj = float(b @ y)
        rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = float(np.linalg.norm(rp)) / b_norm
        dinf = np.sqrt(sum(float((r * r).sum()) for r in rd)) / f0_norm
        score = max(rel_gap, pinf, dinf)
        if trace:
            print(
                f"    it={it:3d} gap={rel_gap:9.2e} pinf={pinf:9.2e} dinf={dinf:9.2e} mu={mu:9.2e}",
                flush=True,
            )
        if score < 0.98 * best_score:
            best_score = score
            best_it = it
            best = (y.copy(), [xb.copy() for xb in x_blocks], [zb.copy() for zb in z_blocks], rel_gap, pinf, dinf)
        if rel_gap <= gap_tol and pinf <= feas_tol and dinf <= feas_tol:
            status = STATUS_OPTIMAL
            break
        # a diverging dual iterate / unbounded primal certifies the LMI empty
        if np.abs(y).max(initial=0.0) > 1e10 or pobj < -1e12:
            status = STATUS_INFEASIBLE
            break
        # numerical floor reached: no meaningful progress for a while
        if it - best_it >= 12 or (score > 1e4 * max(best_score, 1e-12) and it > 10):
            break

        lx = _chol_blocks(x_blocks)
        lz = _chol_blocks(z_blocks)
        if lx is None or lz is None:
            break
        zinv = [scipy.linalg.cho_solve((l, True), np.eye(nb), check_finite=False) for l, nb in zip(lz, dims)]
        zinv = [0.5 * (zi + zi.T) for zi in zinv]

        h = problem.schur(x_blocks, zinv)
        jitter = 1e-13 * max(1.0, float(np.trace(h)) / max(m, 1))
        cho = None
        for _ in range(8):
            try:
                cho = scipy.linalg.cho_factor(
                    h + jitter * np.eye(m), lower=True, check_finite=False
                )
                break
            except scipy.linalg.LinAlgError:
                jitter *= 100.0
        if cho is None:
            break

        a_vec = problem.inner(zinv)
        xrz = [xb @ rb @ zi for xb, rb, zi in zip(x_blocks, rd, zinv)]
        g_vec = problem.inner(xrz)

        def directions(sigma_mu: float, corr_blocks=None):
            rhs = sigma_mu * a_vec + b - g_vec
            if corr_blocks is not None:
                rhs = rhs - problem.inner(corr_blocks)
            dy = scipy.linalg.cho_solve(cho, rhs, check_finite=False)
            # one step of iterative refinement; the Schur system turns badly
            # conditioned near the optimum and the raw solve loses digits
            resid = rhs - h @ dy - jitter * dy
            dy = dy + scipy.linalg.cho_solve(cho, resid, check_finite=False)
            dz = [rb + sb for rb, sb in zip(rd, problem.mat(dy, include_f0=False))]
            dx = []
            for bi in range(len(dims)):
                t = sigma_mu * zinv[bi] - x_blocks[bi] - x_blocks[bi] @ dz[bi] @ zinv[bi]
                if corr_blocks is not None:
                    t = t - corr_blocks[bi]
                dx.append(0.5 * (t + t.T))
            return dy, dx, dz

        # predictor (affine scaling)
        dy_aff, dx_aff, dz_aff = directions(0.0)
        ap = min(1.0, *(_max_step(l, d) for l, d in zip(lx, dx_aff)))
        ad = min(1.0, *(_max_step(l, d) for l, d in zip(lz, dz_aff)))
        gap_aff = sum(
            float(np.tensordot(xb + ap * dxb, zb + ad * dzb))
            for xb, dxb, zb, dzb in zip(x_blocks, dx_aff, z_blocks, dz_aff)
        )
        sigma = min(1.0, max(1e-8, (max(gap_aff, 0.0) / gap) ** 3))

        # corrector with second-order term dX_aff dZ_aff Z^-1
        corr = [dxa @ dza @ zi for dxa, dza, zi in zip(dx_aff, dz_aff, zinv)]
        dy, dx, dz = directions(sigma * mu, corr)

        if it <= 2:
            gamma = 0.9
        elif best_score < 1e-4:
            gamma = 0.99
        else:
            gamma = 0.98
        ap = min(1.0, gamma * min(_max_step(l, d) for l, d in zip(lx, dx)))
        ad = min(1.0, gamma * min(_max_step(l, d) for l, d in zip(lz, dz)))

        for _ in range(12):  # keep iterates safely positive definite
            x_try = [xb + ap * dxb for xb, dxb in zip(x_blocks, dx)]
            if _chol_blocks(x_try) is not None:
                break
            ap *= 0.7
        for _ in range(12):
            z_try = [zb + ad * dzb for zb, dzb in zip(z_blocks, dz)]
            if _chol_blocks(z_try) is not None:
                break
            ad *= 0.7
        x_blocks = x_try
        z_blocks = z_try
        y = y + ad * dy

    if status != STATUS_OPTIMAL:
        y, x_blocks, z_blocks, rel_gap, pinf, dinf = best
    return LmiSolution(
        y=y,
        matrix_blocks=problem.mat(y),
        primal_blocks=x_blocks,
        objective=float(b @ y),
        primal_objective=sum(float(np.tensordot(f, xb)) for f, xb in zip(problem.f0, x_blocks)),
        status=status,
        iterations=it,
        rel_gap=float(rel_gap),
        primal_infeasibility=float(pinf),
        dual_infeasibility=float(dinf),
    )
