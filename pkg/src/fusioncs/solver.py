"""Recovery of block signals by minimizing the sum of block l2 norms.

Two constrained programs over coefficient vectors c (blocks c_j):

    equality:  min sum_j ||c_j||_2   s.t.  B c = y
    ball:      min sum_j ||c_j||_2   s.t.  ||B c - y||_2 <= eta

Every solve starts from a matrix-free least-squares probe of B c = y, which
settles feasibility and warm-starts the iteration. In the equality case the
probe point is first tested for direct optimality: a dual vector nu with
B^T nu equal to the block-norm subgradient at the probe certifies it, which
resolves every instance whose constraint set is a single point (for example
injective B) without iterating, at any conditioning.

Otherwise a two-block ADMM runs on the consensus form

    min ||z||_{2,1} + I_C(w)   s.t.   c - z = 0,  B c - w = 0,

where C is {y} or the eta-ball around y. The c-step is a conjugate-gradient
solve of (rho_z I + rho_w B^T B) c = rho_z (z - u_z) + rho_w B^T (w - u_w),
warm-started from the previous iterate; the z-step is blockwise soft
thresholding; the w-step is a point or ball projection; consensus inputs are
over-relaxed, and the two penalties are residual-balanced on a cooldown.
The scaled dual variable of the w constraint yields the certificate:
nu = -rho_w * u_w satisfies, at optimality, B^T nu in the subdifferential of
the block norm, hence max_j ||(B^T nu)_j||_2 <= 1 and the objective equals
<y, nu> - eta ||nu||_2. Convergence is declared on joint primal/dual
residuals plus that duality gap, never on objective stagnation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.sparse.linalg import LinearOperator, lsqr

from .errors import (
    NotOrthogonalError,
    TooLargeError,
    ZeroCoefficientError,
)
from .frames import SubspaceCollection, coherence
from .measurement import CoefficientOperator
from .signals import BlockSignal, from_coeff_vector

_RHO_MIN, _RHO_MAX = 1e-8, 1e8
_BALANCE_RATIO = 10.0
_BALANCE_FACTOR = 2.0
# rebalance at most once per this many iterations; per-iteration jumps keep
# re-perturbing the duals and can cycle forever
_BALANCE_COOLDOWN = 50
# over-relaxation of the consensus inputs, a standard splitting accelerator
_RELAXATION = 1.7


@dataclass(frozen=True)
class SolverParams:
    """Iteration limits and stopping tolerances.

    Residual tolerances are relative; the duality gap tolerance is absolute
    at the scale of the objective. ``adapt_rho`` enables residual-balancing
    updates of the penalty.
    """

    max_iters: int = 20000
    tol_primal: float = 1e-9
    tol_dual: float = 1e-9
    tol_gap: float = 1e-7
    rho: float = 1.0
    adapt_rho: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if min(self.tol_primal, self.tol_dual, self.tol_gap) < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.rho <= 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True)
class RecoverySolution:
    estimate: BlockSignal
    status: str  # "converged" | "max_iters" | "infeasible"
    iterations: int
    primal_residual: float
    dual_residual: float
    duality_gap: float
    objective: float
    dual_vector: np.ndarray = field(repr=False, default=None)
    eta: float = 0.0
    params: SolverParams = field(repr=False, default_factory=SolverParams)


def diagnostics(solution: RecoverySolution) -> dict:
    """Serializable summary of a solve."""
    return {
        "status": solution.status,
        "iterations": solution.iterations,
        "primal_residual": solution.primal_residual,
        "dual_residual": solution.dual_residual,
        "duality_gap": solution.duality_gap,
        "objective": solution.objective,
    }


def block_soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """Shrink a block toward zero: 0 if ||v|| <= tau, else (1 - tau/||v||) v."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= tau:
        return np.zeros_like(v)
    return (1.0 - tau / nrm) * v


# ---------------------------------------------------------------------------
# Flat-vector block helpers (blocks given by start offsets)
# ---------------------------------------------------------------------------

def _block_norms_flat(v: np.ndarray, starts: np.ndarray) -> np.ndarray:
    return np.sqrt(np.add.reduceat(v * v, starts))


def _norm21_flat(v: np.ndarray, starts: np.ndarray) -> float:
    return float(np.sum(_block_norms_flat(v, starts)))


def _shrink_flat(v: np.ndarray, starts: np.ndarray, lengths: np.ndarray, tau: float) -> np.ndarray:
    norms = _block_norms_flat(v, starts)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > tau, 1.0 - tau / norms, 0.0)
    return v * np.repeat(factor, lengths)


def _cg(apply_fn, b, x0, rtol, maxiter):
    """Conjugate gradient for a symmetric positive definite apply_fn."""
    x = x0.copy()
    r = b - apply_fn(x)
    rs = float(r @ r)
    stop = (rtol * math.sqrt(float(b @ b))) ** 2
    if rs <= stop:
        return x
    p = r.copy()
    for _ in range(maxiter):
        ap = apply_fn(p)
        denom = float(p @ ap)
        if denom <= 0.0:
            break
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        if rs_new <= stop:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def _admm(B: CoefficientOperator, y: np.ndarray, eta: float, params: SolverParams) -> RecoverySolution:
    starts = B.block_starts
    lengths = np.asarray(B.block_dims, dtype=int)
    n, p = B.in_dim, B.out_dim
    ynorm = float(np.linalg.norm(y))

    def solution(vec, status, iters, pr, dr, gap, nu):
        est = from_coeff_vector(B.collection, vec)
        return RecoverySolution(
            estimate=est,
            status=status,
            iterations=iters,
            primal_residual=pr,
            dual_residual=dr,
            duality_gap=gap,
            objective=_norm21_flat(vec, starts),
            dual_vector=nu,
            eta=eta,
            params=params,
        )

    # zero is feasible and has minimal objective
    if ynorm <= eta or ynorm == 0.0:
        return solution(np.zeros(n), "converged", 0, 0.0, 0.0, 0.0, np.zeros(p))

    as_operator = LinearOperator((p, n), matvec=B.matvec, rmatvec=B.rmatvec)

    def least_squares(rhs):
        return lsqr(as_operator, rhs, atol=1e-14, btol=1e-14, conlim=0.0,
                    iter_lim=8 * (n + p))[0]

    # least-squares probe: feasibility check and warm start
    c = least_squares(y)
    bc = B.matvec(c)
    range_dist = float(np.linalg.norm(bc - y))
    if range_dist > eta + 1e-8 * (1.0 + ynorm):
        return solution(
            c, "infeasible", 0, range_dist / (1.0 + ynorm), math.inf, math.inf, np.zeros(p)
        )

    if eta == 0.0 and range_dist <= params.tol_primal * (1.0 + ynorm):
        # direct optimality test of the probe point: find nu with B^T nu
        # equal to the subgradient of the block norm there; certifies every
        # instance whose feasible set is a single point
        norms = np.maximum(_block_norms_flat(c, starts), np.finfo(float).tiny)
        g = c * np.repeat(1.0 / norms, lengths)
        transpose_op = LinearOperator((n, p), matvec=B.rmatvec, rmatvec=B.matvec)
        nu = lsqr(transpose_op, g, atol=1e-14, btol=1e-14, conlim=0.0,
                  iter_lim=8 * (n + p))[0]
        btnu = B.rmatvec(nu)
        dual_feas = float(np.max(_block_norms_flat(btnu, starts)))
        obj = _norm21_flat(c, starts)
        gap = obj - float(y @ nu)
        if abs(gap) <= params.tol_gap and dual_feas <= 1.0 + params.tol_dual:
            pr_rel = range_dist / (1.0 + ynorm)
            return solution(c, "converged", 0, pr_rel, 0.0, gap, nu)

    # constraint slack left by the splitting at convergence: the reported
    # estimate must satisfy the original constraint to its own tolerance,
    # which is far below the splitting residual for small eta
    feas_limit = (
        0.5 * params.tol_primal * (1.0 + ynorm) if eta == 0.0 else eta * (1.0 + 5e-10)
    )

    def polish(vec, bvec):
        r = bvec - y
        rn = float(np.linalg.norm(r))
        if rn <= feas_limit:
            return vec, bvec
        # split off the component of r outside range(B); only the range part
        # can be corrected, and the target radius shrinks accordingly
        rho = math.sqrt(max(0.0, rn * rn - range_dist * range_dist))
        tau = math.sqrt(max(0.0, feas_limit * feas_limit - range_dist * range_dist))
        if rho <= tau or rho == 0.0:
            return vec, bvec
        f = 1.0 - tau / rho
        vec = vec - least_squares(f * r)
        return vec, B.matvec(vec)

    # one penalty per constraint block, balanced independently
    rho_z = rho_w = params.rho
    alpha = _RELAXATION
    z = c.copy()
    w = y.copy() if eta == 0.0 else _ball_project(bc, y, eta)
    u_z = np.zeros(n)
    u_w = np.zeros(p)

    best_score = math.inf
    best = None  # (c, nu, pr_rel, dr_rel)
    last_adapt = 0

    for it in range(1, params.max_iters + 1):
        def normal_op(q):
            return rho_z * q + rho_w * B.rmatvec(B.matvec(q))

        rhs = rho_z * (z - u_z) + rho_w * B.rmatvec(w - u_w)
        c = _cg(normal_op, rhs, c, 1e-11, 2 * n + 20)
        bc = B.matvec(c)

        z_prev, w_prev = z, w
        c_hat = alpha * c + (1.0 - alpha) * z_prev
        bc_hat = alpha * bc + (1.0 - alpha) * w_prev
        z = _shrink_flat(c_hat + u_z, starts, lengths, 1.0 / rho_z)
        w = y if eta == 0.0 else _ball_project(bc_hat + u_w, y, eta)
        u_z = u_z + c_hat - z
        u_w = u_w + bc_hat - w

        rc = c - z
        rw = bc - w
        pr = math.sqrt(float(rc @ rc) + float(rw @ rw))
        dz = z_prev - z
        dw = None if eta == 0.0 else w_prev - w
        # for the equality constraint w stays pinned at y, so its term drops
        dual_vec = rho_z * dz if dw is None else rho_z * dz + rho_w * B.rmatvec(dw)
        dr = float(np.linalg.norm(dual_vec))

        btuw = B.rmatvec(u_w)
        pr_scale = 1.0 + max(
            math.sqrt(float(c @ c) + float(bc @ bc)),
            math.sqrt(float(z @ z) + float(w @ w)),
        )
        dr_scale = 1.0 + float(np.linalg.norm(rho_z * u_z + rho_w * btuw))
        pr_rel = pr / pr_scale
        dr_rel = dr / dr_scale

        score = max(pr_rel, dr_rel)
        if score < best_score:
            best_score = score
            best = (c.copy(), -rho_w * u_w, pr_rel, dr_rel)

        if pr_rel <= params.tol_primal and dr_rel <= params.tol_dual:
            nu = -rho_w * u_w
            btnu = -rho_w * btuw
            dual_feas = float(np.max(_block_norms_flat(btnu, starts)))
            obj = _norm21_flat(c, starts)
            gap = obj - (float(y @ nu) - eta * float(np.linalg.norm(nu)))
            if gap <= params.tol_gap and dual_feas <= 1.0 + params.tol_dual:
                c, bc = polish(c, bc)
                gap = _norm21_flat(c, starts) - (
                    float(y @ nu) - eta * float(np.linalg.norm(nu))
                )
                return solution(c, "converged", it, pr_rel, dr_rel, gap, nu)

        if params.adapt_rho and it - last_adapt >= _BALANCE_COOLDOWN:
            prz = float(np.linalg.norm(rc))
            prw = float(np.linalg.norm(rw))
            drz = rho_z * float(np.linalg.norm(dz))
            drw = 0.0 if dw is None else rho_w * float(np.linalg.norm(B.rmatvec(dw)))
            adapted = False
            if prz > _BALANCE_RATIO * drz and rho_z < _RHO_MAX:
                rho_z *= _BALANCE_FACTOR
                u_z /= _BALANCE_FACTOR
                adapted = True
            elif drz > _BALANCE_RATIO * prz and rho_z > _RHO_MIN:
                rho_z /= _BALANCE_FACTOR
                u_z *= _BALANCE_FACTOR
                adapted = True
            # the pinned-w block has no dual motion of its own; balance its
            # penalty against the z-block dual instead
            drw_ref = drz if dw is None else drw
            if prw > _BALANCE_RATIO * drw_ref and rho_w < _RHO_MAX:
                rho_w *= _BALANCE_FACTOR
                u_w /= _BALANCE_FACTOR
                adapted = True
            elif dw is not None and drw > _BALANCE_RATIO * prw and rho_w > _RHO_MIN:
                rho_w /= _BALANCE_FACTOR
                u_w *= _BALANCE_FACTOR
                adapted = True
            if adapted:
                last_adapt = it

    c_best, nu, pr_rel, dr_rel = best
    obj = _norm21_flat(c_best, starts)
    gap = obj - (float(y @ nu) - eta * float(np.linalg.norm(nu)))
    return solution(c_best, "max_iters", params.max_iters, pr_rel, dr_rel, gap, nu)


def _ball_project(v: np.ndarray, y: np.ndarray, eta: float) -> np.ndarray:
    diff = v - y
    nrm = float(np.linalg.norm(diff))
    if nrm <= eta:
        return v.copy()
    return y + (eta / nrm) * diff


def solve_equality(B: CoefficientOperator, y: np.ndarray, params: SolverParams | None = None) -> RecoverySolution:
    """Minimize the block norm sum subject to B c = y."""
    y = np.asarray(y, dtype=float)
    if y.shape != (B.out_dim,):
        raise ValueError(f"expected y of length {B.out_dim}, got shape {y.shape}")
    return _admm(B, y, 0.0, params or SolverParams())


def solve_noisy(B: CoefficientOperator, y: np.ndarray, eta: float, params: SolverParams | None = None) -> RecoverySolution:
    """Minimize the block norm sum subject to ||B c - y||_2 <= eta."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    y = np.asarray(y, dtype=float)
    if y.shape != (B.out_dim,):
        raise ValueError(f"expected y of length {B.out_dim}, got shape {y.shape}")
    return _admm(B, y, float(eta), params or SolverParams())


def closed_form_orthogonal(y: np.ndarray, a: np.ndarray, collection: SubspaceCollection) -> BlockSignal:
    """Single-measurement decoder for mutually orthogonal subspaces.

    With orthogonal subspaces and one measurement y = sum_j a_j x_j, each
    block is recovered exactly by projecting: x_j = P_j y / a_j, i.e.
    coefficients c_j = U_j^T y / a_j.
    """
    a = np.asarray(a, dtype=float).ravel()
    y = np.asarray(y, dtype=float)
    if a.shape != (collection.size,):
        raise ValueError(f"expected {collection.size} coefficients, got {a.shape}")
    if y.shape != (collection.ambient_dim,):
        raise ValueError(
            f"expected y of length {collection.ambient_dim}, got {y.shape}"
        )
    if collection.size >= 2 and coherence(collection).lambda_ > 1e-10:
        raise NotOrthogonalError("collection is not mutually orthogonal")
    zero = np.nonzero(a == 0.0)[0]
    if zero.size:
        raise ZeroCoefficientError(int(zero[0]))
    coeffs = tuple((u.T @ y) / aj for u, aj in zip(collection.bases, a))
    return BlockSignal(coeffs, collection)


def oracle_recover_exhaustive(
    B: CoefficientOperator, y: np.ndarray, s: int
) -> tuple[BlockSignal | None, bool]:
    """Exact sparsest-feasible search by support enumeration.

    Scans supports of size 0, 1, ..., s in lexicographic order and solves a
    least-squares problem on each; a support is accepted when its residual is
    at most 1e-8 * (1 + ||y||). The first cardinality level with an accepted
    support is the winner; ties within the level break toward the smaller
    block norm sum. ``unique`` is True when exactly one support at that level
    fits and its column matrix has full rank.
    """
    y = np.asarray(y, dtype=float)
    n = B.collection.size
    k = B.collection.block_dim
    if math.comb(n, min(s, n)) * max(1, (s * k) ** 3) > 10**9:
        raise TooLargeError("support enumeration would exceed the work guard")
    accept_tol = 1e-8 * (1.0 + float(np.linalg.norm(y)))
    for level in range(0, min(s, n) + 1):
        accepted = []
        for supp in combinations(range(n), level):
            m_s = B.support_matrix(supp)
            if level == 0:
                c_s = np.zeros(0)
                resid = float(np.linalg.norm(y))
            else:
                c_s, *_ = np.linalg.lstsq(m_s, y, rcond=None)
                resid = float(np.linalg.norm(m_s @ c_s - y))
            if resid <= accept_tol:
                accepted.append((supp, c_s, m_s))
        if accepted:
            best = None
            best_norm = math.inf
            for supp, c_s, m_s in accepted:
                vec = np.zeros(B.in_dim)
                pos = 0
                for j in supp:
                    sl = B.block_slice(j)
                    vec[sl] = c_s[pos : pos + B.block_dims[j]]
                    pos += B.block_dims[j]
                n21 = _norm21_flat(vec, B.block_starts)
                if n21 < best_norm - 1e-15:
                    best_norm = n21
                    best = (supp, vec, m_s)
            supp, vec, m_s = best
            unique = len(accepted) == 1 and (
                level == 0 or np.linalg.matrix_rank(m_s) == m_s.shape[1]
            )
            return from_coeff_vector(B.collection, vec), unique
    return None, False


@dataclass(frozen=True)
class CertificateReport:
    """Independently recomputed optimality evidence for a solution."""

    primal_violation: float
    dual_feasibility: float
    duality_gap: float
    primal_ok: bool
    dual_ok: bool
    gap_ok: bool

    @property
    def ok(self) -> bool:
        return self.primal_ok and self.dual_ok and self.gap_ok


def certify(solution: RecoverySolution, B: CoefficientOperator, y: np.ndarray) -> CertificateReport:
    """Recompute feasibility, dual feasibility, and the gap from scratch.

    Flags a check when it is violated by more than ten times the solver
    tolerance it was converged under.
    """
    y = np.asarray(y, dtype=float)
    params = solution.params
    vec = np.concatenate(solution.estimate.coeffs)
    bc = B.matvec(vec)
    violation = max(0.0, float(np.linalg.norm(bc - y)) - solution.eta)
    nu = solution.dual_vector
    btnu = B.rmatvec(nu)
    dual_feas = float(np.max(_block_norms_flat(btnu, B.block_starts)))
    obj = _norm21_flat(vec, B.block_starts)
    gap = obj - (float(y @ nu) - solution.eta * float(np.linalg.norm(nu)))
    ynorm = float(np.linalg.norm(y))
    return CertificateReport(
        primal_violation=violation,
        dual_feasibility=dual_feas,
        duality_gap=gap,
        primal_ok=violation <= 10.0 * params.tol_primal * (1.0 + ynorm),
        dual_ok=dual_feas <= 1.0 + 10.0 * params.tol_dual,
        gap_ok=gap <= 10.0 * params.tol_gap,
    )
