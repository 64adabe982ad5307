"""Assembly, conjugate-gradient solvers, and error norms.

The stiffness matrix is assembled vectorized over elements with tensor-Gauss
quadrature on the reference square.  The ER families give a plain SPD system;
the R / RPlus families carry one relation row per element and are solved by
conjugate gradients projected onto the constraint null space.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .legendre1d import gauss_rule
from .space import FeFunction, GlobalSpace

__all__ = [
    "SparseSystem",
    "SolveReport",
    "SolverError",
    "element_stiffness",
    "assemble",
    "solve_unconstrained",
    "solve_constrained",
    "error_norms",
]


class SolverError(Exception):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


@dataclass
class SolveReport:
    iterations: int = 0
    relative_residual: float = np.inf
    constraint_residual: float = 0.0
    seconds: float = 0.0


@dataclass
class SparseSystem:
    """Symmetric sparse system K x = b, optionally restricted to ker(C)."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constraints: sp.csr_matrix | None = None
    rel_tol: float = 1e-13
    max_iter_factor: float = 40.0

    @property
    def n(self) -> int:
        return len(self.rhs)

    def max_iterations(self) -> int:
        return max(100, int(self.max_iter_factor * np.sqrt(self.n)))


def _quad_grid(q: int):
    rule = gauss_rule(q)
    X, Y = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    W = np.outer(rule.weights, rule.weights)
    return X.ravel(), Y.ravel(), W.ravel()


def _geometry_factors(space: GlobalSpace, q: int):
    """Jacobian entries and determinant at the quadrature grid for all
    elements; shapes (ne, nq)."""
    X, Y, W = _quad_grid(q)
    P = space.mesh.corner_array()  # (ne, 4, 2)
    a1, a2, a3, a4 = P[:, 0], P[:, 1], P[:, 2], P[:, 3]
    c1 = (-a1 + a2 + a3 - a4) / 4.0
    c2 = (-a1 - a2 + a3 + a4) / 4.0
    c3 = (a1 - a2 + a3 - a4) / 4.0
    c0 = (a1 + a2 + a3 + a4) / 4.0
    j11 = c1[:, None, 0] + c3[:, None, 0] * Y[None, :]
    j12 = c2[:, None, 0] + c3[:, None, 0] * X[None, :]
    j21 = c1[:, None, 1] + c3[:, None, 1] * Y[None, :]
    j22 = c2[:, None, 1] + c3[:, None, 1] * X[None, :]
    det = j11 * j22 - j12 * j21
    if np.min(det) <= 0.0:
        bad = int(np.argmin(np.min(det, axis=1)))
        raise ValueError(f"nonpositive Jacobian in element {bad}")
    px = c0[:, None, 0] + c1[:, None, 0] * X + c2[:, None, 0] * Y + c3[:, None, 0] * X * Y
    py = c0[:, None, 1] + c1[:, None, 1] * X + c2[:, None, 1] * Y + c3[:, None, 1] * X * Y
    return (X, Y, W), (j11, j12, j21, j22, det), (px, py)


def _stiffness_blocks(space: GlobalSpace, q: int):
    (X, Y, W), (j11, j12, j21, j22, det), _ = _geometry_factors(space, q)
    _, dpx, dpy = space.ref.tabulate(X, Y)  # (nq, nret)
    # physical gradients scaled by det: (J^{-T} grad_hat) * det
    g1 = j22[:, :, None] * dpx[None] - j21[:, :, None] * dpy[None]
    g2 = -j12[:, :, None] * dpx[None] + j11[:, :, None] * dpy[None]
    a = W[None, :] / det
    K = np.einsum("ep,epi,epj->eij", a, g1, g1, optimize=True)
    K += np.einsum("ep,epi,epj->eij", a, g2, g2, optimize=True)
    return K


def element_stiffness(space: GlobalSpace, e: int, quad_order: int | None = None):
    """Local stiffness over the retained dofs of one element."""
    q = quad_order if quad_order is not None else space.m + 3
    if q < space.m + 2:
        raise ValueError("quadrature order too low for the stiffness integrand")
    sub = _stiffness_blocks(space, q)
    return sub[e]


def assemble(space: GlobalSpace, f, quad_order: int | None = None) -> SparseSystem:
    """Assemble stiffness and load over the free dofs; attach the constraint
    rows for the R / RPlus families."""
    q = quad_order if quad_order is not None else space.m + 3
    Kloc = _stiffness_blocks(space, q)
    (X, Y, W), (_, _, _, _, det), (px, py) = _geometry_factors(space, q)
    phi, _, _ = space.ref.tabulate(X, Y)
    fv = np.asarray(f(px, py), dtype=float)
    if fv.shape != px.shape:
        fv = np.broadcast_to(fv, px.shape)
    Floc = np.einsum("ep,pi->ei", fv * det * W[None, :], phi)

    lf, sgn = space.local_free()
    # orientation signs act on both sides of the local blocks
    Kloc = Kloc * sgn[:, :, None] * sgn[:, None, :]
    Floc = Floc * sgn

    rows = np.repeat(lf[:, :, None], lf.shape[1], axis=2)
    cols = np.repeat(lf[:, None, :], lf.shape[1], axis=1)
    keep = (rows >= 0) & (cols >= 0)
    K = sp.coo_matrix(
        (Kloc[keep], (rows[keep], cols[keep])),
        shape=(space.n_free, space.n_free),
    ).tocsr()
    K.sum_duplicates()

    b = np.zeros(space.n_free)
    keepf = lf >= 0
    np.add.at(b, lf[keepf], Floc[keepf])

    return SparseSystem(matrix=K, rhs=b, constraints=space.constraints)


def _pcg(A, b, project, tol, maxiter, diag=None):
    """Preconditioned CG; `project` maps onto the admissible subspace."""
    if diag is None:
        diag = A.diagonal()
    diag = np.where(diag > 0, diag, 1.0)
    x = np.zeros_like(b)
    r = project(b.copy())
    z = project(r / diag)
    p = z.copy()
    rz = float(np.dot(r, z))
    bnorm = float(np.linalg.norm(project(b)))
    if bnorm == 0.0:
        return x, 0, 0.0
    rel = np.linalg.norm(r) / bnorm
    it = 0
    while rel > tol and it < maxiter:
        Ap = project(A @ p)
        alpha = rz / float(np.dot(p, Ap))
        x += alpha * p
        r -= alpha * Ap
        z = project(r / diag)
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        rel = np.linalg.norm(r) / bnorm
    return x, it, rel


def solve_unconstrained(system: SparseSystem):
    """Jacobi-preconditioned CG for the SPD (ER-family) system."""
    if system.constraints is not None and system.constraints.nnz:
        raise ValueError("system carries constraints; use solve_constrained")
    t0 = time.perf_counter()
    x, it, rel = _pcg(
        system.matrix,
        system.rhs,
        lambda v: v,
        system.rel_tol,
        system.max_iterations(),
    )
    true_rel = _true_residual(system, x)
    report = SolveReport(
        iterations=it,
        relative_residual=true_rel,
        seconds=time.perf_counter() - t0,
    )
    if rel > system.rel_tol:
        raise SolverError(f"CG did not converge: residual {rel:.3e}", report)
    return x, report


def _true_residual(system, x) -> float:
    bn = np.linalg.norm(system.rhs)
    if bn == 0.0:
        return 0.0
    return float(np.linalg.norm(system.rhs - system.matrix @ x) / bn)


def solve_constrained(system: SparseSystem):
    """Projected CG on ker(C): directions and residuals are projected with
    p <- p - C~^T (C~ C~^T)^{-1} C~ p, where C~ drops the last (redundant)
    constraint row; the small inner system is solved by a cached sparse
    factorization."""
    C = system.constraints
    if C is None or C.nnz == 0:
        return solve_unconstrained(
            SparseSystem(system.matrix, system.rhs, None, system.rel_tol,
                         system.max_iter_factor)
        )
    t0 = time.perf_counter()
    Ct = C[:-1]  # the last element's row is implied by the others
    S = (Ct @ Ct.T).tocsc()
    lu = spla.splu(S)
    CtT = Ct.T.tocsr()

    def project(v):
        return v - CtT @ lu.solve(Ct @ v)

    x, it, rel = _pcg(
        system.matrix, system.rhs, project, system.rel_tol, system.max_iterations()
    )
    cres = float(np.max(np.abs(C @ x))) if x.size else 0.0
    # residual of the constrained problem: projected true residual
    bn = np.linalg.norm(project(system.rhs))
    true_rel = (
        float(np.linalg.norm(project(system.rhs - system.matrix @ x)) / bn)
        if bn > 0
        else 0.0
    )
    report = SolveReport(
        iterations=it,
        relative_residual=true_rel,
        constraint_residual=cres,
        seconds=time.perf_counter() - t0,
    )
    if rel > system.rel_tol:
        raise SolverError(f"projected CG did not converge: residual {rel:.3e}", report)
    xs = float(np.max(np.abs(x))) if x.size else 0.0
    if cres > 1e-9 * max(xs, 1.0):
        raise SolverError(f"constraint residual too large: {cres:.3e}", report)
    return x, report


def solve(system: SparseSystem):
    if system.constraints is not None and system.constraints.nnz:
        return solve_constrained(system)
    return solve_unconstrained(system)


def error_norms(space: GlobalSpace, coeffs, u_exact, grad_exact,
                quad_order: int | None = None):
    """(L2 error, broken H1 seminorm error) of the FE function vs u_exact."""
    q = quad_order if quad_order is not None else space.m + 4
    if q < space.m + 3:
        raise ValueError("quadrature order too low for the error integrand")
    (X, Y, W), (j11, j12, j21, j22, det), (px, py) = _geometry_factors(space, q)
    phi, dpx, dpy = space.ref.tabulate(X, Y)
    cloc = space.local_values(np.asarray(coeffs, dtype=float))  # (ne, nret)
    vals = cloc @ phi.T  # (ne, nq)
    gxh = cloc @ dpx.T
    gyh = cloc @ dpy.T
    gx = (j22 * gxh - j21 * gyh) / det
    gy = (-j12 * gxh + j11 * gyh) / det
    ue = np.asarray(u_exact(px, py), dtype=float)
    gex, gey = grad_exact(px, py)
    wdet = W[None, :] * det
    l2 = float(np.sqrt(np.sum(wdet * (vals - ue) ** 2)))
    h1 = float(np.sqrt(np.sum(wdet * ((gx - gex) ** 2 + (gy - gey) ** 2))))
    return l2, h1


def broken_h1_norm(space: GlobalSpace, coeffs, quad_order: int | None = None):
    """Broken H1 seminorm of an FE function (no exact solution)."""
    zero = lambda x, y: np.zeros_like(x)
    return error_norms(space, coeffs, zero, lambda x, y: (zero(x, y), zero(x, y)),
                       quad_order)[1]
