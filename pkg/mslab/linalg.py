# Copyright (c) 2018-2019, The Linux Foundation. All rights reserved.
#
# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions are
# met:
#    * Redistributions of source code must retain the above copyright
#      notice, this list of conditions and the following disclaimer.
#    * Redistributions in binary form must reproduce the above
#      copyright notice, this list of conditions and the following
#      disclaimer in the documentation and/or other materials provided
#      with the distribution.
#    * Neither the name of The Linux Foundation nor the names of its
#      contributors may be used to endorse or promote products derived
#      from this software without specific prior written permission.
#
# THIS SOFTWARE IS PROVIDED "AS IS" AND ANY EXPRESS OR IMPLIED
# WARRANTIES, INCLUDING, BUT NOT LIMITED TO, THE IMPLIED WARRANTIES OF
# MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NON-INFRINGEMENT
# ARE DISCLAIMED.  IN NO EVENT SHALL THE COPYRIGHT OWNER OR CONTRIBUTORS
# BE LIABLE FOR ANY DIRECT, INDIRECT, INCIDENTAL, SPECIAL, EXEMPLARY, OR
# CONSEQUENTIAL DAMAGES (INCLUDING, BUT NOT LIMITED TO, PROCUREMENT OF
# SUBSTITUTE GOODS OR SERVICES; LOSS OF USE, DATA, OR PROFITS; OR
# BUSINESS INTERRUPTION) HOWEVER CAUSED AND ON ANY THEORY OF LIABILITY,
# WHETHER IN CONTRACT, STRICT LIABILITY, OR TORT (INCLUDING NEGLIGENCE
# OR OTHERWISE) ARISING IN ANY WAY OUT OF THE USE OF THIS SOFTWARE, EVEN
# IF ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.

"""
Sparse linear algebra used by every solver in the package.

Matrices are `scipy.sparse.csr_matrix` instances built from coordinate
triplets; the Krylov solvers are scipy's, wrapped so that every solve
returns a `SolveReport` and non-convergence is an explicit decision of the
caller.
"""

import dataclasses
import logging
import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import BreakdownError, SingularMatrixError, SolverError

logger = logging.getLogger("mslab")

DENSE_MAX = 64
PIVOT_TOL = 1e-14
PRECONDITIONERS = ("none", "jacobi")
SOLVER_KINDS = ("iterative", "direct")
FALLBACKS = ("direct", "none")
# scipy's recursive residual can drift slightly above the true one
MAX_RESTARTS = 3


@dataclass(frozen=True)
class SolveReport:
    """
    Diagnostics of one linear solve.

    Attributes
    ----------
    iterations : int
    residual : float
        Final relative residual ``||b - Ax|| / ||b||``.
    converged : bool
        True only if ``residual <= rtol``.
    wall_time : float
        Seconds.
    method : str
    breakdown : bool
        BiCGStab breakdown (as opposed to running out of iterations).
    """
    iterations: int
    residual: float
    converged: bool
    wall_time: float
    method: str = "cg"
    breakdown: bool = False


@dataclass(frozen=True)
class SolverSettings:
    """
    Linear solver configuration shared by global and local solves.

    Attributes
    ----------
    rtol : float
        Relative residual tolerance of iterative solves.
    maxit : int
        Iteration cap of iterative solves.
    preconditioner : {"jacobi", "none"}
    kind : {"iterative", "direct"}
        Solver used for global systems.
    local : {"direct", "iterative"}
        Solver used for the small local basis problems.
    workers : int
        Threads used for basis construction.
    fallback : {"direct", "none"}
        What to do when an iterative solve stops short of `rtol`:
        refactor with the sparse direct solver, or raise.
    """
    rtol: float = 1e-10
    maxit: int = 50000
    preconditioner: str = "jacobi"
    kind: str = "iterative"
    local: str = "direct"
    workers: int = 1
    fallback: str = "direct"

    def for_local(self):
        return dataclasses.replace(self, kind=self.local)


def from_arrays(n, m, rows, cols, values):
    """
    Build an ``n x m`` CSR matrix from coordinate arrays, summing duplicates.

    Raises
    ------
    IndexError
        If any index is out of range.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if not (rows.size == cols.size == values.size):
        raise ValueError("triplet arrays differ in length")
    if rows.size:
        if rows.min() < 0 or rows.max() >= n:
            raise IndexError("row index out of range [0, %d)" % n)
        if cols.min() < 0 or cols.max() >= m:
            raise IndexError("column index out of range [0, %d)" % m)
    matrix = sp.coo_matrix((values, (rows, cols)), shape=(n, m)).tocsr()
    matrix.sum_duplicates()
    return matrix


def from_triplets(n, m, triplets):
    """
    Build an ``n x m`` CSR matrix from ``(i, j, value)`` triplets.

    Duplicates are summed; structural zeros are kept.
    """
    triplets = list(triplets)
    if not triplets:
        return sp.csr_matrix((n, m))
    rows, cols, values = zip(*triplets)
    return from_arrays(n, m, rows, cols, values)


def relative_asymmetry(matrix):
    """Return ``max|A - A^T| / max|A|`` (0 for the zero matrix)."""
    matrix = sp.csr_matrix(matrix)
    scale = abs(matrix).max() if matrix.nnz else 0.0
    if scale == 0.0:
        return 0.0
    defect = matrix - matrix.T
    return (abs(defect).max() if defect.nnz else 0.0) / scale


def symmetry_defect(matrix, pairs=100, seed=0):
    """
    Probe transpose symmetry with random vector pairs.

    Returns
    -------
    float
        ``max |<Ax, y> - <x, Ay>| / (||A||_F ||x|| ||y||)`` over the pairs.
    """
    rng = np.random.default_rng(seed)
    n = matrix.shape[0]
    norm = spla.norm(matrix)
    if norm == 0.0:
        return 0.0
    worst = 0.0
    for _ in range(pairs):
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        gap = abs((matrix @ x) @ y - x @ (matrix @ y))
        worst = max(worst, gap / (norm * np.linalg.norm(x) * np.linalg.norm(y)))
    return worst


def _preconditioner(matrix, preconditioner):
    if preconditioner in (None, "none"):
        return None
    if preconditioner != "jacobi":
        raise ValueError("preconditioner must be in %s" % (PRECONDITIONERS,))
    diagonal = matrix.diagonal()
    inverse = np.ones_like(diagonal)
    nonzero = diagonal != 0.0
    inverse[nonzero] = 1.0 / diagonal[nonzero]
    return sp.diags(inverse)


def _krylov(routine, name, matrix, rhs, rtol, maxit, preconditioner, x0, callback):
    matrix = sp.csr_matrix(matrix)
    rhs = np.asarray(rhs, dtype=float)
    start = time.perf_counter()
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), SolveReport(
            0, 0.0, True, time.perf_counter() - start, name)

    precond = _preconditioner(matrix, preconditioner)
    iterations = [0]

    def count(xk):
        iterations[0] += 1
        if callback is not None:
            callback(xk)

    x = None if x0 is None else np.asarray(x0, dtype=float)
    info = 0
    residual = np.inf
    for _ in range(MAX_RESTARTS + 1):
        remaining = maxit - iterations[0]
        if remaining <= 0:
            break
        x, info = routine(matrix, rhs, x0=x, rtol=rtol, atol=0.0,
                          maxiter=remaining, M=precond, callback=count)
        residual = np.linalg.norm(rhs - matrix @ x) / rhs_norm
        if residual <= rtol or info != 0:
            break

    report = SolveReport(
        iterations=iterations[0],
        residual=float(residual),
        converged=bool(residual <= rtol),
        wall_time=time.perf_counter() - start,
        method=name,
        breakdown=bool(info < 0),
    )
    return x, report


def cg(matrix, rhs, rtol=1e-10, maxit=50000, preconditioner="jacobi",
       x0=None, callback=None):
    """
    Preconditioned conjugate gradients.

    Parameters
    ----------
    matrix : sparse matrix
        Symmetric positive definite (asserted by the caller).
    rhs : ndarray
    rtol : float
    maxit : int
    preconditioner : {"jacobi", "none"}
    x0 : ndarray, optional
    callback : callable, optional
        Called with the iterate after every iteration.

    Returns
    -------
    x : ndarray
    report : SolveReport
        ``converged`` is False when `maxit` is exhausted; the caller decides.
    """
    return _krylov(spla.cg, "cg", matrix, rhs, rtol, maxit,
                   preconditioner, x0, callback)


def bicgstab(matrix, rhs, rtol=1e-10, maxit=50000, preconditioner="jacobi",
             x0=None, callback=None):
    """
    Preconditioned BiCGStab for nonsymmetric systems.

    Same contract as `cg`; ``report.breakdown`` flags a breakdown of the
    recurrence separately from stagnation.
    """
    return _krylov(spla.bicgstab, "bicgstab", matrix, rhs, rtol, maxit,
                   preconditioner, x0, callback)


def direct_solve(matrix, rhs):
    """Sparse direct solve; `rhs` may hold several right-hand sides as columns."""
    rhs = np.asarray(rhs, dtype=float)
    if matrix.shape[0] == 0:
        return np.zeros_like(rhs)
    solution = spla.spsolve(sp.csc_matrix(matrix), rhs)
    return np.asarray(solution).reshape(rhs.shape)


def dense_solve(matrix, rhs):
    """
    Dense LU solve with partial pivoting for small systems.

    Raises
    ------
    ValueError
        If the system is larger than `DENSE_MAX`.
    SingularMatrixError
        If a pivot falls below `PIVOT_TOL`.
    """
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = matrix.shape[0]
    if matrix.shape != (n, n) or n > DENSE_MAX:
        raise ValueError("dense_solve expects a square system of size <= %d" % DENSE_MAX)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix)
    smallest = np.min(np.abs(np.diag(lu)))
    if smallest < PIVOT_TOL:
        raise SingularMatrixError("pivot %.3e below %.0e" % (smallest, PIVOT_TOL))
    return scipy.linalg.lu_solve((lu, piv), rhs)


def solve(matrix, rhs, settings=None, symmetric=True, label="system"):
    """
    Solve ``matrix @ x = rhs`` according to `settings`.

    Symmetric systems use CG, nonsymmetric ones BiCGStab, unless
    ``settings.kind == "direct"``. A stalled Krylov solve is finished by the
    sparse direct solver unless ``settings.fallback == "none"``. A 2D `rhs`
    is solved column by column.

    Returns
    -------
    x : ndarray
    report : SolveReport

    Raises
    ------
    SolverError
        If the iterative solve does not reach ``settings.rtol`` and
        ``settings.fallback == "none"``.
    BreakdownError
        If BiCGStab breaks down.
    """
    settings = settings or SolverSettings()
    rhs = np.asarray(rhs, dtype=float)
    if settings.kind == "direct":
        start = time.perf_counter()
        x = direct_solve(matrix, rhs)
        residual = _relative_residual(matrix, x, rhs)
        report = SolveReport(1, residual, True, time.perf_counter() - start, "direct")
        logger.debug("%s: direct solve, n=%d, residual=%.2e" % (label, matrix.shape[0], residual))
        return x, report

    if rhs.ndim == 2:
        columns = []
        reports = []
        for k in range(rhs.shape[1]):
            x, report = solve(matrix, rhs[:, k], settings, symmetric, label)
            columns.append(x)
            reports.append(report)
        worst = max(reports, key=lambda r: r.residual)
        report = dataclasses.replace(
            worst,
            iterations=sum(r.iterations for r in reports),
            wall_time=sum(r.wall_time for r in reports))
        return np.column_stack(columns), report

    routine = cg if symmetric else bicgstab
    x, report = routine(matrix, rhs, rtol=settings.rtol, maxit=settings.maxit,
                        preconditioner=settings.preconditioner)
    if report.breakdown:
        raise BreakdownError("%s: %s breakdown" % (label, report.method), report)
    if not report.converged and settings.fallback == "direct":
        logger.warning("%s: %s stalled at residual %.2e after %d iterations, "
                       "switching to the direct solver" % (
                           label, report.method, report.residual, report.iterations))
        return _direct_after(matrix, rhs, report, label)
    if not report.converged:
        raise SolverError("%s: %s did not converge" % (label, report.method), report)
    logger.debug("%s: %s converged in %d iterations, residual=%.2e" % (
        label, report.method, report.iterations, report.residual))
    return x, report


def _direct_after(matrix, rhs, report, label):
    start = time.perf_counter()
    x = direct_solve(matrix, rhs)
    residual = _relative_residual(matrix, x, rhs)
    logger.debug("%s: direct solve, n=%d, residual=%.2e" % (label, matrix.shape[0], residual))
    return x, SolveReport(report.iterations, residual, True,
                          report.wall_time + time.perf_counter() - start,
                          "%s+direct" % report.method)


def _relative_residual(matrix, x, rhs):
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return 0.0
    return float(np.linalg.norm(rhs - matrix @ x) / rhs_norm)


def lanczos_ritz(matrix, steps=50, seed=0):
    """
    Ritz values of a symmetric matrix after `steps` Lanczos steps.

    Full reorthogonalization is used; the smallest returned value is an upper
    bound of the smallest eigenvalue.

    Returns
    -------
    ndarray
        Ritz values in ascending order.
    """
    n = matrix.shape[0]
    steps = min(steps, n)
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    basis = np.zeros((steps, n))
    alpha = []
    beta = []
    for j in range(steps):
        basis[j] = q
        w = matrix @ q
        a = q @ w
        w = w - a * q
        if j > 0:
            w = w - beta[-1] * basis[j - 1]
        w = w - basis[:j + 1].T @ (basis[:j + 1] @ w)
        alpha.append(a)
        b = np.linalg.norm(w)
        if j == steps - 1 or b <= 1e-12 * abs(a):
            break
        beta.append(b)
        q = w / b
    return scipy.linalg.eigh_tridiagonal(
        np.array(alpha), np.array(beta[:len(alpha) - 1]), eigvals_only=True)


def save_coo(matrix, file_path):
    """Write a matrix as ``i j value`` lines."""
    coo = sp.coo_matrix(matrix)
    with open(file_path, "w", encoding="utf-8") as f:
        f.write("%d %d\n" % coo.shape)
        for i, j, v in zip(coo.row, coo.col, coo.data):
            f.write("%d %d %r\n" % (i, j, float(v)))


def load_coo(file_path):
    """Read a matrix written by `save_coo`."""
    with open(file_path, encoding="utf-8") as f:
        n, m = (int(tok) for tok in f.readline().split())
        triplets = []
        for line in f:
            if line.strip():
                i, j, v = line.split()
                triplets.append((int(i), int(j), float(v)))
    return from_triplets(n, m, triplets)
