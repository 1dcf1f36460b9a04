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
Linear (P1) finite elements on triangle meshes.

Any object with ``nodes`` (n, 2) and ``elements`` (m, 3) arrays is a mesh
here: the lattice meshes of `mslab.mesh` and the sub-meshes of single
triangles alike.
"""

import logging
import time

import numpy as np

from . import linalg
from .linalg import SolverSettings

__all__ = [
    "QUADRATURE",
    "EDGE_GAUSS",
    "AssembledSystem",
    "FieldSolution",
    "quadrature_points",
    "element_geometry",
    "element_gradients",
    "local_stiffness",
    "assemble_stiffness",
    "assemble_load",
    "apply_dirichlet",
    "solve_reference",
    "solve_system",
]

logger = logging.getLogger("mslab")

_A7, _B7, _W7A = 0.0597158717897698, 0.4701420641051151, 0.1323941527885062
_C7, _D7, _W7B = 0.7974269853530873, 0.1012865073234563, 0.1259391805448271

# barycentric points and weights summing to 1 (multiply by the element area)
QUADRATURE = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    3: (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        np.full(3, 1 / 3)),
    7: (np.array([[1 / 3, 1 / 3, 1 / 3],
                  [_A7, _B7, _B7], [_B7, _A7, _B7], [_B7, _B7, _A7],
                  [_C7, _D7, _D7], [_D7, _C7, _D7], [_D7, _D7, _C7]]),
        np.array([0.225, _W7A, _W7A, _W7A, _W7B, _W7B, _W7B])),
}

# 2-point Gauss rule on [0, 1]
EDGE_GAUSS = (np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)]),
              np.array([0.5, 0.5]))


def _rule(order):
    try:
        return QUADRATURE[order]
    except KeyError:
        raise ValueError("quadrature must have 1, 3 or 7 points, got %s" % order)


def quadrature_points(triangles, order=3):
    """
    Physical quadrature points of every triangle.

    Returns
    -------
    points : ndarray, shape (m, q, 2)
    bary : ndarray, shape (q, 3)
    weights : ndarray, shape (q,)
    """
    bary, weights = _rule(order)
    points = np.einsum("qk,mkd->mqd", bary, np.asarray(triangles, dtype=float))
    return points, bary, weights


def element_geometry(triangles):
    """
    Areas and gradients of the barycentric coordinates.

    Returns
    -------
    areas : ndarray, shape (m,)
    gradients : ndarray, shape (m, 3, 2)
        ``gradients[e, k]`` is the gradient of the hat of local vertex k.
    """
    t = np.asarray(triangles, dtype=float)
    x, y = t[..., 0], t[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    gradients = np.empty(t.shape)
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3
        gradients[:, k, 0] = y[:, a] - y[:, b]
        gradients[:, k, 1] = x[:, b] - x[:, a]
    gradients /= det[:, None, None]
    return 0.5 * det, gradients


def element_gradients(triangles, vertex_values):
    """
    Constant gradients of P1 functions per element.

    Parameters
    ----------
    triangles : ndarray, shape (m, 3, 2)
    vertex_values : ndarray, shape (m, 3) or (m, 3, k)

    Returns
    -------
    ndarray, shape (m, 2) or (m, k, 2)
    """
    _, gradients = element_geometry(triangles)
    vertex_values = np.asarray(vertex_values, dtype=float)
    if vertex_values.ndim == 2:
        return np.einsum("mk,mkd->md", vertex_values, gradients)
    return np.einsum("mkf,mkd->mfd", vertex_values, gradients)


def local_stiffness(triangles, field, quad=3, tensor=None):
    """
    Element stiffness matrices ``int_K a grad(phi_i) . T grad(phi_j)``.

    Parameters
    ----------
    triangles : ndarray, shape (m, 3, 2)
    field : CoefficientField
        Sampled at the quadrature points.
    quad : int
        1, 3 or 7 points.
    tensor : array_like, shape (2, 2), optional
        Constant matrix multiplying the coefficient.

    Returns
    -------
    ndarray, shape (m, 3, 3)
    """
    areas, gradients = element_geometry(triangles)
    points, _, weights = quadrature_points(triangles, quad)
    mean_a = field(points) @ weights
    if tensor is None:
        products = np.einsum("mid,mjd->mij", gradients, gradients)
    else:
        products = np.einsum("mid,de,mje->mij", gradients, np.asarray(tensor, dtype=float),
                             gradients)
    return (areas * mean_a)[:, None, None] * products


def _scatter(n, elements, local):
    rows = np.repeat(elements, 3, axis=1)
    cols = np.tile(elements, (1, 3))
    return linalg.from_arrays(n, n, rows, cols, local.reshape(len(elements), 9))


def assemble_stiffness(mesh, field, quad=3, tensor=None):
    """
    Global P1 stiffness matrix over all mesh nodes.

    Returns
    -------
    scipy.sparse.csr_matrix
    """
    local = local_stiffness(mesh.nodes[mesh.elements], field, quad, tensor)
    return _scatter(len(mesh.nodes), mesh.elements, local)


def _source_values(f, points):
    if callable(f):
        return np.asarray(f(points), dtype=float)
    return np.full(points.shape[:-1], float(f))


def assemble_load(mesh, f, quad=3):
    """
    Load vector ``b_i = int f phi_i``.

    Parameters
    ----------
    mesh
    f : float or callable
        Constant source or a vectorized callable of points ``(..., 2)``.
    quad : int
    """
    triangles = mesh.nodes[mesh.elements]
    areas, _ = element_geometry(triangles)
    points, bary, weights = quadrature_points(triangles, quad)
    values = _source_values(f, points)
    local = areas[:, None] * np.einsum("mq,q,qk->mk", values, weights, bary)
    return np.bincount(mesh.elements.ravel(), weights=local.ravel(),
                       minlength=len(mesh.nodes))


class AssembledSystem():
    """
    Linear system on the free nodes after Dirichlet elimination.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
    rhs : ndarray
    dof_map : ndarray of int
        Node to system index, -1 for constrained nodes.
    free : ndarray of int
        Free nodes in system order.
    constrained : ndarray of int
    dirichlet_values : ndarray
        Values of the constrained nodes.
    """

    def __init__(self, matrix, rhs, dof_map, free, constrained, dirichlet_values):
        self.matrix = matrix
        self.rhs = rhs
        self.dof_map = dof_map
        self.free = free
        self.constrained = constrained
        self.dirichlet_values = dirichlet_values

    @property
    def n_dofs(self):
        return len(self.free)

    def expand(self, x):
        """Full nodal vector from a free-node solution."""
        x = np.asarray(x, dtype=float)
        values = np.zeros((len(self.dof_map),) + x.shape[1:])
        values[self.free] = x
        values[self.constrained] = self.dirichlet_values
        return values


def apply_dirichlet(matrix, rhs, flags, values=0.0):
    """
    Eliminate constrained nodes symmetrically.

    Parameters
    ----------
    matrix : sparse matrix, shape (n, n)
    rhs : ndarray, shape (n,) or (n, k)
    flags : ndarray of bool, shape (n,)
        Constrained nodes.
    values : float or ndarray, shape (n_constrained,) or (n_constrained, k)

    Returns
    -------
    AssembledSystem
        Empty (0 x 0) when every node is constrained.
    """
    flags = np.asarray(flags, dtype=bool)
    matrix = matrix.tocsr()
    rhs = np.asarray(rhs, dtype=float)
    free = np.nonzero(~flags)[0]
    constrained = np.nonzero(flags)[0]
    values = np.broadcast_to(np.asarray(values, dtype=float),
                             (len(constrained),) + rhs.shape[1:]).copy()
    dof_map = np.full(len(flags), -1, dtype=np.int64)
    dof_map[free] = np.arange(len(free))

    reduced = matrix[free][:, free]
    coupling = matrix[free][:, constrained]
    reduced_rhs = rhs[free] - coupling @ values
    return AssembledSystem(reduced.tocsr(), reduced_rhs, dof_map, free, constrained, values)


class FieldSolution():
    """
    Nodal P1 solution on a mesh.

    Attributes
    ----------
    mesh
    values : ndarray
        Values at every node, constrained nodes included.
    report : SolveReport or None
    """

    def __init__(self, mesh, values, report=None):
        self.mesh = mesh
        self.values = values
        self.report = report


def solve_system(system, settings=None, symmetric=True, label="system"):
    """Solve an `AssembledSystem` and expand to all nodes."""
    if system.n_dofs == 0:
        return system.expand(np.zeros((0,) + system.rhs.shape[1:])), None
    x, report = linalg.solve(system.matrix, system.rhs, settings, symmetric, label)
    return system.expand(x), report


def solve_reference(mesh, field, f=1.0, settings=None, quad=3):
    """
    P1 Galerkin solution of ``-div(a grad u) = f``, ``u = 0`` on the boundary.

    Parameters
    ----------
    mesh : LatticeMesh
        Full mesh of the unit square.
    field : CoefficientField
    f : float or callable
    settings : SolverSettings, optional
    quad : int

    Returns
    -------
    FieldSolution

    Raises
    ------
    SolverError
        If the linear solve does not converge.
    """
    settings = settings or SolverSettings()
    start = time.perf_counter()
    matrix = assemble_stiffness(mesh, field, quad)
    rhs = assemble_load(mesh, f, quad)
    system = apply_dirichlet(matrix, rhs, mesh.boundary_flags)
    logger.info("reference system: %d unknowns, %d nonzeros" % (
        system.n_dofs, system.matrix.nnz))
    try:
        values, report = solve_system(system, settings, label="reference")
    except Exception as e:
        logger.exception(e)
        raise
    if report is not None:
        logger.info("reference solve: %d iterations, residual %.2e, %.2fs" % (
            report.iterations, report.residual, time.perf_counter() - start))
    return FieldSolution(mesh, values, report)
