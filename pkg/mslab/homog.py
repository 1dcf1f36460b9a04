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
Periodic homogenization: cell problems, effective tensor, homogenized
solve and first-order expansion.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .coeff import Constant
from .error import evaluate_p1
from .fem import FieldSolution
from .linalg import SolverSettings
from .mesh import build_square_mesh

__all__ = [
    "CellSolution",
    "EffectiveTensor",
    "solve_cell",
    "effective_tensor",
    "homogenized_solve",
    "recover_gradients",
    "first_order_expansion",
]

logger = logging.getLogger("mslab")

MIN_CELL_RESOLUTION = 16


def _periodic_map(mesh):
    """Lattice node to periodic DOF ``(j mod n) * n + (i mod n)``."""
    n = mesh.n
    i, j = mesh.node_lattice[:, 0] % n, mesh.node_lattice[:, 1] % n
    return j * n + i


class CellSolution():
    """
    Periodic correctors chi^1, chi^2 on the unit cell.

    Attributes
    ----------
    mesh : LatticeMesh
        Structured mesh of the unit cell; opposite boundary nodes share DOFs.
    chi : ndarray, shape (n**2, 2)
        Corrector values per periodic DOF, zero mean.
    dof_of_node : ndarray of int
        Mesh node to periodic DOF.
    report : SolveReport
    """

    def __init__(self, mesh, chi, dof_of_node, report=None):
        self.mesh = mesh
        self.chi = chi
        self.dof_of_node = dof_of_node
        self.report = report

    @property
    def resolution(self):
        return self.mesh.n

    def nodal(self):
        """Corrector values at every mesh node, shape ``(n_nodes, 2)``."""
        return self.chi[self.dof_of_node]

    def gradients(self):
        """Element gradients, ``grads[e, j, i]`` is ``d chi^j / d y_i``."""
        values = self.nodal()[self.mesh.elements]
        return fem.element_gradients(self.mesh.triangles(), values)

    def mean(self):
        """Cell averages of chi^1 and chi^2."""
        areas = self.mesh.areas()
        values = self.nodal()[self.mesh.elements].mean(axis=1)
        return areas @ values

    def evaluate(self, points):
        """Values of chi at arbitrary points, wrapped into the unit cell."""
        points = np.mod(np.asarray(points, dtype=float).reshape(-1, 2), 1.0)
        nodal = self.nodal()
        return np.column_stack([evaluate_p1(self.mesh, nodal[:, j], points) for j in range(2)])


@dataclass(frozen=True)
class EffectiveTensor:
    """
    Homogenized coefficient.

    Attributes
    ----------
    matrix : ndarray, shape (2, 2)
        Symmetrized tensor.
    asymmetry : float
        ``|a*_12 - a*_21|`` before symmetrization.
    """
    matrix: np.ndarray
    asymmetry: float

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)


def solve_cell(field, resolution=128, settings=None, quad=3):
    """
    Solve the two periodic cell problems
    ``-div(a grad chi^j) = div(a e_j)`` on the unit cell.

    Parameters
    ----------
    field : CoefficientField
        The coefficient on the unit cell (use ``field.cell_field()``).
    resolution : int
        Cells per side, at least 16.
    settings : SolverSettings, optional
    quad : int

    Returns
    -------
    CellSolution
        Zero-mean correctors.
    """
    if resolution < MIN_CELL_RESOLUTION:
        raise ValueError("cell resolution must be at least %d, got %s"
                         % (MIN_CELL_RESOLUTION, resolution))
    settings = settings or SolverSettings()
    mesh = build_square_mesh(resolution)
    dof_of_node = _periodic_map(mesh)
    n_dofs = resolution * resolution
    projection = sp.csr_matrix((np.ones(mesh.n_nodes), (np.arange(mesh.n_nodes), dof_of_node)),
                               shape=(mesh.n_nodes, n_dofs))

    triangles = mesh.triangles()
    areas, gradients = fem.element_geometry(triangles)
    points, _, weights = fem.quadrature_points(triangles, quad)
    mean_a = field(points) @ weights
    stiffness = fem.assemble_stiffness(mesh, field, quad)
    periodic = (projection.T @ stiffness @ projection).tocsr()

    # -int a e_j . grad(phi)
    local = -(areas * mean_a)[:, None, None] * gradients
    rhs = np.column_stack([
        projection.T @ np.bincount(mesh.elements.ravel(), weights=local[:, :, j].ravel(),
                                   minlength=mesh.n_nodes)
        for j in range(2)])

    # pin DOF 0, then shift to zero mean
    system = fem.apply_dirichlet(periodic, rhs, np.arange(n_dofs) == 0)
    chi, report = fem.solve_system(system, settings, label="cell problem")
    chi = chi - chi.mean(axis=0)
    cell = CellSolution(mesh, chi, dof_of_node, report)
    logger.info("cell problems solved at resolution %d, mean %s" % (
        resolution, np.array2string(cell.mean(), precision=3)))
    return cell


def effective_tensor(field, cell, quad=3):
    """
    ``a*_ij = int_Y a (delta_ij + d chi^j / d y_i)``, symmetrized.

    Parameters
    ----------
    field : CoefficientField
        The same cell coefficient `cell` was solved with.
    cell : CellSolution

    Returns
    -------
    EffectiveTensor
    """
    mesh = cell.mesh
    triangles = mesh.triangles()
    areas, _ = fem.element_geometry(triangles)
    points, _, weights = fem.quadrature_points(triangles, quad)
    mean_a = field(points) @ weights
    grads = cell.gradients()
    raw = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            raw[i, j] = (areas * mean_a) @ (float(i == j) + grads[:, j, i])
    asymmetry = abs(raw[0, 1] - raw[1, 0])
    tensor = EffectiveTensor(0.5 * (raw + raw.T), float(asymmetry))
    logger.info("effective tensor [[%.6f, %.6f], [%.6f, %.6f]], asymmetry %.2e" % (
        tensor.matrix[0, 0], tensor.matrix[0, 1], tensor.matrix[1, 0], tensor.matrix[1, 1],
        asymmetry))
    return tensor


def homogenized_solve(tensor, f, mesh, settings=None, quad=3):
    """
    Solve ``-div(a* grad u0) = f`` with zero boundary values.

    Parameters
    ----------
    tensor : EffectiveTensor or array_like, shape (2, 2)
    f : float or callable
    mesh : LatticeMesh
        Full mesh of the unit square.

    Returns
    -------
    FieldSolution
    """
    matrix = tensor.matrix if isinstance(tensor, EffectiveTensor) else np.asarray(tensor)
    stiffness = fem.assemble_stiffness(mesh, Constant(1.0), quad, tensor=matrix)
    rhs = fem.assemble_load(mesh, f, quad)
    system = fem.apply_dirichlet(stiffness, rhs, mesh.boundary_flags)
    values, report = fem.solve_system(system, settings, label="homogenized")
    return FieldSolution(mesh, values, report)


def recover_gradients(mesh, values):
    """Nodal gradients by area-weighted averaging of element gradients."""
    triangles = mesh.triangles()
    areas, _ = fem.element_geometry(triangles)
    element_grads = fem.element_gradients(triangles, np.asarray(values)[mesh.elements])
    weighted = np.zeros((mesh.n_nodes, 2))
    total = np.bincount(mesh.elements.ravel(), weights=np.repeat(areas, 3),
                        minlength=mesh.n_nodes)
    for d in range(2):
        weighted[:, d] = np.bincount(mesh.elements.ravel(),
                                     weights=np.repeat(areas * element_grads[:, d], 3),
                                     minlength=mesh.n_nodes)
    return weighted / total[:, None]


def first_order_expansion(u0, cell, epsilon, target=None):
    """
    ``u1 = u0 + eps chi^j(x / eps) d u0 / d x_j`` at nodes.

    Parameters
    ----------
    u0 : FieldSolution
    cell : CellSolution
    epsilon : float
    target : LatticeMesh, optional
        Nested finer mesh to evaluate on; u0 and its recovered gradient are
        interpolated there. Defaults to ``u0.mesh``.

    Returns
    -------
    ndarray
        Values at the nodes of the target mesh.
    """
    mesh = u0.mesh
    gradients = recover_gradients(mesh, u0.values)
    if target is None or target is mesh:
        points = mesh.nodes
        values = np.asarray(u0.values, dtype=float)
    else:
        points = target.nodes
        values = evaluate_p1(mesh, u0.values, points)
        gradients = np.column_stack([evaluate_p1(mesh, gradients[:, d], points)
                                     for d in range(2)])
    chi = cell.evaluate(points / epsilon)
    return values + epsilon * np.einsum("mj,mj->m", chi, gradients)
