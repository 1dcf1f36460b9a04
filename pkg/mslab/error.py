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
Relative L2, L-infinity and energy errors against a fine reference solve.

Method solutions are prolonged to the reference mesh element by element
(a broken P1 field), so nonconforming multiscale bases and the jump across
Gamma are measured as they are.
"""

import logging
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import fem
from .coupling import CombinedSolution, MsfemSolution
from .exceptions import MeshError
from .fem import FieldSolution
from .mesh import barycentric

__all__ = [
    "ErrorReport",
    "Prolongation",
    "prolong",
    "norms",
    "relative",
    "evaluate_p1",
]

logger = logging.getLogger("mslab")

OMEGA1 = "omega1"
OMEGA2 = "omega2"


@dataclass(frozen=True)
class ErrorReport:
    """
    Errors of one method against the reference solution.

    Attributes
    ----------
    rel_l2, rel_linf, rel_energy : float
    abs_l2, abs_linf, abs_energy : float
    ref_l2, ref_linf, ref_energy : float
        Norms of the reference solution.
    metadata : dict
        Method, mesh sizes, epsilon, penalty parameters, seed.
    """
    rel_l2: float
    rel_linf: float
    rel_energy: float
    abs_l2: float
    abs_linf: float
    abs_energy: float
    ref_l2: float
    ref_linf: float
    ref_energy: float
    metadata: dict = dataclass_field(default_factory=dict)


class Prolongation():
    """
    A method's solution on the reference mesh.

    Attributes
    ----------
    broken : ndarray, shape (n_elements, 3)
        Vertex values per reference element, taken from the piece of the
        method that hosts the element.
    nodal : ndarray, shape (n_nodes,)
        Nodal collapse; nodes on Gamma take the value of the preferred side.
    """

    def __init__(self, broken, nodal):
        self.broken = broken
        self.nodal = nodal


def evaluate_p1(mesh, values, points, elements=None):
    """
    Evaluate a P1 function of a lattice mesh at points.

    Parameters
    ----------
    mesh : LatticeMesh
    values : ndarray, shape (n_nodes,)
    points : ndarray, shape (m, 2)
    elements : ndarray of int, optional
        Host elements; located from the points when omitted.
    """
    points = np.asarray(points, dtype=float)
    if elements is None:
        elements = mesh.locate(points)
    if np.any(elements < 0):
        raise MeshError("points outside the meshed region")
    weights = barycentric(mesh.triangles(elements), points)
    return np.einsum("mk,mk->m", weights, np.asarray(values)[mesh.elements[elements]])


def _check_nesting(reference, n):
    if reference.n % n != 0:
        raise MeshError("reference mesh 1/%d is not nested in mesh 1/%d" % (reference.n, n))


def _coarse_pieces(reference, coarse, bases, coarse_values, ref_elements, broken):
    """Fill `broken` on `ref_elements` from the multiscale bases."""
    centers = reference.barycenters()[ref_elements]
    hosts = coarse.locate(centers)
    triangles = reference.triangles(ref_elements)
    for element in np.unique(hosts):
        rows = np.nonzero(hosts == element)[0]
        basis = bases[int(element)]
        _check_nesting(reference, coarse.n * basis.n_sub)
        local = basis.combine(coarse_values[coarse.elements[element]])
        points = triangles[rows].reshape(-1, 2)
        broken[ref_elements[rows]] = basis.sub_mesh.interpolate(local, points).reshape(-1, 3)


def _collapse(reference, broken, preferred):
    nodal = np.zeros(reference.n_nodes)
    others = ~preferred
    nodal[reference.elements[others]] = broken[others]
    nodal[reference.elements[preferred]] = broken[preferred]
    return nodal


def prolong(solution, reference, gamma_side=OMEGA2):
    """
    Prolong a solution onto the reference mesh.

    Parameters
    ----------
    solution : FieldSolution, MsfemSolution or CombinedSolution
    reference : LatticeMesh
        Full mesh of the unit square nested in every mesh of the solution.
    gamma_side : {"omega2", "omega1"}
        Side whose value nodes on Gamma take in the nodal collapse.

    Returns
    -------
    Prolongation

    Raises
    ------
    MeshError
        If the reference mesh is not nested in the solution's meshes.
    """
    if gamma_side not in (OMEGA1, OMEGA2):
        raise ValueError("gamma_side must be %r or %r" % (OMEGA1, OMEGA2))
    n_el = reference.n_elements
    broken = np.empty((n_el, 3))

    if isinstance(solution, FieldSolution):
        mesh = solution.mesh
        if mesh is reference:
            broken[:] = solution.values[reference.elements]
            return Prolongation(broken, np.array(solution.values, dtype=float))
        _check_nesting(reference, mesh.n)
        hosts = mesh.locate(reference.barycenters())
        points = reference.triangles().reshape(-1, 2)
        broken[:] = evaluate_p1(mesh, solution.values, points,
                                np.repeat(hosts, 3)).reshape(-1, 3)
        return Prolongation(broken, _collapse(reference, broken, np.ones(n_el, dtype=bool)))

    if isinstance(solution, MsfemSolution):
        everything = np.arange(n_el)
        _coarse_pieces(reference, solution.coarse, solution.bases, solution.coarse_values,
                       everything, broken)
        return Prolongation(broken, _collapse(reference, broken, np.ones(n_el, dtype=bool)))

    if isinstance(solution, CombinedSolution):
        fine, coarse, split = solution.fine, solution.coarse, solution.split
        _check_nesting(reference, fine.n)
        centers = reference.barycenters()
        cells = np.clip(np.floor(centers * coarse.n).astype(np.int64), 0, coarse.n - 1)
        in_omega1 = split.omega1_cells[cells[:, 0], cells[:, 1]]

        fine_elements = np.nonzero(in_omega1)[0]
        hosts = fine.locate(centers[fine_elements])
        points = reference.triangles(fine_elements).reshape(-1, 2)
        broken[fine_elements] = evaluate_p1(fine, solution.fine_values, points,
                                            np.repeat(hosts, 3)).reshape(-1, 3)

        _coarse_pieces(reference, coarse, solution.bases, solution.coarse_values,
                       np.nonzero(~in_omega1)[0], broken)
        preferred = ~in_omega1 if gamma_side == OMEGA2 else in_omega1
        return Prolongation(broken, _collapse(reference, broken, preferred))

    raise TypeError("cannot prolong %s" % type(solution).__name__)


def _element_norms(reference, broken, field, quad):
    """Squared L2 and energy contributions of every element."""
    triangles = reference.triangles()
    areas, _ = fem.element_geometry(triangles)
    bary, weights = fem.QUADRATURE[quad]
    l2 = areas * ((broken @ bary.T) ** 2 @ weights)
    gradients = fem.element_gradients(triangles, broken)
    points, _, _ = fem.quadrature_points(triangles, quad)
    mean_a = field(points) @ weights
    energy = areas * mean_a * np.einsum("md,md->m", gradients, gradients)
    return l2, energy


def relative(error, reference_norm):
    """
    ``error / reference_norm``, 0 when both vanish.

    Raises
    ------
    ValueError
        If the reference norm is zero but the error is not.
    """
    if reference_norm == 0.0:
        if error == 0.0:
            return 0.0
        raise ValueError("zero reference norm with nonzero error %.3e" % error)
    return error / reference_norm


def norms(values, reference, field, quad=3, metadata=None):
    """
    Errors of a prolonged solution against the reference solution.

    Parameters
    ----------
    values : Prolongation or ndarray
        Nodal values on the reference mesh, or a `Prolongation`.
    reference : FieldSolution
        Reference solution; its mesh is the reference mesh.
    field : CoefficientField
        Energy weight.
    quad : int
        Quadrature for the L2 and energy integrals, 3 by default.
    metadata : dict, optional

    Returns
    -------
    ErrorReport
    """
    mesh = reference.mesh
    if not isinstance(values, Prolongation):
        nodal = np.asarray(values, dtype=float)
        if nodal.shape != (mesh.n_nodes,):
            raise MeshError("nodal values do not match the reference mesh")
        values = Prolongation(nodal[mesh.elements], nodal)
    exact = reference.values[mesh.elements]

    l2, energy = _element_norms(mesh, values.broken - exact, field, quad)
    ref_l2, ref_energy = _element_norms(mesh, exact, field, quad)
    abs_l2 = float(np.sqrt(l2.sum()))
    abs_energy = float(np.sqrt(energy.sum()))
    abs_linf = float(np.abs(values.nodal - reference.values).max())
    ref_l2 = float(np.sqrt(ref_l2.sum()))
    ref_energy = float(np.sqrt(ref_energy.sum()))
    ref_linf = float(np.abs(reference.values).max())

    report = ErrorReport(
        rel_l2=relative(abs_l2, ref_l2),
        rel_linf=relative(abs_linf, ref_linf),
        rel_energy=relative(abs_energy, ref_energy),
        abs_l2=abs_l2, abs_linf=abs_linf, abs_energy=abs_energy,
        ref_l2=ref_l2, ref_linf=ref_linf, ref_energy=ref_energy,
        metadata=dict(metadata or {}))
    logger.info("%s: rel L2 %.4e, rel Linf %.4e, rel energy %.4e" % (
        report.metadata.get("method", "solution"), report.rel_l2, report.rel_linf,
        report.rel_energy))
    return report
