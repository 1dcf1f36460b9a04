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
Combined fine FEM / multiscale FEM discretization.

The fine P1 space on the frame Omega_1 and the multiscale space on Omega_2
are glued by interface terms on the fine edges of Gamma::

    - int_e {a grad u . n}[v] - beta int_e [u]{a grad v . n}
    + gamma0 / rho int_e [u][v] + gamma1 rho int_e [a grad u . n][a grad v . n]

with ``[v] = v|Omega_1 - v|Omega_2`` and ``{v}`` the mean of both traces.
The module also drives the pure multiscale variants used for comparison.
"""

import csv
import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem, linalg
from .coeff import Overlay
from .exceptions import GeometryError, MeshError
from .mesh import (barycentric, build_coarse_mesh, build_frame_fine_mesh, build_square_mesh,
                   cells_intersecting, pair_interface, split_domain)
from .msbasis import OVERSAMPLING, STANDARD, BasisCache, assemble_ms_global, build_bases

__all__ = [
    "REFERENCE",
    "MSFEM",
    "MIXED",
    "FE_MSFEM",
    "METHODS",
    "RHO_MODES",
    "PenaltyParams",
    "InterfaceTraces",
    "FeMsfemSystem",
    "CombinedSolution",
    "MsfemSolution",
    "Discretization",
    "build_discretization",
    "trace_data",
    "interface_terms",
    "assemble_interface",
    "assemble_fe_msfem",
    "solve_fe_msfem",
    "solve_msfem",
    "solve_method",
    "dump_interface_terms",
]

logger = logging.getLogger("mslab")

REFERENCE = "reference"
MSFEM = "msfem"
MIXED = "mixed"
FE_MSFEM = "fe-msfem"
METHODS = (REFERENCE, MSFEM, MIXED, FE_MSFEM)
RHO_MODES = ("epsilon", "h", "explicit")


@dataclass(frozen=True)
class PenaltyParams:
    """
    Interface penalty parameters.

    Attributes
    ----------
    beta : int
        -1, 0 or 1; 1 gives a symmetric system.
    gamma0 : float
        Value-jump penalty, positive.
    gamma1 : float
        Flux-jump penalty, nonnegative.
    rho_mode : {"epsilon", "h", "explicit"}
    rho_value : float or None
        Used by the explicit mode.
    """
    beta: int = 1
    gamma0: float = 20.0
    gamma1: float = 0.1
    rho_mode: str = "epsilon"
    rho_value: float = None

    def __post_init__(self):
        if self.beta not in (-1, 0, 1):
            raise ValueError("beta must be -1, 0 or 1, got %s" % self.beta)
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive, got %s" % self.gamma0)
        if self.gamma1 < 0:
            raise ValueError("gamma1 must be nonnegative, got %s" % self.gamma1)
        if self.rho_mode not in RHO_MODES:
            raise ValueError("rho mode must be one of %s, got %r" % (RHO_MODES, self.rho_mode))
        if self.rho_mode == "explicit" and not (self.rho_value and self.rho_value > 0):
            raise ValueError("explicit rho needs a positive value")

    @property
    def symmetric(self):
        return self.beta == 1

    def resolve_rho(self, epsilon=None, h=None):
        """
        The penalty scale rho.

        Raises
        ------
        ValueError
            If the mode needs a quantity that is not available.
        """
        if self.rho_mode == "epsilon":
            if epsilon is None:
                raise ValueError("rho = epsilon needs a coefficient with a known epsilon")
            return float(epsilon)
        if self.rho_mode == "h":
            if h is None:
                raise ValueError("rho = h needs the fine mesh size")
            return float(h)
        return float(self.rho_value)

    def label(self):
        return str(self.rho_value) if self.rho_mode == "explicit" else self.rho_mode


class InterfaceTraces():
    """
    Both traces of the discrete spaces on every fine interface edge,
    sampled at the two Gauss points of the edge.

    Attributes
    ----------
    ends : ndarray, shape (m, 2, 2)
        Endpoints of the fine edges.
    points : ndarray, shape (m, 2, 2)
    weights : ndarray, shape (m, 2)
        Gauss weights times edge length.
    normals : ndarray, shape (m, 2)
    coefficient : ndarray, shape (m, 2)
        ``a`` at the Gauss points.
    fine_nodes : ndarray of int, shape (m, 3)
        Vertices of the Omega_1 element owning the edge.
    fine_values : ndarray, shape (m, 2, 3)
    fine_fluxes : ndarray, shape (m, 2, 3)
        ``a grad(phi) . n`` of the three fine hats.
    coarse_nodes : ndarray of int, shape (m, 3)
        Vertices of the Omega_2 coarse element owning the edge.
    coarse_values : ndarray, shape (m, 2, 3)
    coarse_fluxes : ndarray, shape (m, 2, 3)
    sub_elements : ndarray of int, shape (m,)
        Sub-triangle of the coarse basis adjacent to each edge.
    """

    def __init__(self, **arrays):
        for name, value in arrays.items():
            setattr(self, name, value)

    def __len__(self):
        return len(self.weights)


def trace_data(pairing, fine, coarse, bases, field):
    """
    Evaluate fine and coarse traces on all paired interface edges.

    Parameters
    ----------
    pairing : InterfacePairing
    fine : FineMesh
    coarse : CoarseMesh
    bases : dict
        Element index to `ElementBasis`, covering every coarse element of
        the pairing.
    field : CoefficientField

    Returns
    -------
    InterfaceTraces

    Raises
    ------
    GeometryError
        If a basis sub-mesh node does not coincide with a fine interface
        node within 1e-12; the sub-mesh resolution must equal ``H / h``.
    """
    m = len(pairing)
    t, w = fem.EDGE_GAUSS
    ends = fine.nodes[pairing.fine_edges]
    points = ends[:, None, 0] + t[None, :, None] * (ends[:, None, 1] - ends[:, None, 0])
    weights = pairing.lengths[:, None] * w[None, :]
    normals = pairing.normals
    coefficient = field(points)

    fine_nodes = fine.elements[pairing.fine_elements]
    triangles = fine.nodes[fine_nodes]
    _, fine_gradients = fem.element_geometry(triangles)
    fine_values = barycentric(triangles, points)
    fine_fluxes = coefficient[:, :, None] * np.einsum("mkd,md->mk", fine_gradients,
                                                      normals)[:, None, :]

    coarse_nodes = coarse.elements[pairing.coarse_elements]
    coarse_values = np.empty((m, 2, 3))
    coarse_fluxes = np.empty((m, 2, 3))
    sub_elements = np.empty(m, dtype=np.int64)
    for element in np.unique(pairing.coarse_elements):
        rows = np.nonzero(pairing.coarse_elements == element)[0]
        basis = bases.get(int(element))
        if basis is None:
            raise MeshError("no basis for interface element %d" % element)
        sub = basis.sub_mesh
        node_a = sub.find_nodes(ends[rows, 0])
        node_b = sub.find_nodes(ends[rows, 1])
        owners = sub.boundary_edge_elements(node_a, node_b)
        if np.any(owners < 0):
            raise GeometryError("interface edge is not a boundary edge of element %d" % element)
        values_a = basis.values[node_a]
        values_b = basis.values[node_b]
        coarse_values[rows] = ((1.0 - t)[None, :, None] * values_a[:, None, :]
                               + t[None, :, None] * values_b[:, None, :])
        gradients = basis.gradients[owners]
        normal_derivative = np.einsum("mkd,md->mk", gradients, normals[rows])
        coarse_fluxes[rows] = coefficient[rows, :, None] * normal_derivative[:, None, :]
        sub_elements[rows] = owners
    logger.debug("interface traces on %d fine edges" % m)
    return InterfaceTraces(ends=ends, points=points, weights=weights, normals=normals,
                           coefficient=coefficient, fine_nodes=fine_nodes,
                           fine_values=fine_values, fine_fluxes=fine_fluxes,
                           coarse_nodes=coarse_nodes, coarse_values=coarse_values,
                           coarse_fluxes=coarse_fluxes, sub_elements=sub_elements)


def interface_terms(traces):
    """
    Per-edge 6x6 matrices of the four interface term families.

    Local unknowns are the three fine hats of the owning fine element
    followed by the three basis functions of the owning coarse element;
    rows are test functions, columns trial functions.

    Returns
    -------
    dict of ndarray, shape (m, 6, 6)
        ``consistency`` (``int {a grad u . n}[v]``), ``symmetry``
        (``int [u]{a grad v . n}``), ``jump`` (``int [u][v]``) and
        ``flux_jump`` (``int [a grad u . n][a grad v . n]``).
    """
    jump = np.concatenate([traces.fine_values, -traces.coarse_values], axis=2)
    flux = np.concatenate([traces.fine_fluxes, traces.coarse_fluxes], axis=2)
    average = 0.5 * flux
    flux_jump = np.concatenate([traces.fine_fluxes, -traces.coarse_fluxes], axis=2)
    w = traces.weights
    consistency = np.einsum("mq,mqd,mqe->mde", w, jump, average)
    return {
        "consistency": consistency,
        "symmetry": consistency.transpose(0, 2, 1),
        "jump": np.einsum("mq,mqd,mqe->mde", w, jump, jump),
        "flux_jump": np.einsum("mq,mqd,mqe->mde", w, flux_jump, flux_jump),
    }


def combine_terms(terms, params, rho):
    """Weighted sum of the term families, shape (m, 6, 6)."""
    return (-terms["consistency"] - params.beta * terms["symmetry"]
            + (params.gamma0 / rho) * terms["jump"]
            + params.gamma1 * rho * terms["flux_jump"])


def assemble_interface(traces, params, rho, fine_dof_map, coarse_dof_map, n_dofs):
    """
    Interface contributions to the combined system.

    Parameters
    ----------
    traces : InterfaceTraces
    params : PenaltyParams
    rho : float
    fine_dof_map : ndarray of int
        Fine node to system index, -1 for eliminated (zero) nodes.
    coarse_dof_map : ndarray of int
        Coarse node to system index (already offset), -1 outside Omega_2.
    n_dofs : int

    Returns
    -------
    scipy.sparse.csr_matrix, shape (n_dofs, n_dofs)
    """
    local = combine_terms(interface_terms(traces), params, rho)
    dofs = np.concatenate([fine_dof_map[traces.fine_nodes],
                           coarse_dof_map[traces.coarse_nodes]], axis=1)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    values = local.reshape(-1)
    keep = (rows >= 0) & (cols >= 0)
    return linalg.from_arrays(n_dofs, n_dofs, rows[keep], cols[keep], values[keep])


class FeMsfemSystem():
    """
    Assembled combined system over fine free DOFs followed by coarse DOFs.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
    rhs : ndarray
    fine_system : AssembledSystem
        Omega_1 block after elimination of the boundary of the unit square.
    coarse_nodes : ndarray of int
        Coarse nodes of the closure of Omega_2, in system order.
    coarse_dof_map : ndarray of int
        Coarse node to system index, -1 outside Omega_2.
    interface : scipy.sparse.csr_matrix
    traces : InterfaceTraces
    rho : float
    symmetric : bool
    """

    def __init__(self, matrix, rhs, fine_system, coarse_nodes, coarse_dof_map, interface,
                 traces, rho, symmetric):
        self.matrix = matrix
        self.rhs = rhs
        self.fine_system = fine_system
        self.coarse_nodes = coarse_nodes
        self.coarse_dof_map = coarse_dof_map
        self.interface = interface
        self.traces = traces
        self.rho = rho
        self.symmetric = symmetric

    @property
    def n_fine(self):
        return self.fine_system.n_dofs

    @property
    def n_dofs(self):
        return self.matrix.shape[0]

    def split_vector(self, x):
        """Fine nodal values and coarse nodal values from a system vector."""
        fine_values = self.fine_system.expand(x[:self.n_fine])
        coarse_values = np.zeros(len(self.coarse_dof_map))
        coarse_values[self.coarse_nodes] = x[self.n_fine:]
        return fine_values, coarse_values

    def join_vector(self, fine_values, coarse_values):
        """System vector from nodal values of both meshes."""
        return np.concatenate([np.asarray(fine_values)[self.fine_system.free],
                               np.asarray(coarse_values)[self.coarse_nodes]])


def assemble_fe_msfem(split, fine, coarse, pairing, bases, field, f, params, rho, quad=3):
    """
    Assemble the combined FE / MsFEM system.

    Returns
    -------
    FeMsfemSystem
        Block matrix ``[[A_ff + P_ff, P_fc], [P_cf, A_cc + P_cc]]``.

    Raises
    ------
    MeshError
        If the basis resolution differs from ``H / h`` or a basis is missing.
    """
    omega2 = split.omega2_elements
    missing = [e for e in omega2 if int(e) not in bases]
    if missing:
        raise MeshError("missing multiscale bases for %d Omega_2 elements" % len(missing))
    for e in omega2:
        if bases[int(e)].n_sub != fine.ratio:
            raise MeshError("basis resolution %d must equal H/h = %d"
                            % (bases[int(e)].n_sub, fine.ratio))

    fine_matrix = fem.assemble_stiffness(fine, field, quad)
    fine_load = fem.assemble_load(fine, f, quad)
    fine_system = fem.apply_dirichlet(fine_matrix, fine_load, fine.dirichlet_flags)

    omega2_bases = {int(e): bases[int(e)] for e in omega2}
    coarse_matrix, coarse_load = assemble_ms_global(coarse, omega2_bases, field, f, quad)
    coarse_nodes = split.omega2_nodes
    coarse_block = coarse_matrix[coarse_nodes][:, coarse_nodes]

    n_fine = fine_system.n_dofs
    n_dofs = n_fine + len(coarse_nodes)
    coarse_dof_map = np.full(coarse.n_nodes, -1, dtype=np.int64)
    coarse_dof_map[coarse_nodes] = n_fine + np.arange(len(coarse_nodes))

    traces = trace_data(pairing, fine, coarse, bases, field)
    interface = assemble_interface(traces, params, rho, fine_system.dof_map,
                                   coarse_dof_map, n_dofs)
    matrix = (sp.block_diag([fine_system.matrix, coarse_block], format="csr") + interface).tocsr()
    rhs = np.concatenate([fine_system.rhs, coarse_load[coarse_nodes]])
    logger.info("FE-MsFEM system: %d fine + %d coarse unknowns, rho=%.3e" % (
        n_fine, len(coarse_nodes), rho))
    return FeMsfemSystem(matrix, rhs, fine_system, coarse_nodes, coarse_dof_map,
                         interface, traces, rho, params.symmetric)


class CombinedSolution():
    """
    FE-MsFEM solution.

    Attributes
    ----------
    fine_values : ndarray
        Values at every fine node of Omega_1, zero on the boundary.
    coarse_values : ndarray
        Coefficients of the multiscale basis at every coarse node, zero
        outside the closure of Omega_2.
    split, fine, coarse : mesh objects
    bases : dict
    params : PenaltyParams
    rho : float
    report : SolveReport
    """

    def __init__(self, fine_values, coarse_values, split, fine, coarse, bases, params,
                 rho, report):
        self.fine_values = fine_values
        self.coarse_values = coarse_values
        self.split = split
        self.fine = fine
        self.coarse = coarse
        self.bases = bases
        self.params = params
        self.rho = rho
        self.report = report


class MsfemSolution():
    """
    Coarse multiscale solution on the whole square.

    Attributes
    ----------
    coarse : CoarseMesh
    bases : dict
        One basis per coarse element.
    coarse_values : ndarray
    kind : {"msfem", "mixed"}
    report : SolveReport
    """

    def __init__(self, coarse, bases, coarse_values, kind, report):
        self.coarse = coarse
        self.bases = bases
        self.coarse_values = coarse_values
        self.kind = kind
        self.report = report


def solve_fe_msfem(split, fine, coarse, pairing, bases, field, f, params, rho,
                   settings=None, quad=3):
    """
    Assemble and solve the combined system, CG for ``beta = 1`` and BiCGStab
    otherwise.

    Returns
    -------
    CombinedSolution
    """
    system = assemble_fe_msfem(split, fine, coarse, pairing, bases, field, f, params, rho, quad)
    try:
        x, report = linalg.solve(system.matrix, system.rhs, settings,
                                 symmetric=system.symmetric, label="fe-msfem")
    except Exception as e:
        logger.exception(e)
        raise
    logger.info("FE-MsFEM solve: %d iterations, residual %.2e" % (
        report.iterations, report.residual))
    fine_values, coarse_values = system.split_vector(x)
    return CombinedSolution(fine_values, coarse_values, split, fine, coarse, bases,
                            params, rho, report)


def solve_msfem(coarse, bases, field, f, settings=None, kind=MSFEM, quad=3):
    """
    Coarse multiscale solve over the whole square with zero boundary values.

    Returns
    -------
    MsfemSolution
    """
    matrix, rhs = assemble_ms_global(coarse, bases, field, f, quad)
    system = fem.apply_dirichlet(matrix, rhs, coarse.boundary_flags)
    try:
        values, report = fem.solve_system(system, settings, label=kind)
    except Exception as e:
        logger.exception(e)
        raise
    if report is not None:
        logger.info("%s solve: %d unknowns, %d iterations" % (
            kind, system.n_dofs, report.iterations))
    return MsfemSolution(coarse, bases, values, kind, report)


class Discretization():
    """
    Meshes shared by all methods of one experiment.

    The coarse mesh, domain split, fine frame mesh and pairing are built
    eagerly; the reference mesh on first use.
    """
    logger = logging.getLogger("mslab")

    def __init__(self, coarse, split, fine, pairing, n_ref):
        self.coarse = coarse
        self.split = split
        self.fine = fine
        self.pairing = pairing
        self.n_ref = n_ref
        self._reference_mesh = None

    @property
    def reference_mesh(self):
        if self._reference_mesh is None:
            self._reference_mesh = build_square_mesh(self.n_ref)
        return self._reference_mesh


def channel_cells(coarse, field):
    """Coarse cells touching a high-contrast overlay region, or None."""
    if not isinstance(field, Overlay):
        return None
    rects = field.channel_regions()
    if not rects:
        return None
    cells = np.zeros((coarse.n, coarse.n), dtype=bool)
    for rect in rects:
        cells |= cells_intersecting(coarse, rect)
    return cells


def build_discretization(field, n_coarse, n_fine, n_ref, layers=2):
    """
    Build the meshes of an experiment.

    Coarse cells touching an overlay region whose value exceeds the base
    range by more than `CHANNEL_CONTRAST` join Omega_1.
    """
    coarse = build_coarse_mesh(n_coarse)
    extra = channel_cells(coarse, field)
    if extra is not None:
        logger.info("%d coarse cells touch high-contrast channels" % extra.sum())
    split = split_domain(coarse, layers, extra)
    fine = build_frame_fine_mesh(split, n_fine)
    pairing = pair_interface(split, fine, coarse)
    return Discretization(coarse, split, fine, pairing, n_ref)


def solve_method(method, config, field=None, discretization=None, cache=None, params=None):
    """
    Run one discretization of an experiment.

    Parameters
    ----------
    method : {"reference", "msfem", "mixed", "fe-msfem"}
    config : ExperimentConfig
    field : CoefficientField, optional
        Defaults to ``config.build_field()``.
    discretization : Discretization, optional
    cache : BasisCache, optional
        Shares Omega_2 oversampling bases between the mixed and FE-MsFEM runs.
    params : PenaltyParams, optional
        Defaults to the first penalty setting of the config.

    Returns
    -------
    FieldSolution, MsfemSolution or CombinedSolution
    """
    if method not in METHODS:
        raise ValueError("unknown method %r, expected one of %s" % (method, METHODS))
    field = field if field is not None else config.build_field()
    mesh_cfg = config.mesh
    settings = config.solver_settings()
    quad = config.problem.quad
    f = config.problem.source
    if discretization is None:
        discretization = build_discretization(field, mesh_cfg.n_coarse, mesh_cfg.n_fine,
                                              mesh_cfg.n_ref, mesh_cfg.layers)
    cache = cache if cache is not None else BasisCache()
    coarse = discretization.coarse
    split = discretization.split
    n_sub = config.n_sub
    sigma = mesh_cfg.sigma_os
    start = time.perf_counter()

    if method == REFERENCE:
        solution = fem.solve_reference(discretization.reference_mesh, field, f, settings, quad)
    elif method == MSFEM:
        bases = build_bases(coarse, range(coarse.n_elements), field, n_sub, STANDARD,
                            sigma, split, settings, cache, quad)
        solution = solve_msfem(coarse, bases, field, f, settings, MSFEM, quad)
    elif method == MIXED:
        omega2 = np.zeros(coarse.n_elements, dtype=bool)
        omega2[split.omega2_elements] = True
        bases = build_bases(coarse, range(coarse.n_elements), field, n_sub,
                            lambda e: OVERSAMPLING if omega2[e] else STANDARD,
                            sigma, split, settings, cache, quad)
        solution = solve_msfem(coarse, bases, field, f, settings, MIXED, quad)
    else:
        params = params or config.penalty_params()[0]
        epsilon = config.epsilon if config.epsilon is not None else field.epsilon
        rho = params.resolve_rho(epsilon, discretization.fine.h)
        bases = build_bases(coarse, split.omega2_elements, field, n_sub, OVERSAMPLING,
                            sigma, split, settings, cache, quad)
        solution = solve_fe_msfem(split, discretization.fine, coarse, discretization.pairing,
                                  bases, field, f, params, rho, settings, quad)
    solution.wall_time = time.perf_counter() - start
    return solution


def dump_interface_terms(traces, params, rho, file_path):
    """Write per-edge magnitudes of the weighted interface terms as CSV."""
    terms = interface_terms(traces)
    scales = {"consistency": 1.0, "symmetry": float(params.beta),
              "jump": params.gamma0 / rho, "flux_jump": params.gamma1 * rho}
    with open(file_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["edge", "x0", "y0", "x1", "y1"] + list(terms))
        ends = traces.ends
        for k in range(len(traces)):
            magnitudes = [abs(scales[name]) * np.linalg.norm(terms[name][k])
                          for name in terms]
            writer.writerow([k] + ["%.6e" % v for v in ends[k].ravel()]
                            + ["%.6e" % v for v in magnitudes])
