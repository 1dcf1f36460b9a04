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
Multiscale basis functions of the coarse elements.

A standard basis function is the a-harmonic extension of a coarse hat into
the element. An oversampling basis function solves the same local problem
on an enlarged simplex S and is restricted to K, then recombined with the
matrix ``c_ij`` so that its linear part is again the hat of K.
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fem, linalg
from .exceptions import GeometryError, MeshError, SingularMatrixError, SolverError
from .linalg import SolverSettings
from .mesh import barycentric, make_oversampling_patch, refine_triangle

__all__ = [
    "STANDARD",
    "OVERSAMPLING",
    "ElementBasis",
    "PiProjection",
    "BasisCache",
    "build_standard_basis",
    "build_oversampling_basis",
    "compute_cij",
    "aligned_patch_subdivisions",
    "basis_gradient",
    "basis_gradients",
    "assemble_ms_global",
    "build_bases",
    "dump_basis",
]

logger = logging.getLogger("mslab")

STANDARD = "standard"
OVERSAMPLING = "oversampling"
MIN_SUBDIVISIONS = 2
# patch lattices finer than this many times the element spacing are not tried
MAX_PATCH_REFINEMENT = 3


class PiProjection():
    """
    Projection of the span of an element's basis onto linear functions.

    ``Pi_K(sum_i c_i psi_i) = sum_i c_i sum_j c_ij phi_j^S`` restricted to K,
    which is ``sum_i c_i phi_i^K`` by the choice of ``c_ij``.

    Attributes
    ----------
    element : int
    base_vertices : ndarray, shape (3, 2)
        Vertices of K.
    source_vertices : ndarray, shape (3, 2)
        Vertices of the simplex whose hats the basis was built from (K itself
        for standard bases).
    cij : ndarray, shape (3, 3)
    """

    def __init__(self, element, base_vertices, source_vertices, cij):
        self.element = element
        self.base_vertices = np.asarray(base_vertices, dtype=float)
        self.source_vertices = np.asarray(source_vertices, dtype=float)
        self.cij = np.asarray(cij, dtype=float)

    def hats(self, points):
        """Hats of K at points, shape ``(m, 3)``."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        return barycentric(self.base_vertices[None], points[None])[0]

    def __call__(self, coefficients, points):
        """Evaluate ``Pi_K`` of the combination `coefficients` at points."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        source_hats = barycentric(self.source_vertices[None], points[None])[0]
        return source_hats @ self.cij.T @ np.asarray(coefficients, dtype=float)


class ElementBasis():
    """
    The three multiscale basis functions of one coarse element.

    Attributes
    ----------
    element : int
    kind : {"standard", "oversampling"}
    vertices : ndarray, shape (3, 2)
    sub_mesh : SubMesh
        Refinement of K carrying the nodal values.
    values : ndarray, shape (n_sub_nodes, 3)
        Column i holds basis function i.
    cij : ndarray, shape (3, 3)
        Identity for standard bases.
    patch : OversamplingPatch or None
    field_key : tuple
        Key of the coefficient the basis was built with.
    local_stiffness : ndarray, shape (3, 3)
        ``int_K a grad(psi_i) . grad(psi_j)``.
    """

    def __init__(self, element, kind, vertices, sub_mesh, values, cij, field_key,
                 local_stiffness, patch=None):
        self.element = int(element)
        self.kind = kind
        self.vertices = np.asarray(vertices, dtype=float)
        self.sub_mesh = sub_mesh
        self.values = values
        self.cij = cij
        self.field_key = field_key
        self.local_stiffness = local_stiffness
        self.patch = patch
        self.gradients = fem.element_gradients(
            sub_mesh.triangles(), values[sub_mesh.elements])

    @property
    def n_sub(self):
        return self.sub_mesh.n_sub

    def projection(self):
        source = self.vertices if self.patch is None else self.patch.vertices
        return PiProjection(self.element, self.vertices, source, self.cij)

    def evaluate(self, points):
        """Values of the three functions at points of K, shape ``(m, 3)``."""
        return self.sub_mesh.interpolate(self.values, points)

    def combine(self, coefficients):
        """Nodal values of ``sum_i coefficients[i] psi_i`` on the sub-mesh."""
        return self.values @ np.asarray(coefficients, dtype=float)


def basis_gradient(basis, i, sub_element):
    """Constant gradient of function `i` on a sub-triangle, shape ``(2,)``."""
    return basis.gradients[sub_element, i]


def basis_gradients(basis):
    """Gradients of all functions on all sub-triangles, ``(n_sub_el, 3, 2)``."""
    return basis.gradients


def _check_subdivisions(n_sub):
    if int(n_sub) != n_sub or n_sub < MIN_SUBDIVISIONS:
        raise MeshError("n_sub must be an integer >= %d, got %s" % (MIN_SUBDIVISIONS, n_sub))


def _solve_local(sub_mesh, field, boundary_values, settings, quad, label):
    """Solve the three a-harmonic problems with the given boundary data."""
    n = sub_mesh.n_nodes
    matrix = fem.assemble_stiffness(sub_mesh, field, quad)
    system = fem.apply_dirichlet(matrix, np.zeros((n, 3)), sub_mesh.boundary_flags,
                                 boundary_values)
    try:
        values, report = fem.solve_system(system, settings.for_local(), label=label)
    except SolverError as e:
        logger.exception(e)
        raise
    if report is not None:
        logger.debug("%s: local solve residual %.2e" % (label, report.residual))
    return values, matrix


def build_standard_basis(mesh, element, field, n_sub, settings=None, quad=3):
    """
    Build the standard multiscale basis of a coarse element.

    Each function solves ``-div(a grad psi_i) = 0`` on the refined element
    with the hat of vertex i as boundary data.

    Parameters
    ----------
    mesh : CoarseMesh
    element : int
    field : CoefficientField
    n_sub : int
        Subdivisions per coarse edge, at least 2.
    settings : SolverSettings, optional
    quad : int

    Returns
    -------
    ElementBasis

    Raises
    ------
    SolverError
        If a local solve fails; the message names the element.
    """
    _check_subdivisions(n_sub)
    settings = settings or SolverSettings()
    vertices = mesh.triangles([element])[0]
    sub_mesh = refine_triangle(vertices, n_sub)
    boundary = sub_mesh.parent_coordinates[sub_mesh.boundary_flags]
    values, matrix = _solve_local(sub_mesh, field, boundary, settings, quad,
                                  "standard basis of element %d" % element)
    stiffness = values.T @ (matrix @ values)
    return ElementBasis(element, STANDARD, vertices, sub_mesh, values, np.eye(3),
                        field.key, 0.5 * (stiffness + stiffness.T))


def compute_cij(base_vertices, patch_vertices):
    """
    Combination matrix mapping the hats of S restricted to K onto the hats
    of K.

    With ``M[j, k] = phi_j^S(x_k^K)`` returns ``C`` solving ``C M = I``.

    Raises
    ------
    GeometryError
        If ``|det M| < 1e-14``.
    """
    base_vertices = np.asarray(base_vertices, dtype=float)
    patch_vertices = np.asarray(patch_vertices, dtype=float)
    m = barycentric(patch_vertices[None], base_vertices[None])[0].T
    if abs(np.linalg.det(m)) < 1e-14:
        raise GeometryError("degenerate oversampling simplex, det M = %.3e" % np.linalg.det(m))
    try:
        cij = linalg.dense_solve(m.T, np.eye(3)).T
    except SingularMatrixError as e:
        raise GeometryError(str(e)) from e
    return cij


def aligned_patch_subdivisions(scale, n_sub, max_factor=MAX_PATCH_REFINEMENT):
    """
    Smallest refinement of the patch whose lattice holds every sub-mesh node
    of K.

    The patch is K dilated about its barycenter, so a lattice of
    ``scale * n_sub * k`` subdivisions contains the nodes of K's
    ``n_sub``-lattice once ``k n_sub (scale - 1) / 3`` is an integer.

    Returns
    -------
    int or None
        None when no factor up to `max_factor` aligns the lattices.
    """
    for factor in range(1, max_factor + 1):
        n_patch = scale * n_sub * factor
        offset = n_sub * factor * (scale - 1.0) / 3.0
        if abs(n_patch - round(n_patch)) < 1e-9 and abs(offset - round(offset)) < 1e-9:
            return int(round(n_patch))
    return None


def build_oversampling_basis(mesh, element, patch, field, n_sub, n_sub_patch=None,
                             settings=None, quad=3):
    """
    Build the oversampling multiscale basis of a coarse element.

    The three problems ``-div(a grad psi_j^S) = 0`` on the patch S with the
    hats of S as boundary data are solved on a refinement of S, restricted
    to the sub-mesh of K and recombined as ``psi_i = sum_j c_ij psi_j^S``.
    When the patch lattice holds the nodes of K's sub-mesh the restriction
    takes the nodal values; otherwise it interpolates.

    Parameters
    ----------
    mesh : CoarseMesh
    element : int
    patch : OversamplingPatch
    field : CoefficientField
    n_sub : int
        Subdivisions of K.
    n_sub_patch : int, optional
        Subdivisions of S; defaults to `aligned_patch_subdivisions`, and to
        ``ceil(scale * n_sub)`` when no aligned lattice exists.
    settings : SolverSettings, optional
    quad : int

    Returns
    -------
    ElementBasis
    """
    _check_subdivisions(n_sub)
    if patch.base_element != element:
        raise MeshError("patch of element %d used for element %d"
                        % (patch.base_element, element))
    aligned = aligned_patch_subdivisions(patch.scale, n_sub)
    if n_sub_patch is None:
        n_sub_patch = aligned or int(math.ceil(patch.scale * n_sub - 1e-9))
    if n_sub_patch < 2 * patch.scale:
        raise MeshError("n_sub_patch must be at least %g, got %s"
                        % (2 * patch.scale, n_sub_patch))
    settings = settings or SolverSettings()
    vertices = mesh.triangles([element])[0]

    patch_mesh = refine_triangle(patch.vertices, n_sub_patch)
    boundary = patch_mesh.parent_coordinates[patch_mesh.boundary_flags]
    patch_values, _ = _solve_local(patch_mesh, field, boundary, settings, quad,
                                   "oversampling patch of element %d" % element)

    sub_mesh = refine_triangle(vertices, n_sub)
    if aligned is not None and n_sub_patch % aligned == 0:
        restricted = patch_values[patch_mesh.find_nodes(sub_mesh.nodes)]
    else:
        logger.debug("element %d: patch lattice %d misses the sub-mesh nodes, interpolating"
                     % (element, n_sub_patch))
        restricted = patch_mesh.interpolate(patch_values, sub_mesh.nodes)
    cij = compute_cij(vertices, patch.vertices)
    values = restricted @ cij.T
    logger.debug("element %d: c_ij = %s" % (element, np.array2string(cij, precision=6)))

    matrix = fem.assemble_stiffness(sub_mesh, field, quad)
    stiffness = values.T @ (matrix @ values)
    return ElementBasis(element, OVERSAMPLING, vertices, sub_mesh, values, cij,
                        field.key, 0.5 * (stiffness + stiffness.T), patch)


class BasisCache():
    """
    Thread-safe store of built bases keyed by
    ``(element, field key, n_sub, scale, kind)``.
    """

    def __init__(self):
        self._bases = {}
        self._lock = threading.Lock()
        self.hits = 0

    @staticmethod
    def key(element, field, n_sub, scale, kind):
        return (int(element), field.key, int(n_sub),
                float(scale) if kind == OVERSAMPLING else None, kind)

    def get(self, key):
        with self._lock:
            basis = self._bases.get(key)
            if basis is not None:
                self.hits += 1
            return basis

    def put(self, key, basis):
        with self._lock:
            self._bases[key] = basis

    def __len__(self):
        return len(self._bases)


def build_bases(mesh, elements, field, n_sub, kinds, scale=3.0, split=None,
                settings=None, cache=None, quad=3):
    """
    Build the bases of several coarse elements.

    Parameters
    ----------
    mesh : CoarseMesh
    elements : sequence of int
    field : CoefficientField
    n_sub : int
    kinds : str or callable
        Kind of every element, or a function of the element index.
    scale : float
        Oversampling dilation.
    split : DomainSplit, optional
        Checked for oversampling elements (must lie in Omega_2).
    settings : SolverSettings, optional
        ``settings.workers`` threads build bases concurrently; results are
        returned in element order either way.
    cache : BasisCache, optional

    Returns
    -------
    dict
        Element index to `ElementBasis`.
    """
    settings = settings or SolverSettings()
    kind_of = kinds if callable(kinds) else (lambda element: kinds)

    def build(element):
        kind = kind_of(element)
        key = BasisCache.key(element, field, n_sub, scale, kind)
        if cache is not None:
            basis = cache.get(key)
            if basis is not None:
                return basis
        if kind == STANDARD:
            basis = build_standard_basis(mesh, element, field, n_sub, settings, quad)
        elif kind == OVERSAMPLING:
            patch = make_oversampling_patch(mesh, element, scale, split)
            basis = build_oversampling_basis(mesh, element, patch, field, n_sub,
                                             settings=settings, quad=quad)
        else:
            raise ValueError("unknown basis kind %r" % kind)
        if cache is not None:
            cache.put(key, basis)
        return basis

    elements = [int(e) for e in elements]
    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            built = list(pool.map(build, elements))
    else:
        built = [build(e) for e in elements]
    logger.info("built %d multiscale bases (n_sub=%d)" % (len(built), n_sub))
    return dict(zip(elements, built))


def assemble_ms_global(mesh, bases, field, f=1.0, quad=3):
    """
    Multiscale stiffness matrix and load vector over all coarse nodes.

    Only the elements present in `bases` contribute, so the result covers the
    region they tile.

    Parameters
    ----------
    mesh : CoarseMesh
    bases : dict
        Element index to `ElementBasis`.
    field : CoefficientField
    f : float or callable

    Returns
    -------
    matrix : scipy.sparse.csr_matrix, shape (n_coarse_nodes, n_coarse_nodes)
    rhs : ndarray, shape (n_coarse_nodes,)
    """
    elements = sorted(bases)
    n = mesh.n_nodes
    local = np.empty((len(elements), 3, 3))
    loads = np.empty((len(elements), 3))
    for k, element in enumerate(elements):
        basis = bases[element]
        if basis.field_key == field.key:
            local[k] = basis.local_stiffness
        else:
            matrix = fem.assemble_stiffness(basis.sub_mesh, field, quad)
            local[k] = basis.values.T @ (matrix @ basis.values)
        loads[k] = basis.values.T @ fem.assemble_load(basis.sub_mesh, f, quad)
    vertices = mesh.elements[elements] if elements else np.empty((0, 3), np.int64)
    rows = np.repeat(vertices, 3, axis=1)
    cols = np.tile(vertices, (1, 3))
    matrix = linalg.from_arrays(n, n, rows, cols, local.reshape(-1, 9))
    rhs = np.bincount(vertices.ravel(), weights=loads.ravel(), minlength=n)
    return matrix, rhs


def dump_basis(basis, file_path):
    """Write ``x y psi_0 psi_1 psi_2`` per sub-mesh node."""
    with open(file_path, "w", encoding="utf-8") as f:
        f.write("# element %d, %s, n_sub %d\n" % (basis.element, basis.kind, basis.n_sub))
        for (x, y), row in zip(basis.sub_mesh.nodes, basis.values):
            f.write("%r %r %s\n" % (float(x), float(y), " ".join(repr(float(v)) for v in row)))
