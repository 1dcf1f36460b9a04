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
Structured triangulations of the unit square, the Omega_1 / Omega_2 domain
split, the fine mesh of the boundary frame and the matched interface
pairing between fine and coarse meshes.

All meshes are uniform right-triangle lattices: square cell (i, j) splits
into a lower triangle (LL, LR, UR) and an upper triangle (LL, UR, UL), both
counterclockwise. Cell masks are indexed ``mask[i, j]`` with i along x.
"""

import logging
from collections import namedtuple

import numpy as np

from .exceptions import GeometryError, MeshError

__all__ = [
    "LatticeMesh",
    "CoarseMesh",
    "FineMesh",
    "DomainSplit",
    "InterfacePairing",
    "PairingEntry",
    "SubMesh",
    "OversamplingPatch",
    "build_square_mesh",
    "build_coarse_mesh",
    "split_domain",
    "cells_intersecting",
    "build_frame_fine_mesh",
    "pair_interface",
    "dilate_triangle",
    "make_oversampling_patch",
    "refine_triangle",
    "barycentric",
    "signed_areas",
    "dump_mesh",
]

logger = logging.getLogger("mslab")

COINCIDENCE_TOL = 1e-12
MIN_COARSE_CELLS = 4
LOWER = 0
UPPER = 1


def signed_areas(triangles):
    """Signed areas of triangles given as an ``(m, 3, 2)`` array."""
    triangles = np.asarray(triangles, dtype=float)
    e1 = triangles[:, 1] - triangles[:, 0]
    e2 = triangles[:, 2] - triangles[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def barycentric(triangles, points):
    """
    Barycentric coordinates of points with respect to triangles.

    Parameters
    ----------
    triangles : ndarray, shape (m, 3, 2)
    points : ndarray, shape (m, 2) or (m, k, 2)
        Points belonging to the matching triangle.

    Returns
    -------
    ndarray, shape (m, 3) or (m, k, 3)
    """
    triangles = np.asarray(triangles, dtype=float)
    points = np.asarray(points, dtype=float)
    single = points.ndim == 2
    if single:
        points = points[:, None, :]
    v0 = triangles[:, None, 0]
    e1 = (triangles[:, 1] - triangles[:, 0])[:, None]
    e2 = (triangles[:, 2] - triangles[:, 0])[:, None]
    det = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    d = points - v0
    l1 = (d[..., 0] * e2[..., 1] - d[..., 1] * e2[..., 0]) / det
    l2 = (e1[..., 0] * d[..., 1] - e1[..., 1] * d[..., 0]) / det
    coords = np.stack([1.0 - l1 - l2, l1, l2], axis=-1)
    return coords[:, 0] if single else coords


class LatticeMesh():
    """
    Uniform right-triangle mesh of a union of lattice cells of (0,1)^2.

    Attributes
    ----------
    n : int
        Cells per side of the underlying lattice.
    spacing : float
        ``1 / n``.
    cell_mask : ndarray of bool, shape (n, n)
        Cells covered by the mesh.
    nodes : ndarray, shape (n_nodes, 2)
    elements : ndarray of int, shape (n_elements, 3)
        Counterclockwise vertex triples.
    lattice_ids : ndarray of int
        Lattice id ``j * (n + 1) + i`` of every node.
    node_index : ndarray of int, shape ((n + 1)**2,)
        Lattice id to node index, -1 for lattice points not in the mesh.
    element_index : ndarray of int, shape (2 * n**2,)
        Lattice element id ``2 * (j * n + i) + t`` to element index, -1 if
        absent.
    cell_of_element : ndarray of int, shape (n_elements, 2)
    boundary_flags : ndarray of bool
        Nodes on the boundary of the unit square.
    """
    logger = logging.getLogger("mslab")

    def __init__(self, n, cell_mask=None):
        if n < 1:
            raise MeshError("cells per side must be positive, got %s" % n)
        self.n = int(n)
        self.spacing = 1.0 / self.n
        if cell_mask is None:
            cell_mask = np.ones((self.n, self.n), dtype=bool)
        cell_mask = np.asarray(cell_mask, dtype=bool)
        if cell_mask.shape != (self.n, self.n):
            raise MeshError("cell mask must have shape (%d, %d)" % (self.n, self.n))
        self.cell_mask = cell_mask

        stride = self.n + 1
        cells = np.argwhere(cell_mask.T)[:, ::-1]  # (i, j), ordered by j then i
        i, j = cells[:, 0], cells[:, 1]
        ll = j * stride + i
        lr = ll + 1
        ul = ll + stride
        ur = ul + 1
        lattice_elements = np.empty((2 * len(cells), 3), dtype=np.int64)
        lattice_elements[0::2] = np.column_stack([ll, lr, ur])
        lattice_elements[1::2] = np.column_stack([ll, ur, ul])

        self.lattice_ids = np.unique(lattice_elements)
        self.node_index = np.full(stride * stride, -1, dtype=np.int64)
        self.node_index[self.lattice_ids] = np.arange(len(self.lattice_ids))
        li = self.lattice_ids % stride
        lj = self.lattice_ids // stride
        self.node_lattice = np.column_stack([li, lj])
        self.nodes = np.column_stack([li / self.n, lj / self.n])
        self.elements = self.node_index[lattice_elements]

        self.cell_of_element = np.repeat(cells, 2, axis=0)
        element_types = np.tile([LOWER, UPPER], len(cells))
        lattice_element_ids = 2 * (j.repeat(2) * self.n + i.repeat(2)) + element_types
        self.element_index = np.full(2 * self.n * self.n, -1, dtype=np.int64)
        self.element_index[lattice_element_ids] = np.arange(len(self.elements))
        self.element_types = element_types

        self.boundary_flags = (
            (li == 0) | (li == self.n) | (lj == 0) | (lj == self.n))

        for array in (self.nodes, self.elements, self.cell_of_element,
                      self.boundary_flags, self.node_index, self.element_index):
            array.setflags(write=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def triangles(self, elements=None):
        """Vertex coordinates, shape ``(m, 3, 2)``."""
        if elements is None:
            return self.nodes[self.elements]
        return self.nodes[self.elements[elements]]

    def areas(self):
        return signed_areas(self.triangles())

    def barycenters(self):
        return self.triangles().mean(axis=1)

    def element_at(self, i, j, t):
        """Element index of lattice cell (i, j), type `LOWER` or `UPPER`."""
        return self.element_index[2 * (np.asarray(j) * self.n + np.asarray(i)) + t]

    def locate(self, points):
        """
        Elements containing points, -1 where the host cell is not meshed.

        Points on element boundaries are assigned to one of the adjacent
        lattice triangles, which may be unmeshed; pass interior points
        (e.g. barycenters) when that matters.
        """
        points = np.asarray(points, dtype=float)
        scaled = points * self.n
        cell = np.clip(np.floor(scaled).astype(np.int64), 0, self.n - 1)
        frac = scaled - cell
        t = np.where(frac[..., 0] >= frac[..., 1], LOWER, UPPER)
        return self.element_index[2 * (cell[..., 1] * self.n + cell[..., 0]) + t]

    def node_at(self, points, tol=COINCIDENCE_TOL):
        """
        Node indices of points lying on mesh nodes.

        Raises
        ------
        GeometryError
            If a point is farther than `tol` from the lattice or the lattice
            point is not a mesh node.
        """
        points = np.asarray(points, dtype=float)
        lattice = np.rint(points * self.n).astype(np.int64)
        mismatch = np.abs(lattice / self.n - points).max(axis=-1) if points.size else 0.0
        if np.any(mismatch > tol) or np.any(lattice < 0) or np.any(lattice > self.n):
            raise GeometryError("points do not coincide with lattice nodes")
        ids = self.node_index[lattice[..., 1] * (self.n + 1) + lattice[..., 0]]
        if np.any(ids < 0):
            raise GeometryError("lattice points are not nodes of this mesh")
        return ids


class CoarseMesh(LatticeMesh):
    """
    Coarse triangulation of the full unit square, ``H = 1 / n_cells_per_side``.
    """

    @property
    def n_cells_per_side(self):
        return self.n

    @property
    def H(self):
        return self.spacing


def build_square_mesh(n):
    """Full structured mesh of the unit square with `n` cells per side."""
    return LatticeMesh(n)


def build_coarse_mesh(n_cells_per_side):
    """
    Build the coarse mesh over (0,1)^2.

    Parameters
    ----------
    n_cells_per_side : int
        ``N_H``, at least 4 so that a two-layer frame leaves an interior.

    Returns
    -------
    CoarseMesh
        ``2 N_H^2`` elements and ``(N_H + 1)^2`` nodes.

    Raises
    ------
    MeshError
        If ``N_H < 4``.
    """
    if int(n_cells_per_side) != n_cells_per_side or n_cells_per_side < MIN_COARSE_CELLS:
        raise MeshError("coarse mesh needs at least %d cells per side, got %s"
                        % (MIN_COARSE_CELLS, n_cells_per_side))
    mesh = CoarseMesh(int(n_cells_per_side))
    logger.debug("coarse mesh: N_H=%d, %d elements" % (mesh.n, mesh.n_elements))
    return mesh


class DomainSplit():
    """
    Partition of the coarse cells into Omega_1 (fine FEM) and Omega_2
    (multiscale), with the coarse interface edges Gamma_H between them.

    Attributes
    ----------
    mesh : CoarseMesh
    layers : int
    omega1_cells, omega2_cells : ndarray of bool, shape (N_H, N_H)
    gamma_coarse_edges : ndarray of int, shape (m, 2)
        Coarse node ids of each interface edge, ordered by increasing
        coordinate along the edge.
    gamma_normals : ndarray, shape (m, 2)
        Unit normals oriented from Omega_1 into Omega_2.
    gamma_omega2_elements : ndarray of int, shape (m,)
        Coarse element of Omega_2 owning each edge.
    gamma_omega1_cells : ndarray of int, shape (m, 2)
        Omega_1 cell on the other side of each edge.
    gamma_rect : tuple of float or None
        ``(L H, 1 - L H)`` when Omega_2 is the plain interior square.
    """

    def __init__(self, mesh, layers, omega1_cells):
        self.mesh = mesh
        self.layers = int(layers)
        self.omega1_cells = np.asarray(omega1_cells, dtype=bool)
        self.omega2_cells = ~self.omega1_cells
        for array in (self.omega1_cells, self.omega2_cells):
            array.setflags(write=False)
        self._collect_interface()

        frame = frame_mask(mesh.n, self.layers)
        if np.array_equal(frame, self.omega1_cells):
            offset = self.layers * mesh.H
            self.gamma_rect = (offset, 1.0 - offset)
        else:
            self.gamma_rect = None

    def _collect_interface(self):
        n = self.mesh.n
        omega1 = self.omega1_cells
        edges = []
        normals = []
        elements = []
        cells1 = []
        # vertical edges x = i H between cells (i - 1, j) and (i, j)
        for i in range(1, n):
            for j in range(n):
                left, right = omega1[i - 1, j], omega1[i, j]
                if left == right:
                    continue
                a = self.mesh.node_index[j * (n + 1) + i]
                b = self.mesh.node_index[(j + 1) * (n + 1) + i]
                edges.append((a, b))
                if left:
                    normals.append((1.0, 0.0))
                    elements.append(self.mesh.element_at(i, j, UPPER))
                    cells1.append((i - 1, j))
                else:
                    normals.append((-1.0, 0.0))
                    elements.append(self.mesh.element_at(i - 1, j, LOWER))
                    cells1.append((i, j))
        # horizontal edges y = j H between cells (i, j - 1) and (i, j)
        for j in range(1, n):
            for i in range(n):
                below, above = omega1[i, j - 1], omega1[i, j]
                if below == above:
                    continue
                a = self.mesh.node_index[j * (n + 1) + i]
                b = self.mesh.node_index[j * (n + 1) + i + 1]
                edges.append((a, b))
                if below:
                    normals.append((0.0, 1.0))
                    elements.append(self.mesh.element_at(i, j, LOWER))
                    cells1.append((i, j - 1))
                else:
                    normals.append((0.0, -1.0))
                    elements.append(self.mesh.element_at(i, j - 1, UPPER))
                    cells1.append((i, j))
        self.gamma_coarse_edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        self.gamma_normals = np.array(normals, dtype=float).reshape(-1, 2)
        self.gamma_omega2_elements = np.array(elements, dtype=np.int64)
        self.gamma_omega1_cells = np.array(cells1, dtype=np.int64).reshape(-1, 2)

    @property
    def omega2_elements(self):
        """Coarse element indices lying in Omega_2."""
        cells = self.mesh.cell_of_element
        return np.nonzero(self.omega2_cells[cells[:, 0], cells[:, 1]])[0]

    @property
    def omega1_elements(self):
        cells = self.mesh.cell_of_element
        return np.nonzero(self.omega1_cells[cells[:, 0], cells[:, 1]])[0]

    @property
    def omega2_nodes(self):
        """Coarse node indices of the closure of Omega_2, sorted."""
        return np.unique(self.mesh.elements[self.omega2_elements])

    def gamma_length(self):
        ends = self.mesh.nodes[self.gamma_coarse_edges]
        return float(np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1).sum())

    def element_in_omega2(self, element):
        i, j = self.mesh.cell_of_element[element]
        return bool(self.omega2_cells[i, j])


def frame_mask(n, layers):
    """Cells within `layers` cells of the boundary ring."""
    index = np.arange(n)
    ring = np.minimum(index, n - 1 - index)
    return np.minimum.outer(ring, ring) < layers


def cells_intersecting(mesh, rectangle):
    """
    Cells whose open square overlaps the open axis-aligned `rectangle`.

    Parameters
    ----------
    mesh : LatticeMesh
    rectangle : tuple
        ``(x0, y0, x1, y1)``.
    """
    x0, y0, x1, y1 = rectangle
    lower = np.arange(mesh.n) / mesh.n
    upper = np.arange(1, mesh.n + 1) / mesh.n
    in_x = (lower < x1) & (upper > x0)
    in_y = (lower < y1) & (upper > y0)
    return np.logical_and.outer(in_x, in_y)


def split_domain(mesh, layers=2, extra_omega1_cells=None):
    """
    Split the coarse cells into the boundary frame Omega_1 and interior
    Omega_2.

    Parameters
    ----------
    mesh : CoarseMesh
    layers : int
        Frame width in coarse cells; ``dist(Gamma, boundary) = layers * H``.
    extra_omega1_cells : ndarray of bool, optional
        Additional cells assigned to Omega_1 (channels).

    Returns
    -------
    DomainSplit

    Raises
    ------
    MeshError
        If ``2 * layers >= N_H`` or Omega_2 ends up empty.
    """
    if layers < 1:
        raise MeshError("layers must be positive, got %s" % layers)
    if 2 * layers >= mesh.n:
        raise MeshError("a %d-layer frame leaves no interior on %d cells per side"
                        % (layers, mesh.n))
    omega1 = frame_mask(mesh.n, layers)
    if extra_omega1_cells is not None:
        omega1 = omega1 | np.asarray(extra_omega1_cells, dtype=bool)
    if omega1.all():
        raise MeshError("Omega_2 is empty after assigning channel cells to Omega_1")
    split = DomainSplit(mesh, layers, omega1)
    logger.info("domain split: %d Omega_1 cells, %d Omega_2 cells, %d interface edges" % (
        omega1.sum(), split.omega2_cells.sum(), len(split.gamma_coarse_edges)))
    return split


class FineMesh(LatticeMesh):
    """
    Fine mesh of the closure of Omega_1.

    Attributes
    ----------
    split : DomainSplit
    ratio : int
        ``H / h``.
    dirichlet_flags : ndarray of bool
        Nodes on the boundary of the unit square.
    gamma_fine_edges : ndarray of int, shape (m, 2)
        Fine edges on Gamma in pairing order (coarse interface edge by edge,
        along each edge).
    """

    def __init__(self, split, n_h):
        self.split = split
        self.ratio = n_h // split.mesh.n
        cell_mask = np.repeat(np.repeat(split.omega1_cells, self.ratio, axis=0),
                              self.ratio, axis=1)
        super().__init__(n_h, cell_mask)
        self.dirichlet_flags = self.boundary_flags
        self.gamma_fine_edges = self._interface_edges()

    @property
    def h(self):
        return self.spacing

    def _interface_edges(self):
        coarse = self.split.mesh
        edges = []
        for a, b in self.split.gamma_coarse_edges:
            start = coarse.node_lattice[a] * self.ratio
            step = np.sign(coarse.node_lattice[b] - coarse.node_lattice[a])
            k = np.arange(self.ratio)[:, None]
            first = start + k * step
            second = first + step
            stride = self.n + 1
            ids_a = self.node_index[first[:, 1] * stride + first[:, 0]]
            ids_b = self.node_index[second[:, 1] * stride + second[:, 0]]
            edges.append(np.column_stack([ids_a, ids_b]))
        if not edges:
            return np.empty((0, 2), dtype=np.int64)
        return np.vstack(edges)


def build_frame_fine_mesh(split, n_h):
    """
    Build the fine mesh of Omega_1 with ``h = 1 / n_h``.

    Raises
    ------
    MeshError
        If `n_h` is not a multiple of ``N_H`` (Gamma_h would not refine
        Gamma_H) or ``h >= H``.
    """
    n_coarse = split.mesh.n
    if n_h % n_coarse != 0:
        raise MeshError("fine cells %d not divisible by coarse cells %d" % (n_h, n_coarse))
    if n_h <= n_coarse:
        raise MeshError("fine mesh must be finer than the coarse mesh")
    fine = FineMesh(split, n_h)
    if np.any(fine.gamma_fine_edges < 0):
        raise GeometryError("interface fine edge missing from the Omega_1 mesh")
    logger.info("fine mesh: h=1/%d, %d nodes, %d elements, %d interface edges" % (
        n_h, fine.n_nodes, fine.n_elements, len(fine.gamma_fine_edges)))
    return fine


PairingEntry = namedtuple(
    "PairingEntry",
    ["fine_edge", "fine_element", "coarse_edge", "coarse_element", "normal", "length"])


class InterfacePairing():
    """
    Fine interface edges matched with the coarse edges containing them.

    Attributes
    ----------
    fine_edges : ndarray of int, shape (m, 2)
    fine_elements : ndarray of int, shape (m,)
        Element of the fine mesh (Omega_1) owning each fine edge.
    coarse_edges : ndarray of int, shape (m, 2)
    coarse_elements : ndarray of int, shape (m,)
        Coarse element (Omega_2) owning the coarse edge.
    normals : ndarray, shape (m, 2)
        Oriented from Omega_1 into Omega_2.
    lengths : ndarray, shape (m,)
    coarse_edge_index : ndarray of int, shape (m,)
        Row of the coarse edge in ``split.gamma_coarse_edges``.
    """

    def __init__(self, fine_edges, fine_elements, coarse_edges, coarse_elements,
                 normals, lengths, coarse_edge_index):
        self.fine_edges = fine_edges
        self.fine_elements = fine_elements
        self.coarse_edges = coarse_edges
        self.coarse_elements = coarse_elements
        self.normals = normals
        self.lengths = lengths
        self.coarse_edge_index = coarse_edge_index

    def __len__(self):
        return len(self.fine_edges)

    def __getitem__(self, k):
        return PairingEntry(tuple(self.fine_edges[k]), int(self.fine_elements[k]),
                            tuple(self.coarse_edges[k]), int(self.coarse_elements[k]),
                            tuple(self.normals[k]), float(self.lengths[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]


def pair_interface(split, fine, coarse):
    """
    Match every fine edge of Gamma_h with its coarse edge of Gamma_H.

    Raises
    ------
    GeometryError
        If a fine edge does not lie on its coarse edge within
        `COINCIDENCE_TOL`, or no Omega_1 fine element owns it.
    """
    if fine.split is not split or split.mesh is not coarse:
        raise MeshError("fine and coarse meshes do not come from the same split")
    r = fine.ratio
    n = fine.n
    fine_elements = []
    for g, (a, b) in enumerate(split.gamma_coarse_edges):
        start = coarse.node_lattice[a] * r
        step = np.sign(coarse.node_lattice[b] - coarse.node_lattice[a])
        normal = split.gamma_normals[g]
        k = np.arange(r)
        if step[0]:
            # horizontal edge at fine row J
            columns = start[0] + k
            row = start[1]
            if normal[1] > 0:
                owners = fine.element_at(columns, row - 1, UPPER)
            else:
                owners = fine.element_at(columns, row, LOWER)
        else:
            rows = start[1] + k
            column = start[0]
            if normal[0] > 0:
                owners = fine.element_at(column - 1, rows, LOWER)
            else:
                owners = fine.element_at(column, rows, UPPER)
        fine_elements.append(np.asarray(owners))
    fine_elements = np.concatenate(fine_elements) if fine_elements else np.empty(0, np.int64)
    if np.any(fine_elements < 0):
        raise GeometryError("interface fine edge has no owning Omega_1 element")

    fine_edges = fine.gamma_fine_edges
    coarse_edge_index = np.repeat(np.arange(len(split.gamma_coarse_edges)), r)
    coarse_edges = split.gamma_coarse_edges[coarse_edge_index]
    coarse_elements = split.gamma_omega2_elements[coarse_edge_index]
    normals = split.gamma_normals[coarse_edge_index]

    # the fine edge must sit on its coarse edge at the expected position
    start = coarse.nodes[coarse_edges[:, 0]]
    end = coarse.nodes[coarse_edges[:, 1]]
    k = np.tile(np.arange(r), len(split.gamma_coarse_edges))[:, None]
    expected_a = start + (end - start) * (k / r)
    expected_b = start + (end - start) * ((k + 1) / r)
    actual = fine.nodes[fine_edges]
    mismatch = max(np.abs(actual[:, 0] - expected_a).max(initial=0.0),
                   np.abs(actual[:, 1] - expected_b).max(initial=0.0))
    if mismatch > COINCIDENCE_TOL:
        raise GeometryError("fine interface edge off its coarse edge by %.3e" % mismatch)
    owner_vertices = fine.elements[fine_elements]
    on_owner = ((owner_vertices == fine_edges[:, :1]).any(axis=1)
                & (owner_vertices == fine_edges[:, 1:]).any(axis=1))
    if not on_owner.all():
        raise GeometryError("fine interface edge is not an edge of its owning element")

    lengths = np.linalg.norm(actual[:, 1] - actual[:, 0], axis=1)
    pairing = InterfacePairing(fine_edges, fine_elements, coarse_edges, coarse_elements,
                               normals, lengths, coarse_edge_index)
    logger.info("interface pairing: %d fine edges on %d coarse edges" % (
        len(pairing), len(split.gamma_coarse_edges)))
    return pairing


class SubMesh():
    """
    Uniform refinement of a parent triangle into ``n_sub**2`` triangles.

    Node ``(i, j)`` with ``i + j <= n_sub`` sits at
    ``v0 + (i / n_sub)(v1 - v0) + (j / n_sub)(v2 - v0)``; upward elements are
    ``(i, j), (i+1, j), (i, j+1)`` and downward ones
    ``(i+1, j), (i+1, j+1), (i, j+1)``.

    Attributes
    ----------
    parent : ndarray, shape (3, 2)
    n_sub : int
    nodes : ndarray, shape ((n_sub+1)(n_sub+2)/2, 2)
    node_lattice : ndarray of int, shape (n_nodes, 2)
    elements : ndarray of int, shape (n_sub**2, 3)
    boundary_flags : ndarray of bool
    """

    def __init__(self, parent, n_sub):
        self.parent = np.array(parent, dtype=float).reshape(3, 2)
        self.n_sub = int(n_sub)
        n = self.n_sub
        # rows are j, so nonzero() yields nodes ordered by j then i
        jj, ii = np.nonzero(np.add.outer(np.arange(n + 1), np.arange(n + 1)) <= n)
        self.node_lattice = np.column_stack([ii, jj])
        v0, v1, v2 = self.parent
        self.nodes = v0 + np.outer(ii / n, v1 - v0) + np.outer(jj / n, v2 - v0)
        self.boundary_flags = (ii == 0) | (jj == 0) | (ii + jj == n)
        # exact values of the parent's hat functions at the nodes
        self.parent_coordinates = np.column_stack([1.0 - ii / n - jj / n, ii / n, jj / n])
        self.parent_coordinates[ii + jj == n, 0] = 0.0

        # each upward cell is followed by its downward neighbour, if any
        cj, ci = np.nonzero(np.add.outer(np.arange(n), np.arange(n)) <= n - 1)
        has_down = ci + cj <= n - 2
        counts = 1 + has_down
        up_ids = np.cumsum(counts) - counts
        down_ids = up_ids[has_down] + 1
        self.elements = np.empty((counts.sum(), 3), dtype=np.int64)
        self.elements[up_ids] = np.column_stack([
            self.node_id(ci, cj), self.node_id(ci + 1, cj), self.node_id(ci, cj + 1)])
        di, dj = ci[has_down], cj[has_down]
        self.elements[down_ids] = np.column_stack([
            self.node_id(di + 1, dj), self.node_id(di + 1, dj + 1), self.node_id(di, dj + 1)])
        self._up = np.full((n, n), -1, dtype=np.int64)
        self._down = np.full((n, n), -1, dtype=np.int64)
        self._up[ci, cj] = up_ids
        self._down[di, dj] = down_ids

    def node_id(self, i, j):
        """Index of lattice node (i, j)."""
        n = self.n_sub
        i = np.asarray(i)
        j = np.asarray(j)
        return j * (n + 1) - (j * (j - 1)) // 2 + i

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def triangles(self):
        return self.nodes[self.elements]

    def areas(self):
        return signed_areas(self.triangles())

    def lattice_coordinates(self, points):
        """Coordinates of points in units of the sub-lattice, ``(a, b)``."""
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        coords = barycentric(np.broadcast_to(self.parent, (1, 3, 2)),
                             points.reshape(1, -1, 2))[0]
        return (coords[:, 1:] * self.n_sub).reshape(shape + (2,))

    def locate(self, points):
        """
        Host sub-element and barycentric coordinates of points.

        Points on shared edges go to one of the adjacent elements; points
        slightly outside the parent are extrapolated from the nearest
        boundary element.

        Returns
        -------
        elements : ndarray of int, shape (m,)
        weights : ndarray, shape (m, 3)
        """
        n = self.n_sub
        ab = self.lattice_coordinates(np.asarray(points, dtype=float).reshape(-1, 2))
        snapped = np.rint(ab)
        ab = np.where(np.abs(ab - snapped) < 1e-9, snapped, ab)
        cell = np.clip(np.floor(ab).astype(np.int64), 0, n - 1)
        overflow = cell[:, 0] + cell[:, 1] - (n - 1)
        cell[:, 0] -= np.maximum(overflow, 0)
        cell[:, 0] = np.maximum(cell[:, 0], 0)
        frac = ab - cell
        i, j = cell[:, 0], cell[:, 1]
        down = (frac.sum(axis=1) > 1.0) & (i + j <= n - 2)
        elements = np.where(down, self._down[i, j], self._up[i, j])
        fa, fb = frac[:, 0], frac[:, 1]
        weights = np.where(
            down[:, None],
            np.column_stack([1.0 - fb, fa + fb - 1.0, 1.0 - fa]),
            np.column_stack([1.0 - fa - fb, fa, fb]))
        return elements, weights

    def interpolate(self, values, points):
        """
        Evaluate the P1 function with nodal `values` at `points`.

        `values` may carry trailing dimensions (several functions).
        """
        values = np.asarray(values, dtype=float)
        elements, weights = self.locate(points)
        vertex_values = values[self.elements[elements]]
        return np.einsum("mk,mk...->m...", weights, vertex_values)

    def find_nodes(self, points, tol=COINCIDENCE_TOL):
        """
        Node indices of points coinciding with sub-mesh nodes.

        Raises
        ------
        GeometryError
            If any point is farther than `tol` from its nearest node.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        ab = np.rint(self.lattice_coordinates(points)).astype(np.int64)
        valid = (ab >= 0).all(axis=1) & (ab.sum(axis=1) <= self.n_sub)
        if not valid.all():
            raise GeometryError("points outside the parent triangle")
        ids = self.node_id(ab[:, 0], ab[:, 1])
        mismatch = np.abs(self.nodes[ids] - points).max(initial=0.0)
        if mismatch > tol:
            raise GeometryError("sub-mesh node misaligned by %.3e" % mismatch)
        return ids

    def boundary_edge_elements(self, node_a, node_b):
        """Sub-elements owning boundary edges given by their node indices."""
        la = self.node_lattice[np.asarray(node_a)]
        lb = self.node_lattice[np.asarray(node_b)]
        lo = np.minimum(la, lb)
        return self._up[lo[..., 0], lo[..., 1]]


def refine_triangle(parent, n_sub):
    """
    Uniformly refine a triangle.

    Parameters
    ----------
    parent : array_like, shape (3, 2)
    n_sub : int
        Subdivisions per edge, at least 1.

    Returns
    -------
    SubMesh
        ``n_sub**2`` elements, ``(n_sub+1)(n_sub+2)/2`` nodes.
    """
    if int(n_sub) != n_sub or n_sub < 1:
        raise MeshError("n_sub must be a positive integer, got %s" % n_sub)
    return SubMesh(parent, n_sub)


def dilate_triangle(vertices, scale):
    """Dilate a triangle about its barycenter by `scale`."""
    vertices = np.asarray(vertices, dtype=float)
    center = vertices.mean(axis=0)
    return center + scale * (vertices - center)


class OversamplingPatch():
    """
    Oversampling simplex S built around a coarse element K.

    Attributes
    ----------
    base_element : int
    base_vertices : ndarray, shape (3, 2)
    scale : float
    vertices : ndarray, shape (3, 2)
        K dilated about its barycenter by `scale`.
    """

    def __init__(self, base_element, base_vertices, scale):
        self.base_element = int(base_element)
        self.base_vertices = np.asarray(base_vertices, dtype=float)
        self.scale = float(scale)
        self.vertices = dilate_triangle(self.base_vertices, self.scale)

    def margin(self):
        """Distance from K to the boundary of S."""
        edges = np.roll(self.vertices, -1, axis=0) - self.vertices
        distances = []
        for k in range(3):
            normal = np.array([edges[k, 1], -edges[k, 0]]) / np.linalg.norm(edges[k])
            distances.append(np.abs((self.base_vertices - self.vertices[k]) @ normal).min())
        return float(min(distances))


def make_oversampling_patch(mesh, element, scale=3.0, split=None):
    """
    Build the oversampling patch of a coarse element.

    Parameters
    ----------
    mesh : CoarseMesh
    element : int
    scale : float
        Dilation factor, strictly greater than 1.
    split : DomainSplit, optional
        When given, `element` must lie in Omega_2.

    Raises
    ------
    MeshError
        If ``scale <= 1`` or the element is not in Omega_2.
    GeometryError
        If the patch leaves the unit square.
    """
    if scale <= 1.0:
        raise MeshError("oversampling scale must exceed 1, got %s" % scale)
    if split is not None and not split.element_in_omega2(element):
        raise MeshError("element %d is not in Omega_2" % element)
    patch = OversamplingPatch(element, mesh.triangles([element])[0], scale)
    if (patch.vertices.min() < -COINCIDENCE_TOL
            or patch.vertices.max() > 1.0 + COINCIDENCE_TOL):
        raise GeometryError(
            "oversampling patch of element %d leaves the domain; "
            "raise layers or lower the oversampling scale" % element)
    return patch


def dump_mesh(mesh, file_path):
    """Write ``nodes:`` and ``elements:`` listings for debugging."""
    with open(file_path, "w", encoding="utf-8") as f:
        f.write("nodes:\n")
        for k, (x, y) in enumerate(mesh.nodes):
            f.write("%d %r %r\n" % (k, float(x), float(y)))
        f.write("elements:\n")
        for k, (a, b, c) in enumerate(mesh.elements):
            f.write("%d %d %d %d\n" % (k, a, b, c))
