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
Closed-form and brute-force references used by the tests.
"""

import numpy as np
from scipy import integrate

from mslab import fem


def _odd(terms):
    return np.arange(1, 2 * terms, 2, dtype=float)


def rectangle_series(points, a=1.0, b=1.0, terms=200):
    """
    Solution of ``-Laplace(u) = 1`` on ``(0, a) x (0, b)`` with zero boundary
    values, by its double sine series over odd modes.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = _odd(terms)
    n = _odd(terms)
    eigen = np.add.outer((m * np.pi / a) ** 2, (n * np.pi / b) ** 2)
    coefficient = 16.0 / (np.pi ** 2 * np.outer(m, n) * eigen)
    sx = np.sin(np.outer(points[:, 0], m) * np.pi / a)
    sy = np.sin(np.outer(points[:, 1], n) * np.pi / b)
    return np.einsum("pm,mn,pn->p", sx, coefficient, sy)


def laplace_series(points, terms=200):
    """``-Laplace(u) = 1`` on the unit square."""
    return rectangle_series(points, 1.0, 1.0, terms)


def laplace_energy(terms=1000):
    """``int |grad u|^2 = int u`` for ``-Laplace(u) = 1`` on the unit square."""
    m = _odd(terms)
    mm, nn = np.meshgrid(m, m, indexing="ij")
    return float(np.sum(64.0 / (np.pi ** 6 * mm ** 2 * nn ** 2 * (mm ** 2 + nn ** 2))))


def harmonic_mean(profile):
    """``1 / int_0^1 1 / a(t) dt`` by adaptive quadrature."""
    value, _ = integrate.quad(lambda t: 1.0 / profile(t), 0.0, 1.0, epsabs=1e-13, limit=200)
    return 1.0 / value


def arithmetic_mean(profile):
    value, _ = integrate.quad(profile, 0.0, 1.0, epsabs=1e-13, limit=200)
    return value


def dense_stiffness(mesh, field, quad=3):
    """Global stiffness matrix assembled element by element into a dense array."""
    bary, weights = fem.QUADRATURE[quad]
    matrix = np.zeros((mesh.n_nodes, mesh.n_nodes))
    for vertices in mesh.elements:
        corners = mesh.nodes[vertices]
        jacobian = np.column_stack([corners[1] - corners[0], corners[2] - corners[0]])
        area = 0.5 * abs(np.linalg.det(jacobian))
        reference = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        gradients = reference @ np.linalg.inv(jacobian)
        mean_a = sum(w * field(b @ corners) for b, w in zip(bary, weights))
        local = area * mean_a * gradients @ gradients.T
        for r in range(3):
            for c in range(3):
                matrix[vertices[r], vertices[c]] += local[r, c]
    return matrix
