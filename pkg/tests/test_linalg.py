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

import numpy as np
import pytest
import scipy.sparse as sp

from mslab import linalg
from mslab.exceptions import SingularMatrixError, SolverError
from mslab.linalg import SolverSettings


def _laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def _random_spd(rng, n):
    q = rng.standard_normal((n, n))
    return q @ q.T + n * np.eye(n)


def test_from_triplets_sums_duplicates():
    matrix = linalg.from_triplets(2, 3, [(0, 0, 1.0), (0, 0, 2.5), (1, 2, -1.0), (1, 1, 0.0)])
    assert matrix.shape == (2, 3)
    assert np.array_equal(matrix.toarray(), [[3.5, 0.0, 0.0], [0.0, 0.0, -1.0]])
    assert linalg.from_triplets(2, 2, []).nnz == 0


def test_from_arrays_checks_indices():
    with pytest.raises(IndexError):
        linalg.from_arrays(2, 2, [0, 2], [0, 0], [1.0, 1.0])
    with pytest.raises(ValueError):
        linalg.from_arrays(2, 2, [0, 1], [0], [1.0, 1.0])


@pytest.mark.parametrize("preconditioner", ["jacobi", "none"])
def test_cg_solves_spd_system(rng, preconditioner):
    matrix = _laplacian_1d(100)
    expected = rng.standard_normal(100)
    x, report = linalg.cg(matrix, matrix @ expected, rtol=1e-10, preconditioner=preconditioner)
    assert report.converged
    assert report.method == "cg"
    assert report.residual <= 1e-10
    assert np.allclose(x, expected, atol=1e-5)


def test_bicgstab_solves_nonsymmetric_system(rng):
    n = 100
    matrix = sp.diags([-1.3 * np.ones(n - 1), 4.0 * np.ones(n), -0.7 * np.ones(n - 1)],
                      [-1, 0, 1]).tocsr()
    expected = rng.standard_normal(n)
    x, report = linalg.bicgstab(matrix, matrix @ expected, rtol=1e-12)
    assert report.converged and not report.breakdown
    assert np.allclose(x, expected, atol=1e-8)


def test_zero_rhs_returns_zero():
    x, report = linalg.cg(_laplacian_1d(10), np.zeros(10))
    assert np.array_equal(x, np.zeros(10))
    assert report.converged and report.iterations == 0


def test_non_convergence_is_reported_not_raised():
    matrix = _laplacian_1d(400)
    x, report = linalg.cg(matrix, np.ones(400), rtol=1e-12, maxit=5)
    assert not report.converged
    assert report.iterations <= 5
    assert report.residual > 1e-12


def test_solve_raises_on_non_convergence():
    settings = SolverSettings(rtol=1e-12, maxit=3, fallback="none")
    with pytest.raises(SolverError) as info:
        linalg.solve(_laplacian_1d(400), np.ones(400), settings, label="stiffness")
    assert info.value.report is not None
    assert not info.value.report.converged
    assert "stiffness" in str(info.value)


def test_stalled_solve_falls_back_to_direct():
    matrix = _laplacian_1d(400)
    rhs = np.ones(400)
    x, report = linalg.solve(matrix, rhs, SolverSettings(rtol=1e-12, maxit=3), label="stiffness")
    assert report.method == "cg+direct"
    assert report.iterations <= 3
    assert report.converged
    assert report.residual < 1e-12
    assert np.allclose(x, linalg.direct_solve(matrix, rhs))


def test_solve_direct_and_multiple_rhs(rng):
    matrix = sp.csr_matrix(_random_spd(rng, 30))
    rhs = rng.standard_normal((30, 3))
    expected = np.linalg.solve(matrix.toarray(), rhs)
    x, report = linalg.solve(matrix, rhs, SolverSettings(kind="direct"))
    assert report.method == "direct"
    assert np.allclose(x, expected)
    x, report = linalg.solve(matrix, rhs, SolverSettings(rtol=1e-12))
    assert x.shape == (30, 3)
    assert np.allclose(x, expected, atol=1e-8)


def test_dense_solve(rng):
    matrix = _random_spd(rng, 12)
    rhs = rng.standard_normal(12)
    assert np.allclose(linalg.dense_solve(matrix, rhs), np.linalg.solve(matrix, rhs))


def test_dense_solve_rejects_singular_and_large():
    with pytest.raises(SingularMatrixError):
        linalg.dense_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))
    with pytest.raises(ValueError):
        linalg.dense_solve(np.eye(linalg.DENSE_MAX + 1), np.ones(linalg.DENSE_MAX + 1))


def test_lanczos_bounds_smallest_eigenvalue(rng):
    matrix = sp.csr_matrix(_random_spd(rng, 120))
    exact = np.linalg.eigvalsh(matrix.toarray())
    ritz = linalg.lanczos_ritz(matrix, steps=40, seed=1)
    assert np.all(np.diff(ritz) >= 0)
    assert ritz[0] >= exact[0] - 1e-8
    assert ritz[-1] <= exact[-1] + 1e-8
    full = linalg.lanczos_ritz(matrix, steps=120, seed=1)
    assert full[0] == pytest.approx(exact[0], rel=1e-6)


def test_asymmetry_measures():
    symmetric = _laplacian_1d(20)
    assert linalg.relative_asymmetry(symmetric) == 0.0
    assert linalg.symmetry_defect(symmetric) < 1e-14
    skewed = symmetric + sp.csr_matrix(([0.5], ([0], [1])), shape=(20, 20))
    assert linalg.relative_asymmetry(skewed) == pytest.approx(0.25)
    assert linalg.symmetry_defect(skewed) > 1e-6


def test_coo_save_and_load(tmp_path):
    matrix = sp.random(15, 9, density=0.3, random_state=4, format="csr")
    file_path = tmp_path / "matrix.coo"
    linalg.save_coo(matrix, str(file_path))
    loaded = linalg.load_coo(str(file_path))
    assert loaded.shape == (15, 9)
    assert np.array_equal(loaded.toarray(), matrix.toarray())
