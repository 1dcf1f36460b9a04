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

from mslab import linalg
from mslab.coeff import Constant, LayeredAnalytic, Overlay, PeriodicField
from mslab.config import parse_config
from mslab.coupling import (FE_MSFEM, METHODS, MIXED, MSFEM, REFERENCE, PenaltyParams,
                            assemble_fe_msfem, build_discretization, dump_interface_terms,
                            interface_terms, solve_fe_msfem, solve_method, trace_data)
from mslab.exceptions import MeshError
from mslab.msbasis import OVERSAMPLING, build_bases

CENTRE_VALUE = 0.0736713532814


def _bases(disc, field, n_sub=None):
    return build_bases(disc.coarse, disc.split.omega2_elements, field,
                       n_sub or disc.fine.ratio, OVERSAMPLING, 3.0, disc.split)


def _assemble(disc, field, params, rho=None):
    rho = disc.fine.h if rho is None else rho
    return assemble_fe_msfem(disc.split, disc.fine, disc.coarse, disc.pairing,
                             _bases(disc, field), field, 1.0, params, rho)


@pytest.fixture(scope="module")
def layered_discretization():
    field = LayeredAnalytic("mild", 0.125)
    return field, build_discretization(field, 6, 24, 48, layers=2)


def test_penalty_params_validation():
    with pytest.raises(ValueError):
        PenaltyParams(beta=2)
    with pytest.raises(ValueError):
        PenaltyParams(gamma0=0.0)
    with pytest.raises(ValueError):
        PenaltyParams(gamma1=-0.1)
    with pytest.raises(ValueError):
        PenaltyParams(rho_mode="diameter")
    with pytest.raises(ValueError):
        PenaltyParams(rho_mode="explicit")
    assert PenaltyParams(rho_mode="explicit", rho_value=0.02).label() == "0.02"


def test_rho_resolution():
    assert PenaltyParams().resolve_rho(epsilon=0.01, h=0.001) == 0.01
    assert PenaltyParams(rho_mode="h").resolve_rho(epsilon=0.01, h=0.001) == 0.001
    assert PenaltyParams(rho_mode="explicit", rho_value=0.5).resolve_rho() == 0.5
    with pytest.raises(ValueError):
        PenaltyParams().resolve_rho(h=0.001)


def test_interface_terms_vanish_on_continuous_linears(small_discretization):
    disc = small_discretization
    field = Constant(1.0)
    traces = trace_data(disc.pairing, disc.fine, disc.coarse, _bases(disc, field), field)
    assert len(traces) == len(disc.pairing)
    assert traces.weights.sum() == pytest.approx(disc.split.gamma_length())

    def linear(points):
        return 1.0 + points[..., 0] + 2.0 * points[..., 1]

    local = np.concatenate([linear(disc.fine.nodes[traces.fine_nodes]),
                            linear(disc.coarse.nodes[traces.coarse_nodes])], axis=1)
    terms = interface_terms(traces)
    for name in ("jump", "flux_jump", "symmetry"):
        assert np.abs(np.einsum("mde,me->md", terms[name], local)).max() < 1e-10
    # the flux average of x + 2y is its normal derivative
    consistency = np.einsum("mde,me->md", terms["consistency"], local)
    assert np.abs(consistency).max() > 1e-6


def test_traces_agree_for_continuous_linears(small_discretization):
    disc = small_discretization
    field = Constant(1.0)
    traces = trace_data(disc.pairing, disc.fine, disc.coarse, _bases(disc, field), field)
    fine_nodal = disc.fine.nodes[:, 0] - disc.fine.nodes[:, 1]
    coarse_nodal = disc.coarse.nodes[:, 0] - disc.coarse.nodes[:, 1]
    fine_trace = np.einsum("mqk,mk->mq", traces.fine_values, fine_nodal[traces.fine_nodes])
    coarse_trace = np.einsum("mqk,mk->mq", traces.coarse_values,
                             coarse_nodal[traces.coarse_nodes])
    assert np.allclose(fine_trace, coarse_trace, atol=1e-12)
    assert np.allclose(fine_trace, traces.points[..., 0] - traces.points[..., 1], atol=1e-12)


def test_basis_resolution_must_match(small_discretization):
    disc = small_discretization
    field = Constant(1.0)
    bases = _bases(disc, field, n_sub=2)
    with pytest.raises(MeshError):
        assemble_fe_msfem(disc.split, disc.fine, disc.coarse, disc.pairing, bases, field, 1.0,
                          PenaltyParams(rho_mode="h"), disc.fine.h)
    with pytest.raises(MeshError):
        assemble_fe_msfem(disc.split, disc.fine, disc.coarse, disc.pairing, {}, field, 1.0,
                          PenaltyParams(rho_mode="h"), disc.fine.h)


def test_symmetric_variant_is_symmetric(layered_discretization):
    field, disc = layered_discretization
    system = _assemble(disc, field, PenaltyParams(rho_mode="h"))
    assert system.symmetric
    assert linalg.relative_asymmetry(system.matrix) < 1e-12
    assert system.n_dofs == system.n_fine + len(disc.split.omega2_nodes)


def test_symmetric_variant_converges_with_cg(layered_discretization):
    field, disc = layered_discretization
    params = PenaltyParams(rho_mode="h")
    solution = solve_fe_msfem(disc.split, disc.fine, disc.coarse, disc.pairing,
                              _bases(disc, field), field, 1.0, params, disc.fine.h)
    assert solution.report.method == "cg"
    assert solution.report.converged
    assert np.all(solution.fine_values[disc.fine.dirichlet_flags] == 0.0)
    outside = np.setdiff1d(np.arange(disc.coarse.n_nodes), disc.split.omega2_nodes)
    assert np.all(solution.coarse_values[outside] == 0.0)
    assert solution.coarse_values.max() > 0.0


def test_coercivity_grows_with_value_penalty(small_discretization):
    disc = small_discretization
    minima = []
    for gamma0 in (5.0, 20.0, 100.0):
        system = _assemble(disc, Constant(1.0), PenaltyParams(gamma0=gamma0, rho_mode="h"))
        dense = system.matrix.toarray()
        minima.append(np.linalg.eigvalsh(0.5 * (dense + dense.T))[0])
        ritz = linalg.lanczos_ritz(system.matrix, steps=50)
        assert ritz[0] >= minima[-1] - 1e-8
        assert ritz[0] > 0
    assert minima[0] > 0
    assert minima[0] <= minima[1] <= minima[2]


def test_nonsymmetric_variant_uses_bicgstab(layered_discretization):
    field, disc = layered_discretization
    params = PenaltyParams(beta=-1, rho_mode="h")
    system = _assemble(disc, field, params)
    assert not system.symmetric
    assert linalg.relative_asymmetry(system.matrix) > 1e-6
    solution = solve_fe_msfem(disc.split, disc.fine, disc.coarse, disc.pairing,
                              _bases(disc, field), field, 1.0, params, disc.fine.h)
    assert solution.report.method == "bicgstab"
    assert solution.report.converged


def test_nonsymmetric_form_is_positive_on_random_vectors(small_discretization, rng):
    disc = small_discretization
    system = _assemble(disc, Constant(1.0), PenaltyParams(beta=-1, rho_mode="h"))
    for _ in range(100):
        fine_values = rng.standard_normal(disc.fine.n_nodes)
        coarse_values = rng.standard_normal(disc.coarse.n_nodes)
        v = system.join_vector(fine_values, coarse_values)
        assert v.shape == (system.n_dofs,)
        assert v @ (system.matrix @ v) > 0.0


def test_channels_join_omega1():
    field = Overlay(PeriodicField(0.125), [((0.08, 0.49, 0.92, 0.51), 1e5)])
    disc = build_discretization(field, 8, 32, 64, layers=2)
    assert disc.split.gamma_rect is None
    assert disc.split.omega2_cells.sum() == 8
    plain = build_discretization(Overlay(PeriodicField(0.125), [((0.4, 0.4, 0.6, 0.6), 2.0)]),
                                 8, 32, 64, layers=2)
    assert plain.split.omega2_cells.sum() == 16


@pytest.mark.parametrize("method", METHODS)
def test_methods_agree_with_laplace_solution(small_config, method):
    config = parse_config(small_config(methods=", ".join(METHODS)))
    solution = solve_method(method, config, field=Constant(1.0))
    if method == REFERENCE:
        mesh = solution.mesh
        centre = solution.values[mesh.node_at(np.array([[0.5, 0.5]]))[0]]
    else:
        centre = solution.coarse_values[solution.coarse.node_at(np.array([[0.5, 0.5]]))[0]]
    assert centre == pytest.approx(CENTRE_VALUE, abs=5e-3)
    assert solution.wall_time >= 0.0


def test_mixed_and_msfem_coincide_for_constant_coefficient(small_config):
    config = parse_config(small_config(methods="msfem, mixed"))
    standard = solve_method(MSFEM, config, field=Constant(1.0))
    mixed = solve_method(MIXED, config, field=Constant(1.0))
    assert mixed.kind == MIXED
    assert np.allclose(standard.coarse_values, mixed.coarse_values, atol=1e-8)


def test_unknown_method(small_config):
    config = parse_config(small_config())
    with pytest.raises(ValueError):
        solve_method("galerkin", config)


def test_fe_msfem_uses_requested_rho(small_config):
    config = parse_config(small_config(methods="fe-msfem", rho="h, 0.05"))
    params = config.penalty_params()
    assert [p.label() for p in params] == ["h", "0.05"]
    solution = solve_method(FE_MSFEM, config, params=params[1])
    assert solution.rho == 0.05
    assert solution.params is params[1]


def test_dump_interface_terms(tmp_path, small_discretization):
    disc = small_discretization
    field = Constant(1.0)
    traces = trace_data(disc.pairing, disc.fine, disc.coarse, _bases(disc, field), field)
    file_path = tmp_path / "interface.csv"
    dump_interface_terms(traces, PenaltyParams(rho_mode="h"), disc.fine.h, str(file_path))
    lines = file_path.read_text().splitlines()
    assert lines[0] == "edge,x0,y0,x1,y1,consistency,symmetry,jump,flux_jump"
    assert len(lines) == 1 + len(traces)
