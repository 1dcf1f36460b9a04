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
Desk-scale reproduction of the error tables.

These runs take minutes; select them with ``pytest -m slow``. The
full-scale periodic check also needs ``MSLAB_FULL_SCALE=1``.
"""

import numpy as np
import pytest

from mslab.cli import check_expectations, run_experiment
from mslab.coeff import PeriodicField
from mslab.config import parse_config
from mslab.error import norms
from mslab.fem import solve_reference
from mslab.homog import effective_tensor, first_order_expansion, homogenized_solve, solve_cell
from mslab.linalg import SolverSettings
from mslab.mesh import build_square_mesh

from conftest import EXPERIMENTS

pytestmark = pytest.mark.slow

_runs = {}


def _rows(name):
    if name not in _runs:
        config = parse_config("%s/%s.cfg" % (EXPERIMENTS, name))
        _runs[name] = (config, run_experiment(config))
    return _runs[name]


def _energy(rows, method, label=None):
    return next(r["rel_energy"] for r in rows
                if r["method"] == method and (label is None or r["label"] == label))


@pytest.mark.parametrize("name", ["table1_desk", "table3_desk", "table4_desk", "table5_desk"])
def test_desk_method_ranking(name):
    config, rows = _rows(name)
    energies = [_energy(rows, m) for m in ("fe-msfem", "mixed", "msfem")]
    assert energies[0] < energies[1] < energies[2]
    assert check_expectations(config, rows) == []


def test_desk_periodic_accuracy():
    _, rows = _rows("table1_desk")
    assert _energy(rows, "fe-msfem", "epsilon") <= 0.15


def test_rho_robustness():
    _, rows = _rows("table1_desk")
    by_epsilon = _energy(rows, "fe-msfem", "epsilon")
    by_h = _energy(rows, "fe-msfem", "h")
    assert abs(by_epsilon - by_h) < 0.3 * min(by_epsilon, by_h)


def test_coarse_size_trend():
    errors = [_energy(_rows("table2_H%d_desk" % n)[1], "fe-msfem") for n in (6, 12, 24)]
    # not monotone in H: the middle size is the best or close to it
    assert errors[1] <= 1.1 * min(errors)


def test_reference_refinement_changes_errors_little(write_config):
    template = ("[coefficient]\nkind = periodic\nepsilon = 0.03125\n"
                "[mesh]\nn_coarse = 8\nn_fine = 128\nn_ref = %d\n"
                "[methods]\nrun = msfem\n[output]\ntiming = false\n")
    errors = []
    for n_ref in (256, 512):
        config = parse_config(write_config(template % n_ref, "ref%d.cfg" % n_ref))
        errors.append(run_experiment(config)[0]["rel_energy"])
    assert abs(errors[1] - errors[0]) < 0.2 * errors[1]


def test_first_order_corrector_improves_periodic_solution():
    epsilon = 1.0 / 32
    field = PeriodicField(epsilon)
    settings = SolverSettings(kind="direct")
    cell_field = field.cell_field()
    cell = solve_cell(cell_field, 128, settings)
    tensor = effective_tensor(cell_field, cell)
    mesh = build_square_mesh(256)
    reference = solve_reference(mesh, field, settings=settings)
    u0 = homogenized_solve(tensor, 1.0, mesh, settings)
    u1 = first_order_expansion(u0, cell, epsilon)
    distance0 = norms(u0.values, reference, field).rel_energy
    distance1 = norms(u1, reference, field).rel_energy
    assert distance1 < distance0
    assert np.isfinite(distance1)


@pytest.mark.fullscale
def test_full_scale_table1():
    config = parse_config("%s/table1.cfg" % EXPERIMENTS)
    rows = run_experiment(config)
    assert check_expectations(config, rows) == []
