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

import os

import numpy as np
import pytest

from mslab.coeff import Constant
from mslab.coupling import build_discretization

EXPERIMENTS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                           "experiments")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("MSLAB_FULL_SCALE") == "1":
        return
    skip = pytest.mark.skip(reason="set MSLAB_FULL_SCALE=1 to run full-scale checks")
    for item in items:
        if "fullscale" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_discretization():
    """N_H = 6 with a two-layer frame, h = 1/24, reference 1/48."""
    return build_discretization(Constant(1.0), 6, 24, 48, layers=2)


@pytest.fixture
def experiment_path():
    def path(name):
        return os.path.join(EXPERIMENTS, name)
    return path


@pytest.fixture
def write_config(tmp_path):
    """Write an experiment file into a temporary directory and return its path."""
    def write(text, name="experiment.cfg"):
        file_path = tmp_path / name
        file_path.write_text(text, encoding="utf-8")
        return str(file_path)
    return write


SMALL_CONFIG = """
[coefficient]
kind = {kind}
epsilon = {epsilon}
value = {value}

[mesh]
n_coarse = 6
n_fine = 24
n_ref = 48
layers = 2

[methods]
run = {methods}

[penalty]
rho = {rho}

[output]
timing = false
"""


@pytest.fixture
def small_config(write_config):
    """Experiment file on the small discretization with overridable fields."""
    def make(kind="constant", epsilon=0.125, value=1.0, methods="reference, msfem",
             rho="h", extra="", name="small.cfg"):
        text = SMALL_CONFIG.format(kind=kind, epsilon=epsilon, value=value,
                                   methods=methods, rho=rho) + extra
        return write_config(text, name)
    return make
