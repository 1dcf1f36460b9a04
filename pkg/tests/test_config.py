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

import glob
import os

import pytest

from mslab.coeff import Overlay, PeriodicField
from mslab.config import EXPECT_KEY, METRICS, parse_config, parse_lognormal_spec
from mslab.exceptions import ConfigError

from conftest import EXPERIMENTS


def test_shipped_table1(experiment_path):
    config = parse_config(experiment_path("table1.cfg"))
    assert config.name == "table1"
    assert config.epsilon == 0.01
    assert (config.mesh.n_coarse, config.mesh.n_fine, config.mesh.n_ref) == (32, 1024, 2048)
    assert config.n_sub == 32
    assert config.methods.run == ["msfem", "mixed", "fe-msfem"]
    assert [p.label() for p in config.penalty_params()] == ["epsilon", "h"]
    assert config.expect.checks == {"fe-msfem[epsilon].rel_energy": 0.05159,
                                    "msfem.rel_energy": 0.2560}
    assert config.expect.order == ["fe-msfem", "mixed", "msfem"]
    assert config.is_full_scale()
    assert config.output.csv == "results/table1.csv"
    assert isinstance(config.build_field(), PeriodicField)


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(EXPERIMENTS, "*.cfg"))))
def test_shipped_configs_parse(path):
    config = parse_config(path)
    assert config.methods.run
    if path.endswith("_desk.cfg"):
        assert not config.is_full_scale()
        assert not config.output.timing


def test_channel_config_builds_overlay(experiment_path):
    config = parse_config(experiment_path("table4_desk.cfg"))
    field = config.build_field()
    assert isinstance(field, Overlay)
    assert field.channel_regions()


def test_defaults(small_config):
    config = parse_config(small_config())
    assert config.problem.source == 1.0
    assert config.problem.quad == 3
    assert config.penalty.gamma0 == 20.0
    assert config.penalty.gamma1 == 0.1
    assert config.mesh.sigma_os == 3.0
    settings = config.solver_settings()
    assert settings.rtol == 1e-10
    assert settings.local == "direct"
    assert settings.fallback == "direct"
    assert config.seed is None
    assert not config.is_full_scale()


def test_solver_fallback_choice(small_config):
    config = parse_config(small_config(extra="\n[solver]\nfallback = none\n"))
    assert config.solver_settings().fallback == "none"
    with pytest.raises(ConfigError) as info:
        parse_config(small_config(extra="\n[solver]\nfallback = retry\n", name="bad.cfg"))
    assert any(v.startswith("solver") for v in info.value.violations)


def test_fine_mesh_must_refine_coarse(write_config):
    path = write_config("[mesh]\nn_coarse = 32\nn_fine = 1000\nn_ref = 2000\n"
                        "[methods]\nrun = msfem\n")
    with pytest.raises(ConfigError) as info:
        parse_config(path)
    assert any(v.startswith("mesh.n_fine") and "multiple" in v for v in info.value.violations)


def test_empty_method_list(small_config):
    with pytest.raises(ConfigError) as info:
        parse_config(small_config(methods=""))
    assert any(v.startswith("methods.run") for v in info.value.violations)


def test_unknown_key_is_named(small_config):
    path = small_config(extra="\n[solver]\nrtoll = 1e-8\n")
    with pytest.raises(ConfigError) as info:
        parse_config(path)
    assert any(v.startswith("solver.rtoll") for v in info.value.violations)


def test_all_violations_reported_together(write_config):
    path = write_config("""
[coefficient]
kind = periodic

[mesh]
n_coarse = 3
n_fine = 10
n_ref = 15

[methods]
run = msfem, galerkin

[penalty]
gamma0 = -1
""")
    with pytest.raises(ConfigError) as info:
        parse_config(path)
    keys = [v.split(":")[0] for v in info.value.violations]
    assert "methods.run" in keys
    assert "penalty.gamma0" in keys


def test_cross_checks_reported_together(write_config):
    path = write_config("""
[coefficient]
kind = periodic

[mesh]
n_coarse = 3
n_fine = 10
n_ref = 15

[methods]
run = msfem
""")
    with pytest.raises(ConfigError) as info:
        parse_config(path)
    keys = {v.split(":")[0] for v in info.value.violations}
    assert {"mesh.n_coarse", "mesh.layers", "mesh.n_fine", "mesh.n_ref",
            "coefficient.epsilon"} <= keys


def test_missing_sections(write_config):
    with pytest.raises(ConfigError) as info:
        parse_config(write_config("[coefficient]\nkind = constant\n"))
    assert "mesh: missing section" in info.value.violations
    assert "methods: missing section" in info.value.violations


def test_unknown_section(small_config):
    with pytest.raises(ConfigError) as info:
        parse_config(small_config(extra="\n[plots]\nshow = yes\n"))
    assert info.value.violations == ["plots: unknown section"]


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        parse_config("/nonexistent/experiment.cfg")


def test_rho_epsilon_needs_epsilon(write_config):
    path = write_config("[coefficient]\nkind = constant\n"
                        "[mesh]\nn_coarse = 6\nn_fine = 24\nn_ref = 48\n"
                        "[methods]\nrun = fe-msfem\n")
    with pytest.raises(ConfigError) as info:
        parse_config(path)
    assert any(v.startswith("penalty.rho") for v in info.value.violations)


def test_fe_msfem_needs_matching_sub_resolution(small_config):
    path = small_config(methods="fe-msfem", extra="")
    text = open(path, encoding="utf-8").read().replace("layers = 2", "layers = 2\nn_sub = 2")
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    with pytest.raises(ConfigError) as info:
        parse_config(path)
    assert any(v.startswith("mesh.n_sub") for v in info.value.violations)


def test_expectation_keys(small_config):
    config = parse_config(small_config(extra="\n[expect]\ntol = 0.1\nmsfem.rel_l2 = 0.3\n"
                                             "fe-msfem[h].rel_energy = 0.05\n"))
    assert config.expect.tol == 0.1
    assert config.expect.checks == {"msfem.rel_l2": 0.3, "fe-msfem[h].rel_energy": 0.05}
    with pytest.raises(ConfigError):
        parse_config(small_config(extra="\n[expect]\nmsfem.accuracy = 0.3\n", name="bad.cfg"))


@pytest.mark.parametrize("metric", METRICS)
def test_expectation_key_accepts_every_metric(metric):
    plain = EXPECT_KEY.match("msfem.%s" % metric)
    assert plain.group("method", "rho", "metric") == ("msfem", None, metric)
    labelled = EXPECT_KEY.match("fe-msfem[h].%s" % metric)
    assert labelled.group("method", "rho", "metric") == ("fe-msfem", "h", metric)


def test_relative_paths_follow_config(write_config, experiment_path):
    regions = experiment_path("channel.regions")
    path = write_config("[coefficient]\nkind = periodic\nepsilon = 0.125\nregions = %s\n"
                        "[mesh]\nn_coarse = 8\nn_fine = 32\nn_ref = 64\n"
                        "[methods]\nrun = msfem\n" % regions)
    config = parse_config(path)
    assert config.resolve(config.coefficient.regions) == regions
    assert config.resolve("perm.raster") == os.path.join(os.path.dirname(path), "perm.raster")


def test_lognormal_spec(experiment_path):
    spec = parse_lognormal_spec(experiment_path("lognormal.spec"))
    assert (spec.variance, spec.l1, spec.l2) == (1.5, 0.01, 0.01)
    assert (spec.nx, spec.ny, spec.seed) == (1024, 1024, 20130101)


def test_lognormal_spec_errors(write_config):
    with pytest.raises(ConfigError):
        parse_lognormal_spec(write_config("[field]\nvariance = 1\n", "a.spec"))
    with pytest.raises(ConfigError) as info:
        parse_lognormal_spec(write_config("[lognormal]\nvariance = -1\nl1 = 0.1\nl2 = 0.1\n",
                                          "b.spec"))
    assert info.value.violations[0].startswith("lognormal.variance")
