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
Experiment configuration files.

An experiment is an INI file with the sections ``[problem]``,
``[coefficient]``, ``[mesh]``, ``[methods]``, ``[penalty]``, ``[solver]``,
``[homog]``, ``[output]`` and ``[expect]``. Each section is validated by a
pydantic model; every violation found is reported at once in a
`ConfigError`, prefixed by its ``section.key`` path.
"""

import configparser
import logging
import os
import re
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .coeff import (Constant, LayeredAnalytic, LognormalSpec, Overlay, PeriodicField,
                    generate_lognormal, load_raster, load_regions)
from .coupling import METHODS, PenaltyParams
from .exceptions import ConfigError
from .linalg import SolverSettings

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "parse_lognormal_spec",
    "FULL_SCALE_REFERENCE",
    "METRICS",
]

logger = logging.getLogger("mslab")

# reference meshes finer than this need --full-scale
FULL_SCALE_REFERENCE = 1024
METRICS = ("rel_l2", "rel_linf", "rel_energy")
COEFFICIENT_KINDS = ("periodic", "constant", "layered", "raster", "lognormal")
EXPECT_KEY = re.compile(r"^(?P<method>[a-z-]+)(\[(?P<rho>[^\]]+)\])?\.(?P<metric>[a-z0-9_]+)$")


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _none_if_blank(value):
    if isinstance(value, str) and not value.strip():
        return None
    return value


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemSection(Section):
    source: float = 1.0
    quad: int = 3

    @field_validator("quad")
    @classmethod
    def check_quad(cls, value):
        if value not in (1, 3, 7):
            raise ValueError("quadrature must have 1, 3 or 7 points")
        return value


class CoefficientSection(Section):
    kind: str = "periodic"
    epsilon: Optional[float] = Field(default=None, gt=0)
    value: float = Field(default=1.0, gt=0)
    profile: str = "strong"
    axis: int = 0
    file: Optional[str] = None
    regions: Optional[str] = None
    variance: float = Field(default=1.5, ge=0)
    l1: float = Field(default=0.01, gt=0)
    l2: float = Field(default=0.01, gt=0)
    nx: int = Field(default=1024, ge=1)
    ny: int = Field(default=1024, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @field_validator("epsilon", "file", "regions", mode="before")
    @classmethod
    def blank_to_none(cls, value):
        return _none_if_blank(value)

    @field_validator("kind")
    @classmethod
    def check_kind(cls, value):
        if value not in COEFFICIENT_KINDS:
            raise ValueError("kind must be one of %s" % ", ".join(COEFFICIENT_KINDS))
        return value

    @field_validator("profile")
    @classmethod
    def check_profile(cls, value):
        if value not in ("strong", "mild"):
            raise ValueError("profile must be 'strong' or 'mild'")
        return value

    @field_validator("axis")
    @classmethod
    def check_axis(cls, value):
        if value not in (0, 1):
            raise ValueError("axis must be 0 or 1")
        return value


class MeshSection(Section):
    n_coarse: int = Field(ge=1)
    n_fine: int = Field(ge=1)
    n_ref: int = Field(ge=1)
    layers: int = Field(default=2, ge=1)
    n_sub: Optional[int] = Field(default=None, ge=2)
    sigma_os: float = Field(default=3.0, gt=1.0)

    @field_validator("n_sub", mode="before")
    @classmethod
    def blank_to_none(cls, value):
        return _none_if_blank(value)


class MethodsSection(Section):
    run: List[str] = Field(min_length=1)

    @field_validator("run", mode="before")
    @classmethod
    def split_list(cls, value):
        return _split_list(value)

    @field_validator("run")
    @classmethod
    def check_methods(cls, value):
        unknown = [m for m in value if m not in METHODS]
        if unknown:
            raise ValueError("unknown methods %s, expected %s" % (unknown, ", ".join(METHODS)))
        if len(set(value)) != len(value):
            raise ValueError("methods listed twice")
        return value


class PenaltySection(Section):
    beta: int = 1
    gamma0: float = Field(default=20.0, gt=0)
    gamma1: float = Field(default=0.1, ge=0)
    rho: List[str] = Field(default_factory=lambda: ["epsilon"], min_length=1)

    @field_validator("rho", mode="before")
    @classmethod
    def split_list(cls, value):
        return _split_list(value)

    @field_validator("beta")
    @classmethod
    def check_beta(cls, value):
        if value not in (-1, 0, 1):
            raise ValueError("beta must be -1, 0 or 1")
        return value

    @field_validator("rho")
    @classmethod
    def check_rho(cls, value):
        for token in value:
            if token in ("epsilon", "h"):
                continue
            try:
                number = float(token)
            except ValueError:
                raise ValueError("rho entries are 'epsilon', 'h' or a positive number")
            if not number > 0:
                raise ValueError("explicit rho must be positive")
        return value


class SolverSection(Section):
    rtol: float = Field(default=1e-10, gt=0)
    maxit: int = Field(default=50000, ge=1)
    preconditioner: str = "jacobi"
    kind: str = "iterative"
    local: str = "direct"
    workers: int = Field(default=1, ge=1)
    fallback: str = "direct"

    @model_validator(mode="after")
    def check_choices(self):
        if self.preconditioner not in ("jacobi", "none"):
            raise ValueError("preconditioner must be 'jacobi' or 'none'")
        if self.fallback not in ("direct", "none"):
            raise ValueError("fallback must be 'direct' or 'none'")
        for name in ("kind", "local"):
            if getattr(self, name) not in ("iterative", "direct"):
                raise ValueError("%s must be 'iterative' or 'direct'" % name)
        return self


class HomogSection(Section):
    resolution: int = Field(default=128, ge=16)
    reference: bool = False


class OutputSection(Section):
    csv: Optional[str] = None
    timing: bool = True
    gamma_side: str = "omega2"

    @field_validator("csv", mode="before")
    @classmethod
    def blank_to_none(cls, value):
        return _none_if_blank(value)

    @field_validator("gamma_side")
    @classmethod
    def check_side(cls, value):
        if value not in ("omega1", "omega2"):
            raise ValueError("gamma_side must be 'omega1' or 'omega2'")
        return value


class ExpectSection(BaseModel):
    """
    Expected results: ``method.metric = value`` (optionally
    ``method[rho].metric``), a relative tolerance ``tol`` and an ``order`` of
    methods by increasing energy error.
    """
    model_config = ConfigDict(frozen=True)

    tol: float = Field(default=0.25, gt=0)
    order: List[str] = Field(default_factory=list)
    checks: Dict[str, float] = Field(default_factory=dict)

    @field_validator("order", mode="before")
    @classmethod
    def split_list(cls, value):
        return _split_list(value)

    @model_validator(mode="before")
    @classmethod
    def collect_checks(cls, data):
        data = dict(data)
        checks = dict(data.pop("checks", {}))
        for key in [k for k in data if k not in ("tol", "order")]:
            checks[key] = data.pop(key)
        data["checks"] = checks
        return data

    @field_validator("checks")
    @classmethod
    def check_keys(cls, value):
        for key in value:
            match = EXPECT_KEY.match(key)
            if not match or match.group("method") not in METHODS or \
                    match.group("metric") not in METRICS:
                raise ValueError("expectation key %r is not method.metric" % key)
        return value

    @field_validator("order")
    @classmethod
    def check_order(cls, value):
        unknown = [m for m in value if m not in METHODS]
        if unknown:
            raise ValueError("unknown methods in order: %s" % unknown)
        return value


SECTIONS = {
    "problem": ProblemSection,
    "coefficient": CoefficientSection,
    "mesh": MeshSection,
    "methods": MethodsSection,
    "penalty": PenaltySection,
    "solver": SolverSection,
    "homog": HomogSection,
    "output": OutputSection,
    "expect": ExpectSection,
}
REQUIRED_SECTIONS = ("mesh", "methods")


class ExperimentConfig(BaseModel):
    """
    A validated experiment.

    Attributes
    ----------
    name : str
        Config file stem.
    base_dir : str
        Directory relative paths are resolved against.
    """
    model_config = ConfigDict(frozen=True)

    name: str
    base_dir: str = "."
    problem: ProblemSection = ProblemSection()
    coefficient: CoefficientSection = CoefficientSection()
    mesh: MeshSection
    methods: MethodsSection
    penalty: PenaltySection = PenaltySection()
    solver: SolverSection = SolverSection()
    homog: HomogSection = HomogSection()
    output: OutputSection = OutputSection()
    expect: ExpectSection = ExpectSection()

    def resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    @property
    def n_sub(self):
        return self.mesh.n_sub or self.mesh.n_fine // self.mesh.n_coarse

    @property
    def epsilon(self):
        return self.coefficient.epsilon

    @property
    def seed(self):
        return self.coefficient.seed if self.coefficient.kind == "lognormal" else None

    def is_full_scale(self):
        return self.mesh.n_ref > FULL_SCALE_REFERENCE

    def lognormal_spec(self):
        c = self.coefficient
        return LognormalSpec(c.variance, c.l1, c.l2, c.nx, c.ny, c.seed)

    def build_field(self):
        """Construct the coefficient field, overlay regions included."""
        c = self.coefficient
        if c.kind == "periodic":
            field = PeriodicField(c.epsilon)
        elif c.kind == "constant":
            field = Constant(c.value)
        elif c.kind == "layered":
            field = LayeredAnalytic(c.profile, c.epsilon, c.axis)
        elif c.kind == "raster":
            field = load_raster(self.resolve(c.file))
        else:
            field = generate_lognormal(self.lognormal_spec())
        if c.regions:
            field = Overlay(field, load_regions(self.resolve(c.regions)))
        return field

    def solver_settings(self):
        return SolverSettings(**self.solver.model_dump())

    def penalty_params(self):
        """One `PenaltyParams` per configured rho mode."""
        params = []
        for token in self.penalty.rho:
            if token in ("epsilon", "h"):
                mode, value = token, None
            else:
                mode, value = "explicit", float(token)
            params.append(PenaltyParams(self.penalty.beta, self.penalty.gamma0,
                                        self.penalty.gamma1, mode, value))
        return params


def _cross_checks(config):
    """Violations of rules spanning several keys."""
    violations = []
    m = config.mesh
    if m.n_coarse < 4:
        violations.append("mesh.n_coarse: at least 4 cells per side are needed, got %d"
                          % m.n_coarse)
    if 2 * m.layers >= m.n_coarse:
        violations.append("mesh.layers: %d layers leave no interior on %d cells"
                          % (m.layers, m.n_coarse))
    if m.n_fine % m.n_coarse != 0:
        violations.append("mesh.n_fine: %d is not a multiple of mesh.n_coarse %d"
                          % (m.n_fine, m.n_coarse))
    elif m.n_fine <= m.n_coarse:
        violations.append("mesh.n_fine: fine mesh must be finer than the coarse mesh")
    if m.n_ref % m.n_fine != 0:
        violations.append("mesh.n_ref: %d is not a multiple of mesh.n_fine %d"
                          % (m.n_ref, m.n_fine))
    if m.n_ref % (m.n_coarse * config.n_sub) != 0:
        violations.append("mesh.n_ref: reference mesh not nested in the basis sub-meshes "
                          "(n_coarse * n_sub = %d)" % (m.n_coarse * config.n_sub))
    if "fe-msfem" in config.methods.run and m.n_fine % m.n_coarse == 0 and \
            config.n_sub != m.n_fine // m.n_coarse:
        violations.append("mesh.n_sub: FE-MsFEM needs n_sub = n_fine / n_coarse = %d"
                          % (m.n_fine // m.n_coarse))

    c = config.coefficient
    if c.kind in ("periodic", "layered") and c.epsilon is None:
        violations.append("coefficient.epsilon: required for kind %s" % c.kind)
    if c.kind == "raster":
        if not c.file:
            violations.append("coefficient.file: required for kind raster")
        elif not os.path.isfile(config.resolve(c.file)):
            violations.append("coefficient.file: %s not found" % config.resolve(c.file))
    if c.regions and not os.path.isfile(config.resolve(c.regions)):
        violations.append("coefficient.regions: %s not found" % config.resolve(c.regions))
    if c.kind == "lognormal" and (c.l1 < 0.5 / c.nx or c.l2 < 0.5 / c.ny):
        violations.append("coefficient.l1: correlation lengths below half the grid spacing")
    if "fe-msfem" in config.methods.run and "epsilon" in config.penalty.rho \
            and c.epsilon is None:
        violations.append("penalty.rho: rho = epsilon needs coefficient.epsilon")
    return violations


def _read_ini(path):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigError("%s: %s" % (path, e))
    return parser


def _validation_messages(section, error):
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        key = "%s.%s" % (section, location) if location else section
        messages.append("%s: %s" % (key, item["msg"]))
    return messages


def parse_config(path):
    """
    Read and validate an experiment file.

    Returns
    -------
    ExperimentConfig

    Raises
    ------
    ConfigError
        Listing every violation with its ``section.key`` path.
    FileNotFoundError
        If `path` does not exist.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError("config file %s not found" % path)
    parser = _read_ini(path)
    violations = []
    sections = {}
    for name in parser.sections():
        model = SECTIONS.get(name)
        if model is None:
            violations.append("%s: unknown section" % name)
            continue
        try:
            sections[name] = model(**dict(parser.items(name)))
        except ValidationError as e:
            violations.extend(_validation_messages(name, e))
    for name in REQUIRED_SECTIONS:
        if name not in parser.sections():
            violations.append("%s: missing section" % name)
    if violations:
        raise ConfigError(violations)

    name = os.path.splitext(os.path.basename(path))[0]
    base_dir = os.path.dirname(os.path.abspath(path))
    config = ExperimentConfig(name=name, base_dir=base_dir, **sections)
    violations = _cross_checks(config)
    if violations:
        raise ConfigError(violations)
    logger.info("config %s: N_H=%d, n_h=%d, h_ref=1/%d, methods %s" % (
        name, config.mesh.n_coarse, config.mesh.n_fine, config.mesh.n_ref,
        ", ".join(config.methods.run)))
    return config


class LognormalSection(Section):
    variance: float = Field(ge=0)
    l1: float = Field(gt=0)
    l2: float = Field(gt=0)
    nx: int = Field(default=1024, ge=1)
    ny: int = Field(default=1024, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)


def parse_lognormal_spec(path):
    """
    Read a ``[lognormal]`` random-field specification.

    Returns
    -------
    LognormalSpec
    """
    if not os.path.isfile(path):
        raise FileNotFoundError("spec file %s not found" % path)
    parser = _read_ini(path)
    if "lognormal" not in parser.sections():
        raise ConfigError("lognormal: missing section")
    try:
        section = LognormalSection(**dict(parser.items("lognormal")))
    except ValidationError as e:
        raise ConfigError(_validation_messages("lognormal", e))
    return LognormalSpec(**section.model_dump())
