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
Command line experiment runner.

    mslab run <cfg> [--full-scale] [--dump-fields DIR] [--output CSV]
    mslab suite <dir> [--full-scale] [--output CSV]
    mslab homog <cfg>
    mslab gen-perm <spec> <out>

Exit status is 0 on success, 1 when a run fails or misses its expectations
and 2 for usage, configuration or missing-input errors.
"""

import argparse
import glob
import logging
import os
import sys

import numpy as np

from . import fem
from .coeff import generate_lognormal, save_raster, write_grid
from .config import EXPECT_KEY, FULL_SCALE_REFERENCE, parse_config, parse_lognormal_spec
from .coupling import FE_MSFEM, REFERENCE, build_discretization, solve_method
from .error import evaluate_p1, norms, prolong
from .exceptions import ConfigError, MslabError, ResolutionError
from .homog import effective_tensor, first_order_expansion, homogenized_solve, solve_cell
from .mesh import build_square_mesh
from .msbasis import BasisCache

__all__ = [
    "COLUMNS",
    "INTEGER_COLUMNS",
    "format_row",
    "write_rows",
    "run_experiment",
    "check_expectations",
    "main",
]

logger = logging.getLogger("mslab")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

COLUMNS = ("method", "rel_l2", "rel_linf", "rel_energy", "NH", "nh", "href", "eps",
           "beta", "gamma0", "gamma1", "rho", "seed", "wall_ms")
SUITE_COLUMNS = ("config",) + COLUMNS
# written with %d, every other numeric column with %.6e
INTEGER_COLUMNS = ("NH", "nh", "beta", "seed", "wall_ms")


def _format_value(name, value):
    if value is None:
        return "nan"
    if isinstance(value, str):
        return value
    if name in INTEGER_COLUMNS:
        return "%d" % value
    return "%.6e" % value


def format_row(row, columns=COLUMNS):
    """One CSV line (no terminator); missing values are written as ``nan``."""
    return ",".join(_format_value(name, row.get(name)) for name in columns)


def write_rows(rows, stream, columns=COLUMNS):
    """Write the header and `rows` with LF line endings."""
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(format_row(row, columns) + "\n")


def _open_output(file_path):
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)
    return open(file_path, "w", encoding="utf-8", newline="\n")


def _nodal_grid(mesh, values):
    grid = np.zeros((mesh.n + 1, mesh.n + 1))
    grid[mesh.node_lattice[:, 1], mesh.node_lattice[:, 0]] = values
    return grid


def _dump_fields(config, reference_mesh, name, nodal, dump_dir):
    os.makedirs(dump_dir, exist_ok=True)
    write_grid(_nodal_grid(reference_mesh, nodal),
               os.path.join(dump_dir, "%s_%s.txt" % (config.name, name)))


def _dump_coefficient(config, field, reference_mesh, dump_dir):
    os.makedirs(dump_dir, exist_ok=True)
    n = reference_mesh.n
    centers = (np.arange(n) + 0.5) / n
    x, y = np.meshgrid(centers, centers)
    write_grid(field(np.stack([x, y], axis=-1)),
               os.path.join(dump_dir, "%s_coefficient.txt" % config.name))


def _base_row(config, field):
    m = config.mesh
    epsilon = config.epsilon if config.epsilon is not None else field.epsilon
    return {
        "NH": m.n_coarse,
        "nh": m.n_fine,
        "href": 1.0 / m.n_ref,
        "eps": epsilon,
        "seed": config.seed,
    }


def run_experiment(config, dump_dir=None):
    """
    Solve every configured method and measure it against the reference.

    The reference solve always runs; it only gets a row of its own when
    ``reference`` is listed among the methods. FE-MsFEM gives one row per
    configured rho mode.

    Parameters
    ----------
    config : ExperimentConfig
    dump_dir : str, optional
        Directory receiving the coefficient and the nodal solution grids.

    Returns
    -------
    list of dict
        CSV rows keyed by `COLUMNS`, plus ``label`` (the rho mode of
        FE-MsFEM rows).
    """
    field = config.build_field()
    m = config.mesh
    discretization = build_discretization(field, m.n_coarse, m.n_fine, m.n_ref, m.layers)
    cache = BasisCache()
    reference = solve_method(REFERENCE, config, field, discretization, cache)
    reference_mesh = reference.mesh
    if dump_dir:
        _dump_coefficient(config, field, reference_mesh, dump_dir)

    rows = []
    for method in config.methods.run:
        if method == REFERENCE:
            runs = [(None, reference)]
        elif method == FE_MSFEM:
            runs = [(params, solve_method(method, config, field, discretization, cache, params))
                    for params in config.penalty_params()]
        else:
            runs = [(None, solve_method(method, config, field, discretization, cache))]

        for params, solution in runs:
            row = _base_row(config, field)
            row["method"] = method
            row["label"] = params.label() if params else None
            if params is not None:
                row.update(beta=params.beta, gamma0=params.gamma0, gamma1=params.gamma1,
                           rho=solution.rho)
            wall_ms = int(round(1000.0 * solution.wall_time)) if config.output.timing else 0
            row["wall_ms"] = wall_ms

            prolonged = prolong(solution, reference_mesh, config.output.gamma_side)
            report = norms(prolonged, reference, field, metadata=row)
            row.update(rel_l2=report.rel_l2, rel_linf=report.rel_linf,
                       rel_energy=report.rel_energy)
            rows.append(row)
            if dump_dir:
                name = method if params is None else "%s_%s" % (method, params.label())
                _dump_fields(config, reference_mesh, name, prolonged.nodal, dump_dir)
    return rows


def check_expectations(config, rows):
    """
    Compare rows with the ``[expect]`` section.

    Returns
    -------
    list of str
        One message per failed check, empty when everything holds.
    """
    expect = config.expect
    failures = []
    for key, expected in sorted(expect.checks.items()):
        match = EXPECT_KEY.match(key)
        method, rho, metric = match.group("method"), match.group("rho"), match.group("metric")
        candidates = [r for r in rows
                      if r["method"] == method and (rho is None or r["label"] == rho)]
        if not candidates:
            failures.append("%s: no such row" % key)
            continue
        actual = candidates[0][metric]
        if abs(actual - expected) > expect.tol * abs(expected):
            failures.append("%s: %.6e is not within %g%% of %.6e"
                            % (key, actual, 100 * expect.tol, expected))

    if expect.order:
        energies = []
        for method in expect.order:
            found = [r["rel_energy"] for r in rows if r["method"] == method]
            if not found:
                failures.append("order: method %s did not run" % method)
                return failures
            energies.append(found[0])
        if any(a >= b for a, b in zip(energies, energies[1:])):
            failures.append("order: energy errors %s are not increasing along %s" % (
                ", ".join("%.4e" % e for e in energies), " < ".join(expect.order)))
    return failures


def _config_problem(e):
    if isinstance(e, ConfigError):
        for violation in e.violations:
            print("config error: %s" % violation, file=sys.stderr)
    else:
        print("error: %s" % e, file=sys.stderr)


def _full_scale_guard(config, allowed):
    if not config.is_full_scale():
        return True
    if not allowed:
        print("%s: reference mesh 1/%d is beyond desk scale (1/%d); pass --full-scale"
              % (config.name, config.mesh.n_ref, FULL_SCALE_REFERENCE), file=sys.stderr)
        return False
    logger.warning("%s: full-scale run on a 1/%d reference mesh, expect tens of minutes "
                   "and several GB of memory" % (config.name, config.mesh.n_ref))
    return True


def cmd_run(args):
    try:
        config = parse_config(args.config)
    except (ConfigError, FileNotFoundError) as e:
        _config_problem(e)
        return EXIT_USAGE
    if not _full_scale_guard(config, args.full_scale):
        return EXIT_USAGE

    try:
        rows = run_experiment(config, args.dump_fields)
    except (MslabError, ValueError, ArithmeticError) as e:
        logger.exception(e)
        return EXIT_FAILURE

    output = args.output or (config.resolve(config.output.csv) if config.output.csv else None)
    if output:
        with _open_output(output) as f:
            write_rows(rows, f)
        logger.info("wrote %d rows to %s" % (len(rows), output))
    else:
        write_rows(rows, sys.stdout)

    failures = check_expectations(config, rows)
    for failure in failures:
        print("%s: %s" % (config.name, failure), file=sys.stderr)
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_suite(args):
    if not os.path.isdir(args.directory):
        print("error: %s is not a directory" % args.directory, file=sys.stderr)
        return EXIT_USAGE
    paths = sorted(glob.glob(os.path.join(args.directory, "*.cfg")))
    if not paths:
        print("error: no .cfg files in %s" % args.directory, file=sys.stderr)
        return EXIT_USAGE

    all_rows = []
    failed = []
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        try:
            config = parse_config(path)
        except ConfigError as e:
            failed.append(name)
            print("FAIL %s: %s" % (name, e), file=sys.stderr)
            continue
        if config.is_full_scale() and not args.full_scale:
            print("SKIP %s: full scale" % name, file=sys.stderr)
            continue
        _full_scale_guard(config, args.full_scale)
        try:
            rows = run_experiment(config)
        except (MslabError, ValueError, ArithmeticError) as e:
            logger.exception(e)
            failed.append(name)
            print("FAIL %s: %s" % (name, e), file=sys.stderr)
            continue
        for row in rows:
            row["config"] = name
        all_rows.extend(rows)
        failures = check_expectations(config, rows)
        if failures:
            failed.append(name)
            print("FAIL %s: %s" % (name, "; ".join(failures)), file=sys.stderr)
        else:
            print("PASS %s" % name, file=sys.stderr)

    if args.output:
        with _open_output(args.output) as f:
            write_rows(all_rows, f, SUITE_COLUMNS)
    else:
        write_rows(all_rows, sys.stdout, SUITE_COLUMNS)
    logger.info("suite %s: %d configs, %d failed" % (args.directory, len(paths), len(failed)))
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_homog(args):
    try:
        config = parse_config(args.config)
        field = config.build_field()
        cell_field = field.cell_field()
    except (ConfigError, FileNotFoundError, ValueError) as e:
        _config_problem(e)
        return EXIT_USAGE

    settings = config.solver_settings()
    quad = config.problem.quad
    try:
        cell = solve_cell(cell_field, config.homog.resolution, settings, quad)
        tensor = effective_tensor(cell_field, cell, quad)
    except MslabError as e:
        logger.exception(e)
        return EXIT_FAILURE
    for row in tensor.matrix:
        print("%.6e,%.6e" % tuple(row))
    if not config.homog.reference:
        return EXIT_OK

    if not _full_scale_guard(config, args.full_scale):
        return EXIT_USAGE
    epsilon = config.epsilon if config.epsilon is not None else field.epsilon
    if epsilon is None:
        print("error: the first-order expansion needs coefficient.epsilon", file=sys.stderr)
        return EXIT_USAGE
    try:
        mesh = build_square_mesh(config.mesh.n_ref)
        f = config.problem.source
        u0 = homogenized_solve(tensor, f, mesh, settings, quad)
        reference = fem.solve_reference(mesh, field, f, settings, quad)
        u1 = first_order_expansion(u0, cell, epsilon)
        u0_errors = norms(u0.values, reference, field, metadata={"method": "u0"})
        u1_errors = norms(u1, reference, field, metadata={"method": "u1"})
    except MslabError as e:
        logger.exception(e)
        return EXIT_FAILURE
    center = evaluate_p1(mesh, u0.values, np.array([[0.5, 0.5]]))[0]
    print("u0_center,%.6e" % center)
    for name, errors in (("u0", u0_errors), ("u1", u1_errors)):
        print("%s_rel_l2,%.6e" % (name, errors.rel_l2))
        print("%s_rel_energy,%.6e" % (name, errors.rel_energy))
    return EXIT_OK


def cmd_gen_perm(args):
    try:
        spec = parse_lognormal_spec(args.spec)
        field = generate_lognormal(spec)
    except (ConfigError, FileNotFoundError, ResolutionError) as e:
        _config_problem(e)
        return EXIT_USAGE
    save_raster(field, args.out)
    low, high = field.bounds()
    logger.info("wrote %dx%d raster to %s, max/min ratio %.4e" % (
        field.nx, field.ny, args.out, high / low))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mslab", description="Multiscale elliptic solvers and error tables")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    run = commands.add_parser("run", help="run one experiment and write its error table")
    run.add_argument("config", help="experiment file")
    run.add_argument("--full-scale", action="store_true",
                     help="allow reference meshes finer than 1/%d" % FULL_SCALE_REFERENCE)
    run.add_argument("--dump-fields", metavar="DIR", help="write nodal solution grids")
    run.add_argument("--output", metavar="CSV", help="override [output] csv")
    run.set_defaults(handler=cmd_run)

    suite = commands.add_parser("suite", help="run every experiment of a directory")
    suite.add_argument("directory")
    suite.add_argument("--full-scale", action="store_true")
    suite.add_argument("--output", metavar="CSV", help="combined table, stdout by default")
    suite.set_defaults(handler=cmd_suite)

    homog = commands.add_parser("homog", help="effective tensor of a periodic coefficient")
    homog.add_argument("config")
    homog.add_argument("--full-scale", action="store_true")
    homog.set_defaults(handler=cmd_homog)

    gen = commands.add_parser("gen-perm", help="generate a log-normal raster")
    gen.add_argument("spec", help="file with a [lognormal] section")
    gen.add_argument("out", help="raster file to write")
    gen.set_defaults(handler=cmd_gen_perm)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if args.verbose:
        logger.setLevel(logging.DEBUG)
    return args.handler(args)
