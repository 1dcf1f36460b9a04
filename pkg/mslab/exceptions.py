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
Exception hierarchy for mslab.

Every exception derives from a builtin so callers that do not care about
the package can catch `ValueError` / `RuntimeError` as usual.
"""

import numpy as np

__all__ = [
    "MslabError",
    "MeshError",
    "GeometryError",
    "ResolutionError",
    "RasterFormatError",
    "SolverError",
    "BreakdownError",
    "SingularMatrixError",
    "ConfigError",
]


class MslabError(Exception):
    """Base class of all mslab errors."""


class MeshError(MslabError, ValueError):
    """Invalid mesh parameters, degenerate splits or nesting violations."""


class GeometryError(MeshError):
    """Patch containment, interface alignment or degenerate simplex."""


class ResolutionError(MslabError, ValueError):
    """A random-field feature is smaller than the grid can represent."""


class RasterFormatError(MslabError, ValueError):
    """
    Malformed raster or region file.

    Attributes
    ----------
    line : int
        1-based line number of the offending line (0 if not line specific).
    """

    def __init__(self, message, line=0):
        self.line = line
        if line:
            message = "line %d: %s" % (line, message)
        super().__init__(message)


class SolverError(MslabError, RuntimeError):
    """
    A linear solve did not converge.

    Attributes
    ----------
    report : SolveReport
        Diagnostics of the failed solve.
    """

    def __init__(self, message, report=None):
        self.report = report
        if report is not None:
            message = "%s (iterations=%d, residual=%.3e)" % (
                message, report.iterations, report.residual)
        super().__init__(message)


class BreakdownError(SolverError):
    """BiCGStab breakdown, reported apart from plain stagnation."""


class SingularMatrixError(MslabError, np.linalg.LinAlgError):
    """Pivot below threshold in the dense solver."""


class ConfigError(MslabError, ValueError):
    """
    Experiment configuration is invalid.

    Attributes
    ----------
    violations : list of str
        Every violation found, each prefixed by its ``section.key`` path.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
