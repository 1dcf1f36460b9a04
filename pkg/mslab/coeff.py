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
Scalar diffusion coefficients a(x) on the unit square.

Every field is an immutable callable taking an array of points of shape
``(..., 2)`` and returning the coefficient with shape ``(...)``.
"""

import hashlib
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exceptions import RasterFormatError, ResolutionError

__all__ = [
    "CoefficientField",
    "PeriodicField",
    "Constant",
    "RasterField",
    "LayeredAnalytic",
    "Overlay",
    "LognormalSpec",
    "evaluate",
    "effective_bounds",
    "generate_lognormal",
    "load_raster",
    "save_raster",
    "write_grid",
    "load_regions",
    "save_regions",
    "CHANNEL_CONTRAST",
]

logger = logging.getLogger("mslab")

CHANNEL_CONTRAST = 100.0
TWO_PI = 2.0 * np.pi


class CoefficientField():
    """
    Base class of the scalar coefficient fields.

    Subclasses implement `__call__`, `bounds` and `key`.

    Attributes
    ----------
    epsilon : float or None
        Oscillation period for analytic multiscale fields.
    """
    logger = logging.getLogger("mslab")
    epsilon = None

    def __call__(self, points):
        raise NotImplementedError

    def bounds(self):
        """Return ``(lower, upper)`` with lower <= a(x) <= upper."""
        raise NotImplementedError

    @property
    def key(self):
        """Hashable description identifying the field's values."""
        raise NotImplementedError

    def cell_field(self):
        """
        The coefficient on the unit reference cell, ``a(y)`` with ``x = eps y``.

        Raises
        ------
        ValueError
            If the field is not periodic.
        """
        raise ValueError("%s is not a periodic field" % type(self).__name__)

    def __repr__(self):
        return "%s%r" % (type(self).__name__, self.key[1:])


class PeriodicField(CoefficientField):
    """
    Oscillating coefficient with period `epsilon` in both directions::

        a(x) = (2 + 1.8 sin(2 pi x1/eps)) / (2 + 1.8 cos(2 pi x2/eps))
             + (2 + 1.8 sin(2 pi x2/eps)) / (2 + 1.8 sin(2 pi x1/eps))
    """

    def __init__(self, epsilon):
        if not epsilon > 0:
            raise ValueError("epsilon must be positive, got %s" % epsilon)
        self.epsilon = float(epsilon)

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        s1 = 2.0 + 1.8 * np.sin(TWO_PI * points[..., 0] / self.epsilon)
        c2 = 2.0 + 1.8 * np.cos(TWO_PI * points[..., 1] / self.epsilon)
        s2 = 2.0 + 1.8 * np.sin(TWO_PI * points[..., 1] / self.epsilon)
        return s1 / c2 + s2 / s1

    def bounds(self):
        # term-wise extremes
        return (2 * 0.2 / 3.8, 2 * 3.8 / 0.2)

    @property
    def key(self):
        return ("periodic", self.epsilon)

    def cell_field(self):
        return PeriodicField(1.0)


class Constant(CoefficientField):

    def __init__(self, value):
        if not value > 0:
            raise ValueError("coefficient must be positive, got %s" % value)
        self.value = float(value)

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        return np.full(points.shape[:-1], self.value)

    def bounds(self):
        return (self.value, self.value)

    @property
    def key(self):
        return ("constant", self.value)

    def cell_field(self):
        return self


LAYER_PROFILES = {
    # amplitude of 2 + A sin(2 pi t / eps)
    "strong": 1.8,
    "mild": 1.0,
}


class LayeredAnalytic(CoefficientField):
    """
    Layered coefficient ``2 + A sin(2 pi x_axis / eps)`` varying along one axis.

    Parameters
    ----------
    profile : str
        ``"strong"`` (A = 1.8) or ``"mild"`` (A = 1).
    epsilon : float
    axis : int
        0 for layers varying in x1, 1 for x2.
    """

    def __init__(self, profile, epsilon, axis=0):
        if profile not in LAYER_PROFILES:
            raise ValueError("unknown layer profile %r, expected one of %s"
                             % (profile, sorted(LAYER_PROFILES)))
        if not epsilon > 0:
            raise ValueError("epsilon must be positive, got %s" % epsilon)
        if axis not in (0, 1):
            raise ValueError("axis must be 0 or 1, got %s" % axis)
        self.profile = profile
        self.amplitude = LAYER_PROFILES[profile]
        self.epsilon = float(epsilon)
        self.axis = axis

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        return 2.0 + self.amplitude * np.sin(TWO_PI * points[..., self.axis] / self.epsilon)

    def bounds(self):
        return (2.0 - self.amplitude, 2.0 + self.amplitude)

    @property
    def key(self):
        return ("layered", self.profile, self.epsilon, self.axis)

    def cell_field(self):
        return LayeredAnalytic(self.profile, 1.0, self.axis)


class RasterField(CoefficientField):
    """
    Cellwise constant coefficient on an ``nx`` by ``ny`` grid over (0,1)^2.

    Attributes
    ----------
    nx, ny : int
    values : ndarray, shape (ny, nx)
        Row 0 is the bottom row.
    """

    def __init__(self, values):
        values = np.array(values, dtype=float, ndmin=2)
        if values.ndim != 2 or values.size == 0:
            raise ValueError("raster values must be a non-empty 2D array")
        if not np.all(values > 0) or not np.all(np.isfinite(values)):
            raise ValueError("raster values must be finite and positive")
        values.setflags(write=False)
        self.values = values
        self.ny, self.nx = values.shape
        self._digest = hashlib.sha1(values.tobytes()).hexdigest()

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        i = np.clip(np.floor(points[..., 0] * self.nx).astype(np.int64), 0, self.nx - 1)
        j = np.clip(np.floor(points[..., 1] * self.ny).astype(np.int64), 0, self.ny - 1)
        return self.values[j, i]

    def bounds(self):
        return (float(self.values.min()), float(self.values.max()))

    @property
    def key(self):
        return ("raster", self.nx, self.ny, self._digest)


class Overlay(CoefficientField):
    """
    Base field with axis-aligned rectangles replaced by constant values.

    Regions are applied in order, so the last region containing a point
    wins. Rectangles are closed.

    Parameters
    ----------
    base : CoefficientField
    regions : sequence of ((x0, y0, x1, y1), value)
    """

    def __init__(self, base, regions):
        self.base = base
        cleaned = []
        for rect, value in regions:
            x0, y0, x1, y1 = (float(c) for c in rect)
            if not (x0 < x1 and y0 < y1):
                raise ValueError("degenerate region %r" % (rect,))
            if not value > 0:
                raise ValueError("region value must be positive, got %s" % value)
            cleaned.append(((x0, y0, x1, y1), float(value)))
        self.regions = tuple(cleaned)
        self.epsilon = base.epsilon

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        values = np.array(self.base(points), dtype=float, copy=True)
        x, y = points[..., 0], points[..., 1]
        for (x0, y0, x1, y1), value in self.regions:
            inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
            values[inside] = value
        return values

    def bounds(self):
        lower, upper = self.base.bounds()
        region_values = [value for _, value in self.regions]
        return (min([lower] + region_values), max([upper] + region_values))

    @property
    def key(self):
        return ("overlay", self.base.key, self.regions)

    def channel_regions(self, contrast=CHANNEL_CONTRAST):
        """Regions whose value differs from the base range by more than `contrast`."""
        lower, upper = self.base.bounds()
        return [rect for rect, value in self.regions
                if value > contrast * upper or value * contrast < lower]


def evaluate(field, points):
    """Evaluate `field` at one point ``(x, y)`` or an array of points."""
    values = field(np.asarray(points, dtype=float))
    return float(values) if np.ndim(values) == 0 else values


def effective_bounds(field):
    """
    Bounds ``(lambda, Lambda)`` of a coefficient field.

    Analytic fields return closed-form bounds; raster and overlay fields the
    extremes of their stored values.
    """
    return field.bounds()


@dataclass(frozen=True)
class LognormalSpec:
    """
    Parameters of a log-normal random field.

    Attributes
    ----------
    variance : float
        Variance of the log-permeability.
    l1, l2 : float
        Correlation lengths along x1 and x2.
    nx, ny : int
        Raster resolution.
    seed : int
        Seed of the PCG64 generator.
    """
    variance: float
    l1: float
    l2: float
    nx: int = 1024
    ny: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative, got %s" % self.variance)
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError("correlation lengths must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("raster resolution must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def ellipse_kernel(l1, l2, dx, dy):
    """Indicator of the ellipse ``(x/l1)^2 + (y/l2)^2 <= 1`` on grid offsets."""
    kx = int(np.floor(l1 / dx))
    ky = int(np.floor(l2 / dy))
    ox = np.arange(-kx, kx + 1) * dx / l1
    oy = np.arange(-ky, ky + 1) * dy / l2
    return (np.add.outer(oy ** 2, ox ** 2) <= 1.0).astype(float)


def generate_lognormal(spec):
    """
    Generate a log-normal raster by the moving-ellipse average.

    White noise drawn from ``numpy.random.Generator(PCG64(seed))`` with its
    ``standard_normal`` transform is averaged over the ellipse centred at
    each cell (only cells inside the domain count), rescaled to sample mean
    0 and sample variance ``spec.variance``, and exponentiated.

    Parameters
    ----------
    spec : LognormalSpec

    Returns
    -------
    RasterField

    Raises
    ------
    ResolutionError
        If a correlation length is below half the grid spacing.
    """
    dx, dy = 1.0 / spec.nx, 1.0 / spec.ny
    if spec.l1 < dx / 2 or spec.l2 < dy / 2:
        raise ResolutionError(
            "correlation lengths (%g, %g) below half the grid spacing (%g, %g)"
            % (spec.l1, spec.l2, dx / 2, dy / 2))
    if spec.variance == 0:
        return RasterField(np.ones((spec.ny, spec.nx)))

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    noise = rng.standard_normal((spec.ny, spec.nx))
    kernel = ellipse_kernel(spec.l1, spec.l2, dx, dy)
    total = ndimage.convolve(noise, kernel, mode="constant", cval=0.0)
    count = ndimage.convolve(np.ones_like(noise), kernel, mode="constant", cval=0.0)
    smooth = total / count

    smooth = smooth - smooth.mean()
    std = smooth.std()
    log_field = smooth * (np.sqrt(spec.variance) / std) if std > 0 else smooth
    values = np.exp(log_field)
    logger.info("log-normal field %dx%d, seed %d: contrast %.4e" % (
        spec.nx, spec.ny, spec.seed, values.max() / values.min()))
    return RasterField(values)


def write_grid(values, file_path):
    """
    Write a 2D array (row 0 at the bottom) in the raster text format.

    Unlike `save_raster` the values need not be positive, so nodal solution
    grids can be dumped in the same format.
    """
    values = np.asarray(values, dtype=float)
    with open(file_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("raster %d %d\n" % (values.shape[1], values.shape[0]))
        for row in values:
            f.write(" ".join(repr(float(v)) for v in row))
            f.write("\n")


def save_raster(field, file_path):
    """Write `field` in the text raster format, values in round-trip precision."""
    write_grid(field.values, file_path)


def load_raster(file_path):
    """
    Read a raster file.

    The first line is ``raster nx ny``, followed by `ny` rows of `nx`
    positive values, the first row being the bottom of the domain.

    Raises
    ------
    RasterFormatError
        On a malformed header, non-numeric or non-positive value, or
        dimension mismatch, with the offending line number.
    """
    with open(file_path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise RasterFormatError("empty raster file", 1)
    header = lines[0].split()
    if len(header) != 3 or header[0] != "raster":
        raise RasterFormatError("expected header 'raster nx ny'", 1)
    try:
        nx, ny = int(header[1]), int(header[2])
    except ValueError:
        raise RasterFormatError("raster dimensions must be integers", 1)
    if nx < 1 or ny < 1:
        raise RasterFormatError("raster dimensions must be positive", 1)
    if len(lines) - 1 != ny:
        # first missing or first surplus row
        number = len(lines) + 1 if len(lines) - 1 < ny else ny + 2
        raise RasterFormatError("expected %d rows, found %d" % (ny, len(lines) - 1), number)

    values = np.empty((ny, nx))
    for row, line in enumerate(lines[1:]):
        number = row + 2
        tokens = line.split()
        if len(tokens) != nx:
            raise RasterFormatError("expected %d values, found %d" % (nx, len(tokens)), number)
        try:
            values[row] = [float(t) for t in tokens]
        except ValueError:
            raise RasterFormatError("non-numeric value", number)
        if not np.all(np.isfinite(values[row])):
            raise RasterFormatError("non-finite coefficient", number)
        if not np.all(values[row] > 0):
            raise RasterFormatError("non-positive coefficient", number)
    return RasterField(values)


def load_regions(file_path):
    """
    Read overlay regions, one ``rect x0 y0 x1 y1 value`` per line.

    Blank lines and ``#`` comments are skipped.

    Returns
    -------
    list of ((x0, y0, x1, y1), value)
    """
    regions = []
    with open(file_path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if tokens[0] != "rect" or len(tokens) != 6:
                raise RasterFormatError("expected 'rect x0 y0 x1 y1 value'", number)
            try:
                x0, y0, x1, y1, value = (float(t) for t in tokens[1:])
            except ValueError:
                raise RasterFormatError("non-numeric region field", number)
            if not (x0 < x1 and y0 < y1):
                raise RasterFormatError("degenerate rectangle", number)
            if not value > 0:
                raise RasterFormatError("non-positive coefficient", number)
            regions.append(((x0, y0, x1, y1), value))
    return regions


def save_regions(regions, file_path):
    with open(file_path, "w", encoding="utf-8", newline="\n") as f:
        for (x0, y0, x1, y1), value in regions:
            f.write("rect %r %r %r %r %r\n" % (x0, y0, x1, y1, value))
