"""Uniform tensor grids, gridded fields, and quadrature policy.

Convolution-type integrals all run on uniform grids whose spacing is tied
to the kernel width (the integrands' length scale is eps), with the domain
padded by the kernel's numerical support so truncation sits below every
tolerance in use.  Trapezoid weights are used throughout; reductions are
plain numpy sums (fixed pairwise-summation topology), so repeated runs are
bit-reproducible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CoverageError


@dataclass(frozen=True)
class Grid:
    """Geometry of a uniform tensor grid: origin, spacing, points per axis."""

    origin: np.ndarray
    spacing: float
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", np.atleast_1d(np.asarray(self.origin, dtype=float)))
        object.__setattr__(self, "shape", tuple(int(n) for n in np.atleast_1d(self.shape)))
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if len(self.origin) != len(self.shape):
            raise ValueError("origin and shape dimensions differ")

    @property
    def d(self) -> int:
        return len(self.shape)

    def axes(self):
        return [self.origin[k] + self.spacing * np.arange(self.shape[k]) for k in range(self.d)]

    def upper(self) -> np.ndarray:
        return self.origin + self.spacing * (np.asarray(self.shape) - 1)

    def nodes(self) -> np.ndarray:
        """All nodes as a flat (G, d) array, row-major."""
        axes = self.axes()
        if self.d == 1:
            return axes[0][:, None]
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=-1)

    def trapezoid_weights(self) -> np.ndarray:
        """Flat (G,) trapezoid quadrature weights matching nodes()."""
        per_axis = []
        for n in self.shape:
            w = np.full(n, self.spacing)
            w[0] *= 0.5
            w[-1] *= 0.5
            per_axis.append(w)
        if self.d == 1:
            return per_axis[0]
        return np.outer(per_axis[0], per_axis[1]).ravel()

    def covers(self, points: np.ndarray, margin: float = 0.0) -> bool:
        """True when every point sits at least margin inside the box."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        slack = 1e-9 * self.spacing
        lo = self.origin + margin - slack
        hi = self.upper() - margin + slack
        return bool(np.all(pts >= lo) and np.all(pts <= hi))


def cover_points(points: np.ndarray, pad: float, spacing: float) -> Grid:
    """Smallest grid of the given spacing covering the points padded by pad."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo = pts.min(axis=0) - pad
    hi = pts.max(axis=0) + pad
    shape = tuple(int(np.ceil((b - a) / spacing)) + 1 for a, b in zip(lo, hi))
    return Grid(origin=lo, spacing=spacing, shape=shape)


@dataclass(frozen=True)
class GridField:
    """Scalar field sampled on a uniform grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def d(self) -> int:
        return self.grid.d

    def integrate(self, integrand: np.ndarray | None = None) -> float:
        """Trapezoid integral of integrand (default: the field itself)."""
        v = self.values if integrand is None else np.asarray(integrand)
        axes = self.grid.axes()
        for k in range(self.d - 1, -1, -1):
            v = np.trapezoid(v, axes[k], axis=k)
        return float(v)

    def mass(self) -> float:
        return self.integrate()

    def moment2(self) -> float:
        """Second moment int |x|^2 field dx."""
        nodes = self.grid.nodes()
        r2 = np.sum(nodes * nodes, axis=-1).reshape(self.grid.shape)
        return self.integrate(self.values * r2)

    def gradient(self):
        """Central-difference gradient per axis (one-sided at boundaries)."""
        axes = self.grid.axes()
        if self.d == 1:
            return [np.gradient(self.values, axes[0])]
        return list(np.gradient(self.values, axes[0], axes[1]))


@dataclass(frozen=True)
class QuadratureSpec:
    """Grid-policy knobs for convolution quadrature.

    spacing is h = h_over_eps * eps, defaulting to eps/4 for the gaussian
    family and eps/8 for the bump family (the C^2 bump and the fractional
    powers it feeds need the finer grid).  The padding defaults to the
    kernel's own numerical support radius and can be overridden via
    pad_factor (in units of eps).  A fixed box may be pinned via
    domain=[lo, hi] per axis; runs then fail loudly if particles approach
    the boundary instead of silently truncating integrals.
    """

    h_over_eps: float | None = None
    pad_factor: float | None = None
    domain: tuple | None = None

    def spacing(self, kernel) -> float:
        if self.h_over_eps is not None:
            return self.h_over_eps * kernel.eps
        return (0.125 if kernel.family == "bump" else 0.25) * kernel.eps

    def padding(self, kernel) -> float:
        if self.pad_factor is not None:
            return self.pad_factor * kernel.eps
        return kernel.padding_radius()

    def grid_for(self, positions: np.ndarray, kernel) -> Grid:
        """Quadrature grid for kernel integrals around the given positions."""
        pad = self.padding(kernel)
        h = self.spacing(kernel)
        pts = np.atleast_2d(np.asarray(positions, dtype=float))
        if self.domain is None:
            return cover_points(pts, pad, h)
        dom = np.atleast_2d(np.asarray(self.domain, dtype=float))
        if dom.shape != (pts.shape[1], 2):
            raise ValueError("domain must give [lo, hi] per axis")
        lo, hi = dom[:, 0], dom[:, 1]
        grid = Grid(
            origin=lo,
            spacing=h,
            shape=tuple(int(np.ceil((b - a) / h)) + 1 for a, b in zip(lo, hi)),
        )
        if not grid.covers(pts, margin=pad):
            raise CoverageError(
                "quadrature domain too small: a particle sits within one kernel "
                f"support radius ({pad:.4g}) of the boundary"
            )
        return grid


# ---------------------------------------------------------------------------
# serialisation: CSV values plus a JSON geometry sidecar

def write_field_csv(field: GridField, path) -> None:
    path = Path(path)
    nodes = field.grid.nodes()
    flat = field.values.ravel()
    with path.open("w") as fh:
        if field.d == 1:
            fh.write("x,value\n")
            for x, v in zip(nodes[:, 0], flat):
                fh.write(f"{float(x)!r},{float(v)!r}\n")
        else:
            fh.write("x0,x1,value\n")
            for (x0, x1), v in zip(nodes, flat):
                fh.write(f"{float(x0)!r},{float(x1)!r},{float(v)!r}\n")
    sidecar = {
        "origin": [float(a) for a in field.grid.origin],
        "spacing": field.grid.spacing,
        "extents": [int(n) for n in field.grid.shape],
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(sidecar, indent=2) + "\n")


def read_field_csv(path) -> GridField:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".meta.json").read_text())
    grid = Grid(np.asarray(meta["origin"]), meta["spacing"], tuple(meta["extents"]))
    values = np.loadtxt(path, delimiter=",", skiprows=1, usecols=grid.d, ndmin=1)
    return GridField(grid, values.reshape(grid.shape))
