"""Internal-energy integrands and the mollified energy functional.

Two integrand families are supported:

* ``power``   -- F(x) = x^m / (m-1) for an exponent m > 1, whose gradient
  flow is the slow-diffusion equation with pressure P(x) = x^m;
* ``entropy`` -- F(x) = x log x (continuously extended by 0 at x = 0),
  the m = 1 end of the scale, with pressure P(x) = x (heat equation).

Both satisfy the two-sided curvature bound c1 x^{m-2} <= F''(x) <= c2 x^{m-2}
with equality (c1 = c2 = m for power laws, 1 for the entropy).

The mollified functional evaluated here is

    E_eps[rho] = int F((V_eps * rho)(x)) dx,

computed by trapezoid quadrature on a grid tied to the kernel width.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EnergyDomainError
from .grids import GridField, QuadratureSpec
from .kernels import MollifierSpec, density_on_nodes, eval_v

KINDS = ("power", "entropy")


@dataclass
class EnergyModel:
    """Integrand F with derivatives, pressure, and curvature constants.

    ``neg_prime_calls`` counts requests for F' at negative arguments; the
    mollified density is nonnegative by construction, so a nonzero count
    flags a bug upstream (asserted zero in the subquadratic runs).
    """

    kind: str
    m: float = 1.0
    neg_prime_calls: int = field(default=0, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown energy kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "power":
            if not self.m > 1:
                raise ValueError(f"power-law exponent must exceed 1, got {self.m}")
        else:
            self.m = 1.0

    @property
    def c1(self) -> float:
        return self.m if self.kind == "power" else 1.0

    @property
    def c2(self) -> float:
        return self.m if self.kind == "power" else 1.0

    # -- pointwise integrand ------------------------------------------------

    def f_eval(self, x):
        """F(x) for densities x >= 0 (negative inputs are clipped to 0)."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.kind == "power":
            return x ** self.m / (self.m - 1.0)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = x[pos] * np.log(x[pos])
        return out if out.ndim else float(out)

    def f_prime(self, x):
        """F'(x); F'(0) = 0 for power laws, undefined for the entropy."""
        x = np.asarray(x, dtype=float)
        neg = int(np.count_nonzero(x < 0.0))
        if neg:
            self.neg_prime_calls += neg
            x = np.maximum(x, 0.0)
        if self.kind == "power":
            return self.m / (self.m - 1.0) * x ** (self.m - 1.0)
        if np.any(x <= 0.0):
            raise EnergyDomainError("entropy F' is undefined at zero density")
        return np.log(x) + 1.0

    def f_second(self, x):
        """F''(x) = c x^{m-2}; requires x > 0 unless m >= 2."""
        x = np.asarray(x, dtype=float)
        if self.kind == "entropy":
            if np.any(x <= 0.0):
                raise EnergyDomainError("entropy F'' is undefined at zero density")
            return 1.0 / x
        if self.m < 2 and np.any(x <= 0.0):
            raise EnergyDomainError(f"F'' diverges at zero density for m={self.m}")
        return self.m * x ** (self.m - 2.0)

    def pressure(self, x):
        """P(x) = x F'(x) - F(x): x^m for power laws, x for the entropy."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.kind == "power":
            return x ** self.m
        return x


def mollified_density(positions: np.ndarray, kernel: MollifierSpec, grid) -> np.ndarray:
    """(1/N) sum_j V_eps(. - x_j) sampled on the grid nodes, flat (G,)."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    return density_on_nodes(kernel, pos, grid.nodes())


def regularized_energy(
    rho,
    kernel: MollifierSpec,
    model: EnergyModel,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """E_eps[rho] = int F(V_eps * rho) by trapezoid quadrature.

    rho may be a particle ensemble / raw position array (grid built around
    the particles, padded by the kernel support) or a GridField (convolved
    on its own grid, extended by the kernel support).
    """
    if isinstance(rho, GridField):
        conv = convolve_field(rho, kernel)
        return conv.integrate(model.f_eval(conv.values))
    positions = getattr(rho, "positions", rho)
    grid = quad.grid_for(positions, kernel)
    v = mollified_density(positions, kernel, grid)
    return float(np.dot(grid.trapezoid_weights(), model.f_eval(v)))


def energy_on_grid(positions, kernel, model, grid) -> float:
    """E_eps of a particle ensemble on a caller-pinned grid."""
    v = mollified_density(positions, kernel, grid)
    return float(np.dot(grid.trapezoid_weights(), model.f_eval(v)))


def convolve_field(field: GridField, kernel: MollifierSpec) -> GridField:
    """V_eps * field as a discrete convolution on the field's own grid.

    The result grid is the input grid extended by the kernel's numerical
    support.  The field spacing should resolve the kernel (h <= eps/4) for
    quadrature-grade accuracy; discrete Young's inequality holds regardless.
    """
    from .grids import Grid

    h = field.grid.spacing
    krad = kernel.padding_radius()
    nk = int(np.ceil(krad / h))
    if field.d == 1:
        offsets = h * np.arange(-nk, nk + 1)
        kern = eval_v(kernel, offsets) * h
        vals = np.convolve(field.values, kern, mode="full")
        grid = Grid(field.grid.origin - nk * h, h, (vals.size,))
        return GridField(grid, vals)
    from scipy.signal import fftconvolve

    offs = h * np.arange(-nk, nk + 1)
    ox, oy = np.meshgrid(offs, offs, indexing="ij")
    kern = eval_v(kernel, np.stack([ox, oy], axis=-1)) * h * h
    vals = fftconvolve(field.values, kern, mode="full")
    grid = Grid(field.grid.origin - nk * h, h, vals.shape)
    return GridField(grid, np.maximum(vals, 0.0))


@dataclass(frozen=True)
class NormBoundReport:
    lhs: float
    rhs: float
    ok: bool


def lm_norm_bound_check(rho0: GridField, kernel: MollifierSpec, model: EnergyModel) -> NormBoundReport:
    """Check ||V_eps * rho0||_m^m <= (c2/c1) ||rho0||_m^m (Young contraction)."""
    m = model.m if model.kind == "power" else 1.0
    conv = convolve_field(rho0, kernel)
    lhs = conv.integrate(conv.values ** m)
    rhs = (model.c2 / model.c1) * rho0.integrate(rho0.values ** m)
    return NormBoundReport(lhs=lhs, rhs=rhs, ok=bool(lhs <= rhs * (1.0 + 1e-6)))


def young_initial_energy_bound(rho0: GridField, kernel: MollifierSpec, model: EnergyModel) -> NormBoundReport:
    """Check (m-1) E_eps[rho0] <= ||rho0||_m^m for power laws."""
    if model.kind != "power":
        raise ValueError("the initial-energy Young bound is a power-law statement")
    lhs = (model.m - 1.0) * regularized_energy(rho0, kernel, model)
    rhs = rho0.integrate(rho0.values ** model.m)
    return NormBoundReport(lhs=lhs, rhs=rhs, ok=bool(lhs <= rhs * (1.0 + 1e-6)))
