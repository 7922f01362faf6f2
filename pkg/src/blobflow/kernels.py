"""Mollifier families and their width-scalings.

A smoothing kernel of width ``eps`` is generated from a unit profile by
``V_eps(x) = eps^{-d} V_1(x / eps)``.  The unit profiles on offer are

* ``gaussian`` -- standard normal density.  Unbounded support; for
  quadrature purposes it is truncated at ``GAUSSIAN_TRUNCATION`` widths,
  where the tail mass is below 1e-14.
* ``bump``     -- normalised polynomial bump ``c_d (1 - |x|^2)^3`` on the
  unit ball, identically zero outside.  C^2, compactly supported; this is
  the profile required by the subquadratic diffusion regime.

Both profiles are nonnegative, even, mass one, with finite second moment
and integrable gradient.  Scalar moments of the unit profile are computed
once by adaptive quadrature and cached; moments of ``V_eps`` follow from
the exact scaling laws (``m2`` scales like ``eps^2``, sup norms like
``eps^{-d}`` and ``eps^{-d-2}``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import QuadratureError

FAMILIES = ("gaussian", "bump")

# Quadrature/padding radius of the unit gaussian; tail mass < 1e-14.
GAUSSIAN_TRUNCATION = 8.0

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class MollifierSpec:
    """A mollifier family member: profile family, dimension, width."""

    family: str
    d: int
    eps: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if not self.eps > 0:
            raise ValueError(f"kernel width must be positive, got {self.eps}")

    def padding_radius(self) -> float:
        """Radius beyond which the kernel is numerically negligible.

        Exact support radius for the bump family; truncation radius for the
        gaussian family.
        """
        if self.family == "bump":
            return self.eps
        return GAUSSIAN_TRUNCATION * self.eps

    def with_eps(self, eps: float) -> "MollifierSpec":
        return MollifierSpec(self.family, self.d, eps)


@dataclass(frozen=True)
class KernelMoments:
    """Scalar norms and moments of a scaled kernel V_eps."""

    mass: float
    m2: float
    sup_v: float
    sup_d2v: float
    l1_grad_v: float


# ---------------------------------------------------------------------------
# unit-profile values and gradients (functions of r^2 = |x/eps|^2)

def _unit_value_r2(family: str, d: int, r2: np.ndarray) -> np.ndarray:
    if family == "gaussian":
        return _INV_SQRT_2PI ** d * np.exp(-0.5 * r2)
    c = _bump_normalisation(d)
    return c * np.maximum(1.0 - r2, 0.0) ** 3


def _unit_grad_factor_r2(family: str, d: int, r2: np.ndarray) -> np.ndarray:
    """g with grad V_1(u) = u * g(|u|^2)."""
    if family == "gaussian":
        return -(_INV_SQRT_2PI ** d) * np.exp(-0.5 * r2)
    c = _bump_normalisation(d)
    return -6.0 * c * np.maximum(1.0 - r2, 0.0) ** 2


def _radial_integral(profile, d, upper, tol=1e-12):
    """Integral of profile(|x|) over R^d, via the radial reduction."""
    if d == 1:
        integrand = lambda r: 2.0 * profile(r)
    else:
        integrand = lambda r: 2.0 * np.pi * r * profile(r)
    val, err = integrate.quad(integrand, 0.0, upper, limit=200, epsabs=tol, epsrel=tol)
    if err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureError(
            f"radial quadrature error {err:.2e} did not meet tolerance (value {val:.6e})"
        )
    return val


def _unit_upper(family: str) -> float:
    return 1.0 if family == "bump" else np.inf


@lru_cache(maxsize=None)
def _bump_normalisation(d: int) -> float:
    raw = _radial_integral(lambda r: (1.0 - r * r) ** 3, d, 1.0)
    return 1.0 / raw


@lru_cache(maxsize=None)
def _unit_moments(family: str, d: int):
    """(mass, m1, m2, l1_grad) of the unit profile, by cached quadrature."""
    upper = _unit_upper(family)
    val = lambda r: float(_unit_value_r2(family, d, np.asarray(r * r)))
    gmag = lambda r: r * abs(float(_unit_grad_factor_r2(family, d, np.asarray(r * r))))
    mass = _radial_integral(val, d, upper)
    m1 = _radial_integral(lambda r: r * val(r), d, upper)
    m2 = _radial_integral(lambda r: r * r * val(r), d, upper)
    l1_grad = _radial_integral(gmag, d, upper)
    return mass, m1, m2, l1_grad


def _unit_sup(family: str, d: int) -> float:
    return float(_unit_value_r2(family, d, np.asarray(0.0)))


def _unit_sup_hessian(family: str, d: int) -> float:
    # Operator norm of the unit-profile Hessian, attained at the origin for
    # both families (radial eigenvalue |p''(0)| dominates all r).
    if family == "gaussian":
        return _INV_SQRT_2PI ** d
    return 6.0 * _bump_normalisation(d)


# ---------------------------------------------------------------------------
# scaled evaluation

def _points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1:
        return x[..., None]
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing axis {d}, got shape {x.shape}")
    return x


def eval_v(spec: MollifierSpec, x) -> np.ndarray:
    """V_eps(x); x has trailing axis d (or is scalar/any shape when d=1)."""
    pts = _points(x, spec.d) / spec.eps
    r2 = np.sum(pts * pts, axis=-1)
    return _unit_value_r2(spec.family, spec.d, r2) * spec.eps ** (-spec.d)


def eval_grad_v(spec: MollifierSpec, x) -> np.ndarray:
    """grad V_eps(x), odd in x; shape of x (d=1) or x's shape (d=2)."""
    pts = _points(x, spec.d) / spec.eps
    r2 = np.sum(pts * pts, axis=-1)
    g = _unit_grad_factor_r2(spec.family, spec.d, r2) * spec.eps ** (-spec.d - 1)
    out = pts * g[..., None]
    return out[..., 0] if spec.d == 1 else out


def kernel_moments(spec: MollifierSpec) -> KernelMoments:
    """Mass, second moment, sup norms and the gradient L1 norm of V_eps."""
    mass, _, m2_unit, l1g_unit = _unit_moments(spec.family, spec.d)
    return KernelMoments(
        mass=mass,
        m2=spec.eps ** 2 * m2_unit,
        sup_v=spec.eps ** (-spec.d) * _unit_sup(spec.family, spec.d),
        sup_d2v=spec.eps ** (-spec.d - 2) * _unit_sup_hessian(spec.family, spec.d),
        l1_grad_v=l1g_unit / spec.eps,
    )


def unit_m1(spec: MollifierSpec) -> float:
    """First absolute moment of the unit profile V_1."""
    return _unit_moments(spec.family, spec.d)[1]


def unit_m2(spec: MollifierSpec) -> float:
    """Second moment of the unit profile V_1."""
    return _unit_moments(spec.family, spec.d)[2]


def value_on_pairs(spec: MollifierSpec, diff: np.ndarray) -> np.ndarray:
    """V_eps on an explicit (..., d) array of displacement vectors."""
    u = np.asarray(diff, dtype=float) / spec.eps
    r2 = np.einsum("...d,...d->...", u, u)
    return _unit_value_r2(spec.family, spec.d, r2) * spec.eps ** (-spec.d)


def grad_on_pairs(spec: MollifierSpec, diff: np.ndarray) -> np.ndarray:
    """grad V_eps on an explicit (..., d) array of displacement vectors."""
    u = np.asarray(diff, dtype=float) / spec.eps
    r2 = np.einsum("...d,...d->...", u, u)
    g = _unit_grad_factor_r2(spec.family, spec.d, r2) * spec.eps ** (-spec.d - 1)
    return u * g[..., None]


def density_on_nodes(spec: MollifierSpec, positions: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Mollified empirical density (1/N) sum_j V_eps(node - x_j) at each node.

    positions: (N, d); nodes: (G, d).  Returns (G,).
    """
    vals = value_on_pairs(spec, nodes[None, :, :] - positions[:, None, :])
    return vals.mean(axis=0)


def self_convolution(spec: MollifierSpec):
    """W_eps = V_eps * V_eps.

    For the gaussian family the convolution is again a gaussian kernel of
    width sqrt(2)*eps and a MollifierSpec is returned.  For the bump family
    the convolution has no closed form; a grid-sampled field on the support
    of W_eps is returned.
    """
    if spec.family == "gaussian":
        return spec.with_eps(np.sqrt(2.0) * spec.eps)

    from .grids import Grid, GridField  # local import; grids does not import kernels

    h = spec.eps / 64.0
    half = 2.0 * spec.eps  # supp W_eps = B_{2 R eps}
    n = int(np.ceil(2.0 * half / h)) + 1
    if spec.d == 1:
        axis = -half + h * np.arange(n)
        samples = eval_v(spec, axis)
        w = np.convolve(samples, samples) * h
        grid = Grid(origin=np.array([-2.0 * half]), spacing=h, shape=(2 * n - 1,))
        return GridField(grid, w)
    from scipy.signal import fftconvolve

    axis = -half + h * np.arange(n)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    samples = eval_v(spec, np.stack([xx, yy], axis=-1))
    w = fftconvolve(samples, samples) * h * h
    grid = Grid(origin=np.array([-2.0 * half, -2.0 * half]), spacing=h, shape=w.shape)
    return GridField(grid, w)
