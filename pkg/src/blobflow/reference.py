"""Reference solutions, convexity constants, and analytic lower bounds.

The self-similar compactly-supported profile

    rho(t, x) = t^{-a} (C - k |x|^2 t^{-2b})_+^{1/(m-1)},
    a = d/(d(m-1)+2),  b = a/d,  k = a(m-1)/(2 d m),

solves the slow-diffusion equation for m > 1; C is fixed by the total
mass through a Beta-function integral.  It is the analytic benchmark for
every convergence study here, backed by an independent implicit
finite-difference oracle for the same equation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import beta as beta_fn, erfinv, gamma as gamma_fn

from .energy import EnergyModel, regularized_energy
from .errors import ConvergenceError
from .grids import Grid, GridField
from .jko import alpha_for_dim, moment_interpolation_constant
from .kernels import KernelMoments, MollifierSpec, kernel_moments, unit_m2
from .transport import m2 as ensemble_m2


# ---------------------------------------------------------------------------
# density profiles (quantile functions feed the particle samplers)

@dataclass(frozen=True)
class UniformDensity:
    a: float = 0.0
    b: float = 1.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    def cdf_inverse(self, q):
        return self.a + (self.b - self.a) * np.asarray(q, dtype=float)

    def support(self):
        return self.a, self.b


@dataclass(frozen=True)
class GaussianDensity:
    sigma2: float = 1.0
    center: float = 0.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * (x - self.center) ** 2 / self.sigma2) / np.sqrt(2 * np.pi * self.sigma2)

    def cdf_inverse(self, q):
        q = np.asarray(q, dtype=float)
        return self.center + np.sqrt(2.0 * self.sigma2) * erfinv(2.0 * q - 1.0)


@dataclass(frozen=True)
class ProductDensity:
    """Tensor product of two 1d profiles (d = 2 initial data)."""

    axes: tuple


@dataclass(frozen=True)
class BarenblattProfile:
    """Self-similar slow-diffusion profile of unit (or given) mass."""

    m: float
    d: int = 1
    mass: float = 1.0
    t0: float = 1.0

    def __post_init__(self):
        if not self.m > 1:
            raise ValueError("the self-similar profile needs m > 1")
        if self.t0 <= 0:
            raise ValueError("time offset must be positive")

    @property
    def alpha(self) -> float:
        return self.d / (self.d * (self.m - 1) + 2.0)

    @property
    def beta(self) -> float:
        return self.alpha / self.d

    @property
    def k(self) -> float:
        return self.alpha * (self.m - 1) / (2.0 * self.d * self.m)

    @property
    def front_constant(self) -> float:
        """C fixed so that the profile carries the requested mass.

        mass = C^{1/(m-1)+d/2} k^{-d/2} pi^{d/2}/Gamma(d/2) B(d/2, m/(m-1)).
        """
        m, d = self.m, self.d
        shape = np.pi ** (d / 2.0) / gamma_fn(d / 2.0) * beta_fn(d / 2.0, m / (m - 1.0))
        return float((self.mass * self.k ** (d / 2.0) / shape) ** (1.0 / (1.0 / (m - 1.0) + d / 2.0)))

    def support_radius(self, t: float = 0.0) -> float:
        s = t + self.t0
        return float(np.sqrt(self.front_constant / self.k) * s ** self.beta)

    def density(self, t, x):
        """Profile density at shifted time t (absolute time t + t0)."""
        s = t + self.t0
        if s <= 0:
            raise ValueError("profile evaluated before its initial singularity")
        x = np.asarray(x, dtype=float)
        r2 = x * x if self.d == 1 else np.sum(x * x, axis=-1)
        core = np.maximum(self.front_constant - self.k * r2 * s ** (-2 * self.beta), 0.0)
        return s ** (-self.alpha) * core ** (1.0 / (self.m - 1.0))

    def sample_field(self, t: float, spacing: float, pad: float = 0.5) -> GridField:
        r = self.support_radius(t) + pad
        n = int(np.ceil(2 * r / spacing)) + 1
        if self.d == 1:
            grid = Grid(np.array([-r]), spacing, (n,))
            return GridField(grid, self.density(t, grid.axes()[0]))
        grid = Grid(np.array([-r, -r]), spacing, (n, n))
        return GridField(grid, self.density(t, grid.nodes()).reshape(grid.shape))

    @lru_cache(maxsize=8)
    def _quantile_table(self, t: float):
        r = self.support_radius(t)
        xs = np.linspace(-r, r, 400001)
        dens = self.density(t, xs)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
        cdf /= cdf[-1]
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        return cdf[keep], xs[keep]

    def cdf_inverse(self, q, t: float = 0.0):
        if self.d != 1:
            raise ValueError("quantiles implemented for d = 1")
        cdf, xs = self._quantile_table(float(t))
        return np.interp(np.asarray(q, dtype=float), cdf, xs)

    def support(self, t: float = 0.0):
        r = self.support_radius(t)
        return -r, r

    def quantile_ensemble(self, n: int, t: float = 0.0):
        from .particles import ParticleEnsemble

        q = (np.arange(n) + 0.5) / n
        return ParticleEnsemble(self.cdf_inverse(q, t)[:, None], time=max(t, 0.0))


def heat_solution(t: float, x, sigma2: float, d: int = 1):
    """Heat flow of a centred gaussian: variance sigma2 + 2t per axis."""
    if t < 0:
        raise ValueError("heat flow runs forward in time")
    var = sigma2 + 2.0 * t
    x = np.asarray(x, dtype=float)
    r2 = x * x if d == 1 else np.sum(x * x, axis=-1)
    return np.exp(-0.5 * r2 / var) / (2.0 * np.pi * var) ** (d / 2.0)


def gaussian_entropy(sigma2: float, d: int = 1) -> float:
    """Boltzmann entropy of an isotropic gaussian: -(d/2) log(2 pi e sigma2)."""
    return -0.5 * d * np.log(2.0 * np.pi * np.e * sigma2)


# ---------------------------------------------------------------------------
# finite-difference oracle for the local equation

def fd_pme_oracle(
    initial: GridField,
    m: float,
    T: float,
    dt: float,
    record_every: int | None = None,
    newton_tol: float = 1e-12,
    max_newton: int = 50,
) -> list:
    """Implicit-Euler / Newton solve of d_t u = Lap(u^m) with zero ends.

    Second-order centred Laplacian on the field's grid, full Newton on the
    nonlinearity with tridiagonal solves.  The update is in divergence
    form, so interior mass is conserved to solver tolerance.  Returns
    [(t, GridField)] including the initial state.
    """
    if initial.d != 1:
        raise ValueError("the finite-difference oracle is one-dimensional")
    h = initial.grid.spacing
    u = initial.values.copy()
    n = u.size
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * T:
        raise ValueError("dt must divide T")
    lam = dt / h ** 2
    out = [(0.0, initial)]
    ab = np.zeros((3, n))
    for step_ix in range(1, n_steps + 1):
        un = u
        v = u.copy()
        for _ in range(max_newton):
            vc = np.maximum(v, 0.0)
            vm = vc ** m
            dvm = m * vc ** (m - 1.0)
            res = v - un
            res[1:-1] -= lam * (vm[2:] - 2.0 * vm[1:-1] + vm[:-2])
            res[0] = v[0]
            res[-1] = v[-1]
            if np.max(np.abs(res)) < newton_tol:
                break
            ab[1, :] = 1.0 + 2.0 * lam * dvm
            ab[0, 1:] = -lam * dvm[1:]
            ab[2, :-1] = -lam * dvm[:-1]
            ab[1, 0] = ab[1, -1] = 1.0
            ab[0, 1] = ab[2, -2] = 0.0
            v = v - solve_banded((1, 1), ab, res)
        else:
            raise ConvergenceError(
                f"Newton stalled at step {step_ix} with residual {np.max(np.abs(res)):.3e}",
                residual=float(np.max(np.abs(res))),
            )
        u = v
        if record_every and step_ix % record_every == 0 or step_ix == n_steps:
            out.append((step_ix * dt, GridField(initial.grid, u.copy())))
    return out


# ---------------------------------------------------------------------------
# convexity modulus and stability

@dataclass(frozen=True)
class ConvexityReport:
    lam: float
    eps: float
    m: float
    d: int
    scaling_exponent: float  # lam ~ -eps^(scaling_exponent)... = -2 - d(m-1)


def lambda_convexity(kernel: MollifierSpec, model: EnergyModel) -> ConvexityReport:
    """Displacement-convexity modulus -c2 ||D^2 V_eps|| ||V_eps||^{m-2} / (m-1)."""
    if model.m <= 1:
        raise ValueError("the convexity modulus formula needs m > 1")
    mom: KernelMoments = kernel_moments(kernel)
    lam = -model.c2 * mom.sup_d2v * mom.sup_v ** (model.m - 2.0) / (model.m - 1.0)
    return ConvexityReport(
        lam=lam,
        eps=kernel.eps,
        m=model.m,
        d=kernel.d,
        scaling_exponent=-2.0 - kernel.d * (model.m - 1.0),
    )


def stability_bound(report: ConvexityReport, t: float, dw0: float) -> float:
    """Gradient-flow stability envelope exp(-lambda t) * dW(0)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return float(np.exp(-report.lam * t) * dw0)


# ---------------------------------------------------------------------------
# analytic lower bound of the mollified energy

@dataclass(frozen=True)
class LowerBoundReport:
    lhs: float  # E_eps[rho]
    rhs: float  # -c1 - 4 c2 C_{d,alpha} (1 + eps^2 m2(V1) + m2(rho))^alpha
    ok: bool
    alpha: float
    c_dalpha: float


def negative_part_constants(model: EnergyModel, alpha: float) -> tuple[float, float]:
    """(c1, c2) with F^-(s) <= c1 s + c2 s^alpha.

    Power laws are nonnegative, so both vanish.  For the entropy,
    sup_s -s^{1-alpha} log s = 1/(e (1-alpha)).
    """
    if model.kind == "power":
        return 0.0, 0.0
    return 0.0, 1.0 / (np.e * (1.0 - alpha))


def lower_bound_check(rho, kernel: MollifierSpec, model: EnergyModel) -> LowerBoundReport:
    """Check E_eps[rho] >= -c1 - 4 c2 C_{d,alpha}(1 + eps^2 m2(V1) + m2(rho))^alpha."""
    alpha = alpha_for_dim(kernel.d)
    c_da = moment_interpolation_constant(kernel.d)
    c1, c2 = negative_part_constants(model, alpha)
    if isinstance(rho, GridField):
        mom2 = rho.moment2()
    else:
        mom2 = ensemble_m2(rho)
    lhs = regularized_energy(rho, kernel, model)
    rhs = -c1 - 4.0 * c2 * c_da * (1.0 + kernel.eps ** 2 * unit_m2(kernel) + mom2) ** alpha
    ok = bool(lhs >= rhs - 1e-6 * (1.0 + abs(rhs)))
    return LowerBoundReport(lhs=lhs, rhs=rhs, ok=ok, alpha=alpha, c_dalpha=c_da)
