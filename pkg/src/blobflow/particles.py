"""Deterministic blob-method particle flow.

N equal-weight particles carry the empirical measure
rho^N = (1/N) sum_j delta_{x_j}.  Each particle moves with the mollified
velocity field

    v_i = - int grad V_eps(x_i - y) F'( (1/N) sum_j V_eps(y - x_j) ) dy,

evaluated by trapezoid quadrature on one shared grid per evaluation: the
mollified density is built once on the grid (O(N G)) and every particle
integrates against it (O(N G)), rather than re-quadrating per particle.

For F(x) = x^2 the velocity collapses to the pairwise interaction
-(2/N) sum_j grad W_eps(x_i - x_j) with W_eps = V_eps * V_eps; that closed
form (gaussian family) is kept as an independent cross-check route.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .energy import EnergyModel, energy_on_grid, mollified_density
from .errors import CoverageError, DomainEscapeError, UnsupportedDensityError
from .grids import QuadratureSpec
from .kernels import MollifierSpec, grad_on_pairs, self_convolution

INTEGRATORS = ("euler", "heun", "rk4")


@dataclass(frozen=True)
class ParticleEnsemble:
    """Equal-weight particle positions; total mass is exactly one."""

    positions: np.ndarray  # (N, d)
    time: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ValueError("positions must be a nonempty (N, d) array")
        if not np.all(np.isfinite(pos)):
            raise ValueError("particle positions must be finite")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def weight(self) -> float:
        return 1.0 / self.n

    def center_of_mass(self) -> np.ndarray:
        return self.positions.mean(axis=0)


@dataclass(frozen=True)
class Trajectory:
    """Recorded snapshots of a particle run plus per-snapshot diagnostics.

    diagnostics columns: energy (mollified energy on the step's quadrature
    grid), m2, center of mass, and the Wasserstein increment from the
    previous snapshot.
    """

    snapshots: list  # [(t, ParticleEnsemble)]
    diagnostics: list  # [dict]

    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    def final(self) -> ParticleEnsemble:
        return self.snapshots[-1][1]


def velocity_on_grid(positions: np.ndarray, kernel: MollifierSpec, model: EnergyModel, grid) -> np.ndarray:
    """Blob velocities against a caller-pinned quadrature grid."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    nodes = grid.nodes()
    weights = grid.trapezoid_weights()
    v_tilde = mollified_density(pos, kernel, grid)
    fp = model.f_prime(v_tilde)
    gv = grad_on_pairs(kernel, pos[:, None, :] - nodes[None, :, :])  # (N, G, d)
    return -np.einsum("ngd,g->nd", gv, weights * fp)


def velocity(
    ens: ParticleEnsemble,
    kernel: MollifierSpec,
    model: EnergyModel,
    quad: QuadratureSpec = QuadratureSpec(),
) -> np.ndarray:
    """Particle velocities on a fresh shared grid covering the ensemble."""
    grid = quad.grid_for(ens.positions, kernel)
    return velocity_on_grid(ens.positions, kernel, model, grid)


def pairwise_velocity_m2(positions: np.ndarray, kernel: MollifierSpec) -> np.ndarray:
    """Closed-form velocities for F(x) = x^2: -(2/N) sum_j grad W_eps(x_i - x_j)."""
    if kernel.family != "gaussian":
        raise ValueError("closed-form pairwise route requires the gaussian family")
    w_eps = self_convolution(kernel)
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    gw = grad_on_pairs(w_eps, pos[:, None, :] - pos[None, :, :])
    return -(2.0 / pos.shape[0]) * gw.sum(axis=1)


def step(
    ens: ParticleEnsemble,
    dt: float,
    kernel: MollifierSpec,
    model: EnergyModel,
    quad: QuadratureSpec = QuadratureSpec(),
    integrator: str = "rk4",
) -> ParticleEnsemble:
    """Advance one time step; weights are untouched, so mass is exact."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if integrator not in INTEGRATORS:
        raise ValueError(f"unknown integrator {integrator!r}; choose from {INTEGRATORS}")
    x = ens.positions
    f = lambda y: velocity_on_grid(y, kernel, model, quad.grid_for(y, kernel))
    if integrator == "euler":
        xn = x + dt * f(x)
    elif integrator == "heun":
        k1 = f(x)
        k2 = f(x + dt * k1)
        xn = x + 0.5 * dt * (k1 + k2)
    else:
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        xn = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return ParticleEnsemble(xn, time=ens.time + dt)


def stable_dt(kernel: MollifierSpec, model: EnergyModel) -> float:
    """Default step: min(0.1 eps^2, reciprocal convexity-modulus heuristic)."""
    dt = 0.1 * kernel.eps ** 2
    if model.m > 1:
        from .reference import lambda_convexity

        lam = abs(lambda_convexity(kernel, model).lam)
        dt = min(dt, 1.0 / lam)
    return dt


def simulate(
    initial: ParticleEnsemble,
    kernel: MollifierSpec,
    model: EnergyModel,
    T: float,
    dt: float | None = None,
    quad: QuadratureSpec = QuadratureSpec(),
    integrator: str = "rk4",
    record_every: int = 1,
) -> Trajectory:
    """Integrate the blob ODE to time T, recording every record_every steps.

    The energy diagnostic uses the same quadrature policy as the velocity.
    With a pinned quadrature domain, a particle reaching the boundary ring
    aborts the run (DomainEscapeError) rather than truncating integrals.
    """
    from .transport import w2_1d_positions, w2_assignment_positions

    if dt is None:
        dt = stable_dt(kernel, model)
    n_steps = max(1, int(np.ceil(T / dt - 1e-12)))
    dt = T / n_steps
    if n_steps % record_every != 0:
        raise ValueError(f"record_every={record_every} must divide the {n_steps} steps")

    def diag(ens, prev):
        grid = quad.grid_for(ens.positions, kernel)
        entry = {
            "t": ens.time,
            "energy": energy_on_grid(ens.positions, kernel, model, grid),
            "m2": float(np.mean(np.sum(ens.positions ** 2, axis=1))),
            "com": ens.center_of_mass(),
        }
        if prev is None:
            entry["dw_step"] = 0.0
        elif ens.d == 1:
            entry["dw_step"] = w2_1d_positions(prev.positions[:, 0], ens.positions[:, 0])
        elif ens.n <= 512:
            entry["dw_step"] = w2_assignment_positions(prev.positions, ens.positions)
        else:
            entry["dw_step"] = float("nan")
        return entry

    ens = replace(initial, time=0.0)
    snapshots = [(0.0, ens)]
    diagnostics = [diag(ens, None)]
    for k in range(1, n_steps + 1):
        try:
            ens = step(ens, dt, kernel, model, quad, integrator)
        except CoverageError as exc:
            raise DomainEscapeError(
                f"particles escaped the quadrature box at step {k} (t={k * dt:.6g}): {exc}"
            ) from exc
        if k % record_every == 0:
            snapshots.append((ens.time, ens))
            diagnostics.append(diag(ens, snapshots[-2][1]))
    return Trajectory(snapshots=snapshots, diagnostics=diagnostics)


def initial_sampler(kind: str, density, n: int) -> ParticleEnsemble:
    """Deterministic initial placement for a reference density.

    ``quantile`` places x_i = Q((i - 1/2)/N) through the density's quantile
    function (1d), or the tensor product of per-axis quantiles for product
    densities (N must then be a perfect square).  ``uniform_grid`` spreads
    midpoints evenly over a compact support.
    """
    if kind not in ("quantile", "uniform_grid"):
        raise UnsupportedDensityError(f"unknown sampler kind {kind!r}")
    axes = getattr(density, "axes", None)
    if axes is not None:  # product density in d = 2
        side = int(round(np.sqrt(n)))
        if side * side != n:
            raise UnsupportedDensityError("product densities need a square particle count")
        cols = [initial_sampler(kind, ax, side).positions[:, 0] for ax in axes]
        xx, yy = np.meshgrid(cols[0], cols[1], indexing="ij")
        return ParticleEnsemble(np.stack([xx.ravel(), yy.ravel()], axis=-1))
    q = (np.arange(n) + 0.5) / n
    if kind == "quantile":
        ppf = getattr(density, "cdf_inverse", None)
        if ppf is None:
            raise UnsupportedDensityError(
                f"{type(density).__name__} has no quantile function; cannot place particles"
            )
        return ParticleEnsemble(np.asarray(ppf(q), dtype=float)[:, None])
    support = getattr(density, "support", None)
    if support is None:
        raise UnsupportedDensityError(
            f"{type(density).__name__} has no compact support; uniform_grid needs one"
        )
    a, b = support()
    if not (np.isfinite(a) and np.isfinite(b)):
        raise UnsupportedDensityError("uniform_grid needs a bounded support")
    return ParticleEnsemble((a + (b - a) * q)[:, None])
