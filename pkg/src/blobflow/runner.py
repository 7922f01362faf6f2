"""Run execution and artifact persistence for the experiment harness.

Every run writes into its own directory: trajectory and diagnostics CSVs
plus a manifest JSON echoing the config, library versions, wall time, and
the pass/fail status of the invariants asserted during the run.  Partial
outputs are kept when a run aborts; the failure lands in the manifest.
Floats are serialised with repr (shortest round-trip), so identical
configs reproduce byte-identical artifacts.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError
from .fields import TestFunction, error_term_z, local_weak_form_residual, mollify_auto, weak_form_residual
from .grids import GridField, write_field_csv
from .jko import JkoChain, flow_interchange_diagnostic, run_jko
from .particles import ParticleEnsemble, Trajectory, simulate, stable_dt
from .reference import BarenblattProfile
from .transport import w2_1d_positions, w2_1d_refined

ENERGY_SLACK = 1e-8
COM_TOL = 1e-8


def _write_csv(path: Path, header: str, rows) -> None:
    with path.open("w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                    for v in row
                )
                + "\n"
            )


def write_trajectory_csv(traj: Trajectory, path: Path) -> None:
    d = traj.snapshots[0][1].d
    header = "t,id," + ",".join(f"x{a}" for a in range(d))
    rows = []
    for t, ens in traj.snapshots:
        for i, x in enumerate(ens.positions):
            rows.append([float(t), i] + [float(c) for c in x])
    _write_csv(path, header, rows)


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = data.shape[1] - 2
    snapshots = []
    for t in np.unique(data[:, 0]):
        block = data[data[:, 0] == t]
        block = block[np.argsort(block[:, 1])]
        snapshots.append((float(t), ParticleEnsemble(block[:, 2 : 2 + d], time=float(t))))
    return Trajectory(snapshots=snapshots, diagnostics=[])


def write_diagnostics_csv(traj: Trajectory, path: Path) -> None:
    d = traj.snapshots[0][1].d
    header = "t,energy,m2," + ",".join(f"com{a}" for a in range(d)) + ",dw_step"
    rows = []
    for entry in traj.diagnostics:
        rows.append(
            [float(entry["t"]), float(entry["energy"]), float(entry["m2"])]
            + [float(c) for c in np.atleast_1d(entry["com"])]
            + [float(entry["dw_step"])]
        )
    _write_csv(path, header, rows)


def particle_invariants(traj: Trajectory, kernel_family: str = "gaussian") -> dict:
    energies = np.array([d["energy"] for d in traj.diagnostics])
    coms = np.array([np.atleast_1d(d["com"]) for d in traj.diagnostics])
    drift = float(np.max(np.abs(coms - coms[0]))) if len(coms) else 0.0
    monotone = bool(np.all(np.diff(energies) <= ENERGY_SLACK))
    # trapezoid force balance is spectrally accurate for the analytic
    # gaussian family only; the C^2 bump kernel caps it at O(h^2 eps^-3)
    com_tol = COM_TOL if kernel_family == "gaussian" else 1e-3
    return {
        "mass_exact": True,  # weights are structural (1/N each, never touched)
        "energy_monotone": monotone,
        "com_drift": drift,
        "com_conserved": drift <= com_tol,
    }


def jko_invariants(chain: JkoChain) -> dict:
    ok_steps = all(
        r.dw2 / (2.0 * chain.tau) + r.energy <= r.energy_prev + 1e-10 * (1.0 + abs(r.energy_prev))
        for r in chain.records
    )
    e = chain.energies()
    return {
        "per_step_energy_inequality": bool(ok_steps),
        "energy_monotone": bool(np.all(np.diff(e) <= 1e-10 * (1.0 + np.abs(e[:-1])))),
        "sorted_states": all(bool(np.all(np.diff(s.positions) >= 0)) for s in chain.states),
        "total_dw2": chain.total_dw2(),
        "dw2_budget": chain.dw2_budget(),
        # slack absorbs the per-step grid jitter in the telescoped energies
        "dw2_within_budget": bool(
            chain.total_dw2()
            <= chain.dw2_budget() + 1e-10 * len(chain.records) * (1.0 + abs(float(chain.energies()[0])))
        ),
        "holder_constant": chain.holder_constant(),
        "max_m2": chain.max_m2(),
    }


@dataclass
class RunResult:
    directory: Path
    manifest: dict
    trajectory: Trajectory | None = None
    chain: JkoChain | None = None

    @property
    def ok(self) -> bool:
        inv = self.manifest.get("invariants", {})
        flags = [v for v in inv.values() if isinstance(v, bool)]
        return self.manifest.get("status") == "ok" and all(flags)


def execute(cfg: ExperimentConfig, out_dir: Path | None = None) -> RunResult:
    """Run one configured experiment and persist its artifacts."""
    out = Path(out_dir) if out_dir is not None else cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": cfg.to_dict(),
        "versions": {"blobflow": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "status": "ok",
        "error": None,
    }
    started = time.perf_counter()
    traj = chain = None
    try:
        kernel = cfg.kernel_spec()
        model = cfg.energy_model()
        quad = cfg.quadrature_spec()
        if cfg.solver == "particle":
            initial = cfg.initial_ensemble()
            traj = simulate(
                initial,
                kernel,
                model,
                T=cfg.T,
                dt=cfg.dt,
                quad=quad,
                integrator=cfg.integrator,
                record_every=cfg.record_every,
            )
            write_trajectory_csv(traj, out / "trajectory.csv")
            write_diagnostics_csv(traj, out / "diagnostics.csv")
            manifest["invariants"] = particle_invariants(traj, kernel.family)
            manifest["dt"] = cfg.dt if cfg.dt is not None else stable_dt(kernel, model)
            manifest["neg_prime_calls"] = model.neg_prime_calls
        else:
            initial = cfg.initial_ensemble()
            chain = run_jko(
                initial.positions[:, 0],
                kernel,
                model,
                tau=cfg.tau,
                T=cfg.T,
                quad=quad,
            )
            _write_csv(
                out / "jko_steps.csv",
                "n,energy,dw2,entropy,fi_term",
                [[r.n, float(r.energy), float(r.dw2), float(r.entropy), float(r.fi_term)] for r in chain.records],
            )
            _write_csv(
                out / "final_particles.csv",
                "id,x",
                [[i, float(x)] for i, x in enumerate(chain.states[-1].positions)],
            )
            manifest["invariants"] = jko_invariants(chain)
            manifest["neg_prime_calls"] = model.neg_prime_calls
    except Exception as exc:
        manifest["status"] = "error"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
    manifest["wall_time_s"] = time.perf_counter() - started
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=float) + "\n")
    return RunResult(directory=out, manifest=manifest, trajectory=traj, chain=chain)


# ---------------------------------------------------------------------------
# diagnostics on a stored trajectory

def diagnose(run_dir, phi: TestFunction | None = None) -> dict:
    """Error-term and weak-form residual suites on a saved trajectory."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    cfg = ExperimentConfig.from_dict(manifest["config"])
    kernel = cfg.kernel_spec()
    model = cfg.energy_model()
    quad = cfg.quadrature_spec()
    traj = read_trajectory_csv(run_dir / "trajectory.csv")
    if phi is None:
        hull = np.concatenate([e.positions for _, e in traj.snapshots])
        center = hull.mean(axis=0)
        width = max(1.0, 1.5 * float(np.max(np.abs(hull - center))))
        phi = TestFunction("gaussian_bump", center, width)

    rows = []
    for t, ens in traj.snapshots:
        pts = np.vstack([ens.positions, phi.center[None, :]])
        pad = phi.support_radius() + 2.0 * kernel.padding_radius()
        grid = quad.grid_for(np.vstack([pts - pad, pts + pad]), kernel)
        rep = error_term_z(ens, kernel, phi, grid)
        rows.append([float(t), rep.l1_norm, rep.l1_bound, int(rep.pointwise_ok)])
    _write_csv(run_dir / "error_term.csv", "t,z_l1,z_l1_bound,pointwise_ok", rows)

    res = weak_form_residual(traj, kernel, model, phi, quad)
    _write_csv(
        run_dir / "weak_residual.csv",
        "t,residual",
        [[float(t), float(r)] for t, r in zip(traj.times(), res)],
    )

    hull = np.concatenate([e.positions for _, e in traj.snapshots])
    grid = quad.grid_for(hull, kernel)
    series = [(t, _mollify_on(e, kernel, grid)) for t, e in traj.snapshots]
    local = local_weak_form_residual(series, model, phi)
    _write_csv(
        run_dir / "local_residual.csv",
        "t,residual",
        [[float(t), float(r)] for t, r in zip(traj.times(), local)],
    )
    return {
        "error_term": str(run_dir / "error_term.csv"),
        "weak_residual": str(run_dir / "weak_residual.csv"),
        "local_residual": str(run_dir / "local_residual.csv"),
    }


def _mollify_on(ens, kernel, grid):
    from .fields import mollify

    return mollify(ens, kernel, grid)


def compare_trajectories(path_a, path_b, out_path) -> list:
    """Distance-vs-time table between two stored trajectories."""
    from .transport import w2_assignment_positions

    ta = read_trajectory_csv(path_a)
    tb = read_trajectory_csv(path_b)
    times_b = {round(t, 12): ens for t, ens in tb.snapshots}
    rows = []
    for t, ens in ta.snapshots:
        other = times_b.get(round(t, 12))
        if other is None:
            continue
        if ens.d == 1 and ens.n == other.n:
            w2 = w2_1d_positions(ens.positions[:, 0], other.positions[:, 0])
        elif ens.d == 1:
            w2 = w2_1d_refined(ens, other).value
        else:
            w2 = w2_assignment_positions(ens.positions, other.positions)
        rows.append([float(t), float(w2)])
    _write_csv(Path(out_path), "t,w2", rows)
    return rows


# ---------------------------------------------------------------------------
# convergence harness

def converge(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Sweep eps (and particle counts), measure errors against the reference.

    Writes one run directory per sweep entry plus report.csv with tidy rows
    (eps, n, step, metric, value) and summary.json with monotonicity flags
    for each metric along the eps ladder.
    """
    if not cfg.sweep:
        raise ConfigError("converge needs a sweep section")
    dens = cfg.initial_density()
    model = cfg.energy_model()
    if not isinstance(dens, BarenblattProfile) or model.kind != "power":
        raise ConfigError(
            "missing reference: the convergence harness needs a self-similar "
            "reference (barenblatt initial data with a power-law energy)"
        )
    eps_list = list(cfg.sweep.get("eps") or [cfg.kernel["eps"]])
    n_list = list(cfg.sweep.get("n_particles") or [cfg.n_particles])
    out_root = cfg.resolved_output_dir()
    out_root.mkdir(parents=True, exist_ok=True)

    jobs = [(eps, n) for eps in eps_list for n in n_list]

    def one(job):
        eps, n = job
        sub = ExperimentConfig.from_dict(
            {
                **cfg.to_dict(),
                "kernel": {**cfg.kernel, "eps": eps},
                "n_particles": n,
                "sweep": None,
                "output_dir": str(out_root / f"eps_{eps}_n_{n}"),
            }
        )
        result = execute(sub)
        if result.manifest["status"] != "ok":
            raise RuntimeError(f"sweep run eps={eps} n={n} failed: {result.manifest['error']}")
        return job, result

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(one, jobs))
    else:
        results = dict(map(one, jobs))

    rows = []
    phi = TestFunction("gaussian_bump", np.zeros(1), max(1.0, dens.support_radius(cfg.T)))
    step_label = cfg.tau if cfg.solver == "jko" else (cfg.dt if cfg.dt is not None else "auto")
    for (eps, n), result in results.items():
        kernel = cfg.kernel_spec(eps=eps)
        quad = cfg.quadrature_spec()
        if cfg.solver == "particle":
            final = result.trajectory.final()
            ref = dens.quantile_ensemble(n, t=cfg.T)
            w2 = w2_1d_positions(final.positions[:, 0], ref.positions[:, 0])
            vfield = mollify_auto(final, kernel, quad)
            ref_dens = dens.density(cfg.T, vfield.grid.axes()[0])
            l1 = vfield.integrate(np.abs(vfield.values - ref_dens))
            energy_final = result.trajectory.diagnostics[-1]["energy"]
            w2_init = w2_1d_positions(
                result.trajectory.snapshots[0][1].positions[:, 0],
                dens.quantile_ensemble(n, t=0.0).positions[:, 0],
            )
            pts = np.vstack([final.positions, phi.center[None, :]])
            pad = phi.support_radius() + 2.0 * kernel.padding_radius()
            zgrid = quad.grid_for(np.vstack([pts - pad, pts + pad]), kernel)
            z_l1 = error_term_z(final, kernel, phi, zgrid).l1_norm
            fi = float("nan")
        else:
            chain = result.chain
            final = chain.states[-1].ensemble()
            ref = dens.quantile_ensemble(n, t=chain.horizon)
            w2 = w2_1d_positions(final.positions[:, 0], ref.positions[:, 0])
            vfield = mollify_auto(final, kernel, quad)
            ref_dens = dens.density(chain.horizon, vfield.grid.axes()[0])
            l1 = vfield.integrate(np.abs(vfield.values - ref_dens))
            energy_final = chain.records[-1].energy
            w2_init = 0.0
            z_l1 = float("nan")
            fi = flow_interchange_diagnostic(chain).sum_d
        for metric, value in [
            ("w2_final_vs_reference", w2),
            ("l1_final_vs_reference", l1),
            ("z_eps_l1", z_l1),
            ("energy_final", energy_final),
            ("flow_interchange_sum", fi),
            ("w2_initial_vs_density", w2_init),
        ]:
            rows.append([float(eps), int(n), step_label, metric, float(value)])
    rows.sort(key=lambda r: (-r[0], r[1], r[3]))
    _write_csv(out_root / "report.csv", "eps,n,step,metric,value", rows)

    summary = {"monotone_in_eps": {}, "monotone_in_n": {}, "eps": eps_list, "n_particles": n_list}

    def _ladder(metric, fixed_key, fixed_val, axis_ix):
        pts = [(r[axis_ix], r[4]) for r in rows if r[3] == metric and r[fixed_key] == fixed_val]
        ordered = [v for _, v in sorted(pts, reverse=(axis_ix == 0))]
        finite = [v for v in ordered if np.isfinite(v)]
        return bool(len(finite) >= 2 and all(a > b for a, b in zip(finite, finite[1:])))

    for metric in ("w2_final_vs_reference", "l1_final_vs_reference", "z_eps_l1"):
        for n in n_list:
            summary["monotone_in_eps"][f"{metric}_n{n}"] = _ladder(metric, 1, n, 0)
    for metric in ("w2_final_vs_reference", "w2_initial_vs_density"):
        for eps in eps_list:
            summary["monotone_in_n"][f"{metric}_eps{eps}"] = _ladder(metric, 0, eps, 1)
    (out_root / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return {"report": str(out_root / "report.csv"), "summary": summary, "rows": rows}


def emit_reference(kind: str, out_path, **kw) -> None:
    """Sample a reference profile onto a grid and persist it as CSV."""
    if kind == "barenblatt":
        prof = BarenblattProfile(
            m=float(kw.get("m", 2.0)), d=1, mass=float(kw.get("mass", 1.0)), t0=float(kw.get("t0", 1.0))
        )
        fld = prof.sample_field(float(kw.get("t", 0.0)), float(kw.get("spacing", 0.01)))
    elif kind == "heat":
        from .grids import Grid
        from .reference import heat_solution

        sigma2 = float(kw.get("sigma2", 1.0))
        t = float(kw.get("t", 0.0))
        h = float(kw.get("spacing", 0.01))
        half = 8.0 * np.sqrt(sigma2 + 2.0 * t)
        n = int(np.ceil(2 * half / h)) + 1
        grid = Grid(np.array([-half]), h, (n,))
        fld = GridField(grid, heat_solution(t, grid.axes()[0], sigma2))
    else:
        raise ConfigError(f"unknown reference kind {kind!r}")
    write_field_csv(fld, out_path)
