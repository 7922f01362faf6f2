import json

import numpy as np
import pytest

from blobflow.cli import main
from blobflow.config import ExperimentConfig
from blobflow.errors import ConfigError
from blobflow.grids import Grid, GridField, read_field_csv, write_field_csv
from blobflow.runner import execute, read_trajectory_csv


def particle_config(out, **overrides):
    cfg = {
        "kernel": {"family": "gaussian", "eps": 0.2, "d": 1},
        "energy": {"kind": "power", "m": 2.0},
        "solver": "particle",
        "n_particles": 8,
        "T": 0.01,
        "dt": 1e-3,
        "record_every": 5,
        "initial": {"kind": "quantile", "density": {"kind": "barenblatt", "t0": 1.0}},
        "seed": 0,
        "output_dir": str(out),
    }
    cfg.update(overrides)
    return cfg


def test_validation_reports_all_errors_at_once():
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(
            particle_config("x", n_particles=0, T=-1.0, integrator="magic", record_every=0)
        )
    msg = str(err.value)
    for frag in ("n_particles", "T:", "integrator", "record_every"):
        assert frag in msg


def test_validation_rejects_unknown_keys_and_entropy_bump():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**particle_config("x"), "bogus": 1})
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(
            particle_config(
                "x",
                kernel={"family": "bump", "eps": 0.2, "d": 1},
                energy={"kind": "entropy"},
            )
        )
    assert "gaussian" in str(err.value)


def test_tau_cap_message_carries_computed_cap():
    cfg = particle_config("x", solver="jko", tau=0.5)
    cfg.pop("dt")
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(cfg)
    assert "0.176" in str(err.value)


def test_execute_writes_artifacts_and_is_reproducible(tmp_path):
    cfg_a = ExperimentConfig.from_dict(particle_config(tmp_path / "a"))
    cfg_b = ExperimentConfig.from_dict(particle_config(tmp_path / "b"))
    ra = execute(cfg_a)
    rb = execute(cfg_b)
    assert ra.ok and rb.ok
    for name in ("trajectory.csv", "diagnostics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["invariants"]["energy_monotone"]
    traj = read_trajectory_csv(tmp_path / "a" / "trajectory.csv")
    assert traj.snapshots[0][1].n == 8
    assert len(traj.snapshots) == 3


def test_execute_jko_artifacts(tmp_path):
    cfg = particle_config(tmp_path / "j", solver="jko", tau=1e-3, T=0.005)
    cfg.pop("dt")
    result = execute(ExperimentConfig.from_dict(cfg))
    assert result.ok
    steps = (tmp_path / "j" / "jko_steps.csv").read_text().splitlines()
    assert steps[0] == "n,energy,dw2,entropy,fi_term"
    assert len(steps) == 6
    assert (tmp_path / "j" / "final_particles.csv").exists()


def test_failed_run_preserves_manifest(tmp_path):
    # pinned domain too small for the kernel support: abort is recorded
    cfg = particle_config(
        tmp_path / "f", quadrature={"domain": [[-0.5, 0.5]]}, n_particles=4
    )
    result = execute(ExperimentConfig.from_dict(cfg))
    assert result.manifest["status"] == "error"
    assert not result.ok
    assert (tmp_path / "f" / "manifest.json").exists()


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("BLOBFLOW_OUTPUT_ROOT", str(tmp_path / "root"))
    cfg = ExperimentConfig.from_dict(particle_config("rel/run"))
    assert cfg.resolved_output_dir() == tmp_path / "root" / "rel" / "run"


def test_cli_simulate_and_diagnose(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(particle_config(tmp_path / "run", n_particles=6)))
    assert main(["simulate", "--config", str(path)]) == 0
    assert main(["diagnose", str(tmp_path / "run")]) == 0
    for name in ("error_term.csv", "weak_residual.csv", "local_residual.csv"):
        assert (tmp_path / "run" / name).exists()


def test_cli_solver_mismatch(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(particle_config(tmp_path / "run")))
    assert main(["jko", "--config", str(path)]) == 2


def test_cli_compare(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(particle_config(tmp_path / "r1", n_particles=6)))
    main(["simulate", "--config", str(path)])
    path.write_text(json.dumps(particle_config(tmp_path / "r2", n_particles=6, kernel={"family": "gaussian", "eps": 0.3, "d": 1})))
    main(["simulate", "--config", str(path)])
    out = tmp_path / "cmp.csv"
    assert main(["compare", str(tmp_path / "r1" / "trajectory.csv"), str(tmp_path / "r2" / "trajectory.csv"), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,w2"
    assert len(lines) == 4
    assert float(lines[1].split(",")[1]) == 0.0  # identical initial data


def test_cli_reference_roundtrip(tmp_path):
    out = tmp_path / "profile.csv"
    assert main(["reference", "--kind", "barenblatt", "--m", "2", "--t0", "1", "--spacing", "0.002", "--out", str(out)]) == 0
    field = read_field_csv(out)
    assert field.mass() == pytest.approx(1.0, abs=1e-6)  # trapezoid kink error ~ h^2
    assert main(["reference", "--kind", "heat", "--sigma2", "1.0", "--t", "0.2", "--out", str(tmp_path / "h.csv")]) == 0


def test_field_csv_roundtrip(tmp_path):
    grid = Grid(np.array([-1.0, 0.0]), 0.5, (3, 4))
    field = GridField(grid, np.arange(12.0).reshape(3, 4))
    write_field_csv(field, tmp_path / "f.csv")
    back = read_field_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(back.values, field.values)
    assert back.grid.shape == (3, 4)
    assert back.grid.spacing == 0.5


def test_cli_converge(tmp_path):
    cfg = particle_config(
        tmp_path / "sweep",
        n_particles=32,
        T=0.01,
        dt=1e-3,
        record_every=10,
        sweep={"eps": [0.4, 0.3, 0.2]},
    )
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["converge", "--config", str(path), "--threads", "2"]) == 0
    report = (tmp_path / "sweep" / "report.csv").read_text().splitlines()
    assert report[0] == "eps,n,step,metric,value"
    assert len(report) > 6
    summary = json.loads((tmp_path / "sweep" / "summary.json").read_text())
    assert "monotone_in_eps" in summary
    assert "monotone_in_n" in summary
    # three sweep entries: three run directories plus one report
    for eps in (0.4, 0.3, 0.2):
        assert (tmp_path / "sweep" / f"eps_{eps}_n_32" / "manifest.json").exists()


def test_cli_converge_jko(tmp_path):
    cfg = particle_config(tmp_path / "jsweep", solver="jko", tau=1e-3, T=0.003, n_particles=16, sweep={"eps": [0.4, 0.2]})
    cfg.pop("dt")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["converge", "--config", str(path)]) == 0
    report = (tmp_path / "jsweep" / "report.csv").read_text()
    assert "flow_interchange_sum" in report


def test_cli_converge_requires_reference(tmp_path):
    cfg = particle_config(
        tmp_path / "sweep2",
        initial={"kind": "quantile", "density": {"kind": "gaussian"}},
        sweep={"eps": [0.4, 0.2]},
    )
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["converge", "--config", str(path)]) == 2


def test_cli_accept_single(capsys):
    assert main(["accept", "--criterion", "6"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS criterion 6")
