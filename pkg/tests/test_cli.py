from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

import urbancrime
from urbancrime import oracles
from urbancrime.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VERIFY, fmt, main
from urbancrime.solver import _hi, _lo

from reference_values import TABLE1, TABLE3

ROOT = Path(__file__).resolve().parents[1]
PAPER = ROOT / "configs" / "paper"


def write_cfg(tmp_path: Path, text: str, name: str = "run.cfg") -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 1e-300, 123456789.123456789, np.float64(2.5)):
        assert float(fmt(x)) == float(x)
    assert fmt(3) == "3"


def test_table1_via_cli(tmp_path):
    out = tmp_path / "t1"
    assert main(["stability-table", "--config", str(PAPER / "table1.cfg"), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "stability_table_rounded.csv")
    assert [float(r["eps_bar_4dp"]) for r in rows] == TABLE1
    raw = read_csv(out / "stability_table.csv")
    assert [int(r["argmax"]) for r in raw][:2] == [1, 0]
    assert len(raw[0]["eps_bar"].replace("0.", "").lstrip("0")) >= 15
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["verb"] == "stability-table"
    assert all("sha256" in f for f in manifest["files"])


def test_table3_grid_via_cli(tmp_path):
    out = tmp_path / "t3"
    assert main(["stability-table", "--config", str(PAPER / "table3.cfg"), "--out", str(out)]) == EXIT_OK
    grid = list(csv.reader(open(out / "stability_grid_departure_L1.csv")))
    assert grid[1][1] == "undefined"
    for m in range(6):
        for n in range(6):
            ref = TABLE3[n][m]
            if ref is None:
                continue
            assert abs(float(grid[1 + m][1 + n]) - ref) <= 5e-5
    waves = read_csv(out / "wavemodes.csv")
    assert waves[0]["modes"] == "(1,1)"


def test_wavemode_and_bifurcation(tmp_path):
    cfg = write_cfg(tmp_path, "model.variant = both\n")
    out = tmp_path / "w"
    assert main(["wavemode", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "wavemode.json").read_text())
    assert [d["modes"] for d in doc] == [[1], [1]] or all(1 in (d.get("modes") or [d.get("mode")]) for d in doc)
    out = tmp_path / "b"
    assert main(["bifurcation", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "bifurcation.json").read_text())
    text = json.dumps(doc)
    assert "PitchforkSuper" in text and "Stable" in text


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "model.eps = 0.01\nmodel.bogus = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 2" in err and "model.bogus" in err
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG
    assert main(["simulate", "--seed", "-3", "--out", str(tmp_path / "y")]) == EXIT_CONFIG
    assert main(["sweep", "--out", str(tmp_path / "z")]) == EXIT_CONFIG  # empty sweep.values
    with pytest.raises(SystemExit) as info:
        main(["dance"])
    assert info.value.code == 2


def test_numerical_failure_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, "model.Bbar = 1e-9\n")
    assert main(["wavemode", "--config", str(cfg), "--out", str(tmp_path / "w")]) == EXIT_NUMERIC
    assert main(["bifurcation", "--config", str(cfg), "--out", str(tmp_path / "b")]) == EXIT_NUMERIC


def test_simulate_blowup_exit_code(tmp_path, monkeypatch):
    import urbancrime.solver as solver

    monkeypatch.setattr(solver, "_admissible", lambda Y: False)
    cfg = write_cfg(tmp_path, "grid.n = 16\nic.A = mode k=1 amp=0.01\nsolver.t_end = 1\nsolver.dt_min = 1e-3\nsolver.dt_init = 1e-3\n")
    out = tmp_path / "s"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_NUMERIC
    assert json.loads((out / "summary.json").read_text())["outcome"] == "Blowup"


def _broken_divergence(fluxes, mesh):
    """Adds the low-face flux with the wrong sign, so cell sums no longer telescope."""

    def div(F, axis):
        pad = [(0, 0)] * F.ndim
        pad[axis] = (1, 1)
        full = np.pad(F, pad)
        return (_hi(full, axis) + _lo(full, axis)) / mesh.h

    dA = sum(div(F, ax) for ax, F in enumerate(fluxes.A))
    dr = sum(div(F, ax) for ax, F in enumerate(fluxes.rho))
    return dA, dr


def test_broken_flux_fails_conservation(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, "verify.oracles = conservation\n")
    out = tmp_path / "ok"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    monkeypatch.setattr(oracles, "flux_divergence", _broken_divergence)
    out = tmp_path / "broken"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == EXIT_VERIFY
    doc = json.loads((out / "verify.json").read_text())
    assert doc["passed"] is False
    assert doc["oracles"][0]["name"] == "conservation" and doc["oracles"][0]["measured"] > 1e-3


def test_verify_fast_oracles(tmp_path):
    cfg = write_cfg(tmp_path, "verify.oracles = linear_algebra, variant_agreement\n")
    out = tmp_path / "v"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "verify.json").read_text())
    assert doc["passed"] and [o["name"] for o in doc["oracles"]] == ["linear_algebra", "variant_agreement"]
    for o in doc["oracles"]:
        assert o["measured"] < o["tolerance"]


SIM_1D = """\
model.eps = 0.05
grid.n = 16
ic.A = mode k=1 amp=0.01
ic.noise = 1e-3
solver.t_end = 40
solver.snapshot_every = 10
"""


def test_simulate_1d_outputs(tmp_path):
    cfg = write_cfg(tmp_path, SIM_1D)
    out = tmp_path / "s"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "7"]) == EXIT_OK
    rows = read_csv(out / "final.csv")
    assert list(rows[0]) == ["x", "A", "rho"] and len(rows) == 16
    snaps = sorted((out / "snapshots").glob("snap_*.csv"))
    assert len(snaps) == 5
    summary = json.loads((out / "summary.json").read_text())
    for key in ("outcome", "t_final", "dominant_mode", "spike_count", "amplitude", "residual", "wall_time", "event_log"):
        assert key in summary
    assert "run.seed = 7" in (out / "config.txt").read_text()
    manifest = json.loads((out / "manifest.json").read_text())
    assert {f["path"] for f in manifest["files"]} >= {"final.csv", "summary.json", "config.txt"}


def test_simulate_2d_header(tmp_path):
    cfg = write_cfg(tmp_path, "domain.kind = square\ndomain.L = 2\ngrid.n = 8\nic.A = mode k=1,1 amp=0.01\nsolver.t_end = 5\nsolver.snapshot_every = 5\n")
    out = tmp_path / "s2"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    lines = (out / "final_A.csv").read_text().splitlines()
    nx, ny, L, t = lines[0].split()
    assert (int(nx), int(ny), float(L), float(t)) == (8, 8, 2.0, 5.0)
    assert len(lines) == 9 and all(len(r.split(",")) == 8 for r in lines[1:])
    assert (out / "snapshots" / "snap_00000_rho.csv").exists()


def _outputs(root: Path) -> dict[str, bytes]:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_dir():
            continue
        rel = str(p.relative_to(root))
        if p.suffix == ".json":
            doc = json.loads(p.read_text())

            def strip(o):
                if isinstance(o, dict):
                    return {k: strip(v) for k, v in o.items() if k != "wall_time" and k != "seconds"}
                if isinstance(o, list):
                    return [strip(v) for v in o]
                return o

            out[rel] = json.dumps(strip(doc), sort_keys=True).encode()
        else:
            out[rel] = p.read_bytes()
    return out


def test_determinism_across_runs_and_threads(tmp_path):
    """Same config and seed, same output directory: byte-identical files except wall times."""
    import shutil

    cfg = write_cfg(tmp_path, SIM_1D + "sweep.values = 0.05, 0.04, 0.03\nrun.seed = 3\n")
    o = tmp_path / "sw"
    snaps, manifests = [], []
    for threads in (1, 1, 2):
        if o.exists():
            shutil.rmtree(o)
        assert main(["sweep", "--config", str(cfg), "--out", str(o), "--threads", str(threads)]) == EXIT_OK
        files = _outputs(o)
        manifests.append(json.loads((o / "manifest.json").read_text()))
        snaps.append(files)
    assert snaps[0] == snaps[1] == snaps[2]
    assert [f["path"] for f in manifests[0]["files"]] == [f["path"] for f in manifests[2]["files"]]
    sweep = read_csv(o / "sweep.csv")
    assert [float(r["eps"]) for r in sweep] == [0.05, 0.04, 0.03]


def test_csv_bytes_identical_across_runs(tmp_path):
    import shutil

    cfg = write_cfg(tmp_path, SIM_1D)
    o = tmp_path / "s"
    blobs = []
    for _ in range(2):
        if o.exists():
            shutil.rmtree(o)
        assert main(["simulate", "--config", str(cfg), "--out", str(o)]) == EXIT_OK
        blobs.append({p.relative_to(o).as_posix(): p.read_bytes() for p in o.rglob("*.csv")} | {"config.txt": (o / "config.txt").read_bytes()})
    assert blobs[0] == blobs[1]


def test_sweep_fit(tmp_path):
    cfg = write_cfg(tmp_path, SIM_1D + "sweep.values = 0.05, 0.04\nsweep.fit = true\n")
    out = tmp_path / "f"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    fit = json.loads((out / "fit.json").read_text())
    assert "error" in fit[0]  # nothing below eps_bar


def test_version_flag(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert urbancrime.__version__ in capsys.readouterr().out
