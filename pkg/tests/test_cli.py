import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from haarsense import cli
from haarsense.signals import SampledSignal, Sinusoid, generate, save_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(path, **over):
    cfg = {
        "signal": {"type": "sinusoid", "amplitude": 0.0, "period": 16.0},
        "duration_us": 16.0,
        "sample_count": 1024,
        "protocol": {"kind": "haar", "order": 3, "c0": 0.0},
        "repetitions": 100000,
        "seed": 0,
    }
    for k, v in over.items():
        cfg[k] = v
    path.write_text(json.dumps(cfg))
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def load(path):
    return json.loads(Path(path).read_text())


# --- transform / reconstruct ------------------------------------------------------

def test_transform_constant(tmp_path):
    save_csv(SampledSignal(8.0, np.full(64, 2.5)), tmp_path / "c.csv")
    assert run("transform", tmp_path / "c.csv", "-n", 4, "-o", tmp_path / "c.json") == 0
    doc = load(tmp_path / "c.json")
    jsonschema.validate(doc, cli.COEFFICIENTS_SCHEMA)
    assert doc["mean"]["value"] == 2.5
    assert all(c["value"] == 0.0 for c in doc["coefficients"])
    assert len(doc["coefficients"]) == 15 and doc["duration_us"] == pytest.approx(8.0)


def test_transform_step(tmp_path):
    save_csv(SampledSignal(8.0, np.r_[np.ones(32), -np.ones(32)]), tmp_path / "s.csv")
    run("transform", tmp_path / "s.csv", "-n", 2, "-o", tmp_path / "s.json")
    first = [c for c in load(tmp_path / "s.json")["coefficients"] if c["order"] == 1]
    assert first == [{"order": 1, "shift": 0, "value": 1.0, "sigma": 0.0}]


def test_transform_reconstruct_chain(tmp_path):
    f = np.random.default_rng(0).normal(size=256)
    save_csv(SampledSignal(32.0, f), tmp_path / "r.csv")
    run("transform", tmp_path / "r.csv", "-n", 5, "-o", tmp_path / "r.json")
    assert run("reconstruct", tmp_path / "r.json", "-n", 5, "-o", tmp_path / "out.csv") == 0
    t, b, s = cli.read_reconstruction(tmp_path / "out.csv")
    np.testing.assert_allclose(b, f.reshape(32, -1).mean(axis=1), atol=1e-12)
    np.testing.assert_allclose(t, (np.arange(32) + 0.5))
    np.testing.assert_array_equal(s, 0.0)


def test_all_orders_progression(tmp_path):
    out = tmp_path / "waveform"
    assert run("simulate", CONFIGS / "waveform.json", "--out-dir", out) == 0
    assert run("reconstruct", out / "waveform_coefficients.json", "--all-orders",
               "-o", out / "prog.csv") == 0
    cfg = load(CONFIGS / "waveform.json")
    truth = np.array(cfg["signal"]["values"])
    errors = []
    for n in range(1, 6):
        _, b, _ = cli.read_reconstruction(out / f"prog_n{n}.csv")
        errors.append(np.linalg.norm(np.repeat(b, 32 // 2 ** n) - truth))
    assert all(a >= b for a, b in zip(errors, errors[1:]))


def test_reconstruct_walsh_spectrum(tmp_path):
    cfg = write_config(tmp_path / "w.json",
                       signal={"type": "sinusoid", "amplitude": 0.2, "period": 16.0},
                       protocol={"kind": "walsh", "order": 3, "c0": 0.0},
                       repetitions=None)
    run("simulate", cfg, "--out-dir", tmp_path)
    doc = load(tmp_path / "walsh_coefficients.json")
    jsonschema.validate(doc, cli.WALSH_SCHEMA)
    assert run("reconstruct", tmp_path / "walsh_coefficients.json", "-o", tmp_path / "w.csv") == 0
    _, b, _ = cli.read_reconstruction(tmp_path / "w.csv")
    s = generate(Sinusoid(0.2, 16.0), 16.0, 1024)
    np.testing.assert_allclose(b, s.block_averages(8), atol=1e-6)


# --- simulate -------------------------------------------------------------------------

def test_zero_field_simulation(tmp_path):
    cfg = write_config(tmp_path / "z.json")
    assert run("simulate", cfg, "--out-dir", tmp_path) == 0
    doc = load(tmp_path / "haar_coefficients.json")
    jsonschema.validate(doc, cli.COEFFICIENTS_SCHEMA)
    assert all(abs(c["value"]) <= 3 * c["sigma"] for c in doc["coefficients"])
    prov = doc["provenance"]
    assert (prov["seed"], prov["convention"], prov["repetitions"]) == (0, "integral", 100000)
    budget = load(tmp_path / "haar_budget.json")
    jsonschema.validate(budget, cli.BUDGET_SCHEMA)
    # external c0: orders only
    assert budget["signal_runs_per_sweep"] == 3


def test_sinusoid_sixteen_points(tmp_path):
    assert run("simulate", CONFIGS / "sinusoid.json", "--out-dir", tmp_path) == 0
    t, b, s = cli.read_reconstruction(tmp_path / "sinusoid_reconstruction.csv")
    assert t.size == 16 and np.all(s > 0)


def test_byte_identical_reruns(tmp_path):
    cfg = write_config(tmp_path / "d.json",
                       signal={"type": "sinusoid", "amplitude": 0.3, "period": 16.0},
                       protocol={"kind": "haar", "order": 4, "c0": 0.0, "workers": 1},
                       outputs={"coefficients": "c.json", "budget": "b.json",
                                "reconstruction": "r.csv"})
    par = json.loads(cfg.read_text())
    par["protocol"]["workers"] = 4
    cfg_par = tmp_path / "dp.json"
    cfg_par.write_text(json.dumps(par))
    for name, c in (("a", cfg), ("b", cfg), ("p", cfg_par)):
        run("simulate", c, "--out-dir", tmp_path / name)
    for f in ("c.json", "b.json", "r.csv"):
        a = (tmp_path / "a" / f).read_bytes()
        assert a == (tmp_path / "b" / f).read_bytes() == (tmp_path / "p" / f).read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path / "s.json")
    run("simulate", cfg, "--out-dir", tmp_path / "a")
    run("--seed", 7, "simulate", cfg, "--out-dir", tmp_path / "b")
    run("simulate", cfg, "--seed", 7, "--out-dir", tmp_path / "c")
    a, b, c = (load(tmp_path / d / "haar_coefficients.json") for d in "abc")
    assert a != b and b == c and b["provenance"]["seed"] == 7


def test_convention_flag(tmp_path):
    cfg = write_config(tmp_path / "c.json",
                       signal={"type": "sinusoid", "amplitude": 0.3, "period": 16.0},
                       repetitions=None)
    run("simulate", cfg, "--out-dir", tmp_path / "i")
    run("simulate", cfg, "--convention", "paper", "--out-dir", tmp_path / "p")
    i = load(tmp_path / "i" / "haar_coefficients.json")
    p = load(tmp_path / "p" / "haar_coefficients.json")
    assert p["provenance"]["convention"] == "paper"
    assert p["coefficients"][0]["value"] == pytest.approx(i["coefficients"][0]["value"] * np.pi / 2)


def test_ramsey_simulation_writes_reconstruction(tmp_path):
    cfg = write_config(tmp_path / "r.json", protocol={"kind": "ramsey", "order": 3},
                       duration_us=24.0)
    assert run("simulate", cfg, "--out-dir", tmp_path) == 0
    t, b, s = cli.read_reconstruction(tmp_path / "ramsey_reconstruction.csv")
    assert t.size == 8 and np.all(np.abs(b) <= 3 * s)


def test_waveform_path_relative_to_config(tmp_path):
    sub = tmp_path / "cfg"
    sub.mkdir()
    save_csv(SampledSignal(16.0, np.linspace(-0.1, 0.1, 16)), sub / "w.csv")
    cfg = write_config(sub / "c.json", signal={"type": "waveform", "path": "w.csv"},
                       repetitions=None)
    assert run("simulate", cfg, "--out-dir", tmp_path) == 0


def test_plot_is_written(tmp_path):
    cfg = write_config(tmp_path / "p.json")
    assert run("simulate", cfg, "--out-dir", tmp_path, "--plot", tmp_path / "p.svg") == 0
    assert (tmp_path / "p.svg").read_text().lstrip().startswith("<?xml")


# --- detect / sensitivity -----------------------------------------------------------

def test_detect_zero_coefficients(tmp_path):
    save_csv(SampledSignal(8.0, np.zeros(64)), tmp_path / "z.csv")
    run("transform", tmp_path / "z.csv", "-n", 4, "-o", tmp_path / "z.json")
    assert run("detect", tmp_path / "z.json", "-o", tmp_path / "e.json") == 0
    doc = load(tmp_path / "e.json")
    jsonschema.validate(doc, cli.EVENTS_SCHEMA)
    assert doc["events"] == []


def test_detect_impulse_train(tmp_path):
    assert run("simulate", CONFIGS / "impulses.json", "--out-dir", tmp_path) == 0
    assert run("detect", tmp_path / "impulses_coefficients.json", "--orders", "5,6",
               "--threshold", 5, "-o", tmp_path / "e.json", "--plot", tmp_path / "e.svg") == 0
    events = load(tmp_path / "e.json")["events"]
    assert len(events) == 4
    assert all(e["magnitude_uT"] > 0 for e in events)


def test_sensitivity_table(tmp_path):
    assert run("sensitivity", "--n-max", 10, "-o", tmp_path / "t.csv") == 0
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == ",".join(cli.compare_protocols.__globals__["TABLE_HEADER"])
    assert len(lines) == 11


# --- exit codes ---------------------------------------------------------------------

def test_exit_phase_wrap(tmp_path):
    cfg = write_config(tmp_path / "w.json",
                       signal={"type": "sinusoid", "amplitude": 5.0, "period": 16.0})
    assert run("simulate", cfg, "--out-dir", tmp_path) == cli.EXIT_WRAP


def test_exit_packing(tmp_path):
    cfg = write_config(tmp_path / "p.json",
                       protocol={"kind": "haar", "order": 3, "overhead_us": 5.0,
                                 "max_runs": 3, "c0": 0.0})
    assert run("simulate", cfg, "--out-dir", tmp_path) == cli.EXIT_PACKING


def test_exit_io(tmp_path):
    assert run("transform", tmp_path / "missing.csv", "-n", 2, "-o", tmp_path / "x.json") == 4
    (tmp_path / "bad.csv").write_text("t_us,b_uT\n0.5,1,2\n")
    assert run("transform", tmp_path / "bad.csv", "-n", 2, "-o", tmp_path / "x.json") == 4
    (tmp_path / "bad.json").write_text("{not json")
    assert run("reconstruct", tmp_path / "bad.json", "-o", tmp_path / "x.csv") == 4
    (tmp_path / "wrong.json").write_text(json.dumps({"format": "haar_coefficients"}))
    assert run("detect", tmp_path / "wrong.json", "-o", tmp_path / "x.json") == 4


def test_exit_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "u.json", extra_key=1)
    assert run("simulate", cfg) == cli.EXIT_CONFIG
    assert "extra_key" in capsys.readouterr().err
    cfg = write_config(tmp_path / "s.json", sensor={"t2": 1.0, "t2_star": 2.0})
    assert run("simulate", cfg) == cli.EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        run("simulate")
    assert info.value.code == cli.EXIT_CONFIG
    assert run("sensitivity", "--n-max", 40, "-o", tmp_path / "t.csv") == cli.EXIT_CONFIG


def test_console_entry_point(tmp_path):
    exe = shutil.which("haarsense")
    cmd = [exe] if exe else [sys.executable, "-m", "haarsense"]
    out = subprocess.run(cmd + ["sensitivity", "-o", str(tmp_path / "t.csv")],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    out = subprocess.run([sys.executable, "-m", "haarsense", "--version"],
                         capture_output=True, text=True)
    assert out.stdout.strip().startswith("haarsense")
