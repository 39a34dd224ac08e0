import json

import pytest

from coupledqnm import cli
from coupledqnm.cli import ConfigError, RunConfig, load_config, main, parse_config
from coupledqnm.disk import ConvergenceError

MINIMAL = """
[geometry]
radius_a = 5e-6
n_L = "2+1e-5i"
n_R = [2.0, 1e-4]
d_gap = 800e-9

[mode]
m = 37
q = 1
"""

PAPER = """
[geometry]
radius_a = 5e-6
n_L = "2+1e-5i"
n_R = "2+1e-4i"
gaps = [600e-9, 750e-9, 800e-9, 850e-9, 900e-9, 1000e-9, 1100e-9, 1200e-9]
dipole_side = ["L", "R"]

[mode]
m = 37
q = 1
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def small(tmp_path, extra="", gaps="800e-9", points=24):
    out = tmp_path / "out"
    return write(tmp_path, f"""
models = ["cQNM", "qQNM"]

[geometry]
gaps = [{gaps}]

[grid]
points = {points}

[output]
dir = "{out}"
{extra}
"""), out


def flatten(d, prefix=""):
    keys = []
    for k, v in d.items():
        keys.extend(flatten(v, f"{prefix}{k}.") if isinstance(v, dict) else [prefix + k])
    return keys


# --- configuration ----------------------------------------------------------

def test_minimal_config_applies_and_echoes_defaults(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL))
    assert cfg.geometry.n_L == 2 + 1e-5j and cfg.geometry.n_R == 2 + 1e-4j
    assert cfg.geometry.gaps == (800e-9,)
    echo = cfg.echo()
    keys = flatten(echo)
    assert len(keys) == len(set(keys))
    # every default present: same key set as a full default config
    assert set(keys) == set(flatten(RunConfig().echo()))
    assert echo["truncation"]["M_max"] == cli.DEFAULT_M_MAX
    assert echo["grid"]["points"] == 400


def test_unknown_model_tag_named(tmp_path):
    with pytest.raises(ConfigError, match="bogus"):
        parse_config('models = ["cQNM", "bogus"]\n' + MINIMAL)
    p = write(tmp_path, 'models = ["bogus"]\n' + MINIMAL)
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_parse_error_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("[geometry]\nradius_a = 5e-6\nn_L = = 2\n")


def test_paper_config_accepted():
    cfg = parse_config(PAPER)
    assert len(cfg.geometry.gaps) == 8
    assert cfg.geometry.dipole_sides == ("L", "R")
    assert cfg.echo()["geometry"]["n_R"] == [2.0, 1e-4]
    assert cli.paper_config().geometry.gaps == cfg.geometry.gaps


@pytest.mark.parametrize("text, word", [
    ("[bogus]\nx = 1\n", "bogus"),
    ("[geometry]\nradius = 1\n", "radius"),
    ("[geometry]\nd_gap = 8e-7\ngaps = [8e-7]\n", "either"),
    ("[geometry]\ndipole_side = 'M'\n", "side"),
    ("[geometry]\ndipole_distance = -1e-9\n", "positive"),
    ("[geometry]\nd_gap = 5e-9\n", "gap"),
    ("[mode]\nm = 1.5\n", "integer"),
    ("[truncation]\nM_max = 40\n", "M_max"),
    ("[truncation]\nN_fock = 9\n", "N_fock"),
    ("[grid]\npoints = 1\n", "points"),
    ("[geometry]\nn_L = 'abc'\n", "n_L"),
])
def test_validation_errors_name_the_invariant(text, word):
    with pytest.raises(ConfigError, match=word):
        parse_config(text)


def test_config_error_exit_codes(tmp_path, capsys):
    assert main(["bare", "--config", str(tmp_path / "missing.toml")]) == 2
    assert "not found" in capsys.readouterr().err
    assert main(["bare", "--threads", "0", "--out", str(tmp_path / "o")]) == 2
    assert main(["bare", "--models", "cQNM,nope", "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


# --- subcommands ------------------------------------------------------------

def test_bare_writes_one_json_per_disk(tmp_path):
    out = tmp_path / "b"
    assert main(["bare", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.glob("bare_*.json"))
    assert len(names) == 2
    m = json.loads((out / "manifest.json").read_text())
    assert m["command"] == "bare"
    assert set(m["versions"]) >= {"coupledqnm", "numpy", "scipy", "python"}
    assert "bare" in m["wall_times_s"] and sorted(m["artifacts"]) == names
    assert m["internal_units"]["frequency_unit_rad_s"] > 0
    assert m["failures"] == {}


def test_sweep_over_seven_gaps(tmp_path):
    p, out = small(tmp_path, gaps="600e-9, 750e-9, 800e-9, 850e-9, 900e-9, 1000e-9, 1200e-9")
    assert main(["sweep", "--config", str(p)]) == 0
    lines = (out / "eigen_sweep.csv").read_text().splitlines()
    assert lines[0].startswith("d_gap_m,omega_plus_re")
    assert len(lines) == 8


def test_spectrum_is_deterministic(tmp_path):
    p, out = small(tmp_path)
    assert main(["spectrum", "--config", str(p), "--threads", "2"]) == 0
    first = (out / "spectrum_800nm_dL.csv").read_bytes()
    manifest1 = json.loads((out / "manifest.json").read_text())
    assert main(["spectrum", "--config", str(p), "--threads", "1"]) == 0
    assert (out / "spectrum_800nm_dL.csv").read_bytes() == first
    header = first.decode().splitlines()[0]
    assert header == "omega_rad_s,cQNM,qQNM"
    assert len(first.decode().splitlines()) == 25
    assert manifest1["config"]["threads"] == 2


def test_models_flag_overrides_config(tmp_path):
    p, out = small(tmp_path)
    assert main(["spectrum", "--config", str(p), "--models", "cNM,cNMI", "--out", str(tmp_path / "m")]) == 0
    header = (tmp_path / "m" / "spectrum_800nm_dL.csv").read_text().splitlines()[0]
    assert header == "omega_rad_s,cNM,cNMI"
    assert not out.exists()


def test_oracle_subcommand(tmp_path):
    p, out = small(tmp_path, points=6)
    assert main(["oracle", "--config", str(p)]) == 0
    lines = (out / "oracle_800nm_dL.csv").read_text().splitlines()
    assert lines[0] == "omega_rad_s,oracle" and len(lines) == 7


def test_quantum_subcommand(tmp_path):
    p, out = small(tmp_path, gaps="800e-9, 850e-9")
    assert main(["quantum", "--config", str(p)]) == 0
    q = json.loads((out / "quantum_800nm.json").read_text())
    assert {"S_pole", "S_full", "S_assumption", "dL"} <= set(q)
    assert {"delta_gamma_pm", "delta_g_pm", "Gamma_pm_Q", "S"} <= set(q["dL"])


def test_dynamics_subcommand(tmp_path):
    p, out = small(tmp_path, extra="[truncation]\nN_fock = 2\n[dynamics]\npoints = 200\n")
    assert main(["dynamics", "--config", str(p)]) == 0
    s = json.loads((out / "dynamics_summary.json").read_text())
    entry = s["trajectory_800nm_dL.csv"]
    assert abs(entry["relative_difference"]) <= 0.01
    assert entry["max_trace_error"] < 1e-8
    assert (out / "trajectory_800nm_dL.csv").read_text().startswith("t_seconds,")


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def fail(*a, **k):
        raise ConvergenceError("root search diverged")

    monkeypatch.setattr(cli, "bare_modes", fail)
    out = tmp_path / "f"
    assert main(["hybridize", "--out", str(out)]) == 3
    assert "numerical failure" in capsys.readouterr().err
    m = json.loads((out / "manifest.json").read_text())
    assert "ConvergenceError" in m["failures"]["hybridize"]


def test_reproduce_paper_reduced(tmp_path):
    # the full eight-gap run is timed separately; here one gap exercises every step
    p, out = small(tmp_path, extra="[truncation]\nN_fock = 2\n[dynamics]\npoints = 200\n", points=12)
    assert main(["reproduce-paper", "--config", str(p)]) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert set(m["wall_times_s"]) == {"bare", "hybridize", "sweep", "fields", "spectrum", "quantum", "dynamics",
                                      "reproduce-paper"}
    names = set(m["artifacts"])
    for prefix in ("bare_", "hybrid_", "eigen_sweep", "field_800nm_plus", "spectrum_", "quantum_", "trajectory_"):
        assert any(n.startswith(prefix) for n in names)


def test_reproduce_paper_full_under_budget(tmp_path):
    import time

    t0 = time.perf_counter()
    assert main(["reproduce-paper", "--out", str(tmp_path / "full"), "--threads", "4"]) == 0
    assert time.perf_counter() - t0 < 15 * 60
    m = json.loads((tmp_path / "full" / "manifest.json").read_text())
    assert m["failures"] == {}
    assert len(m["config"]["geometry"]["gaps"]) == 8
    assert sum(n.startswith("spectrum_") for n in m["artifacts"]) == 16
