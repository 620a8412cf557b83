import math
import os
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import pytest

from spinboson import cli
from spinboson.bath import QuadratureError
from spinboson.cli import SCENARIOS, ConfigError, main, parse_config, parse_number

PI = math.pi
THREE = (0.0, PI / 4, PI / 2)

# caption parameters: (equations, omega0, T, Omega, couplings, thetas)
CAPTIONS = {
    "fig1a": (("WCSB",), 1.25, 0.2, 15.0, (0.4,), THREE),
    "fig1b": (("PC",), 1.25, 0.2, 15.0, (0.4,), THREE),
    "fig2a": (("WCSB",), 2.25, 0.2, 15.0, (0.4,), THREE),
    "fig2b": (("PC",), 2.25, 0.2, 15.0, (0.4,), THREE),
    "fig3": (("WCSB",), 2.25, 1.0, 15.0, (0.4, 0.1, 0.01), (0.0,)),
    "fig4a": (("WCSB",), 1.25, 0.2, 15.0, (0.4,), THREE),
    "fig4b": (("PC",), 2.25, 0.2, 15.0, (0.4,), THREE),
    "fig5": (("WCSB", "PC"), 1.25, 0.5, 15.0, (0.1,), (PI / 4,)),
    "fig6": (("WCSB",), 1.25, 0.2, 15.0, (0.4,), (0.0, PI / 2)),
    "fig7a": (("WCSB",), 1.25, 0.2, 15.0, (0.4,), (0.0,)),
    "fig7b": (("WCSB",), 1.25, 0.2, 15.0, (0.4,), (PI / 2,)),
    "fig8": (("WCSB",), 2.5, 1.0, 10.0, (0.1,), THREE),
    "figC1": (("PC",), 2.25, 0.2, 15.0, (0.4,), (0.0,)),
}


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list_contains_all_scenarios_sorted(capsys):
    code, out, _ = run(["list"], capsys)
    assert code == 0
    names = [line.split()[0] for line in out.splitlines()]
    assert names == sorted(CAPTIONS)
    assert "Fig. C1" in out


@pytest.mark.parametrize("name", sorted(CAPTIONS))
def test_scenario_matches_caption(name):
    s = SCENARIOS[name]
    eqs, w0, T, W, cs, ths = CAPTIONS[name]
    assert s.equations == eqs
    assert (s.omega0, s.temperature, s.cutoff) == (w0, T, W)
    assert s.couplings == cs
    assert s.thetas == ths
    assert s.dt == 1e-3
    assert s.validate() is s


def test_steady_state_scenarios_run_long_enough():
    for name in ("fig5", "fig8", "figC1"):
        s = SCENARIOS[name]
        assert s.t_end >= 50 / s.omega0


def test_battery_scenarios_start_from_default_state():
    for name in ("fig4a", "fig4b", "fig6", "fig7a", "fig7b", "fig8", "figC1"):
        assert SCENARIOS[name].initial_state == "charged"


def test_parse_number():
    assert parse_number("pi/4") == PI / 4
    assert parse_number("3*pi/8") == 3 * PI / 8
    assert parse_number("pi") == PI
    assert parse_number("0.25") == 0.25
    with pytest.raises(ValueError):
        parse_number("quarter")


def test_run_fig1a_writes_three_series(tmp_path, capsys):
    code, _, err = run(["run", "fig1a", "--set", "t_end=1", "--outdir", str(tmp_path)], capsys)
    assert code == 0
    files = sorted(p.name for p in (tmp_path / "fig1a").glob("*.csv"))
    assert len(files) == 3
    assert all(f.startswith("fig1a_blp_WCSB_theta") for f in files)
    text = (tmp_path / "fig1a" / files[0]).read_text().splitlines()
    assert text[0] == "t,trace_distance,increasing"
    assert len(text) == 1 + 101
    first = text[1].split(",")
    assert float(first[1]) == math.sqrt(2) / 2
    assert (tmp_path / "fig1a" / "plot_fig1a.py").exists()
    assert "wrote 3 CSV files" in err


def test_fig8_branches():
    s = SCENARIOS["fig8"]
    assert [b[1] for b in s.branches()] == list(THREE)
    assert s.outputs == ("battery-full",)


def test_output_is_byte_identical(tmp_path, capsys):
    args = ["run", "figC1", "--set", "t_end=2", "--set", "stride=7"]
    assert run(args + ["--outdir", str(tmp_path / "a")], capsys)[0] == 0
    assert run(args + ["--outdir", str(tmp_path / "b"), "--jobs", "2"], capsys)[0] == 0
    a = sorted((tmp_path / "a" / "figC1").iterdir())
    b = sorted((tmp_path / "b" / "figC1").iterdir())
    assert [p.name for p in a] == [p.name for p in b]
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


def test_parallel_sweep_matches_serial(tmp_path, capsys):
    args = ["run", "fig2b", "--set", "t_end=1"]
    run(args + ["--outdir", str(tmp_path / "s")], capsys)
    run(args + ["--outdir", str(tmp_path / "p"), "--jobs", "3"], capsys)
    for f in (tmp_path / "s" / "fig2b").iterdir():
        assert f.read_bytes() == (tmp_path / "p" / "fig2b" / f.name).read_bytes()


def test_csv_round_trips_full_precision(tmp_path, capsys):
    run(["run", "fig7a", "--set", "t_end=0.5", "--set", "stride=1", "--outdir", str(tmp_path)], capsys)
    f = next((tmp_path / "fig7a").glob("*.csv"))
    rows = f.read_text().splitlines()
    assert rows[0] == "t,ergotropy,erg_incoh,erg_coh,charging_power,flags"
    for line in rows[1:20]:
        for tok in line.split(","):
            assert f"{float(tok):.17g}" == tok


def test_env_var_sets_output_directory(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path / "env"))
    assert run(["run", "fig6", "--set", "t_end=0.2"], capsys)[0] == 0
    assert len(list((tmp_path / "env" / "fig6").glob("*.csv"))) == 2


def test_empty_outputs_is_an_error(tmp_path, capsys):
    code, _, err = run(["run", "fig6", "--set", "outputs=", "--outdir", str(tmp_path)], capsys)
    assert code == 1
    assert "outputs is empty" in err
    assert not any(tmp_path.iterdir())


def test_bad_override_is_an_error(tmp_path, capsys):
    code, _, err = run(["run", "fig6", "--set", "omega0=fast", "--outdir", str(tmp_path)], capsys)
    assert code == 1 and "omega0" in err
    code, _, err = run(["run", "fig6", "--set", "colour=red", "--outdir", str(tmp_path)], capsys)
    assert code == 1 and "unknown key" in err
    code, _, err = run(["run", "fig6", "--set", "theta=2", "--outdir", str(tmp_path)], capsys)
    assert code == 1 and "theta" in err
    code, _, err = run(["run", "nosuch", "--outdir", str(tmp_path)], capsys)
    assert code == 1


def test_config_errors_carry_line_numbers(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("scenario = fig5\n# comment\n\nt_end = 60\nthis line is wrong\n")
    code, _, err = run(["validate", str(cfg)], capsys)
    assert code == 1
    assert f"{cfg}:5:" in err
    cfg.write_text("scenario = fig5\ndt = soon\n")
    with pytest.raises(ConfigError, match=":2:"):
        parse_config(cfg.read_text(), str(cfg))


def test_config_file_full_and_partial(tmp_path, capsys):
    full = tmp_path / "full.cfg"
    full.write_text(
        "name = mine\nequation = PC, WCSB\nomega0 = 2\ntheta = 0, pi/3\ncoupling = 0.2\n"
        "cutoff = 12\ntemperature = 0.7\ninitial_state = 0.1, 0.2, 0.3\nt_end = 0.3\n"
        "dt = 0.01\noutputs = energy, coherence\n"
    )
    code, out, _ = run(["validate", str(full)], capsys)
    assert code == 0 and "4 branch" in out
    code, _, _ = run(["run", str(full), "--outdir", str(tmp_path / "o")], capsys)
    assert code == 0
    assert len(list((tmp_path / "o" / "mine").glob("*.csv"))) == 8
    partial = tmp_path / "partial.cfg"
    partial.write_text("equation = PC\n")
    with pytest.raises(ConfigError, match="missing keys"):
        parse_config(partial.read_text(), str(partial))


def test_initial_state_outside_ball_rejected():
    with pytest.raises(ConfigError):
        replace(SCENARIOS["fig6"], initial_state=(1.0, 1.0, 0.0)).validate()


def test_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise QuadratureError("stalled")

    monkeypatch.setattr(cli, "run_scenario", boom)
    code, _, err = run(["run", "fig6", "--outdir", str(tmp_path)], capsys)
    assert code == 2 and "stalled" in err


def test_positivity_flagged_run_warns_but_succeeds(tmp_path, capsys):
    code, _, err = run(["run", "fig1a", "--set", "theta=pi/4", "--set", "t_end=15", "--outdir", str(tmp_path)], capsys)
    assert code == 0
    assert "positivity violated" in err


def test_plot_script_is_valid_python(tmp_path, capsys):
    run(["run", "fig4b", "--set", "t_end=0.2", "--outdir", str(tmp_path)], capsys)
    src = (tmp_path / "fig4b" / "plot_fig4b.py").read_text()
    compile(src, "plot_fig4b.py", "exec")
    for name in (tmp_path / "fig4b").glob("*.csv"):
        assert repr(name.name) in src


def test_console_entry_point(tmp_path):
    env = dict(os.environ, SPINBOSON_OUTDIR=str(tmp_path))
    res = subprocess.run([sys.executable, "-m", "spinboson.cli", "list"], capture_output=True, text=True, env=env)
    assert res.returncode == 0 and "figC1" in res.stdout


def test_plot_script_runs_from_any_directory(tmp_path, capsys):
    pytest.importorskip("matplotlib")
    run(["run", "fig6", "--set", "t_end=0.2", "--outdir", str(tmp_path)], capsys)
    script = tmp_path / "fig6" / "plot_fig6.py"
    env = dict(os.environ, MPLBACKEND="Agg")
    res = subprocess.run([sys.executable, str(script)], cwd=tmp_path, capture_output=True, text=True, env=env)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "fig6" / "fig6_energy.png").exists()
