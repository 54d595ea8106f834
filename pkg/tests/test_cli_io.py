import hashlib
import subprocess
import sys

import pytest

from gflsim import cli_io
from gflsim.cli_io import (ParseError, UnknownKey, UnknownSignal, ValidationError, cli_main,
                           emit_plot, format_csv, parse_config, read_csv, resolve_config,
                           serialize, write_csv)
from gflsim.simulator import COLUMNS, Scenario, SimConfig, run

MINIMAL = """
[grid]
Vm = 1.0
f = 60

[simulation]
dt = 50e-6
t_end = 0.002
"""

EVENTS = MINIMAL + """
[frequency_support]
kf = 20.0

[[events]]
type = "p_step"
time = 0.001
delta_p = 0.1
"""


@pytest.fixture(scope="module")
def records():
    return run(Scenario(), SimConfig(t_end=0.002))


def test_minimal_document_gets_defaults():
    sc, cfg = parse_config(MINIMAL)
    assert sc == Scenario()
    assert cfg.dt == 50e-6 and cfg.topology == "rl" and cfg.companion_form == "norton"


def test_stability_guard_names_key():
    with pytest.raises(ValidationError) as exc:
        parse_config(MINIMAL.replace("dt = 50e-6", "dt = 1e-2").replace("0.002", "0.1"))
    assert exc.value.key == "simulation.dt"
    assert "simulation.dt" in str(exc.value) and "stability" in str(exc.value)


def test_events_out_of_order():
    doc = MINIMAL + """
[[events]]
type = "p_step"
time = 0.0015
delta_p = 0.1

[[events]]
type = "q_step"
time = 0.001
delta_q = 0.1
"""
    with pytest.raises(ValidationError) as exc:
        parse_config(doc)
    assert "events[1].time" in str(exc.value)


@pytest.mark.parametrize("doc, key", [
    (MINIMAL + "\n[pll]\nkq = 1.0\n", "pll.kq"),
    (MINIMAL + "\n[plant]\nR = 1.0\n", "plant"),
])
def test_unknown_keys(doc, key):
    with pytest.raises(UnknownKey) as exc:
        parse_config(doc)
    assert key in str(exc.value)


@pytest.mark.parametrize("doc, key", [
    (MINIMAL.replace("Vm = 1.0", "Vm = -1.0"), "grid.Vm"),
    (MINIMAL.replace("Vm = 1.0", 'Vm = "one"'), "grid.Vm"),
    (MINIMAL.replace("Vm = 1.0\n", ""), "grid.Vm"),
    (MINIMAL + '\n[simulation.extra]\n', "simulation"),
    (MINIMAL + "\n[pll]\nTf = 0.0\n", "pll.Tf"),
    (MINIMAL + "epsilon = 0.0\n", "simulation.epsilon"),
])
def test_validation_messages_name_the_key(doc, key):
    with pytest.raises(ValidationError) as exc:
        parse_config(doc)
    assert key in str(exc.value)


def test_parse_error_has_line_number():
    with pytest.raises(ParseError) as exc:
        parse_config(MINIMAL + "\n[pll\nkp = 1\n")
    assert exc.value.line == 10
    assert "line 10" in str(exc.value)


def test_serialize_is_idempotent():
    res = resolve_config(EVENTS)
    text = serialize(res)
    assert resolve_config(text) == res
    assert serialize(resolve_config(text)) == text
    assert parse_config(text) == parse_config(EVENTS)


def test_csv_shape_and_schema(records, tmp_path):
    recs = records[:3]
    path = tmp_path / "r.csv"
    n = write_csv(recs, path)
    data = path.read_bytes()
    assert n == len(data)
    assert b"\r" not in data
    lines = data.decode("utf-8").splitlines()
    assert len(lines) == 4
    assert lines[0].split(",") == list(COLUMNS)
    # 17 significant digits, scientific notation
    assert all("e" in v and len(v.split("e")[0].replace("-", "").replace(".", "")) == 17
               for v in lines[1].split(","))


def test_csv_round_trip_is_bit_exact(records, tmp_path):
    path = tmp_path / "r.csv"
    write_csv(records, path)
    header, rows = read_csv(path)
    assert header == list(COLUMNS)
    assert rows == [list(map(float, r)) for r in records]


def test_csv_is_locale_independent(records):
    import locale
    old = locale.setlocale(locale.LC_NUMERIC)
    try:
        for name in ("de_DE.UTF-8", "fr_FR.UTF-8"):
            try:
                locale.setlocale(locale.LC_NUMERIC, name)
                break
            except locale.Error:
                continue
        assert format_csv(records) == format_csv(records)
        assert "," not in format_csv(records).splitlines()[1].split(",")[1]
    finally:
        locale.setlocale(locale.LC_NUMERIC, old)


def test_write_csv_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        write_csv([], tmp_path / "x.csv")


def test_plot(records, tmp_path):
    p1 = emit_plot(records, ["theta_pll_rad"], tmp_path / "a.svg")
    p2 = emit_plot(records, ["theta_pll_rad"], tmp_path / "b.svg")
    assert p1.stat().st_size > 0
    assert p1.read_bytes() == p2.read_bytes()
    with pytest.raises(UnknownSignal) as exc:
        emit_plot(records, ["theta"], tmp_path / "c.svg")
    assert "theta_pll_rad" in str(exc.value)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_cli_validate_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, "good.toml", MINIMAL)
    assert cli_main(["validate", str(good)]) == 0
    bad = _write(tmp_path, "bad.toml", MINIMAL + "\n[pll\n")
    assert cli_main(["validate", str(bad)]) == 1
    assert cli_main(["run", str(bad), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "ParseError" in err and "line 10" in err
    unk = _write(tmp_path, "unk.toml", MINIMAL + "\n[pll]\nkq = 1\n")
    assert cli_main(["validate", str(unk)]) == 1
    assert cli_main(["validate", str(tmp_path / "missing.toml")]) == 1


def test_cli_validate_echo(tmp_path, capsys):
    good = _write(tmp_path, "good.toml", EVENTS)
    assert cli_main(["validate", "--echo", str(good)]) == 0
    assert resolve_config(capsys.readouterr().out) == resolve_config(EVENTS)


def test_cli_run_is_deterministic(tmp_path):
    cfg = _write(tmp_path, "case.toml", EVENTS)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert cli_main(["run", str(cfg), "--out", str(out1), "--plot", "p_g,theta_pll_rad"]) == 0
    assert cli_main(["run", str(cfg), "--out", str(out2), "--plot", "p_g,theta_pll_rad"]) == 0
    for name in ("case.csv", "case.manifest.toml", "case.svg"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    man = cli_io.tomllib.loads((out1 / "case.manifest.toml").read_text())
    assert man["input_sha256"] == hashlib.sha256(cfg.read_bytes()).hexdigest()
    assert man["records"] == 41 and man["csv"] == "case.csv"
    assert man["resolved"]["events"][0]["delta_p"] == 0.1
    assert cli_main(["run", str(cfg), "--out", str(out1), "--plot", "nope"]) == 1


def test_cli_solver_failure_exit_2(tmp_path, capsys):
    doc = MINIMAL + "max_iter = 1\n" + """
[[events]]
type = "phase_jump"
time = 0.001
delta_theta = 1.0
"""
    cfg = _write(tmp_path, "fail.toml", doc)
    assert cli_main(["run", str(cfg), "--out", str(tmp_path)]) == 2
    assert "SolverError" in capsys.readouterr().err


def test_cli_sweep(tmp_path):
    cfg = _write(tmp_path, "sw.toml", EVENTS)
    out = tmp_path / "sweep"
    assert cli_main(["sweep", str(cfg), "--param", "frequency_support.kf",
                     "--values", "10,20,40", "--out", str(out)]) == 0
    csvs = sorted(p.name for p in out.glob("*.csv"))
    assert csvs == [f"sw_frequency_support.kf={v}.csv" for v in (10, 20, 40)]
    assert cli_main(["sweep", str(cfg), "--param", "pll.nope", "--values", "1",
                     "--out", str(out)]) == 1
    assert cli_main(["sweep", str(cfg), "--param", "pll.Tf", "--values", "-1",
                     "--out", str(out)]) == 1


def test_console_script_entry_point(tmp_path):
    cfg = _write(tmp_path, "good.toml", MINIMAL)
    proc = subprocess.run([sys.executable, "-m", "gflsim.cli_io", "validate", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
