import numpy as np
import pytest

from pressureless import cli


def read_rows(path):
    body = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return body[0].split(","), [ln.split(",") for ln in body[1:]]


def header(path):
    return dict(ln[2:].split("=", 1) for ln in path.read_text().splitlines() if ln.startswith("# "))


def test_riemann_writes_csv(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["riemann", "--data", "riemann:1,1,0,-1", "--grid", "-1.5,0.5,5", "--output", str(out)]) == 0
    cols, rows = read_rows(out)
    assert cols[:3] == ["x", "rho", "u"]
    mid = rows[2]
    assert float(mid[1]) == pytest.approx(3.0) and float(mid[2]) == pytest.approx(-2 / 3)
    h = header(out)
    assert h["subcommand"] == "riemann" and h["grid"] == "-1.5,0.5,5"


def test_flags_override_data(tmp_path):
    out = tmp_path / "r.csv"
    cli.main(["riemann", "--data", "riemann:1,1,0,-1", "--u2", "1", "--grid", "0.4,0.6,3", "--output", str(out)])
    _, rows = read_rows(out)
    assert float(rows[1][2]) == pytest.approx(0.5)


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUTPUT, str(tmp_path))
    assert cli.main(["riemann", "--grid", "-1,1,3"]) == 0
    assert (tmp_path / "riemann.csv").exists()


def test_output_dir_flag_beats_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUTPUT, str(tmp_path / "env"))
    cli.main(["riemann", "--grid", "-1,1,3", "--output-dir", str(tmp_path / "flag")])
    assert (tmp_path / "flag" / "riemann.csv").exists()
    assert not (tmp_path / "env").exists()


def test_replay_from_csv_header_is_byte_identical(tmp_path):
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    cli.main(["riemann", "--data", "riemann:2,-0.5,0.3,-0.7,0.4", "--t", "0.7", "--grid", "-1,1,9",
              "--output", str(first)])
    assert cli.main(["--config", str(first), "riemann", "--output", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_ini_config_and_flag_precedence(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[common]\nflux = identity\n[riemann]\nt = 2.0\ngrid = -1,1,3\n")
    out = tmp_path / "o.csv"
    cli.main(["riemann", "--config", str(ini), "--t", "0.5", "--output", str(out)])
    h = header(out)
    assert h["t"] == "0.5" and h["grid"] == "-1,1,3"


def test_unknown_config_key_exit_2(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[riemann]\nbogus = 1\n")
    assert cli.main(["riemann", "--config", str(ini), "--output", "-"]) == 2
    assert "unknown config key 'bogus'" in capsys.readouterr().err


def test_unknown_flag_exit_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["riemann", "--bogus"])
    assert exc.value.code == 2


def test_domain_error_exit_2(capsys):
    assert cli.main(["riemann", "--data", "riemann:-1,0,0,1", "--output", "-"]) == 2
    assert cli.main(["riemann", "--data", "riemann:1,0,-1,-1", "--flux", "square-positive", "--output", "-"]) == 2


def test_convergence_exit_3(capsys):
    assert cli.main(["mollified", "--quad-tol", "1e-300", "--grid", "0,0.1,2", "--output", "-"]) == 3


def test_strict_audit_exit_4(capsys):
    assert cli.main(["audit", "--data", "riemann:1,0,0,1", "--swap", "--strict", "--output", "-"]) == 4
    assert cli.main(["audit", "--data", "riemann:1,0,0,1", "--swap", "--output", "-"]) == 0
    out = capsys.readouterr().out
    assert "# result.audit_passed=0" in out


def test_audit_of_riemann_output(tmp_path, capsys):
    src = tmp_path / "r.csv"
    cli.main(["riemann", "--data", "riemann:1,1,0,-1", "--output", str(src)])
    assert cli.main(["audit", "--input", str(src), "--strict", "--output", "-"]) == 0
    assert "# result.audit_passed=1" in capsys.readouterr().out


def test_sticky_and_blowup(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["sticky", "--data", "riemann:1,0,1,-2", "--output", str(out)]) == 0
    _, rows = read_rows(out)
    assert float(rows[-1][1]) == pytest.approx(0.0, abs=1e-12)
    out = tmp_path / "b.csv"
    assert cli.main(["blowup", "--data", "tanh", "--sigmas", "0.1,0.01", "--output", str(out)]) == 0
    assert header(out)["result.t_star"].startswith("1.0") or header(out)["result.t_star"].startswith("0.9999")


def test_oracle_small(tmp_path):
    out = tmp_path / "o.csv"
    assert cli.main(["oracle", "--paths", "2000", "--grid", "-1,0,5", "--seed", "3", "--output", str(out)]) == 0
    again = tmp_path / "p.csv"
    cli.main(["oracle", "--paths", "2000", "--grid", "-1,0,5", "--seed", "3", "--output", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_flux_demo(tmp_path):
    out = tmp_path / "f.csv"
    assert cli.main(["flux-demo", "--flux", "exp", "--grid", "-1,1,5", "--output", str(out)]) == 0
    assert len(read_rows(out)[1]) == 5


def test_parse_helpers():
    xs = cli.parse_grid("-1,1,5")
    assert np.allclose(getattr(xs, "xs", xs), np.linspace(-1, 1, 5))
    assert cli.fmt(True) == "1" and cli.fmt(0.1) == "0.1"
    with pytest.raises(cli.ConfigError):
        cli.parse_data("nonsense:1")
