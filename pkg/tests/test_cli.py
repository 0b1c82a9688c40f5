import json
import math

import numpy as np
import pytest

from bidomain import __version__
from bidomain.cli import main
from bidomain.config import ConfigError, _angle, build_config, load, parse_lines, worker_count
from bidomain.diagnostics import synthetic_zigzag


def test_angle_parser():
    assert _angle("pi/4") == pytest.approx(math.pi / 4)
    assert _angle("0.3*pi") == pytest.approx(0.3 * math.pi)
    assert _angle("-pi") == pytest.approx(-math.pi)
    assert _angle("2pi/5") == pytest.approx(2 * math.pi / 5)
    assert _angle("0.25") == 0.25


def test_parse_and_override(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\na = 0.7   # trailing\ntheta = pi/5\nlevels = 99,199\n\n", encoding="utf-8")
    cfg = load(f, ["a=0.8"])
    assert cfg.a == 0.8 and cfg.theta == pytest.approx(math.pi / 5) and cfg.levels == (99, 199)
    assert "a = 0.7" in cfg.echo() and "a = 0.8" in cfg.echo()
    with pytest.raises(ConfigError):
        parse_lines(["nonsense"])


@pytest.mark.parametrize("pair", [("a", "1.2"), ("n_eta", "7"), ("alpha", "0.6"), ("bogus", "1"),
                                  ("dt", "x"), ("model", "hh"), ("n1", "6,")])
def test_invalid_values(pair):
    with pytest.raises(ConfigError):
        build_config([pair])


def test_replace_validates():
    cfg = build_config([])
    assert cfg.replace(a=0.5).a == 0.5
    with pytest.raises(ConfigError):
        cfg.replace(a=2.0)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("BIDOMAIN_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("BIDOMAIN_THREADS", "many")
    with pytest.raises(ConfigError):
        worker_count()


def test_version_and_keys(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0 and __version__ in capsys.readouterr().out
    assert main(["keys"]) == 0
    assert "hysteresis_a" in capsys.readouterr().out


def test_unknown_recipe_and_bad_key(capsys, tmp_path):
    for argv in (["recipe", "nope"], ["frank", "a=1.5"], ["frank", "zzz=1"]):
        with pytest.raises(SystemExit) as exc:
            main(argv + [f"out={tmp_path}"])
        assert exc.value.code == 2
    assert "unknown recipe" in capsys.readouterr().err


def test_frank_outputs(tmp_path, capsys):
    assert main(["frank", "a=0.9", "resolution=512", f"out={tmp_path}"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["pass"] is True
    assert (tmp_path / "frank.csv").exists() and (tmp_path / "contact_arcs.csv").exists()
    assert (tmp_path / "VERSION").read_text().strip() == __version__
    echo = (tmp_path / "config.txt").read_text()
    assert f"# bidomain {__version__}" in echo and "resolution = 512" in echo
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["version"] == __version__ and len(summary["arcs"]) == 4


def _strip_run(out):
    return main(["simulate-strip", "d=30", "n_eta=16", "n_xi=99", "dt=0.2", "t_end=4", "probe_every=5",
                 "perturb=0.01", "seed=7", f"out={out}"])


def test_reproducible_outputs(tmp_path):
    assert _strip_run(tmp_path / "r1") == 0
    assert _strip_run(tmp_path / "r2") == 0
    for name in ("probes.csv", "level_sets.csv", "final_u.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    main(["simulate-strip", "d=30", "n_eta=16", "n_xi=99", "dt=0.2", "t_end=4", "probe_every=5",
          "perturb=0.01", "seed=8", f"out={tmp_path / 'r3'}"])
    assert (tmp_path / "r1" / "final_u.csv").read_bytes() != (tmp_path / "r3" / "final_u.csv").read_bytes()


def test_measure_command(tmp_path):
    ls = synthetic_zigzag(100.0, 200, 0.6, 0.8)
    np.savetxt(tmp_path / "ls.csv", np.c_[ls.eta, ls.xi_half], delimiter=",", header="eta,xi_half", comments="")
    assert main(["measure", f"input={tmp_path / 'ls.csv'}", "d=100", f"out={tmp_path / 'm'}"]) == 0
    s = json.loads((tmp_path / "m" / "summary.json").read_text())
    assert s["n_peaks"] == 1
    assert s["theta_minus"] == pytest.approx(0.6, abs=1e-3) and s["theta_plus"] == pytest.approx(0.8, abs=1e-3)
    assert main(["measure", f"out={tmp_path / 'm2'}"]) == 2
    (tmp_path / "empty.csv").write_text("eta,xi_half\n")
    assert main(["measure", f"input={tmp_path / 'empty.csv'}", f"out={tmp_path / 'm3'}"]) == 2
    assert main(["measure", f"input={tmp_path / 'missing.csv'}", f"out={tmp_path / 'm4'}"]) == 2


def test_planar_front_command(tmp_path):
    assert main(["planar-front", "t_end=0", f"out={tmp_path}"]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["speed_exact"] == pytest.approx(0.1)


def test_config_file_recipe(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("levels = 49,99,199\nalphas = 0.3\nt_end = 2\nd = 10\nn_eta = 4\n", encoding="utf-8")
    rc = main(["recipe", "convergence", "--config", str(cfg), f"out={tmp_path / 'o'}"])
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["recipe"] == "convergence" and rc in (0, 1)
    assert (tmp_path / "o" / "convergence.csv").exists()
