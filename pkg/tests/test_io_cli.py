import json
import math

import numpy as np
import pytest

from hankel_lab import io
from hankel_lab.cli import EXIT_CHECK, EXIT_OK, EXIT_USAGE, parse_dist, run
from hankel_lab.measures import AtomicMeasure, DensityMeasure


def test_fmt_seventeen_digits():
    assert io.fmt(0.1) == "0.10000000000000001"
    assert float(io.fmt(math.pi)) == math.pi
    assert io.fmt(3) == "3" and io.fmt(True) == "true" and io.fmt(float("inf")) == "inf"


def test_json_roundtrip_lossless():
    obj = {"a": [0.1, 1e-300, -2.5], "b": {"c": None, "d": True, "e": "x"}, "f": np.float64(1 / 3)}
    back = json.loads(io.dumps(obj))
    assert back["a"] == [0.1, 1e-300, -2.5] and back["f"] == 1 / 3
    assert io.dumps(json.loads(io.dumps(obj))) == io.dumps(obj)


def test_csv_text():
    t = io.csv_text(["x", "y"], [(0.5, 1), (0.25, 2)])
    assert t == "x,y\n0.5,1\n0.25,2\n"


def test_measure_file_roundtrip(tmp_path):
    m = AtomicMeasure([0.0, 1.5], [1.0, -0.5], signed=True)
    p = tmp_path / "m.json"
    p.write_text(io.dumps(io.measure_to_dict(m)))
    assert io.load_measure(str(p)) == m
    d = DensityMeasure(0.0, 0.5, [1.0, 2.0, 3.0])
    back = io.measure_from_dict(json.loads(io.dumps(io.measure_to_dict(d))))
    assert back.start == 0.0 and back.values.tolist() == [1.0, 2.0, 3.0]


def test_measure_file_errors(tmp_path):
    with pytest.raises(io.MeasureFormatError):
        io.measure_from_dict({"atoms": [[0, 1]]})
    with pytest.raises(io.MeasureFormatError):
        io.measure_from_dict({"axis": "Sigma", "grid": {"start": 0, "step": 1, "n": 3}, "values": [1]})
    with pytest.raises(io.MeasureFormatError):
        io.measure_from_dict({"axis": "Sigma"})
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(io.MeasureFormatError):
        io.load_measure(str(p))


def test_parse_dist():
    assert parse_dist("two_point:1,2,0.25").p == 0.25
    assert parse_dist("uniform:1,2").hi == 2
    for bad in ("gauss:0,1", "uniform:2,1", "point_mass:a"):
        with pytest.raises(Exception):
            parse_dist(bad)


def test_cli_selftest(capsys):
    assert run(["selftest"]) == EXIT_OK
    env = json.loads(capsys.readouterr().out)
    assert env["passed"] and env["config"]["options"]["seed"] == 0


def test_cli_usage_errors(tmp_path, capsys):
    assert run(["nonsense"]) == EXIT_USAGE
    assert run(["carleman", "--bogus"]) == EXIT_USAGE
    assert run([]) == EXIT_USAGE
    assert run(["ids", "--measure", str(tmp_path / "missing.json")]) == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text('{"axis": "Sigma"}')
    assert run(["ids", "--measure", str(bad)]) == EXIT_USAGE
    assert run(["rkph", "--dist", "gauss:0,1"]) == EXIT_USAGE
    assert run(["wegner", "--dist", "two_point:1,2", "--N", "4", "--replicas", "2"]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "MeasureFormatError" in err and "FileNotFoundError" in err


def test_cli_resource_cap(tmp_path):
    assert run(["carleman", "--M", "500", "--dx", "0.05", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE


def test_cli_flatband(capsys):
    assert run(["flatband", "--tau", "6.283185307179586"]) == EXIT_OK
    env = json.loads(capsys.readouterr().out)
    assert abs(env["outputs"]["E_star"] - 0.1328349874896) < 1e-12


def test_cli_check_failure_exit(tmp_path):
    out = str(tmp_path / "c.csv")
    assert run(["carleman", "--M", "5", "--dx", "0.1", "--tol", "1e-9", "--out", out]) == EXIT_CHECK


def test_cli_carleman_csv(tmp_path):
    out = tmp_path / "ids.csv"
    env = tmp_path / "env.json"
    assert run(["carleman", "--M", "10", "--dx", "0.1", "--out", str(out), "--envelope", str(env)]) == EXIT_OK
    header, rows = io.read_csv(str(out))
    assert header == ["lambda", "ids", "scheme", "M"] and len(rows) == 120
    e = json.loads(env.read_text())
    assert e["outputs"]["top_eigenvalue"] <= math.pi


def _run_twice(tmp_path, argv, names):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert run(argv(a) + ["--workers", "1", "--envelope", str(a / "env.json")]) in (EXIT_OK, EXIT_CHECK)
    assert run(argv(b) + ["--workers", "3", "--envelope", str(b / "env.json")]) in (EXIT_OK, EXIT_CHECK)
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    return a, b


def test_cli_determinism_rkph(tmp_path):
    _run_twice(tmp_path, lambda d: ["rkph", "--N", "24", "--replicas", "5", "--seed", "7",
                                    "--out", str(d / "h.csv"), "--manifest", str(d / "m.json")],
               ["h.csv", "m.json"])


def test_cli_replay(tmp_path, monkeypatch):
    a, _ = _run_twice(tmp_path, lambda d: ["bands", "--model", "flat", "--k-count", "16",
                                           "--out", str(d / "b.csv"), "--edges", str(d / "e.json")],
                      ["b.csv", "e.json"])
    first = (a / "b.csv").read_bytes()
    (a / "b.csv").unlink()
    monkeypatch.setenv("HANKEL_LAB_WORKERS", "2")
    assert run(["--config", str(a / "env.json")]) == EXIT_OK
    assert (a / "b.csv").read_bytes() == first


def test_cli_workers_env(monkeypatch):
    monkeypatch.setenv("HANKEL_LAB_WORKERS", "zero")
    assert run(["selftest"]) == EXIT_USAGE
    monkeypatch.setenv("HANKEL_LAB_WORKERS", "0")
    assert run(["selftest"]) == EXIT_USAGE


def test_cli_ids_with_measure(tmp_path):
    m = tmp_path / "m.json"
    m.write_text(io.dumps(io.measure_to_dict(AtomicMeasure.lattice(2.0, -20, 20))))
    out = tmp_path / "ids.csv"
    assert run(["ids", "--measure", str(m), "--M", "10", "--out", str(out)]) == EXIT_OK
    assert run(["ids", "--measure", str(m), "--M", "10", "--scheme", "a", "--dx", "0.2",
                "--out", str(out)]) == EXIT_OK


def test_cli_bands_measure(tmp_path):
    m = tmp_path / "cell.json"
    m.write_text(io.dumps({"axis": "Sigma", "atoms": [[0.0, 1.0], [1.3, 0.5]]}))
    assert run(["bands", "--tau", "4", "--measure", str(m), "--out", str(tmp_path / "b.csv"),
                "--edges", str(tmp_path / "e.json")]) == EXIT_OK
    e = json.loads((tmp_path / "e.json").read_text())
    assert len(e["bands"]) == 2


def test_cli_small_commands(tmp_path):
    d = str(tmp_path)
    assert run(["szego", "--Ms", "4,8", "--dx", "0.2", "--out", d + "/s.csv"]) in (EXIT_OK, EXIT_CHECK)
    assert run(["wegner", "--N", "16", "--replicas", "4", "--out", d + "/w.csv"]) == EXIT_OK
    assert run(["localize", "--N", "16", "--replicas", "3", "--out", d + "/i.csv"]) == EXIT_OK
    assert run(["lifshitz", "--N", "16", "--replicas", "50", "--tau", "4",
                "--out", d + "/l.csv"]) in (EXIT_OK, EXIT_USAGE)
    m = tmp_path / "s.json"
    m.write_text(io.dumps({"axis": "sigma", "atoms": [[1.0, 1.0], [2.0, 0.5]]}))
    assert run(["carleson", "--measure", str(m), "--out", d + "/c.csv"]) == EXIT_OK
