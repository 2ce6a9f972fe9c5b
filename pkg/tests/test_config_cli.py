import io
import json

import pytest

from phlab.cli import OUTPUT_ENV, main
from phlab.config import RunManifest, parse_config, sha256_file, utc_timestamp
from phlab.errors import ConfigError

SMALL_CONFIG = """\
schema = 1
# tiny sweep
family = DerivedFromAnosov
matrix = 1,1,0; 1,2,1; 0,1,2
sweep = 0, 0.02
ensemble = 32
orbit-length = 2000   # trailing comment
resolution = 8
ht_horizon = 100
sigma = auto
"""


def test_parse_config_roundtrip():
    cfg = parse_config(SMALL_CONFIG)
    assert cfg.sweep == (0.0, 0.02)
    assert cfg.orbit_length == 2000
    assert cfg.matrix == ((1, 1, 0), (1, 2, 1), (0, 1, 2))
    assert cfg.sigma is None
    assert parse_config("schema = 1\nsigma = 0.8\n").sigma == 0.8


@pytest.mark.parametrize(
    "text",
    [
        "ensemble = 32\n",  # no schema
        "schema = 2\n",
        "schema = 1\nbogus = 3\n",
        "schema = 1\nensemble = 32\nensemble = 64\n",
        "schema = 1\nensemble = lots\n",
        "schema = 1\nensemble\n",
        "schema = 1\nensemble =\n",
        "schema = 1\nmatrix = 1,2;3\n",
        "schema = 1\nsweep = 0.02, 0\n",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_timestamp_and_manifest(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert utc_timestamp() == "1970-01-01T00:00:00Z"
    f = tmp_path / "a.txt"
    f.write_text("abc")
    m = RunManifest("pliss", {"gamma": 1.0}, 7, utc_timestamp())
    m.add_output(f)
    body = json.loads(m.write(tmp_path).read_text())
    assert body["outputs"]["a.txt"] == sha256_file(f)
    assert body["master_seed"] == 7 and body["schema"] == 1


def _run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_pliss_cli(tmp_path, capsys):
    seq = tmp_path / "seq.txt"
    seq.write_text("2 2 2 2\n")
    code, out, _ = _run(["pliss", str(seq), "--gamma", "1", "--Gamma", "1.5", "--lower-bound", "0", "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["indices"] == [1, 2, 3, 4] and res["guaranteed_count"] == 4
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["subcommand"] == "pliss" and "pliss.json" in manifest["outputs"]
    assert manifest["exit_code"] == 0


def test_pliss_cli_stdin_and_modes(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("0, 5"))
    code, out, _ = _run(["pliss", "--gamma", "1", "--mode", "oracle", "--out", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["indices"] == [2]
    monkeypatch.setattr("sys.stdin", io.StringIO("3 0 3 0"))
    code, out, _ = _run(["pliss", "--gamma", "1", "--mode", "classical", "--out", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["indices"] == [1, 3]


def test_exit_codes(tmp_path, capsys):
    assert _run(["pliss", "--bogus"], capsys)[0] == 2
    assert _run(["nonsense"], capsys)[0] == 2
    seq = tmp_path / "seq.txt"
    seq.write_text("2 1 1\n")
    # hypothesis violation
    code, _, err = _run(["pliss", str(seq), "--gamma", "0.5", "--Gamma", "1.5", "--lower-bound", "0", "--kappa", "0.5", "--out", str(tmp_path)], capsys)
    assert code == 1 and "HypothesisViolated" in err
    # epsilon above the partial hyperbolicity threshold
    code, _, err = _run(["orbit", "--family", "DerivedFromAnosov", "--epsilon", "0.5", "--out", str(tmp_path)], capsys)
    assert code == 1 and "ValueError" in err
    assert _run(["pliss", str(tmp_path / "missing.txt"), "--gamma", "1", "--mode", "oracle", "--out", str(tmp_path)], capsys)[0] == 1


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env_out"))
    code, _, _ = _run(["orbit", "--steps", "20", "--seed", "3"], capsys)
    assert code == 0
    files = sorted(p.name for p in (tmp_path / "env_out").iterdir())
    assert files == ["manifest.json", "orbit.csv", "orbit.json", "rates.csv"]
    manifest = json.loads((tmp_path / "env_out" / "manifest.json").read_text())
    assert manifest["master_seed"] == 3 and manifest["flags"]["steps"] == 20


def test_seed_recorded_when_omitted(tmp_path, capsys):
    code, _, _ = _run(["orbit", "--steps", "10", "--out", str(tmp_path)], capsys)
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert isinstance(manifest["master_seed"], int)


def test_lyapunov_cli(tmp_path, capsys):
    code, out, _ = _run(["lyapunov", "--steps", "2000", "--seed", "0", "--out", str(tmp_path)], capsys)
    assert code == 0
    res = json.loads(out)
    assert abs(res["value"] - res["eigen_reference"]) <= 1e-10


def test_measure_cli(tmp_path, capsys):
    code, _, _ = _run(["measure", "--steps", "2000", "--resolution", "8", "--seed", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    lines = (tmp_path / "measure.csv").read_text().splitlines()
    assert lines[0].startswith("# resolution=8 d=3 spec=")
    # row-major: one line per (i, j) with the last axis along the line
    assert len(lines) == 1 + 8**2
    total = sum(float(v) for line in lines[1:] for v in line.split(","))
    assert total == pytest.approx(1.0)


def test_stability_cli(tmp_path, capsys):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(SMALL_CONFIG)
    code, out, _ = _run(["stability", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    names = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert names == ["manifest.json", "measure_eps_0.02.csv", "measure_eps_0.csv", "report.json", "stability.csv"]
    assert out.splitlines()[0].startswith("epsilon,w1")
    bad = tmp_path / "bad.cfg"
    bad.write_text("schema = 1\nwhat = 1\n")
    assert _run(["stability", "--config", str(bad), "--out", str(tmp_path / "o2")], capsys)[0] == 1
