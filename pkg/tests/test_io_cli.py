from __future__ import annotations

import hashlib
import json
import math

import jsonschema
import numpy as np
import pytest

from vexpa import io
from vexpa.cli import EXIT_ANALYSIS, EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE, main
from vexpa.pipeline import match_terms
from vexpa.presets import high_noise_model, outlier_model
from vexpa.signal_model import (
    ExponentialTerm,
    SamplingGrid,
    SignalModel,
    add_noise,
    inject_outlier,
    sample,
)


@pytest.fixture
def outlier_file(tmp_path):
    return io.write_model(tmp_path / "table1.json", outlier_model())


def test_sample_csv_round_trip(tmp_path):
    smp = inject_outlier(add_noise(sample(outlier_model(), SamplingGrid(1e-3, 50)), 30, 2), 23, 20)
    path = io.write_samples(tmp_path / "s.csv", smp, outlier_model())
    back = io.read_samples(path)
    assert back == smp
    lines = path.read_text().splitlines()
    assert lines[0] == "j,t,re,im" and len(lines) == 51
    meta = io.read_json(io.sidecar_path(path), io.SIDECAR_SCHEMA)
    assert meta["outliers"] == [{"index": 23, "offset": [20.0, 0.0]}]
    assert SignalModel.from_dict(meta["model"]) == outlier_model()


def test_read_samples_without_sidecar(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text("j,t,re,im\n0,0,1,0\n1,0.25,0,1\n2,0.5,-1,0\n")
    s = io.read_samples(p)
    assert s.grid.delta == 0.25 and s.n_samples == 3 and s.values[1] == 1j


@pytest.mark.parametrize("text", ["a,b\n0,1\n", "j,t,re,im\n0,0,1,0\n2,1,1,0\n", "j,t,re,im\n0,0,1,0\n"])
def test_read_samples_rejects_malformed(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        io.read_samples(p)


def test_model_file_validation(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"terms": [{"beta": 1.0, "gamma": 0.0}]}))
    with pytest.raises(ValueError):
        io.read_model(p)
    io.write_model(p, high_noise_model())
    assert io.read_model(p) == high_noise_model()


def test_jsonable_and_schema():
    d = io.jsonable({"a": np.float64(1.5), "b": np.arange(2), "c": 1 + 2j, "d": math.inf, "e": np.bool_(True)})
    assert d == {"a": 1.5, "b": [0, 1], "c": [1.0, 2.0], "d": None, "e": True}
    with pytest.raises(jsonschema.ValidationError):
        io.write_json("/dev/null", {"mode": "other", "model_order": 0, "terms": []}, io.RESULT_SCHEMA)


def test_generate_writes_outlier_dataset(tmp_path, outlier_file, capsys):
    out = tmp_path / "d.csv"
    rc = main(["generate", str(outlier_file), "--rate", "1000", "--count", "300", "--snr", "30",
               "--seed", "1", "--outlier", "23:20:0", "-o", str(out)])
    assert rc == EXIT_OK
    s = io.read_samples(out)
    assert s.noise == ((30.0, 1),) and s.outliers == ((23, 20 + 0j),)
    ref = inject_outlier(add_noise(sample(outlier_model(), SamplingGrid(1e-3, 300)), 30, 1), 23, 20)
    np.testing.assert_array_equal(s.values, ref.values)


def test_generate_constant_model(tmp_path):
    m = io.write_model(tmp_path / "c.json", SignalModel((ExponentialTerm(2.0, 0.0, 0.0, 0.0),)))
    out = tmp_path / "c.csv"
    assert main(["generate", str(m), "--delta", "0.5", "--count", "8", "-o", str(out)]) == EXIT_OK
    np.testing.assert_array_equal(io.read_samples(out).values, 2.0)


def test_generate_seed_sweep_files_differ(tmp_path):
    m = io.write_model(tmp_path / "t2.json", high_noise_model())
    digests = set()
    for seed in range(5):
        out = tmp_path / f"s{seed}.csv"
        main(["generate", str(m), "--rate", "100", "--snr", "10", "--seed", str(seed), "-o", str(out)])
        digests.add(hashlib.sha256(out.read_bytes()).hexdigest())
    assert len(digests) == 5


def test_generate_analyze_round_trip(tmp_path, outlier_file):
    csv = tmp_path / "clean.csv"
    main(["generate", str(outlier_file), "--rate", "1000", "-o", str(csv)])
    for mode in (["--mode", "vexpa"], ["--mode", "baseline", "--order", "3"]):
        out = tmp_path / "r.json"
        assert main(["analyze", str(csv), *mode, "-o", str(out)]) == EXIT_OK
        data = io.read_json(out, io.RESULT_SCHEMA)
        terms = [ExponentialTerm(**{k: t[k] for k in ("beta", "gamma", "psi", "omega")}) for t in data["terms"]]
        truth = list(outlier_model().terms)
        assert len(terms) == 3
        for e, t in match_terms(terms, truth):
            for key in ("beta", "gamma", "psi", "omega"):
                assert getattr(terms[e], key) == pytest.approx(getattr(truth[t], key), rel=1e-6, abs=1e-6)


def test_analyze_outlier_dataset(tmp_path, outlier_file):
    csv = tmp_path / "o.csv"
    main(["generate", str(outlier_file), "--rate", "1000", "--snr", "30", "--outlier", "23:20:0", "-o", str(csv)])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"u": 7, "s": 11, "nu": 6}))
    out = tmp_path / "r.json"
    assert main(["analyze", str(csv), str(cfg), "-o", str(out), "--workers", "3"]) == EXIT_OK
    data = io.read_json(out)
    assert data["model_order"] == 3 and data["excluded_decimations"] == [2]
    assert data["metadata"]["outliers"] == [[23, [20.0, 0.0]]]


def test_output_root_environment(tmp_path, outlier_file, monkeypatch):
    monkeypatch.setenv("VEXPA_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["generate", str(outlier_file), "--rate", "1000"]) == EXIT_OK
    assert (tmp_path / "root" / "samples.csv").exists()


def test_usage_errors_exit_one(outlier_file, capsys):
    assert main(["generate", str(outlier_file)]) == EXIT_USAGE
    assert main(["generate", str(outlier_file), "--rate", "10", "--delta", "0.1"]) == EXIT_USAGE
    assert main(["generate", str(outlier_file), "--delta", "-1"]) == EXIT_USAGE
    assert main(["experiment"]) == EXIT_USAGE
    for argv in ([], ["bogus"], ["generate", str(outlier_file), "--outlier", "x"]):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == EXIT_USAGE


def test_help_documents_flags(capsys):
    with pytest.raises(SystemExit) as info:
        main(["generate", "--help"])
    assert info.value.code == 0
    assert "--outlier" in capsys.readouterr().out


def test_analysis_failures_exit_two(tmp_path, outlier_file, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["generate", str(bad), "--rate", "10"]) == EXIT_ANALYSIS
    csv = tmp_path / "short.csv"
    main(["generate", str(outlier_file), "--rate", "1000", "--count", "30", "-o", str(csv)])
    # u=7 leaves four samples per decimation: too few for the configuration
    assert main(["analyze", str(csv), "-o", str(tmp_path / "r.json")]) == EXIT_ANALYSIS
    assert "InsufficientSamplesError" in capsys.readouterr().err


def test_crlb_and_disposedness_commands(tmp_path, capsys):
    m = io.write_model(tmp_path / "toy.json", SignalModel(tuple(
        ExponentialTerm(1.0, 0.0, 0.0, 2 * math.pi * i) for i in range(10))))
    assert main(["crlb", str(m), "--rate", "100", "--count", "200", "--snr", "40"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["rms_omega"] == pytest.approx(0.00307732894121606, rel=1e-9)
    out = tmp_path / "d.json"
    assert main(["disposedness", str(m), "--rate", "100", "-u", "10", "-o", str(out)]) == EXIT_OK
    assert all(t["rho"] == pytest.approx(4.0) for t in io.read_json(out)["terms"])


def test_experiment_threshold_failure_exit_three(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"name": "collision_demo", "snrs": [-10.0], "seeds": [0, 1]}))
    assert main(["experiment", str(spec), "-o", str(tmp_path / "out")]) == EXIT_THRESHOLD
    out = capsys.readouterr().out
    assert "PASS  noisefree_exact" in out and "FAIL  noisy_success_rate" in out


def test_experiment_rerun_is_byte_identical(tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert main(["experiment", "--name", "outlier", "--seeds", "4", "--workers", "2", "-o", str(d)]) in (0, 3)
    files = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*") if p.is_file())
    assert len(files) > 4
    for f in files:
        assert (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes(), f
    summary = io.read_json(dirs[0] / "summary.json", io.SUMMARY_SCHEMA)
    assert summary["experiment"] == "outlier"
    for run in (dirs[0] / "runs").glob("*.json"):
        io.read_json(run, io.RESULT_SCHEMA)
