"""Command-line front end and the CSV/JSON formats."""

from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphbeam import io
from graphbeam.cli import DEFAULTS, PRESETS, main
from graphbeam.exponents import NetworkParams
from graphbeam.simulator import EnergyTrace

finite = st.floats(0.0, 1e6, allow_nan=False)


def run(tmp_path, *args) -> int:
    return main([*args, "--out", str(tmp_path)])


@pytest.fixture(scope="module")
def spectrum_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("spectrum")
    code = main(["spectrum", "--out", str(out)])
    return code, out


class TestRunConfig:
    @settings(max_examples=50, deadline=None)
    @given(
        command=st.sampled_from(sorted(DEFAULTS)),
        g=st.floats(0.01, 100.0),
        a=finite,
        b=finite,
        n=st.integers(1, 200),
        dt=st.floats(1e-8, 1.0),
        preset=st.sampled_from([None, *sorted(PRESETS)]),
    )
    def test_round_trip(self, command, g, a, b, n, dt, preset):
        cfg = io.RunConfig(command, NetworkParams(g, a, b), {"n_max": n, "dt": dt, "skip": ["s_rank"]}, preset)
        assert io.RunConfig.from_json(cfg.to_json()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            io.RunConfig.from_dict({"command": "spectrum", "colour": "red"})

    def test_missing_command(self):
        with pytest.raises(ValueError):
            io.RunConfig.from_dict({"params": {}})


class TestFormats:
    def test_trace_round_trip(self, tmp_path, rng):
        t = np.cumsum(rng.random(50))
        tr = EnergyTrace(t, rng.random(50) * 1e-7, rng.random(50))
        io.write_trace_csv(tr, tmp_path / "t.csv")
        back = io.read_trace_csv(tmp_path / "t.csv")
        for f in ("times", "energy", "boundary_dissipation"):
            assert np.array_equal(getattr(back, f), getattr(tr, f))

    def test_spectrum_round_trip(self, tmp_path, spectrum):
        io.write_spectrum_csv(spectrum, tmp_path / "s.csv")
        back = io.read_spectrum_csv(tmp_path / "s.csv")
        assert [e.value for e in back] == [e.value for e in spectrum.eigenvalues]
        assert [e.label for e in back] == [e.label for e in spectrum.eigenvalues]
        assert [e.multiplicity for e in back] == [e.multiplicity for e in spectrum.eigenvalues]

    def test_plain_values(self, tmp_path):
        io.write_spectrum_csv([1 + 2j, -3j], tmp_path / "o.csv")
        back = io.read_spectrum_csv(tmp_path / "o.csv")
        assert [e.value for e in back] == [1 + 2j, -3j]
        assert np.isnan(back[0].newton_residual)

    def test_json_complex_and_numpy(self, tmp_path):
        doc = io.write_json(tmp_path / "x.json", {"z": 1 + 2j, "a": np.arange(3), "f": np.float64(0.5)})
        back = io.read_json(tmp_path / "x.json")
        assert back["z"] == [1.0, 2.0] and back["a"] == [0, 1, 2] and back["f"] == 0.5
        assert doc["version"] == io.VERSION

    def test_json_rejects_unknown(self, tmp_path):
        with pytest.raises(TypeError):
            io.write_json(tmp_path / "x.json", {"o": object()})


class TestSpectrumCommand:
    def test_outputs(self, spectrum_run):
        code, out = spectrum_run
        assert code == 0
        doc = io.read_json(out / "spectrum.json")
        assert doc["count"] == 124 and doc["interlacing_ok"]
        assert doc["config"]["command"] == "spectrum"
        with open(out / "spectrum.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 124
        assert all(float(r["re"]) < 0 for r in rows)

    def test_byte_identical_rerun(self, spectrum_run, tmp_path):
        _, out = spectrum_run
        assert run(tmp_path, "spectrum") == 0
        assert (tmp_path / "spectrum.csv").read_bytes() == (out / "spectrum.csv").read_bytes()

    def test_config_file_with_override(self, tmp_path):
        cfg = io.RunConfig("spectrum", NetworkParams(2.0, 0.5, 1.0), {"n_max": 3})
        path = tmp_path / "cfg.json"
        path.write_text(cfg.to_json())
        assert run(tmp_path, "spectrum", "--config", str(path), "--beta", "0.5") == 0
        used = io.read_json(tmp_path / "spectrum.json")["config"]
        assert used["params"] == {"gamma": 2.0, "alpha": 0.5, "beta": 0.5}
        assert used["options"]["n_max"] == 3


class TestExitCodes:
    def test_unknown_preset(self, tmp_path):
        assert run(tmp_path, "simulate", "--preset", "square") == 2

    def test_invalid_parameter(self, tmp_path):
        assert run(tmp_path, "spectrum", "--gamma", "-1") == 2

    def test_config_for_other_command(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(io.RunConfig("oracle").to_json())
        assert run(tmp_path, "spectrum", "--config", str(path)) == 2

    def test_malformed_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"command": "spectrum", "extra": 1}')
        assert run(tmp_path, "spectrum", "--config", str(path)) == 2

    def test_unknown_flag(self, tmp_path):
        assert run(tmp_path, "spectrum", "--colour") == 2

    def test_no_command(self):
        assert main([]) == 2

    def test_numerical_failure_writes_diagnostic(self, tmp_path):
        # high tension pushes the low modes out of reach of a 16-node grid
        assert run(tmp_path, "oracle", "--N", "16", "--k", "8", "--gamma", "200") == 3
        err = io.read_json(tmp_path / "error.json")
        assert err["error"] == "ResolutionError"
        assert "agree" in err["message"]


class TestOtherCommands:
    def test_asymptotics(self, tmp_path):
        assert run(tmp_path, "asymptotics", "--n-min", "10", "--n-max", "12") == 0
        rows = io.read_table_csv(tmp_path / "asymptotics.csv")
        assert len(rows) == 6 and {r["branch"] for r in rows} == {"D", "H"}
        assert io.read_json(tmp_path / "asymptotics.json")["fitted_C"] > 0

    def test_modes(self, tmp_path):
        assert run(tmp_path, "modes", "--n-max", "2", "--grid", "21") == 0
        doc = io.read_json(tmp_path / "modes.json")
        assert doc["modes"]
        first = io.read_table_csv(tmp_path / doc["modes"][0]["file"])
        assert len(first) == 21
        assert all(m["ode"] <= 1e-8 for m in doc["modes"])

    def test_oracle(self, tmp_path):
        assert run(tmp_path, "oracle", "--N", "48", "--k", "10") == 0
        doc = io.read_json(tmp_path / "match.json")
        assert len(doc["pairs"]) == 10 and not doc["unmatched_oracle"]
        assert len(io.read_spectrum_csv(tmp_path / "oracle.csv")) == 10

    def test_simulate(self, tmp_path):
        assert run(tmp_path, "simulate", "--preset", "poly", "--T-final", "0.01", "--record-every", "10") == 0
        doc = io.read_json(tmp_path / "simulate.json")
        assert doc["config"]["preset"] == "poly"
        assert 0 <= doc["filtered_share"] < 0.02
        assert io.read_trace_csv(tmp_path / "trace.csv").times.size == 11

    def test_simulate_conservative_reports_no_decay(self, tmp_path, capsys):
        assert run(tmp_path, "simulate", "--beta", "0", "--T-final", "0.01") == 0
        assert "no decay" in capsys.readouterr().out

    def test_verify_conservative(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "graphbeam", "verify", "--beta", "0", "--skip", "s_rank", "--out", str(tmp_path)],
            capture_output=True,
            text=True,
            timeout=600,
        )
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert "imaginary-axis spectrum check" in proc.stdout
        doc = json.loads((tmp_path / "verify.json").read_text())
        assert doc["passed"] and "s_rank" not in {c["name"] for c in doc["checks"]}

    def test_verify_reports_failure(self, tmp_path):
        # the sampled S has rank 3, so the full suite exits with 1
        assert run(tmp_path, "verify", "--n-max", "4") == 1
        doc = io.read_json(tmp_path / "verify.json")
        failed = {c["name"] for c in doc["checks"] if not c["passed"]}
        assert failed == {"s_rank"}
