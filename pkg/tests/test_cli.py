import json
import subprocess
import sys

import pytest

from dunkl_lab.cli import main
from dunkl_lab.config import (
    apply_override,
    assemble,
    load_run_config,
    parse_override,
    validate_document,
)
from dunkl_lab.errors import ConfigError


def base_doc(**overrides):
    doc = {
        "system": {"type": "B", "n": 2},
        "k": 1.0,
        "x0": [2.0, 1.0],
        "sim": {"T": 0.2, "dt": 0.002, "paths": 20, "seed": 9},
    }
    doc.update(overrides)
    return doc


def write_cfg(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestConfig:
    def test_valid_document(self):
        validate_document(base_doc())

    def test_unknown_key_rejected_with_pointer(self):
        with pytest.raises(ConfigError) as err:
            validate_document(base_doc(bogus=1))
        assert "bogus" in str(err.value)

    def test_nested_pointer(self):
        doc = base_doc()
        doc["sim"]["paths"] = -1
        with pytest.raises(ConfigError) as err:
            validate_document(doc)
        assert err.value.pointer == "/sim/paths"

    def test_semantic_checks(self):
        doc = base_doc()
        doc["x0"] = [1.0, 2.0, 3.0]
        with pytest.raises(ConfigError) as err:
            assemble(doc)
        assert err.value.pointer == "/x0"
        doc = base_doc(enumeration=[0, 1])
        with pytest.raises(ConfigError):
            assemble(doc)

    def test_custom_system(self):
        doc = base_doc()
        doc["system"] = {"type": "custom",
                         "roots": [[1, 0], [-1, 0], [0, 1], [0, -1],
                                   [1, 1], [-1, -1], [1, -1], [-1, 1]]}
        cfg = assemble(doc)
        assert cfg.system.n_positive == 4

    def test_custom_requires_roots(self):
        doc = base_doc()
        doc["system"] = {"type": "custom"}
        with pytest.raises(ConfigError) as err:
            assemble(doc)
        assert err.value.pointer == "/system/roots"

    def test_overrides(self):
        doc = base_doc()
        key, value = parse_override("sim.paths=55")
        apply_override(doc, key, value)
        assert doc["sim"]["paths"] == 55
        key, value = parse_override("k=[0.5,1.5]")
        apply_override(doc, key, value)
        assert doc["k"] == [0.5, 1.5]

    def test_k_per_orbit(self, tmp_path):
        cfg = load_run_config(write_cfg(tmp_path, base_doc(k=[0.5, 1.5])))
        assert cfg.k.by_orbit == (0.5, 1.5)


class TestCommands:
    def test_describe_b2(self, capsys):
        rc = main(["describe", "--system", "B", "--n", "2"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "Weyl group order: 8" in out
        assert out.count("true") == 4

    def test_describe_a3_has_false_entry(self, capsys):
        rc = main(["describe", "--system", "A", "--n", "3"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "false" in out

    def test_simulate_radial_writes_csv(self, tmp_path, capsys):
        out_path = tmp_path / "traj.csv"
        doc = base_doc(output={"path": str(out_path), "format": "csv"})
        rc = main(["simulate-radial", "--config", write_cfg(tmp_path, doc)])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["paths"] == 20
        header = out_path.read_text().splitlines()[0]
        assert header == "path_id,t,x_1,x_2,event"

    def test_simulate_radial_set_override(self, tmp_path, capsys):
        doc = base_doc()
        rc = main(["simulate-radial", "--config", write_cfg(tmp_path, doc),
                   "--set", "sim.paths=5"])
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["paths"] == 5

    def test_simulate_dunkl_modes(self, tmp_path, capsys):
        out_path = tmp_path / "traj.csv"
        doc = base_doc(output={"path": str(out_path), "format": "csv"})
        doc["sim"]["T"] = 1.0
        doc["sim"]["paths"] = 60
        rc = main(["simulate-dunkl", "--config", write_cfg(tmp_path, doc),
                   "--mode", "auto"])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["modes"] == ["shortcut"] * 4
        assert summary["total_jumps"] > 0
        text = out_path.read_text()
        assert "jump:" in text

    def test_byte_identical_replay(self, tmp_path, capsys):
        outputs = []
        for name in ("a.csv", "b.csv"):
            out_path = tmp_path / name
            doc = base_doc(output={"path": str(out_path), "format": "csv"})
            rc = main(["simulate-dunkl", "--config",
                       write_cfg(tmp_path, doc, f"cfg_{name}.json")])
            assert rc == 0
            capsys.readouterr()
            outputs.append(out_path.read_bytes())
        assert outputs[0] == outputs[1]

    def test_env_seed_override(self, tmp_path, capsys, monkeypatch):
        doc = base_doc()
        path = write_cfg(tmp_path, doc)
        rc = main(["simulate-radial", "--config", path])
        base_out = json.loads(capsys.readouterr().out)
        monkeypatch.setenv("DUNKL_LAB_SEED", "12345")
        rc = main(["simulate-radial", "--config", path])
        env_out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert base_out["mean_sq_norm_T"] != env_out["mean_sq_norm_T"]

    def test_bad_config_exit_code(self, tmp_path, capsys):
        doc = base_doc(bogus=1)
        rc = main(["simulate-radial", "--config", write_cfg(tmp_path, doc)])
        err = capsys.readouterr().err
        assert rc == 2
        assert "bogus" in err

    def test_verify_harmonic(self, capsys):
        rc = main(["verify-harmonic", "--system", "B", "--n", "2",
                   "--k", "1.0,0.5", "--points", "25"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "harmonic-delta_bar" in out
        assert "FAIL" not in out

    def test_export_plot_data(self, tmp_path, capsys):
        out_path = tmp_path / "traj.csv"
        doc = base_doc(output={"path": str(out_path), "format": "csv"})
        doc["sim"]["paths"] = 30
        main(["simulate-dunkl", "--config", write_cfg(tmp_path, doc)])
        capsys.readouterr()
        summary_path = tmp_path / "summary.csv"
        rc = main(["export-plot-data", "--in", str(out_path),
                   "--out", str(summary_path), "--bins", "5"])
        assert rc == 0
        lines = summary_path.read_text().splitlines()
        assert len(lines) == 6
        assert lines[0].startswith("t_lo,t_hi,count,jumps")

    def test_entry_point_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "dunkl_lab.cli", "describe",
             "--system", "A", "--n", "3"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "Weyl group order: 6" in proc.stdout


class TestVerifySuiteCommand:
    def test_quick_suite(self, tmp_path, capsys):
        # very small sizes: exercises the wiring, not the statistics
        doc = base_doc()
        doc["sim"] = {"T": 0.5, "dt": 0.005, "paths": 400, "seed": 314}
        rc = main(["verify-suite", "--config", write_cfg(tmp_path, doc)])
        out = capsys.readouterr().out
        assert "martingale" in out
        assert "wall-profile" in out
        json_start = out.index("[")
        parsed = json.loads(out[json_start:])
        assert any(r["name"] == "projection-agreement" for r in parsed)
        assert rc in (0, 1)
