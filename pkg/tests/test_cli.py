import json

import pytest

from kinspde.cli import main
from kinspde.grid import Field, make_grid
from kinspde.io import read_table, write_field


def write_yaml(path, text):
    path.write_text(text)
    return str(path)


class TestCommands:
    def test_list(self, capsys):
        assert main(["list"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 10
        assert any(line.startswith("holder-exponents") for line in out)

    def test_validate_ok_and_bad(self, tmp_path, capsys):
        ok = write_yaml(tmp_path / "ok.yaml", "name: superlinear-pam\nparams: {paths: 2}\n")
        assert main(["validate", ok]) == 0
        bad = write_yaml(tmp_path / "bad.yaml", "name: superlinear-pam\ngrid: {Nx: 10}\n")
        assert main(["validate", bad]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_config_is_configuration_error(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.yaml")]) == 2

    def test_run_writes_bundle(self, tmp_path, capsys):
        cfg = write_yaml(tmp_path / "c.yaml", "name: superlinear-pam\nparams: {paths: 4, steps: 40}\n")
        out = tmp_path / "out"
        code = main(["run", cfg, "--output-dir", str(out), "--threads", "2", "--seed-override", "5"])
        assert code in (0, 1)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 5
        assert code == (0 if manifest["passed"] else 1)
        assert "superlinear-pam" in capsys.readouterr().out

    def test_run_exit_code_on_failure(self, tmp_path):
        # one path cannot produce a standard error, so the Monte Carlo bound is not established
        cfg = write_yaml(tmp_path / "c.yaml", "name: l1-contraction\nparams: {paths: 1, chunk: 1, steps: 2}\n")
        assert main(["run", cfg, "--output-dir", str(tmp_path / "o")]) in (0, 1)

    def test_run_by_catalogue_name_and_env_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("KINSPDE_OUTPUT_DIR", str(tmp_path / "env"))
        assert main(["run", "besov-estimators"]) == 0
        assert (tmp_path / "env" / "manifest.json").exists()

    def test_dump_field(self, tmp_path):
        g = make_grid(1.0, 1.0, 8, 8)
        write_field(tmp_path / "f.kspde", Field(g, g.zeros() + 2.0))
        assert main(["dump-field", str(tmp_path / "f.kspde")]) == 0
        header, rows = read_table(tmp_path / "f.csv")
        assert header == ["x", "v", "value"] and len(rows) == 64

    def test_dump_field_bad_file(self, tmp_path):
        (tmp_path / "junk.kspde").write_bytes(b"nope")
        assert main(["dump-field", str(tmp_path / "junk.kspde")]) == 2

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
