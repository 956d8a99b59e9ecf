import json

import numpy as np
import pytest

from kinspde.errors import ConfigurationError
from kinspde.experiments import (CATALOG, catalog, config_hash, load_config, resolve_config, run_experiment,
                                 versions)


class TestCatalog:
    def test_ten_entries_with_metadata(self):
        assert len(catalog()) == 10
        for e in catalog():
            assert e.description and e.runtime and 1 <= e.criterion <= 10

    def test_every_criterion_covered(self):
        assert {e.criterion for e in catalog()} == set(range(1, 11))

    @pytest.mark.parametrize("name", sorted(CATALOG))
    def test_defaults_validate(self, name):
        resolve_config({"name": name})

    @pytest.mark.parametrize("name", sorted(CATALOG))
    def test_shipped_config_matches_defaults(self, name, request):
        root = request.config.rootpath
        cfg = resolve_config(load_config(root / "configs" / f"{name}.yaml"))
        assert cfg == resolve_config({"name": name})


class TestResolve:
    def test_merge_overrides_nested(self):
        cfg = resolve_config({"name": "superlinear-pam", "params": {"paths": 4}, "grid": {"Nx": 32}})
        assert cfg["params"]["paths"] == 4
        assert cfg["params"]["gamma"] == 0.1
        assert cfg["grid"]["Nx"] == 32 and cfg["grid"]["Nv"] == 64

    @pytest.mark.parametrize("cfg,match", [
        ({}, "name"),
        ({"name": "nope"}, "unknown experiment"),
        ({"name": "superlinear-pam", "colour": 1}, "unknown configuration keys"),
        ({"name": "superlinear-pam", "params": {"bogus": 1}}, "unknown parameters"),
        ({"name": "superlinear-pam", "params": {"gamma": 0.2}}, "gamma"),
        ({"name": "superlinear-pam", "grid": {"Nx": 48}}, "power of two"),
        ({"name": "superlinear-pam", "seed": -1}, "seed"),
        ({"name": "holder-exponents", "params": {"t_ref_step": 500}}, "horizon"),
        ({"name": "noise-covariance", "params": {"velocities": [0.0, 1.0]}}, "velocities"),
        ({"name": "filtering", "params": {"general": {"refine_steps": [300, 1000]}}}, "divide"),
        ({"name": "filtering", "params": {"langevin": {"particles": 0}}}, "particles"),
        ({"name": "l1-contraction", "params": {"T": -1.0}}, "T must"),
    ])
    def test_rejections(self, cfg, match):
        with pytest.raises(ConfigurationError, match=match):
            resolve_config(cfg)

    def test_load_config_requires_mapping(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("- just\n- a list\n")
        with pytest.raises(ConfigurationError):
            load_config(p)

    def test_hash_is_order_independent(self):
        a = {"name": "x", "params": {"a": 1, "b": 2}}
        b = {"params": {"b": 2, "a": 1}, "name": "x"}
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash({"name": "y"})


SMALL = {"name": "superlinear-pam", "params": {"paths": 4, "steps": 40}}


class TestRunner:
    def test_bundle_contents(self, tmp_path):
        res = run_experiment(SMALL, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["experiment"] == "superlinear-pam"
        assert manifest["config_sha256"] == config_hash(manifest["config"])
        assert manifest["versions"] == versions()
        assert manifest["passed"] == res.passed
        for name in manifest["tables"]:
            assert (tmp_path / name).exists()
        lines = (tmp_path / "summary.txt").read_text().splitlines()
        assert len(lines) == len(res.assertions)

    def test_outputs_deterministic_across_threads(self, tmp_path):
        run_experiment(SMALL, tmp_path / "a", threads=1)
        run_experiment(SMALL, tmp_path / "b", threads=4)
        for f in sorted((tmp_path / "a").iterdir()):
            if f.name == "manifest.json":
                ma, mb = (json.loads((d / f.name).read_text()) for d in (tmp_path / "a", tmp_path / "b"))
                ma.pop("elapsed_seconds"), mb.pop("elapsed_seconds")
                assert ma == mb
            else:
                assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_seed_override_changes_results(self, tmp_path):
        a = run_experiment(SMALL, tmp_path / "a")
        b = run_experiment(SMALL, tmp_path / "b", seed_override=123)
        assert json.loads((tmp_path / "b" / "manifest.json").read_text())["config"]["seed"] == 123
        ta, tb = a.tables["l1_mean"][1], b.tables["l1_mean"][1]
        assert not np.allclose([r[1] for r in ta[1:]], [r[1] for r in tb[1:]])

    def test_field_dumps_written(self, tmp_path):
        cfg = {"name": "model-ske-moments", "params": {"paths": 16, "chunk": 8, "steps": 10}}
        run_experiment(cfg, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert "mean_T.kspde" in manifest["fields"]
        assert (tmp_path / "mean_T.kspde").exists()
