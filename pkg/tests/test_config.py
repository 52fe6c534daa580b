import json
import math

import pytest

from orisurface.config import (ConfigError, ExperimentConfig, cell_hash,
                               object_spec_from_string)


def base_doc(**kw):
    doc = {
        "object": {"shape": "box", "size": [0.3, 0.3, 0.01], "mass": 0.254},
        "mode": "translate:+y:fast",
        "cpg": {"h_amp": 0.012, "psi_amp": 0.45, "freq": 0.5, "h0": 0.03,
                "psi0": 0.0, "sigma": 1.8326, "phi": math.pi, "epsilon": 0.2},
    }
    doc.update(kw)
    return doc


class TestValidation:
    def test_minimal_valid(self):
        cfg = ExperimentConfig.from_dict(base_doc())
        assert cfg.obj_spec.mass == 0.254
        assert cfg.mode.axis == "y"
        assert cfg.sim.dt == 5e-4
        assert cfg.grid.rows == 5

    def test_missing_object_names_field(self):
        doc = base_doc()
        del doc["object"]
        with pytest.raises(ConfigError, match="object"):
            ExperimentConfig.from_dict(doc)

    def test_missing_object_mass_names_field(self):
        doc = base_doc()
        del doc["object"]["mass"]
        with pytest.raises(ConfigError, match="object.mass"):
            ExperimentConfig.from_dict(doc)

    def test_missing_mode(self):
        doc = base_doc()
        del doc["mode"]
        with pytest.raises(ConfigError, match="mode"):
            ExperimentConfig.from_dict(doc)

    def test_missing_cpg(self):
        doc = base_doc()
        del doc["cpg"]
        with pytest.raises(ConfigError, match="cpg"):
            ExperimentConfig.from_dict(doc)

    def test_missing_cpg_field_named(self):
        doc = base_doc()
        del doc["cpg"]["sigma"]
        with pytest.raises(ConfigError, match="cpg.sigma"):
            ExperimentConfig.from_dict(doc)

    def test_unknown_top_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            ExperimentConfig.from_dict(base_doc(bogus=1))

    def test_unknown_nested_key(self):
        doc = base_doc(sim={"dt": 5e-4, "warp": 9})
        with pytest.raises(ConfigError, match="sim.warp"):
            ExperimentConfig.from_dict(doc)

    def test_out_of_box_cpg_rejected(self):
        doc = base_doc()
        doc["cpg"]["freq"] = 5.0
        with pytest.raises(ConfigError, match="cpg"):
            ExperimentConfig.from_dict(doc)

    def test_invalid_sim_values(self):
        # 7e-4 does not divide the 0.05 s controller period
        doc = base_doc(sim={"dt": 7e-4})
        with pytest.raises(ConfigError, match="sim"):
            ExperimentConfig.from_dict(doc)

    def test_section_defaults_applied(self):
        cfg = ExperimentConfig.from_dict(base_doc(sim={"seed": 42}))
        assert cfg.sim.seed == 42
        assert cfg.sim.duration == 5.0
        assert cfg.contact.mu_slide == 0.5


class TestSeedOverride:
    def test_ori_seed_env(self, monkeypatch):
        monkeypatch.setenv("ORI_SEED", "777")
        cfg = ExperimentConfig.from_dict(base_doc(sim={"seed": 1}))
        assert cfg.sim.seed == 777

    def test_ori_seed_invalid(self, monkeypatch):
        monkeypatch.setenv("ORI_SEED", "abc")
        with pytest.raises(ConfigError, match="ORI_SEED"):
            ExperimentConfig.from_dict(base_doc())


class TestNormalization:
    def test_normalized_json_stable(self):
        cfg = ExperimentConfig.from_dict(base_doc())
        a = cfg.normalized_json()
        b = cfg.normalized_json()
        assert a == b
        doc = json.loads(a)
        assert doc["sim"]["dt"] == 5e-4
        assert doc["cpg"]["sigma"] == 1.8326

    def test_key_order_independent(self):
        doc1 = base_doc()
        doc2 = dict(reversed(list(base_doc().items())))
        a = ExperimentConfig.from_dict(doc1).normalized_json()
        b = ExperimentConfig.from_dict(doc2).normalized_json()
        assert a == b

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(base_doc()))
        cfg = ExperimentConfig.load(str(path))
        assert cfg.obj_spec.size == (0.3, 0.3, 0.01)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            ExperimentConfig.load(str(path))


class TestObjectSpecString:
    def test_parse(self):
        spec = object_spec_from_string("box:0.3x0.3x0.01:0.254")
        assert spec.shape == "box"
        assert spec.size == (0.3, 0.3, 0.01)
        assert spec.mass == 0.254

    def test_bad_forms(self):
        for text in ("box", "box:1x1", "box:ax b:c", "sphere:0.1x0.1x0.1:0.2"):
            with pytest.raises(ConfigError):
                object_spec_from_string(text)


class TestCellHash:
    def test_deterministic_and_key_order_free(self):
        a = cell_hash({"a": 1, "b": [1, 2]})
        b = cell_hash({"b": [1, 2], "a": 1})
        assert a == b
        assert len(a) == 12

    def test_distinct_for_distinct_cells(self):
        assert cell_hash({"mass": 0.05}) != cell_hash({"mass": 0.2})
