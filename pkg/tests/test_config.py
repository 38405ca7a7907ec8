import json

import pytest

from tsdrive.config import DEFAULTS, ConfigError, RunConfig


class TestRunConfig:
    def test_empty_config_is_paper_setup(self):
        cfg = RunConfig.from_dict({})
        assert cfg.data == DEFAULTS
        assert cfg.vehicle.M == 683.0
        assert cfg.data["mpc"]["N"] == 40
        assert cfg.data["mhe"]["N"] == 30
        assert cfg.inner_steps == 10

    def test_partial_override(self):
        cfg = RunConfig.from_dict({"sim": {"seed": 42}})
        assert cfg.data["sim"]["seed"] == 42
        assert cfg.data["sim"]["duration"] == 60.0

    def test_unknown_root_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            RunConfig.from_dict({"vehicel": {}})

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(ConfigError, match="mpc"):
            RunConfig.from_dict({"mpc": {"horizon": 10}})

    def test_bad_rate_ratio_rejected(self):
        with pytest.raises(ConfigError, match="Tc/Td"):
            RunConfig.from_dict({"rates": {"Tc": 0.1, "Td": 0.03}})

    def test_bad_mode_rejected(self):
        with pytest.raises(ConfigError, match="scheduling_mode"):
            RunConfig.from_dict({"mpc": {"scheduling_mode": "psychic"}})

    def test_hash_ignores_simulation_sections(self):
        a = RunConfig.from_dict({})
        b = RunConfig.from_dict({"sim": {"seed": 9}, "mpc": {"scheduling_mode": "frozen"}})
        assert a.config_hash() == b.config_hash()

    def test_hash_tracks_synthesis_sections(self):
        a = RunConfig.from_dict({})
        b = RunConfig.from_dict({"synthesis": {"kinematic": {"Q_ts": [2.0, 1.5, 3.0]}}})
        c = RunConfig.from_dict({"vehicle": {"M": 700.0}})
        assert a.config_hash() != b.config_hash()
        assert a.config_hash() != c.config_hash()

    def test_file_roundtrip(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"sim": {"duration": 10.0}}))
        cfg = RunConfig.from_file(p)
        assert cfg.data["sim"]["duration"] == 10.0

    def test_invalid_json_reported(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            RunConfig.from_file(p)

    def test_accessors_materialize(self):
        cfg = RunConfig.from_dict({})
        assert cfg.mpc_config().N == 40
        assert cfg.mhe_config().N == 30
        assert cfg.lqr_config().force_limit == 6000.0
        assert len(cfg.circuit().waypoints) == 4
