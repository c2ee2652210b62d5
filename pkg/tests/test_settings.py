"""Tests for holocodec.settings: run configuration files and overrides."""
from __future__ import annotations

import json

import pytest

from holocodec.config import DESK_FRAME, DESK_ROI, WAVELENGTHS
from holocodec.errors import InvalidConfigError
from holocodec.settings import DEFAULTS, RunConfig


class TestDefaults:
    def test_desk_scale(self):
        cfg = RunConfig()
        assert cfg.frame == DESK_FRAME
        assert cfg.optics().roi == DESK_ROI
        assert cfg.optics().wavelength == WAVELENGTHS[1]
        assert cfg.weights().msssim_levels == 3
        assert cfg.seed is None

    def test_defaults_not_shared(self):
        cfg = RunConfig()
        cfg.values["optics"]["frame"] = [8, 8]
        assert DEFAULTS["optics"]["frame"] == list(DESK_FRAME)

    def test_channel_wavelength(self):
        cfg = RunConfig.from_dict({"optics": {"channel": 2}})
        assert cfg.optics().wavelength == WAVELENGTHS[2]
        assert cfg.optics(channel=0).wavelength == WAVELENGTHS[0]


class TestLoad:
    def test_from_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({
            "optics": {"roi": None, "frame": [32, 64]},
            "profile": {"codebook_sizes": [16, 16], "latent_dim": 4},
            "schedule": {"stage1_epochs": 3},
            "seed": 5,
        }))
        cfg = RunConfig.load(path)
        assert cfg.optics().roi is None
        assert cfg.profile().codebook_sizes == (16, 16)
        assert cfg.profile().latent_dim == 4
        assert cfg.schedule().stage1_epochs == 3
        assert cfg.schedule().seed == 5
        assert cfg.retrieval().seed == 5

    def test_no_path_gives_defaults(self):
        assert RunConfig.load(None).to_dict() == DEFAULTS

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidConfigError):
            RunConfig.load(tmp_path / "absent.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(InvalidConfigError):
            RunConfig.load(path)

    @pytest.mark.parametrize("data", [
        [],
        {"unknown": {}},
        {"optics": {"colour": 1}},
        {"optics": 3},
        {"optics": {"frame": [0, 8]}},
        {"optics": {"channel": 7}},
        {"optics": {"initializer": "magic"}},
        {"schedule": {"batch_size": 0}},
        {"profile": {"name": "medium"}},
        {"seed": -1},
        {"seed": True},
    ])
    def test_invalid(self, data):
        with pytest.raises(InvalidConfigError):
            RunConfig.from_dict(data)


class TestOverride:
    def test_none_keeps_file_value(self):
        cfg = RunConfig.from_dict({"schedule": {"stage1_epochs": 7}})
        cfg.override("schedule", stage1_epochs=None, batch_size=2)
        assert cfg.schedule().stage1_epochs == 7
        assert cfg.schedule().batch_size == 2

    def test_seed(self):
        cfg = RunConfig().override("seed", seed=9)
        assert cfg.seed == 9
        assert RunConfig().override("seed", seed=None).seed is None

    def test_invalid_override(self):
        with pytest.raises(InvalidConfigError):
            RunConfig().override("loss", msssim_levels=9)
