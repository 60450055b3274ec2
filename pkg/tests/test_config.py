"""Configuration document validation and profiles."""

from __future__ import annotations

import pytest

from vesselpose.config import PipelineConfig, PoseSection, profile_config
from vesselpose.errors import ConfigError
from vesselpose.serialize import canonical_json


class TestDefaults:
    def test_stage_defaults(self):
        cfg = PipelineConfig()
        assert cfg.grid.threshold == 128
        assert cfg.grid.min_area == 64 and cfg.grid.max_hole_area == 64
        assert cfg.skeleton.gap_threshold == 10.0
        assert cfg.trajectory.boundary_margin == 5
        assert cfg.trajectory.max_depth == 4096
        assert cfg.trajectory.weights == (0.2, 0.4, 0.4)
        assert cfg.pose.window == 40 and cfg.pose.half_window == 20
        assert cfg.pose.d_allow == 10.0 and cfg.pose.theta_allow == 15.0
        assert cfg.pose.theta_max == 90.0 and cfg.pose.steering_scale == 1.0
        assert cfg.generator.rng == "pcg64" and cfg.generator.noise_sigma == 6.0

    def test_roundtrip(self):
        cfg = PipelineConfig.from_dict({"grid": {"threshold": 99}})
        assert cfg.grid.threshold == 99
        assert PipelineConfig.from_dict(cfg.to_dict()) == cfg

    def test_canonical_rendering_is_stable(self):
        a = canonical_json(PipelineConfig().to_dict())
        b = canonical_json(PipelineConfig.from_dict({}).to_dict())
        assert a == b


class TestValidation:
    @pytest.mark.parametrize(
        "data",
        [
            {"bogus": {}},
            {"grid": {"threshold": 128, "bogus": 1}},
            {"grid": {"threshold": 256}},
            {"grid": {"min_area": -1}},
            {"skeleton": {"gap_threshold": -0.5}},
            {"trajectory": {"max_depth": 0}},
            {"trajectory": {"weights": [0.2, 0.4]}},
            {"trajectory": {"weights": [0.2, 0.4, "inf"]}},
            {"pose": {"window": 1}},
            {"pose": {"d_allow": 0.0}},
            {"pose": {"theta_allow": -3.0}},
            {"generator": {"rng": "mt19937"}},
            {"generator": {"noise_sigma": -1.0}},
        ],
    )
    def test_rejected_documents(self, data):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict(data)

    def test_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(canonical_json({"pose": {"window": 24}}))
        assert PipelineConfig.from_file(path).pose.window == 24
        with pytest.raises(ConfigError):
            PipelineConfig.from_file(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            PipelineConfig.from_file(bad)


class TestProfiles:
    def test_default_profile(self):
        assert profile_config() == PipelineConfig()
        assert profile_config("default") == PipelineConfig()

    def test_small_profile_overrides_pose(self):
        cfg = profile_config("small")
        assert cfg.pose == PoseSection(window=24, half_window=12, d_allow=6.0)
        assert cfg.grid == PipelineConfig().grid

    def test_unknown_profile(self):
        with pytest.raises(ConfigError):
            profile_config("tiny")
