"""
Tests for the config module.
"""

import pytest

from gwntf.config import (
    ExperimentConfig,
    get_database_url,
    get_thread_count,
    load_config_file,
    merge_settings,
    parse_modes,
)
from gwntf.exceptions import ConfigError


class TestEnvironment:
    """Test environment-driven settings."""

    def test_thread_count_default(self, monkeypatch):
        monkeypatch.delenv("WNTF_THREADS", raising=False)
        assert get_thread_count() == 1

    def test_thread_count_from_env(self, monkeypatch):
        monkeypatch.setenv("WNTF_THREADS", "4")
        assert get_thread_count() == 4

    @pytest.mark.parametrize("value", ["zero", "0", "-2"])
    def test_thread_count_invalid(self, monkeypatch, value):
        monkeypatch.setenv("WNTF_THREADS", value)
        with pytest.raises(ConfigError):
            get_thread_count()

    def test_database_url(self, monkeypatch):
        monkeypatch.setenv("DATABASE_URL", "postgresql://localhost/gwntf")
        assert get_database_url() == "postgresql://localhost/gwntf"
        monkeypatch.delenv("DATABASE_URL")
        assert get_database_url() == "sqlite:///gwntf_results.db"


class TestParseModes:
    @pytest.mark.parametrize("value,expected", [
        (None, None),
        ("", None),
        ("all", None),
        ("2,0", (0, 2)),
        ("1, 1", (1,)),
        ((3, 1), (1, 3)),
    ])
    def test_valid(self, value, expected):
        assert parse_modes(value) == expected

    @pytest.mark.parametrize("value", ["a,b", "-1"])
    def test_invalid(self, value):
        with pytest.raises(ConfigError):
            parse_modes(value)


class TestExperimentConfig:
    """Test experiment configuration handling."""

    def test_defaults(self):
        config = ExperimentConfig()
        assert config.algo == "gwntf"
        assert (config.rank, config.lam, config.mu, config.p_neighbors) == (10, 100.0, 1e4, 5)
        assert (config.runs, config.max_iters, config.tol) == (10, 200, 1e-5)
        assert config.validate() is config

    def test_from_mapping_flag_names(self):
        config = ExperimentConfig.from_mapping({
            "algo": "gncp",
            "p-neighbors": "7",
            "lambda": "50",
            "wasserstein-modes": "0,1",
            "dump-factors": "true",
            "clusters": "",
            "seed": None,
        })
        assert config.algo == "gncp"
        assert config.p_neighbors == 7
        assert config.lam == 50.0
        assert config.wasserstein_modes == (0, 1)
        assert config.dump_factors is True
        assert config.clusters is None
        assert config.seed == 0

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="Unknown configuration key"):
            ExperimentConfig.from_mapping({"learning-rate": "1"})

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="rank"):
            ExperimentConfig.from_mapping({"rank": "ten"})

    def test_bad_boolean(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping({"no-db": "maybe"})

    @pytest.mark.parametrize("kwargs", [
        {"algo": "pca"},
        {"format": "npy"},
        {"runs": 0},
        {"clusters": 0},
        {"rank": 0},
        {"tol": 0.0},
        {"max_iters": 0},
        {"mu": -1.0},
        {"p_neighbors": 0},
        {"weighting": "cosine"},
        {"sigma": 0.0},
        {"graph_rule": "fast"},
        {"lam": 0.0},
        {"beta": -1.0},
        {"sinkhorn_iters": 0},
    ])
    def test_validate_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kwargs).validate()

    def test_kmeans_skips_factorization_checks(self):
        assert ExperimentConfig(algo="kmeans", rank=0).validate().algo == "kmeans"

    def test_csv_needs_shape(self, tmp_path):
        dataset = tmp_path / "data.csv"
        dataset.write_text("1,2\n")
        with pytest.raises(ConfigError, match="shape"):
            ExperimentConfig(dataset=str(dataset), format="csv").validate()
        (tmp_path / "data.csv.shape").write_text("2\n")
        ExperimentConfig(dataset=str(dataset), format="csv").validate()

    def test_config_hash(self):
        """Output-only settings do not change the hash; hyperparameters do."""
        base = ExperimentConfig(dataset="x.wntf")
        assert len(base.config_hash()) == 64
        assert base.config_hash() == ExperimentConfig(dataset="x.wntf", out="elsewhere", no_db=True).config_hash()
        assert base.config_hash() != ExperimentConfig(dataset="x.wntf", mu=1.0).config_hash()

    def test_to_dict_lists_modes(self):
        assert ExperimentConfig(wasserstein_modes=(0, 2)).to_dict()["wasserstein_modes"] == [0, 2]


class TestConfigFiles:
    """Test key=value configuration files."""

    def test_from_file_with_overrides(self, tmp_path):
        path = tmp_path / "gwntf.conf"
        path.write_text("algo=gnmf\nrank=4\nmu=100\n# comment\np-neighbors=3\n")
        config = ExperimentConfig.from_file(path, overrides={"rank": 6, "mu": None})
        assert config.algo == "gnmf"
        assert config.rank == 6
        assert config.mu == 100.0
        assert config.p_neighbors == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config_file(tmp_path / "missing.conf")

    def test_merge_settings(self):
        merged = merge_settings({"p_neighbors": "3", "rank": "2"}, {"rank": 5, "max_iters": None})
        assert merged == {"p-neighbors": "3", "rank": 5}
