import pytest
import yaml

from src.config import (AbmConfig, ConfigError, RetrievalConfig, SimConfig, config_from_dict, dump_config,
                        load_config)


def test_defaults_validate():
    config = SimConfig().validate()
    assert config.top_k_core == 100
    assert config.entropy_bins == 10
    assert config.gom.lambdas == (0.5, 0.5, 0.5)
    assert config.gom.knn == 10
    assert config.gmp.profile_dim == 768
    assert config.training.alpha == 0.9
    assert config.abm.model == "lorenz"
    assert config.providers.kind == "stub"


def test_mu_from_default_lambdas():
    assert RetrievalConfig().mu == 0.5


def test_with_mu_keeps_lambda_sum():
    config = RetrievalConfig().with_mu(0.25)
    assert config.mu == pytest.approx(0.25)
    assert config.lambda1 + config.lambda2 == pytest.approx(1.0, abs=1e-12)
    assert config.lambda3 == 0.5
    config.validate()


@pytest.mark.parametrize("mu", [0.0, -1.0, 10.0])
def test_with_mu_rejects_out_of_range(mu):
    with pytest.raises(ConfigError):
        RetrievalConfig().with_mu(mu)


@pytest.mark.parametrize("section, values", [
    ("gom", {"lambda1": 0.3, "lambda2": 0.5}),
    ("gom", {"nu": 0.5}),
    ("gmp", {"depth": 0}),
    ("training", {"train_window": 1}),
    ("abm", {"model": "voter"}),
    ("providers", {"kind": "remote"}),
])
def test_invalid_sections_raise(section, values):
    with pytest.raises(ConfigError):
        config_from_dict({section: values})


@pytest.mark.parametrize("values", [
    {"top_k_core": 0},
    {"n_agents": 10, "top_k_core": 11},
    {"entropy_bins": 1},
    {"grouping": "random"},
    {"news_schedule": [{"step": 0, "text": "too early"}]},
])
def test_invalid_top_level_raises(values):
    with pytest.raises(ConfigError):
        config_from_dict(values)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"n_agent": 10})
    with pytest.raises(ConfigError):
        config_from_dict({"gom": {"kappa": 1}})


def test_load_config_with_overrides(tmp_path):
    path = tmp_path / "sim.yaml"
    path.write_text(yaml.safe_dump({
        "n_agents": 50,
        "top_k_core": 5,
        "news_schedule": [{"step": 3, "text": "breaking"}, [2, "earlier"]],
        "gom": {"knn": 4}
    }))

    config = load_config(str(path), {"gom.top_r": 2, "seed": 9, "t_max": None})
    assert config.n_agents == 50
    assert config.gom.knn == 4
    assert config.gom.top_r == 2
    assert config.seed == 9
    assert config.t_max == 30
    assert config.news_schedule == ((2, "earlier"), (3, "breaking"))
    assert config.news_at(3) == ["breaking"]
    assert config.news_at(4) == []


def test_load_config_missing_file():
    with pytest.raises(ConfigError):
        load_config("does/not/exist.yaml")


def test_dump_and_reload(tmp_path):
    config = config_from_dict({"n_agents": 20, "top_k_core": 3, "abm": {"model": "hk"},
                               "news_schedule": [{"step": 1, "text": "hello"}]})
    path = tmp_path / "dumped.yaml"
    dump_config(config, str(path))
    assert load_config(str(path)) == config


def test_abm_thresholds_ordered():
    with pytest.raises(ConfigError):
        AbmConfig(assimilation_threshold=1.5, contrast_threshold=1.0).validate()
