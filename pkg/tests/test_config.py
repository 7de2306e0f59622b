import os

import pytest

from pivot import adversary, nn
from pivot.config import Config
from pivot.errors import ConfigurationError


def test_defaults():
    cfg = Config()
    tc = cfg.train_config()
    assert (tc.lam, tc.minibatch_size, tc.adversary_steps, tc.iterations) == \
        (50.0, 128, 500, 200)
    assert tc.adversary_kind == adversary.mixture(5)
    assert cfg.classifier_architecture == ((20, 20), (nn.TANH, nn.RELU))
    assert cfg["conditional_on_y"] is None


def test_text_round_trip():
    cfg = Config(lam=0.1, conditional_on_y=0, classifier_layers="64,64,64",
                 classifier_activations="tanh,relu,relu",
                 adversary_kind="categorical:2", s_total=100.0)
    again = Config()
    again.parse_text(cfg.to_text())
    assert again == cfg
    assert Config.from_dict(cfg.as_dict()) == cfg


def test_file_round_trip(tmp_path):
    cfg = Config(classifier_lr=3e-4, nominal_z=0.0, run_dir="~/pivot-runs")
    cfg.write(tmp_path / "config.txt")
    assert Config(tmp_path / "config.txt") == cfg


def test_file_merges_over_defaults(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text("# lambda scan\n\niterations = 7\nlam = 10  # moderate\n")
    cfg = Config(path)
    assert cfg["iterations"] == 7
    assert cfg["lam"] == 10.0
    assert cfg["minibatch_size"] == 128


def test_flags_override_the_file(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text("iterations = 7\nseed = 3\n")
    cfg = Config(path, iterations=9, seed=None)
    assert cfg["iterations"] == 9
    assert cfg["seed"] == 3


def test_unknown_key_names_key_and_line(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text("lam = 1\n\nlamda = 2\n")
    with pytest.raises(ConfigurationError) as e:
        Config(path)
    assert "lamda" in str(e.value)
    assert "line 3" in str(e.value)


def test_bad_values():
    with pytest.raises(ConfigurationError):
        Config().parse_text("iterations = many\n")
    with pytest.raises(ConfigurationError):
        Config().parse_text("just some words\n")
    with pytest.raises(ConfigurationError):
        Config(adversary_kind="gaussian:2").train_config()
    with pytest.raises(ConfigurationError):
        Config(lam=-1.0).train_config()
    with pytest.raises(ConfigurationError):
        Config()["no_such_key"] = 1


def test_run_dir_resolution(monkeypatch):
    monkeypatch.delenv("PIVOT_RUN_DIR", raising=False)
    assert Config().run_dir == "runs"
    monkeypatch.setenv("PIVOT_RUN_DIR", "/tmp/pivot")
    assert Config().run_dir == "/tmp/pivot"
    cfg = Config(run_dir="~/elsewhere")
    assert cfg.run_dir == os.path.expanduser("~/elsewhere")
