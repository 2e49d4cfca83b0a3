from pathlib import Path

import pytest

from pkdmamba.config import (
    DatasetConfig,
    DevelopmentSettings,
    ProductionSettings,
    RunConfig,
    config_by_name,
    config_hash,
    get_settings,
    load_config,
    load_splits,
)
from pkdmamba.errors import ConfigError
from pkdmamba.extensions import worker_count
from pkdmamba.models import SYNTHETIC_LADDER, SYNTHETIC_TEACHER

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TINY_TOML = """
seed = 3

[dataset]
name = "synthetic"
n_per_class = 10
n_classes = 2
image_size = 4

[model]
patch_size = 2
conv_width = 2

[teacher]
n_blocks = 2
state_dim = 4

[[ladder]]
n_blocks = 1
state_dim = 2

[[ladder]]
n_blocks = 1
state_dim = 4
"""


def _write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


@pytest.mark.parametrize("name", sorted(config_by_name))
def test_presets_are_valid(name):
    cfg = config_by_name[name]()
    assert isinstance(cfg, RunConfig)
    assert [c.name for c in cfg.ladder] == [f"student-{i}" for i in range(1, len(cfg.ladder) + 1)]
    assert cfg.teacher.name == "teacher"


@pytest.mark.parametrize("name", ["synthetic", "mnist", "mnist-desk"])
def test_shipped_toml_files_match_their_presets(name):
    from_file = load_config(CONFIGS / f"{name}.toml")
    assert config_hash(from_file) == config_hash(config_by_name[name]())
    assert from_file.ladder == config_by_name[name]().ladder


def test_toml_fills_model_dims_from_the_dataset(tmp_path):
    cfg = load_config(_write(tmp_path, TINY_TOML))
    assert cfg.seed == 3
    assert cfg.teacher.height == 4 and cfg.teacher.n_classes == 2
    assert [c.name for c in cfg.ladder] == ["student-1", "student-2"]
    assert cfg.ladder[0].patch_size == 2


def test_overrides_and_hash(tmp_path):
    path = _write(tmp_path, TINY_TOML)
    base = load_config(path)
    moved = load_config(path, out_dir=tmp_path / "elsewhere")
    reseeded = load_config(path, seed=4)
    assert moved.out_dir == str(tmp_path / "elsewhere")
    assert config_hash(moved) == config_hash(base)
    assert config_hash(reseeded) != config_hash(base)
    with pytest.raises(ConfigError, match="seed"):
        load_config(path, seed=-1)


@pytest.mark.parametrize("extra, message", [
    ("[hyper]\nalpha = 2.0\n", "hyper.alpha"),
    ("[train]\nlr_decay = 0.0\n", "train.lr_decay"),
    ("[hyper]\nbogus = 1\n", "hyper.bogus"),
    ("[dataset.extra]\n", "dataset.extra"),
    ("colour = 1\n", "colour"),
])
def test_bad_fields_are_reported_with_their_path(tmp_path, extra, message):
    text = TINY_TOML
    if not extra.startswith("["):
        text = extra + text
    else:
        text = text + extra
    with pytest.raises(ConfigError, match=message.replace(".", r"\.")):
        load_config(_write(tmp_path, text))


def test_bad_rung_is_reported_by_index(tmp_path):
    text = TINY_TOML + "\n[[ladder]]\nn_blocks = 1\nstate_dim = 0\n"
    with pytest.raises(ConfigError, match=r"ladder\[2\]\.state_dim"):
        load_config(_write(tmp_path, text))


def test_ladder_must_increase_in_cost(tmp_path):
    text = TINY_TOML + "\n[[ladder]]\nn_blocks = 1\nstate_dim = 2\n"
    with pytest.raises(ConfigError, match=r"ladder\[2\]: FLOPs"):
        load_config(_write(tmp_path, text))


def test_model_must_fit_the_dataset(tmp_path):
    text = TINY_TOML.replace("[teacher]\n", "[teacher]\nheight = 8\nwidth = 8\n")
    with pytest.raises(ConfigError, match="teacher"):
        load_config(_write(tmp_path, text))


def test_missing_sections_and_unreadable_files(tmp_path):
    with pytest.raises(ConfigError, match="ladder"):
        load_config(_write(tmp_path, "[teacher]\nn_blocks = 1\nstate_dim = 2\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "seed = [", "broken.toml"))
    with pytest.raises(ConfigError, match="unknown preset"):
        load_config("not-a-preset")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_run_config_rejects_an_empty_ladder():
    with pytest.raises(ConfigError, match="ladder"):
        RunConfig(dataset=DatasetConfig(), teacher=SYNTHETIC_TEACHER, ladder=())
    cfg = RunConfig(dataset=DatasetConfig(), teacher=SYNTHETIC_TEACHER, ladder=list(SYNTHETIC_LADDER))
    assert isinstance(cfg.ladder, tuple)


def test_synthetic_splits():
    cfg = load_config("synthetic")
    train, test = load_splits(cfg.dataset, cfg.seed)
    assert (len(train), len(test)) == (200, 100)
    again, _ = load_splits(cfg.dataset, cfg.seed)
    assert (train.labels == again.labels).all()


def test_subset_is_drawn_before_the_split():
    dataset = DatasetConfig(name="synthetic", n_per_class=50, n_classes=2, image_size=4, subset=40, train_fraction=0.5)
    train, test = load_splits(dataset, seed=1)
    assert (len(train), len(test)) == (20, 20)


def test_real_dataset_without_files(tmp_path, monkeypatch):
    monkeypatch.setenv("PKD_DATA_DIR", str(tmp_path))
    with pytest.raises(FileNotFoundError):
        load_splits(DatasetConfig(name="mnist"), seed=0)


def test_settings_follow_the_environment(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("PKD_ENV", "production")
    monkeypatch.delenv("PKD_LOG_LEVEL", raising=False)
    monkeypatch.setenv("PKD_WORKERS", "3")
    settings = get_settings()
    assert isinstance(settings, ProductionSettings)
    assert settings.WORKERS == 3 and settings.LOG_LEVEL == "WARNING"
    monkeypatch.setenv("PKD_ENV", "development")
    assert isinstance(get_settings(), DevelopmentSettings)
    assert get_settings().LOG_LEVEL == "INFO"
    monkeypatch.setenv("PKD_OUTPUT_DIR", str(tmp_path))
    assert get_settings().OUTPUT_DIR == str(tmp_path)


def test_settings_defaults_are_class_attributes(monkeypatch):
    for key in ("PKD_ENV", "PKD_WORKERS", "PKD_LOG_LEVEL", "PKD_OUTPUT_DIR"):
        monkeypatch.delenv(key, raising=False)
    assert ProductionSettings.LOG_LEVEL == "WARNING" and DevelopmentSettings.LOG_LEVEL == "INFO"
    assert get_settings().OUTPUT_DIR == DevelopmentSettings.OUTPUT_DIR == "runs"
    monkeypatch.setattr(DevelopmentSettings, "WORKERS", 2)
    assert worker_count() == 2


def test_bad_settings(monkeypatch):
    monkeypatch.setenv("PKD_ENV", "staging")
    with pytest.raises(ConfigError, match="PKD_ENV"):
        get_settings()
    monkeypatch.setenv("PKD_ENV", "development")
    monkeypatch.setenv("PKD_WORKERS", "many")
    with pytest.raises(ConfigError, match="PKD_WORKERS"):
        get_settings()
