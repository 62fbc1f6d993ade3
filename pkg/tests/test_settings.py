import json

import pytest

from volume_intervals.errors import ConfigError
from volume_intervals.settings import RunConfig, load_run_config, read_key_values, run_config_from_dict


def write_settings(tmp_path, data):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_defaults_follow_published_choices():
    config = RunConfig()
    assert config.q_list == (2.0, 3.0, 4.0, 5.0)
    assert config.n_boot == 1000


def test_load_settings_resolves_paths(tmp_path):
    config = load_run_config(write_settings(tmp_path, {
        "inputs": [{"path": "a.csv", "instrument": "A"}, "data/b.csv"],
        "ingest_config": "ingest.cfg", "q_list": [2, 3], "Q_grid": [0, 1.5], "seed": 5, "threads": 2,
    }))
    assert [item.instrument for item in config.inputs] == ["A", "b"]
    assert config.inputs[0].path == str(tmp_path / "a.csv")
    assert config.ingest_config == str(tmp_path / "ingest.cfg")
    assert config.q_list == (2.0, 3.0)
    assert config.q_grid == (0.0, 1.5)
    assert config.threads == 2


@pytest.mark.parametrize("data", [
    {"q_list": []}, {"q_list": [0, 2]}, {"n_boot": 0}, {"seed": -1}, {"colour": "blue"},
    {"n_boot": "many"}, {"mean_conditional_binning": "cubic"}, {"correlation_method": "kendall"},
    {"dfa_scales": [2, 16]}, {"dfa_scales": [16, 16]}, {"dfa_order": 3, "dfa_scales": [4, 64]},
    {"inputs": [{"path": "a.csv", "instrument": "X"}, {"path": "b.csv", "instrument": "X"}]},
])
def test_invalid_settings(data):
    with pytest.raises(ConfigError) as info:
        run_config_from_dict(data)
    assert info.value.exit_code == 1


def test_missing_or_broken_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(broken)


def test_config_hash_ignores_threads_and_output():
    a = RunConfig(threads=1, out_dir="x")
    b = RunConfig(threads=8, out_dir="y")
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != RunConfig(seed=1).config_hash()


def test_overrides_skip_none():
    config = RunConfig(seed=3)
    assert config.with_overrides(seed=None) is config
    assert config.with_overrides(seed=4, n_boot=None).seed == 4


def test_key_values(tmp_path):
    path = tmp_path / "x.cfg"
    path.write_text("# comment\n\nSession = 09:30-11:30\nsession=13:00-15:00\nstrict = true\n", encoding="utf-8")
    assert read_key_values(path) == [("session", "09:30-11:30"), ("session", "13:00-15:00"), ("strict", "true")]
    path.write_text("no separator\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_key_values(path)
