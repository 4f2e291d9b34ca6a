import json

from src.core.config_manager import DEFAULT_CONFIG, ConfigManager


def test_missing_file_gives_defaults_without_creating_it(tmp_path):
    path = tmp_path / "config.json"
    manager = ConfigManager(str(path))
    assert manager.get_config() == DEFAULT_CONFIG
    assert manager.get_config() is not DEFAULT_CONFIG
    assert not path.exists()


def test_missing_keys_are_filled_from_defaults(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"bench": {"repeats": 9}, "mixer": "oops"}), encoding="utf-8")
    manager = ConfigManager(str(path))
    bench = manager.get_section("bench")
    assert bench["repeats"] == 9
    assert bench["threshold_ms"] == 185.19
    assert manager.get_section("mixer") == DEFAULT_CONFIG["mixer"]
    assert manager.get_section("separator")["overlap_s"] == 0.25


def test_parse_error_falls_back_to_defaults(tmp_path, caplog):
    path = tmp_path / "config.json"
    path.write_text("{not json", encoding="utf-8")
    manager = ConfigManager(str(path))
    assert manager.get_config() == DEFAULT_CONFIG
    assert "Error loading config" in caplog.text


def test_unknown_section_is_empty(tmp_path):
    assert ConfigManager(str(tmp_path / "c.json")).get_section("nope") == {}


def test_repository_config_matches_defaults():
    assert ConfigManager().get_config() == DEFAULT_CONFIG
