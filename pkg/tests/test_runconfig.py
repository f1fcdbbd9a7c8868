import json

import pytest

from deepck.runconfig import (
    RUN_DIR_ENV,
    ConfigError,
    RunConfig,
    parse_config_file,
    prepare_run_dir,
    resolve_run_root,
    write_manifest,
)


class TestParseConfigFile:
    def test_basic_keys(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# scoring setup\nbackend = uniform\nk = 3\n\nseed=7\n")
        assert parse_config_file(path) == {"backend": "uniform", "k": "3", "seed": "7"}

    def test_values_may_contain_equals(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("note = a=b\n")
        assert parse_config_file(path) == {"note": "a=b"}

    def test_missing_equals_is_an_error(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("backend uniform\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_duplicate_key_is_an_error(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("k = 1\nk = 2\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_missing_file_is_a_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config_file(tmp_path / "absent.cfg")


class TestRunConfig:
    def test_flags_override_file_values(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("k = 3\nseed = 0\n")
        cfg = RunConfig.load("train", ["k", "seed"], config_file=path,
                             overrides={"k": "5", "seed": None})
        assert cfg.get_int("k") == 5
        assert cfg.get_int("seed") == 0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("depth = 3\n")
        with pytest.raises(ConfigError) as err:
            RunConfig.load("train", ["k"], config_file=path)
        assert "depth" in str(err.value)

    def test_typed_getters(self):
        cfg = RunConfig("x", {"k": "3", "lr": "0.5", "plot": "yes", "mode": "avg"})
        assert cfg.get_int("k") == 3
        assert cfg.get_float("lr") == 0.5
        assert cfg.get_bool("plot") is True
        assert cfg.get_choice("mode", ["avg", "max"]) == "avg"

    def test_getter_defaults(self):
        cfg = RunConfig("x", {"empty": ""})
        assert cfg.get("missing", "fallback") == "fallback"
        assert cfg.get("empty", "fallback") == "fallback"
        assert cfg.get_int("missing", 9) == 9
        assert cfg.get_bool("missing", True) is True

    def test_bad_values_raise_config_error(self):
        cfg = RunConfig("x", {"k": "three", "plot": "maybe", "mode": "median"})
        with pytest.raises(ConfigError):
            cfg.get_int("k")
        with pytest.raises(ConfigError):
            cfg.get_bool("plot")
        with pytest.raises(ConfigError):
            cfg.get_choice("mode", ["avg", "max"])

    def test_require(self):
        cfg = RunConfig("score-depth", {})
        with pytest.raises(ConfigError) as err:
            cfg.require("triples_file")
        assert "triples_file" in str(err.value)


class TestRunDirs:
    def test_flag_beats_env_beats_default(self, tmp_path, monkeypatch):
        monkeypatch.delenv(RUN_DIR_ENV, raising=False)
        assert resolve_run_root(str(tmp_path)) == tmp_path
        monkeypatch.setenv(RUN_DIR_ENV, str(tmp_path / "env"))
        assert resolve_run_root(None) == tmp_path / "env"
        assert resolve_run_root(str(tmp_path / "flag")) == tmp_path / "flag"
        monkeypatch.delenv(RUN_DIR_ENV)
        assert str(resolve_run_root(None)) == "runs"

    def test_numbering_advances(self, tmp_path):
        first = prepare_run_dir(tmp_path, "score-depth")
        second = prepare_run_dir(tmp_path, "score-depth")
        assert first == tmp_path / "score-depth" / "run-0001"
        assert second == tmp_path / "score-depth" / "run-0002"
        assert first.is_dir() and second.is_dir()

    def test_commands_number_independently(self, tmp_path):
        prepare_run_dir(tmp_path, "train")
        other = prepare_run_dir(tmp_path, "predict")
        assert other.name == "run-0001"

    def test_manifest_contents_are_stable(self, tmp_path):
        cfg = RunConfig("train", {"seed": "0", "k": "3"})
        run_dir = prepare_run_dir(tmp_path, "train")
        write_manifest(run_dir, cfg)
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest == {"command": "train", "config": {"k": "3", "seed": "0"}}
        text = (run_dir / "manifest.json").read_text()
        write_manifest(run_dir, cfg)
        assert (run_dir / "manifest.json").read_text() == text
