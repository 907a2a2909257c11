from __future__ import annotations

import json
from pathlib import Path

import pytest

from ownet_core.config import (
    ALL_STAGES,
    ConfigError,
    RunConfig,
    load_config,
    parse_config_text,
    write_config,
)
from ownet_core.paths import OutputPaths, manifest_artifacts, staged_outputs


def test_parse_typed_values():
    values = parse_config_text(
        "# run settings\n"
        "model = rm\n"
        "theta=0.9\n"
        "top=10\n"
        "split-tt=yes\n"
        "xmin=\n"
        "stages=validate, control\n"
        "edges=data/edges.csv\n"
    )
    assert values == {
        "model": "rm",
        "theta": 0.9,
        "top": 10,
        "split_tt": True,
        "xmin": None,
        "stages": ["validate", "control"],
        "edges": Path("data/edges.csv"),
    }


@pytest.mark.parametrize(
    "text",
    ["model", "colour=blue", "top=1\ntop=2", "top=ten", "relaxed=maybe"],
)
def test_parse_rejects(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize(
    "changes",
    [
        {"model": "xm"},
        {"method": "fast"},
        {"key": "weight"},
        {"threshold": 1.0},
        {"theta": 0.0},
        {"top": 0},
        {"xmin": -1.0},
        {"tolerance": 0.0},
        {"precision": "3"},
        {"stages": ["validate", "render"]},
    ],
)
def test_check_rejects(changes):
    with pytest.raises(ConfigError):
        RunConfig(**changes).check()


def test_defaults_are_valid():
    config = RunConfig().check()
    assert config.model == "tm"
    assert config.method == "staged"
    assert config.stages == list(ALL_STAGES)


def test_overrides_skip_none():
    config = RunConfig(top=5).with_overrides({"top": None, "model": "lm"})
    assert (config.top, config.model) == (5, "lm")


def test_written_config_loads_back(tmp_path):
    config = RunConfig(
        edges=Path("in/edges.csv"),
        model="rm",
        theta=0.75,
        relaxed=True,
        stages=["validate", "control"],
    )
    path = tmp_path / "run.cfg"
    write_config(path, config)
    assert "relaxed=true" in path.read_text(encoding="utf-8").splitlines()
    assert load_config(path) == config


def test_missing_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_staged_outputs_publish_on_success(tmp_path):
    target = OutputPaths(tmp_path / "out")
    with staged_outputs(target) as scratch:
        scratch.control_file.write_text("id\n", encoding="utf-8")
        assert not target.control_file.exists()
    assert target.control_file.read_text(encoding="utf-8") == "id\n"
    assert [path.name for path in tmp_path.iterdir()] == ["out"]


def test_staged_outputs_discard_on_error(tmp_path):
    target = OutputPaths(tmp_path / "out")
    with pytest.raises(RuntimeError):
        with staged_outputs(target) as scratch:
            scratch.control_file.write_text("id\n", encoding="utf-8")
            raise RuntimeError("solver failed")
    assert not target.base_dir.exists()
    assert list(tmp_path.iterdir()) == []


def _publish(target, files):
    with staged_outputs(target) as scratch:
        for name, text in files.items():
            (scratch.base_dir / name).write_text(text, encoding="utf-8")


def test_staged_outputs_remove_artifacts_the_new_manifest_drops(tmp_path):
    target = OutputPaths(tmp_path / "out")
    target.ensure()
    (target.base_dir / "notes.txt").write_text("keep", encoding="utf-8")
    _publish(
        target,
        {
            "control.csv": "id\n",
            "ranking.csv": "rank\n",
            "manifest.json": json.dumps({"artifacts": {"control.csv": "x", "ranking.csv": "y"}}),
        },
    )
    _publish(
        target,
        {"control.csv": "id\n", "manifest.json": json.dumps({"artifacts": {"control.csv": "x"}})},
    )
    assert sorted(path.name for path in target.base_dir.iterdir()) == [
        "control.csv",
        "manifest.json",
        "notes.txt",
    ]
    assert manifest_artifacts(target) == ["control.csv"]


def test_staged_outputs_without_manifest_keep_existing_files(tmp_path):
    target = OutputPaths(tmp_path / "out")
    _publish(
        target,
        {"control.csv": "id\n", "manifest.json": json.dumps({"artifacts": {"control.csv": "x"}})},
    )
    _publish(target, {"nodes.csv": "id\n"})
    assert sorted(path.name for path in target.base_dir.iterdir()) == [
        "control.csv",
        "manifest.json",
        "nodes.csv",
    ]
