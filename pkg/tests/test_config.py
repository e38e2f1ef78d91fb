"""Run configurations and numerical settings"""

import pytest

from tileheat.config import ConfigError, RunConfig, TilingConfig
from tileheat.global_helpers import apply_overrides, setting, threads


def test_defaults():
    config = RunConfig()
    assert config.command == "report"
    assert config.tiling == TilingConfig()
    assert config.report_times() == (0.01, 0.1, 1.0, 5.0, 20.0)
    assert config.report_gauss_times() == (0.5, 1.0, 2.0)
    assert config.report_dilations() == (1.0, 2.0, 3.0)
    assert config.report_n_functions() == 20


def test_from_mapping():
    config = RunConfig.from_mapping(
        {
            "command": "nash",
            "tiling": {"kind": "hexagonal", "side": 2, "window": [0, 0, 20, 10]},
            "times": 0.5,
            "sources": "vertex:3",
            "seed": 7,
            "tolerances": {"checks.ultra_allowance": 0.1},
        }
    )
    assert config.tiling == TilingConfig("hexagonal", 2.0, "0,0,20,10")
    assert config.times == (0.5,)
    assert config.sources == ("vertex:3",)
    assert config.report_times() == (0.5,)
    assert config.tolerances == {"checks.ultra_allowance": 0.1}


@pytest.mark.parametrize(
    "mapping, path",
    [
        ({"tiling": {"side": -1}}, "tiling.side"),
        ({"tiling": {"side": "wide"}}, "tiling.side"),
        ({"tiling": {"kind": "penrose"}}, "tiling.kind"),
        ({"tiling": {"window": "1,2,3"}}, "tiling.window"),
        ({"tiling": {"colour": "red"}}, "tiling.colour"),
        ({"tiling": 3}, "tiling"),
        ({"mesh": 0.1}, "mesh"),
        ({"mesh_size": 0}, "mesh_size"),
        ({"scheme": "euler"}, "scheme"),
        ({"truncation": "periodic"}, "truncation"),
        ({"seed": -1}, "seed"),
        ({"seed": True}, "seed"),
        ({"n_functions": 0}, "n_functions"),
        ({"times": [1.0, -2.0]}, "times"),
        ({"gauss_times": ["soon"]}, "gauss_times"),
        ({"robin_b": -0.5}, "robin_b"),
        ({"command": "plot"}, "command"),
        ({"tolerances": {"checks.nothing": 1}}, "tolerances.checks.nothing"),
        ({"tolerances": [1, 2]}, "tolerances"),
    ],
)
def test_invalid_fields_are_named(mapping, path):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_mapping(mapping)
    assert info.value.path == path
    assert str(info.value).startswith(path + ":")


def test_root_must_be_a_mapping():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_mapping([1, 2])
    assert info.value.path == "<root>"


def test_tiling_path_skips_generator_checks():
    config = RunConfig.from_mapping({"tiling": {"path": "tiles.json", "kind": "penrose"}})
    assert config.tiling.path == "tiles.json"


def test_merged():
    config = RunConfig().merged(
        {"command": "heat", "tiling.side": 0.5, "seed": None, "times": [2.0], "sources": ["vertex:0"]}
    )
    assert config.command == "heat"
    assert config.tiling.side == 0.5
    assert config.tiling.kind == "square"
    assert config.seed == 0
    assert config.times == (2.0,)
    with pytest.raises(ConfigError):
        config.merged({"tiling.side": 0.0})


def test_to_dict_reproduces_the_configuration():
    config = RunConfig.from_mapping({"tiling": {"window": "8"}, "dilations": [1, 4]})
    assert RunConfig.from_mapping(config.to_dict()) == config


def test_from_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("command: gauss\ntiling:\n  kind: triangular\n  window: 12\ngauss_times: [0.5]\n")
    config = RunConfig.from_yaml(str(path))
    assert config.command == "gauss"
    assert config.tiling.window == "12"
    assert config.gauss_times == (0.5,)
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert RunConfig.from_yaml(str(empty)) == RunConfig()


def test_settings_and_overrides():
    assert setting("nash.alpha1") == pytest.approx(0.171)
    assert setting("semigroup.krylov.dimension") == 40
    with pytest.raises(KeyError):
        setting("nash.alpha3")
    try:
        apply_overrides({"nash.beta1": 7.0})
        assert setting("nash.beta1") == 7.0
        with pytest.raises(KeyError):
            apply_overrides({"nash.gamma": 1.0})
    finally:
        apply_overrides({})
    assert setting("nash.beta1") == 6.0


def test_setting_returns_copies():
    times = setting("report.times")
    times.append(100.0)
    assert setting("report.times") == [0.01, 0.1, 1.0, 5.0, 20.0]


def test_threads(monkeypatch):
    monkeypatch.setenv("TILEHEAT_THREADS", "4")
    assert threads() == 4
    monkeypatch.setenv("TILEHEAT_THREADS", "many")
    assert threads() == 1
    monkeypatch.delenv("TILEHEAT_THREADS")
    assert threads() == 1
