import json

import pytest

from smibpss.config import Config, ConfigError, load_config, parse_config
from smibpss.controllers import BsflGains
from smibpss.engine import ControllerKind, EventKind


@pytest.fixture
def raw(config_path):
    return json.loads(config_path.read_text())


def test_bundled_config_loads(config_path):
    cfg = load_config(config_path)
    assert cfg.machine.xd == 1.7 and cfg.machine.tdop == 5.9
    assert cfg.operating_point.q0 == 0.496
    assert cfg.controllers.bsfl == BsflGains(5, 10, 15)
    assert cfg.controllers.dfl.k1 == 1100
    assert cfg.controllers.cpss.kstab == 17.57
    assert cfg.fault_events() == (0.6, 0.78)


def test_round_trip(raw):
    cfg = parse_config(raw)
    again = parse_config(json.loads(cfg.to_json()))
    assert again == cfg
    assert again.to_dict() == raw


def test_defaults_made_explicit():
    cfg = parse_config({"machine": {"xe": 0.3}})
    d = cfg.to_dict()
    assert d["machine"]["xd"] == 1.7 and d["machine"]["xe"] == 0.3
    assert d["controllers"]["cpss"] is None
    assert parse_config(d) == cfg


def test_digest_tracks_content(raw):
    a = parse_config(raw).digest()
    raw["machine"]["d"] = 0.5
    assert parse_config(raw).digest() != a


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda r: r["machine"].__setitem__("xdd", 1.0), "machine.xdd"),
        (lambda r: r.__setitem__("extra", {}), "extra"),
        (lambda r: r["controllers"]["bsfl"].__setitem__("l4", 1.0), "controllers.bsfl.l4"),
        (lambda r: r["scenario"]["events"][0].__setitem__("when", 1.0), "scenario.events[0].when"),
    ],
)
def test_unknown_keys_rejected(raw, mutate, path):
    mutate(raw)
    with pytest.raises(ConfigError, match="unknown key") as exc:
        parse_config(raw)
    assert exc.value.path == path


def test_type_errors_name_the_field(raw):
    raw["machine"]["m"] = "6.6"
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert exc.value.path == "machine.m"
    raw["machine"]["m"] = True
    with pytest.raises(ConfigError, match="boolean"):
        parse_config(raw)


def test_invariants_rechecked(raw):
    raw["machine"]["xdp"] = 2.0
    with pytest.raises(ConfigError, match="xd > xdp") as exc:
        parse_config(raw)
    assert exc.value.path == "machine"


def test_bad_event_kind(raw):
    raw["scenario"]["events"][1]["kind"] = "trip_line"
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert exc.value.path == "scenario.events[1].kind"


def test_misaligned_event(raw):
    raw["scenario"]["events"][0]["t"] = 0.60003
    with pytest.raises(ConfigError, match="grid") as exc:
        parse_config(raw)
    assert exc.value.path == "scenario.events[0].t"


def test_bad_controller_name(raw):
    raw["scenario"]["controller"] = "pid"
    with pytest.raises(ConfigError, match="must be one of"):
        parse_config(raw)


def test_missing_block(raw):
    raw["controllers"].pop("cpss")
    cfg = parse_config(raw)
    with pytest.raises(ConfigError, match="missing") as exc:
        cfg.gains_for(ControllerKind.CPSS)
    assert exc.value.path == "controllers.cpss"


def test_build_scenario(config_path):
    sc = load_config(config_path).build_scenario(ControllerKind.DFL)
    assert sc.controller is ControllerKind.DFL
    assert [e.kind for e in sc.events] == [EventKind.APPLY_FAULT, EventKind.CLEAR_FAULT]
    assert sc.record_stride == 10


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)


def test_config_default_is_valid():
    assert parse_config({}) == Config()
