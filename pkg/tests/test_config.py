import pytest

from aslide.config import ConfigError, NetworkConfig, load_config, parse_config, validate_config


def test_derived_sizes():
    cfg = NetworkConfig(8, 64)
    assert cfg.gap == 8
    assert cfg.sender_height == 71
    assert cfg.receiver_height == -8
    assert cfg.receiver == 7
    assert list(cfg.internal) == [1, 2, 3, 4, 5, 6]
    assert NetworkConfig(4, 128).plus_gap == 24


def test_parse_full_config():
    exp = parse_config("""
        # comment
        n = 4
        C = 128
        protocol = slide-plus
        adversary = cyclic
        seed = 9
        rounds = 500   # trailing comment
    """)
    assert exp.network == NetworkConfig(4, 128, "fully-async", "slide-plus")
    assert (exp.adversary, exp.seed, exp.rounds) == ("cyclic", 9, 500)
    assert exp.checkpoint_every == 128


def test_mode_defaults_follow_protocol():
    assert parse_config("n=8\nC=64").network.mode == "semi-async"


@pytest.mark.parametrize("text, fragment", [
    ("C = 64", "missing required key 'n'"),
    ("n = 8\nC = 64\nn = 8", "duplicate"),
    ("n = 8\nC = sixty", "must be an integer"),
    ("n = 8\nC = 64\ncolour = red", "unknown keys"),
    ("n = 8\nC = 64\nadversary = sneaky", "unknown adversary"),
    ("n 8", "expected 'key = value'"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


@pytest.mark.parametrize("cfg, fragment", [
    (NetworkConfig(3, 63), "at least 4"),
    (NetworkConfig(8, 0), "positive"),
    (NetworkConfig(8, 60), "not integer"),
    (NetworkConfig(8, 64, "fully-async"), "semi-async"),
    (NetworkConfig(8, 8), "C >= 2n"),
    (NetworkConfig(4, 64, "fully-async", "slide-plus"), "8n\\^2"),
    (NetworkConfig(4, 128, "semi-async", "slide-plus"), "fully-async"),
    (NetworkConfig(8, 64, "weird"), "unknown mode"),
])
def test_validation(cfg, fragment):
    with pytest.raises(ConfigError, match=fragment):
        validate_config(cfg)


def test_load_from_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("n = 8\nC = 64\nreplay = sched.txt\n")
    exp = load_config(path)
    assert exp.replay == "sched.txt"
    assert exp.with_overrides(seed=None, rounds=7).rounds == 7
