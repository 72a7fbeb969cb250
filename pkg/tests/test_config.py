import pytest

from shotdown.config import ConfigError, config_text, parse_config

MIN = "experiment = stable-check\nseed = 3\nalpha = 1.0\ndomain = annulus(1,2)\n"


def test_minimal_defaults():
    cfg = parse_config(MIN)
    assert cfg.d == 2 and cfg.steps == 20 and cfg.k_sigma == 3.0
    assert cfg.make_domain().contains((1.5, 0.0))


def test_comments_and_lists():
    cfg = parse_config(MIN + "# comment\nt = 0.1, 0.05  # trailing\nx = 1.5, 0\n")
    assert cfg.t == (0.1, 0.05) and cfg.x == (1.5, 0.0)


@pytest.mark.parametrize("extra,msg", [
    ("alpha = 2.5\n", "duplicate key 'alpha'"),
    ("foo = 1\n", "line 5: unknown key 'foo'"),
    ("n = 1.5\n", "line 5: malformed value for 'n'"),
    ("x = 1, 2, 3\n", "x must have 2 coordinates"),
    ("scheme = euler\n", "malformed value for 'scheme'"),
    ("justtext\n", "expected 'key = value'"),
])
def test_errors_carry_line_numbers(extra, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(MIN + extra)


def test_duplicate_names_both_lines():
    with pytest.raises(ConfigError, match=r"line 5: duplicate key 'seed' \(first set on line 2\)"):
        parse_config(MIN + "seed = 4\n")


def test_alpha_range():
    with pytest.raises(ConfigError, match=r"alpha outside \(0,2\)"):
        parse_config(MIN.replace("alpha = 1.0", "alpha = 2.5"))


def test_missing_required():
    with pytest.raises(ConfigError, match="missing required key"):
        parse_config("seed = 1\nalpha = 1\n")


def test_bad_domain():
    with pytest.raises(ConfigError, match="line 4"):
        parse_config(MIN.replace("annulus(1,2)", "annulus(2,1)"))


def test_echo_round_trip():
    cfg = parse_config(MIN + "t = 0.1, 0.05\nboost = none\nh = 0.01\n")
    assert parse_config(config_text(cfg)) == cfg
