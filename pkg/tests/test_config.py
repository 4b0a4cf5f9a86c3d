import pytest

from triseg.config import load_config_file, parse_bool, parse_dims, parse_weights, resolve
from triseg.errors import ConfigurationError


def test_parses_typed_values(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# a comment\n"
        "seed = 7\n"
        "lr = 0.05\n"
        "dims = 48,48,32\n"
        "augment = false\n"
        "weights = 0.5, 0.25, 0.25\n"
        "epochs = 3  # trailing comment\n"
    )
    cfg = load_config_file(path)
    assert cfg == {
        "seed": 7,
        "lr": 0.05,
        "dims": (48, 48, 32),
        "augment": False,
        "weights": (0.5, 0.25, 0.25),
        "epochs": 3,
    }


def test_unknown_key_is_fatal_and_named(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("learning_rate = 0.1\n")
    with pytest.raises(ConfigurationError, match="learning_rate"):
        load_config_file(path)


def test_bad_value_reports_line(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 1\nepochs = many\n")
    with pytest.raises(ConfigurationError, match=":2"):
        load_config_file(path)


def test_missing_equals_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("epochs 5\n")
    with pytest.raises(ConfigurationError, match="key = value"):
        load_config_file(path)


def test_parse_bool_variants():
    assert parse_bool("true") and parse_bool("Yes") and parse_bool("1")
    assert not parse_bool("false") and not parse_bool("off")
    with pytest.raises(ConfigurationError):
        parse_bool("maybe")


def test_parse_dims_forms():
    assert parse_dims("64,64,64") == (64, 64, 64)
    assert parse_dims("32 48 64") == (32, 48, 64)
    with pytest.raises(ConfigurationError):
        parse_dims("64,64")


def test_parse_weights():
    assert parse_weights("0.2,0.3,0.5") == (0.2, 0.3, 0.5)


def test_resolve_precedence():
    cfg = {"epochs": 9}
    assert resolve(3, cfg, "epochs", 500) == 3  # flag wins
    assert resolve(None, cfg, "epochs", 500) == 9  # file next
    assert resolve(None, {}, "epochs", 500) == 500  # default last
    assert resolve(False, {"augment": True}, "augment", True) is False
