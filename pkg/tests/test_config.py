import pytest

from skewlab.config import Config, GridConfig, InstanceConfig, load_config, read_key_value_file
from skewlab.errors import ConfigError

from tests.context import context_env


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "skewlab.conf"
    path.write_text(
        "# rendering\n"
        "grid.nx = 64\n"
        "grid.half_width = 2.5  # wider window\n"
        "\n"
        "maxiter = 50\n"
        "instance.r = 0.03\n"
    )
    return path


def test_defaults():
    config = Config()
    assert config.grid.nx == 513
    assert config.fiber_grid.nx == 129
    assert config.instance.r == 1.0 / 32.0
    assert config.instance.delta_prime == 0.2
    assert config.instance.J == 10
    assert config.threads >= 1
    assert config.log_level == "WARNING"


def test_read_key_value_file(config_file):
    values = read_key_value_file(config_file)
    assert values == {
        "grid": {"nx": "64", "half_width": "2.5"},
        "maxiter": "50",
        "instance": {"r": "0.03"},
    }


def test_read_key_value_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_key_value_file(tmp_path / "missing.conf")
    bad = tmp_path / "bad.conf"
    bad.write_text("grid.nx 64\n")
    with pytest.raises(ConfigError):
        read_key_value_file(bad)


def test_load_config_from_file(config_file):
    config = load_config(config_file)
    assert config.grid.nx == 64
    assert config.grid.ny == 513
    assert config.grid.half_width == 2.5
    assert config.maxiter == 50
    assert config.instance.r == 0.03


def test_overrides_beat_file(config_file):
    config = load_config(config_file, maxiter=7, grid={"ny": 32})
    assert config.maxiter == 7
    assert config.grid.nx == 64
    assert config.grid.ny == 32


def test_file_beats_environment(config_file):
    with context_env({"SKEWLAB_MAXITER": "999", "SKEWLAB_THREADS": "3"}):
        config = load_config(config_file)
    assert config.maxiter == 50
    assert config.threads == 3


def test_nested_environment():
    with context_env({"SKEWLAB_GRID__NX": "17"}):
        config = load_config()
    assert config.grid.nx == 17


@pytest.mark.parametrize(
    "overrides",
    [
        {"grid": {"nx": 1}},
        {"maxiter": 0},
        {"instance": {"r": 7.0 / 128.0}},
        {"instance": {"delta_prime": 0.25}},
        {"log_level": "LOUD"},
    ],
)
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        load_config(**overrides)


def test_grid_config_spec():
    spec = GridConfig(nx=5, ny=3, half_width=1.0, half_height=0.5).spec()
    assert spec.bounds == (-1.0, 1.0, -0.5, 0.5)


def test_instance_config_bounds():
    with pytest.raises(ValueError):
        InstanceConfig(n=9)
