import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from skewlab.errors import ConfigError
from skewlab.julia import GridSpec

CONTRACTION_RADIUS_BOUND = 7.0 / 128.0


class EnvCliConfig(SettingsConfigDict, total=False):
    cli_enable_prefix: Union[str, Dict[str, str]]
    cli_disable_prefix: Union[str, Dict[str, str]]


class GridConfig(BaseModel):
    """Pixel grid of a rendering."""

    nx: int = Field(513, ge=2, description="pixels along the real axis")
    ny: int = Field(513, ge=2, description="pixels along the imaginary axis")
    center_re: float = Field(0.0, description="real part of the window center")
    center_im: float = Field(0.0, description="imaginary part of the window center")
    half_width: float = Field(3.0, gt=0, description="half extent along the real axis")
    half_height: float = Field(3.0, gt=0, description="half extent along the imaginary axis")

    def spec(self) -> GridSpec:
        return GridSpec(**self.model_dump())


class ToleranceConfig(BaseModel):
    root_tol: float = Field(1e-12, gt=0, description="root polishing tolerance")
    landing_tol: float = Field(1e-6, gt=0, description="external ray landing tolerance")
    capture_tol: float = Field(1e-6, gt=0, description="saddle capture radius")
    cluster_eps: float = Field(1e-3, gt=0, description="cell size of accumulation clustering")


class InstanceConfig(BaseModel):
    """Parameters of the perturbed example and of its certificate."""

    n: int = Field(2, ge=1, le=8, description="index of the superattracting parameter")
    eta: float = Field(1e-3, gt=0, description="initial perturbation of b")
    r: float = Field(1.0 / 32.0, gt=0, description="radius of the excluded disk B(2, r)")
    delta_prime: float = Field(0.2, gt=0, lt=0.25, description="height of the contracted strip")
    J: int = Field(10, ge=2, description="depth of the angle coverage check")
    max_n: int = Field(8, ge=1, le=8, description="largest n tried by the certificate search")
    N_max: int = Field(64, ge=1, description="iteration cap of the reach-left check")
    julia_depth: int = Field(7, ge=1, description="backward iteration depth of the base sample")
    fiber_samples: int = Field(64, ge=1, description="base points whose fibers are rendered")

    @field_validator("r")
    @classmethod
    def _contraction_radius(cls, v: float) -> float:
        if v >= CONTRACTION_RADIUS_BOUND:
            raise ValueError(f"r={v} must stay below 7/128")
        return v


def read_key_value_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Parse a config file into a nested dict.

    Raises
    ------
    ConfigError
        unreadable file or a line without ``=``
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    result: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        *parents, leaf = key.split(".")
        node = result
        for parent in parents:
            node = node.setdefault(parent, {})
        node[leaf] = value
    return result


class Config(BaseSettings):
    """Run configuration.

    Precedence: command-line flags > config file > ``SKEWLAB_*`` environment
    > defaults.
    """

    model_config = EnvCliConfig(
        env_prefix="SKEWLAB_",
        env_nested_delimiter="__",
        extra="ignore",
    )

    grid: GridConfig = GridConfig()
    fiber_grid: GridConfig = GridConfig(nx=129, ny=129)
    tolerances: ToleranceConfig = ToleranceConfig()
    instance: InstanceConfig = InstanceConfig()
    maxiter: int = Field(200, ge=1, description="escape-time iteration cap")
    threads: Optional[int] = Field(None, ge=1, description="worker threads, all cores when unset")
    output_dir: Path = Field(Path("out"), description="directory receiving outputs")
    png: bool = Field(False, description="also write PNG images")
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field("WARNING", description="logging level")

    @model_validator(mode="after")
    def _resolve_threads(self) -> "Config":
        if self.threads is None:
            self.threads = os.cpu_count() or 1
        return self


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_file: Optional[Union[str, Path]] = None, **overrides: Any) -> Config:
    """Build a :class:`Config` from overrides, an optional file and the environment.

    Nested overrides may be given as dicts (``grid={"nx": 64}``). Partial
    nested overrides are merged with the file values instead of replacing
    the whole group.

    Raises
    ------
    ConfigError
        the file is unreadable or a value fails validation
    """
    path = Path(config_file) if config_file is not None else None
    file_values = read_key_value_file(path) if path is not None else {}
    values = _merge(file_values, overrides)
    try:
        return Config(**values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
