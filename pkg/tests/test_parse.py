from argparse import SUPPRESS, ArgumentParser
from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import pytest
from pydantic import BaseModel, Field

from skewlab.parse import (
    NestedFieldStoreAction,
    NestedFlagAction,
    _contain_base_model,
    build_parser,
    get_groupby_field_names,
    split_namespace,
)


class Kind(str, Enum):
    Pointwise = "pt"
    Full = "full"


class Window(BaseModel):
    nx: int = 513
    half_width: float = 3.0
    periodic: bool = False


class Settings(BaseModel):
    grid: Window = Window()
    maxiter: int = 256
    png: bool = False


def test_tuple():
    class Config(BaseModel):
        center: Tuple[float, float]

    parser = ArgumentParser()
    build_parser(parser, Config)

    a = parser._actions
    assert "--center" in a[1].option_strings
    assert a[1].dest == "center"
    assert a[1].type is float
    assert a[1].nargs == 2
    assert a[1].required
    assert a[1].default == SUPPRESS

    args = parser.parse_args(["--center", "0.5", "-1"])
    assert Config.model_validate(vars(args)) == Config(center=(0.5, -1.0))


def test_list():
    class Config(BaseModel):
        periods: List[int] = [1]

    parser = ArgumentParser()
    build_parser(parser, Config)
    assert parser._actions[1].nargs == "*"
    assert parser.parse_args(["--periods", "1", "2", "3"]).periods == [1, 2, 3]
    assert parser.parse_args([]).periods == [1]


def test_literal():
    class Config(BaseModel):
        kind: Literal["pt", "cc", "full"] = Field("pt", description="estimate")

    parser = ArgumentParser()
    build_parser(parser, Config)

    a = parser._actions
    assert a[1].choices == ("pt", "cc", "full")
    assert a[1].default == "pt"
    assert a[1].help == "estimate"
    assert not a[1].required
    assert parser.parse_args(["--kind", "cc"]).kind == "cc"
    with pytest.raises(SystemExit):
        parser.parse_args(["--kind", "bogus"])


def test_enum():
    class Config(BaseModel):
        kind: Kind

    parser = ArgumentParser()
    build_parser(parser, Config)

    assert parser._actions[1].choices == ["pt", "full"]
    args = parser.parse_args(["--kind", "full"])
    assert Config.model_validate(vars(args)).kind is Kind.Full
    with pytest.raises(SystemExit):
        parser.parse_args(["--kind", "Full"])


def test_optional():
    class Config(BaseModel):
        a: Optional[float] = None
        path: Optional[Path] = None

    parser = ArgumentParser()
    build_parser(parser, Config)

    a = parser._actions
    assert a[1].type is float
    assert a[2].type is Path
    args = parser.parse_args(["--a", "-2"])
    assert args.a == -2.0
    assert args.path is None


def test_underscore_becomes_dash():
    class Config(BaseModel):
        n_skip: int = 2

    parser = ArgumentParser()
    build_parser(parser, Config)
    assert parser._actions[1].option_strings == ["--n-skip"]
    assert parser.parse_args(["--n-skip", "5"]).n_skip == 5


def test_custom_cli_names():
    class Config(BaseModel):
        maxiter: int = Field(256, json_schema_extra={"cli": ["-m", "--maxiter"]})

    parser = ArgumentParser()
    build_parser(parser, Config)
    assert parser.parse_args(["-m", "9"]).maxiter == 9


def test_bool_flags():
    class Config(BaseModel):
        png: bool = False
        log: bool = True

    parser = ArgumentParser()
    build_parser(parser, Config)

    options = [o for action in parser._actions for o in action.option_strings]
    assert "--enable-png" in options
    assert "--disable-log" in options
    assert "--disable-png" not in options
    args = parser.parse_args(["--enable-png", "--disable-log"])
    assert args.png is True
    assert args.log is False
    args = parser.parse_args([])
    assert args.png is False
    assert args.log is True


def test_required_bool():
    class Config(BaseModel):
        search: bool

    parser = ArgumentParser()
    build_parser(parser, Config)
    assert parser.parse_args(["--disable-search"]).search is False
    with pytest.raises(SystemExit):
        parser.parse_args([])
    with pytest.raises(SystemExit):
        parser.parse_args(["--enable-search", "--disable-search"])


def test_nested_model():
    parser = ArgumentParser()
    build_parser(parser, Settings)

    nested = [a for a in parser._actions if a.dest.startswith("grid.")]
    assert {a.dest for a in nested} == {"grid.nx", "grid.half_width", "grid.periodic"}
    assert all(a.default == SUPPRESS for a in nested)
    assert all(isinstance(a, NestedFieldStoreAction) for a in nested)
    assert isinstance(next(a for a in nested if a.dest == "grid.periodic"), NestedFlagAction)

    args = parser.parse_args(["--grid.nx", "64", "--grid.half-width", "2.5", "--enable-grid.periodic"])
    assert args.grid == {"nx": 64, "half_width": 2.5, "periodic": True}
    settings = Settings.model_validate(vars(args))
    assert settings.grid == Window(nx=64, half_width=2.5, periodic=True)
    assert settings.maxiter == 256


def test_nested_model_absent():
    parser = ArgumentParser()
    build_parser(parser, Settings)
    args = parser.parse_args([])
    assert not hasattr(args, "grid")
    assert Settings.model_validate(vars(args)) == Settings()


def test_nested_model_disabled():
    parser = ArgumentParser()
    build_parser(parser, Settings, parse_nested_model=False, excludes=["grid"])
    assert all(not a.dest.startswith("grid") for a in parser._actions)


def test_suppress_defaults():
    parser = ArgumentParser()
    build_parser(parser, Settings, suppress_defaults=True)
    args = parser.parse_args(["--maxiter", "10"])
    assert vars(args) == {"maxiter": 10}
    assert vars(parser.parse_args(["--enable-png"])) == {"png": True}


def test_build_parser_without_model():
    parser = ArgumentParser()
    assert build_parser(parser, None) is parser
    assert len(parser._actions) == 1


def test_groupby_inherit():
    class Base(BaseModel):
        a: float = 0.0

    class Child(Base):
        name: str = "base"

    assert get_groupby_field_names(Child) == {"a": "Base", "name": "Child"}

    parser = ArgumentParser()
    build_parser(parser, Child)
    titles = [g.title for g in parser._action_groups]
    assert "Base" in titles
    assert "Child" in titles

    parser = ArgumentParser()
    build_parser(parser, Child, groupby_inherit=False)
    assert "Base" not in [g.title for g in parser._action_groups]


def test_split_namespace():
    class Args(BaseModel):
        name: str = "base"

    parser = ArgumentParser()
    parser.add_argument("--config")
    build_parser(parser, Args)
    build_parser(parser, Settings, suppress_defaults=True, groupby_inherit=False)
    namespace = parser.parse_args(["--name", "disk", "--grid.nx", "9"])
    namespace._command = "render-base"

    own, rest = split_namespace(namespace, Args)
    assert own == {"name": "disk"}
    assert rest == {"config": None, "grid": {"nx": 9}}


def test_contain_base_model():
    assert _contain_base_model(Window)
    assert _contain_base_model(Optional[Window])
    assert _contain_base_model(Window | None)
    assert not _contain_base_model(int)
    assert not _contain_base_model(Optional[int])
    assert not _contain_base_model(List[Window])
