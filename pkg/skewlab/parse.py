import types
from argparse import SUPPRESS, Action, ArgumentParser, Namespace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Tuple, Type, Union, get_args, get_origin

from pydantic import BaseModel, ConfigDict
from pydantic.fields import FieldInfo, PydanticUndefined


class NestedFieldStoreAction(Action):
    """Store ``--grid.nx 64`` as ``namespace.grid = {"nx": 64}``.

    Values arrive converted by the argument type; the model validates them.
    """

    def __init__(self, option_strings, dest: str, **kwargs):
        super().__init__(option_strings, dest, **kwargs)
        self._field_names = self.dest.split(".")

    def __call__(self, parser: ArgumentParser, namespace: Any, values, option_string=None):
        head, *middle, leaf = self._field_names
        node = getattr(namespace, head, None)
        if not isinstance(node, dict):
            node = {}
            setattr(namespace, head, node)
        for name in middle:
            node = node.setdefault(name, {})
        node[leaf] = values


class NestedFlagAction(NestedFieldStoreAction):
    """``--enable-x.y`` / ``--disable-x.y`` for a boolean field of a nested model."""

    def __init__(self, option_strings, dest: str, const: bool = True, **kwargs):
        kwargs.pop("nargs", None)
        super().__init__(option_strings, dest, nargs=0, const=const, **kwargs)

    def __call__(self, parser: ArgumentParser, namespace: Any, values, option_string=None):
        super().__call__(parser, namespace, self.const, option_string)


def get_model_field(model: Type[BaseModel]) -> Dict[str, FieldInfo]:
    """Get field info."""
    return dict(model.model_fields)


def get_groupby_field_names(model: Type[BaseModel]) -> Dict[str, str]:
    """Get field names for groups

    Parameters
    ----------
    model : Type[BaseModel]
        model class

    Returns
    -------
    Dict[str, str]
        pair of field name and the name of the class declaring it
    """
    models = []
    for model_type in model.__mro__:
        if model_type is BaseModel or not issubclass(model_type, BaseModel):
            break
        models.append(model_type)
    result: Dict[str, str] = {}
    for model_type in reversed(models):
        for name in get_model_field(model_type):
            if name not in result:
                result[name] = model_type.__name__
    return result


def build_parser(parser: ArgumentParser, model: Type[BaseModel] | None, **kwargs) -> ArgumentParser:
    """Create argument parser from pydantic model.

    Parameters
    ----------
    parser : ArgumentParser
        argument parser object
    model : Type[BaseModel] | None
        BaseModel class, nothing is added when None

    Returns
    -------
    ArgumentParser
        argument parser object
    """
    if model is None:
        return parser
    return build_parser_impl(parser, model, **kwargs)


def build_parser_impl(
    parser: ArgumentParser,
    model: Type[BaseModel],
    excludes: List[str] = [],
    groupby_inherit: bool = True,
    parse_nested_model: bool = True,
    suppress_defaults: bool = False,
    name_prefix: str | None = None,
    naming_separator: str = "-",
    group: Any = None,
) -> ArgumentParser:
    """Create argument parser from pydantic model.

    Parameters
    ----------
    parser : ArgumentParser
        Argument parser object
    model : Type[BaseModel]
        BaseModel class
    excludes : List[str], optional
        Exclude field, by default []
    groupby_inherit: bool, optional
        If True, inherited basemodels are grouped by class name, by default True
    parse_nested_model: bool
        If True, nested model is also parsed, by default True
        ```python
        class GridConfig(BaseModel):
            nx: int = 513
        class Config(BaseModel):
            grid: GridConfig
        ```
        In this case, `--grid.nx` is created.
    suppress_defaults: bool, optional
        If True, fields absent from the command line are absent from the
        namespace too, so that a later layer (config file, environment)
        can supply them. By default False
    name_prefix: str | None, optional
        Dotted path of the enclosing model, by default None
    naming_separator: str, optional
        Separator of the argument name, by default "-"
    group: optional
        Argument group receiving the fields of a nested model

    Returns
    -------
    ArgumentParser
        Argument parser object
    """
    groups = get_groupby_field_names(model) if groupby_inherit and name_prefix is None else {}
    cache_parsers: Dict[str, Any] = {}
    for name, field in get_model_field(model).items():
        if name in excludes or name.startswith("_"):
            continue
        dotted = name if name_prefix is None else f"{name_prefix}.{name}"

        if parse_nested_model and _contain_base_model(field.annotation):
            nested_group = group or parser.add_argument_group(dotted)
            build_parser_impl(
                parser,
                _reveal_base_model(field.annotation),
                excludes=excludes,
                groupby_inherit=False,
                parse_nested_model=parse_nested_model,
                suppress_defaults=True,
                name_prefix=dotted,
                naming_separator=naming_separator,
                group=nested_group,
            )
            continue

        if group is not None:
            _parser = group
        elif name in groups:
            group_name = groups[name]
            if group_name not in cache_parsers:
                cache_parsers[group_name] = parser.add_argument_group(group_name)
            _parser = cache_parsers[group_name]
        else:
            _parser = parser

        kwargs: Dict[str, Any] = {"help": field.description or field.title}
        default = PydanticUndefined if field.is_required() else field.get_default(call_default_factory=True)
        if suppress_defaults or default is PydanticUndefined:
            kwargs["default"] = SUPPRESS
        else:
            kwargs["default"] = default

        if field.annotation is bool:
            _add_flag_options(_parser, name, dotted, field, kwargs, model.model_config, naming_separator, default)
            continue

        kwargs.update(_parse_shape_args(field))
        if name_prefix is not None:
            kwargs["action"] = NestedFieldStoreAction
            kwargs["dest"] = dotted
        args = get_cli_names(
            name,
            field,
            model.model_config,
            naming_separator=naming_separator,
            prefix="--" + _flag_path(name_prefix, naming_separator),
        )
        required = default is PydanticUndefined and not suppress_defaults
        _parser.add_argument(*args, required=required, **kwargs)

    return parser


def get_cli_names(
    name: str,
    field: FieldInfo,
    model_config: ConfigDict,
    naming_separator: str,
    prefix: str = "",
) -> List[str]:
    """Create cli string from field name.

    Parameters
    ----------
    name : str
        field name
    field : FieldInfo
        field object
    prefix : str, optional
        prefix of the default arguments, by default ""

    Returns
    -------
    List[str]
        list of cli arguments
    """
    names = _get_extra(field, model_config, "cli", None)
    if names is None:
        names = []
        if field.alias is not None:
            names.append(prefix + field.alias.replace("_", naming_separator))
        names.append(prefix + name.replace("_", naming_separator))
    return list(names)


def _parse_shape_args(field: FieldInfo) -> Dict[str, Any]:
    annotation = field.annotation
    origin = get_origin(annotation)
    kwargs: Dict[str, Any] = {"type": annotation}
    if annotation is None:
        kwargs["type"] = str
    elif origin is list or origin is set:
        kwargs["type"] = get_args(annotation)[0]
        kwargs["nargs"] = "+" if field.is_required() else "*"
    elif origin is tuple:
        args = get_args(annotation)
        kwargs["type"] = args[0]
        kwargs["nargs"] = len(args)
    elif isinstance(annotation, type) and issubclass(annotation, Enum):
        kwargs["type"] = str
        kwargs["choices"] = [member.value for member in annotation]
    elif origin is Literal:
        del kwargs["type"]
        kwargs["choices"] = get_args(annotation)
    elif origin is Union or isinstance(annotation, types.UnionType):
        # Optional[X] parses as X; the model validates the rest
        members = [a for a in get_args(annotation) if a is not type(None)]
        kwargs["type"] = members[0] if len(members) == 1 and members[0] in (int, float, str, Path) else str
    return kwargs


def _add_flag_options(
    parser: Any,
    name: str,
    dotted: str,
    field: FieldInfo,
    kwargs: Dict[str, Any],
    config: ConfigDict,
    naming_separator: str,
    default: Any,
):
    """``--enable-name`` and ``--disable-name``; only the one flipping the default
    is added unless the field is required."""
    prefix_path = _flag_path(dotted[: -len(name) - 1] or None, naming_separator)
    enable = _get_extra(field, config, "cli_enable_prefix", f"--enable{naming_separator}")
    disable = _get_extra(field, config, "cli_disable_prefix", f"--disable{naming_separator}")
    options: List[Tuple[str, bool]]
    if default is PydanticUndefined:
        options = [(enable, True), (disable, False)]
        target = parser.add_mutually_exclusive_group(required=True)
    else:
        options = [(disable, False)] if default else [(enable, True)]
        target = parser
    for prefix, value in options:
        args = get_cli_names(name, field, config, naming_separator, prefix=prefix + prefix_path)
        if prefix_path:
            target.add_argument(
                *args, dest=dotted, action=NestedFlagAction, const=value, default=SUPPRESS, help=kwargs["help"]
            )
        else:
            target.add_argument(
                *args,
                dest=name,
                action="store_true" if value else "store_false",
                default=kwargs["default"],
                help=kwargs["help"],
            )


def _get_extra(field: FieldInfo, config: ConfigDict, key: str, default: Any = None) -> Any:
    """Get extra field from config.

    Args:
        field (FieldInfo): Field object
        config (ConfigDict): Config object
        key (str): key name
        default (Any, optional): default value if not exists. Defaults to None.

    Returns:
        Any: value of the key
    """
    if isinstance(field.json_schema_extra, dict) and key in field.json_schema_extra:
        return field.json_schema_extra[key]
    return config.get(key, default)


def _contain_base_model(t: Any) -> bool:
    origin = get_origin(t)
    if origin is Union or isinstance(t, types.UnionType):
        return any(_contain_base_model(x) for x in get_args(t))
    return isinstance(t, type) and issubclass(t, BaseModel)


def _reveal_base_model(t: Any) -> Type[BaseModel]:
    origin = get_origin(t)
    if origin is Union or isinstance(t, types.UnionType):
        for x in get_args(t):
            if isinstance(x, type) and issubclass(x, BaseModel):
                return x
    return t


def split_namespace(namespace: Namespace, model: Type[BaseModel]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """Split parsed arguments into the fields of ``model`` and the rest."""
    values = {k: v for k, v in vars(namespace).items() if not k.startswith("_")}
    fields = get_model_field(model)
    own = {k: v for k, v in values.items() if k in fields}
    rest = {k: v for k, v in values.items() if k not in fields}
    return own, rest


def _flag_path(name_prefix: str | None, naming_separator: str) -> str:
    return "" if not name_prefix else name_prefix.replace("_", naming_separator) + "."
