import inspect
import json
import logging
import sys
from argparse import ArgumentParser
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Type

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from skewlab.__version__ import __version__
from skewlab.certify import full_certificate, search_certificate
from skewlab.config import Config, load_config
from skewlab.errors import ConfigError, RayBlocked, SkewlabError
from skewlab.family import (
    BiquadParams,
    ExampleInstance,
    LocusLabel,
    classify_grid,
    classify_params,
    construct_example,
    curve_samples,
    product_preset,
    sumi_preset,
)
from skewlab.invariant import AccumulationKind, classify_critical, estimate_accumulation, find_saddles
from skewlab.io import ArtifactWriter, accumulation_json, classification_json, escape_image, locus_image
from skewlab.julia import (
    CloudTag,
    GridSpec,
    PointCloud,
    base_julia_sample,
    boundary_extract,
    fiber_filled_julia,
    filled_julia_base,
    trace_external_ray,
)
from skewlab.numeric import Poly
from skewlab.parse import build_parser, split_namespace
from skewlab.skew import SkewProduct

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

Command = Callable[[Any, Config], Optional[int]]
_registry: Dict[str, Command] = {}

_NAMED_POLYS = {
    "z2": Poly.monomial(2),
    "z4": Poly.monomial(4),
}


def get_command_model(func: Command) -> Type[BaseModel] | None:
    """Get model from command function

    Parameters
    ----------
    func : Callable
        callable object

    Returns
    -------
    Type[BaseModel]
        annotation of the first argument, None for a command without one
    """
    spec = inspect.getfullargspec(func)
    if len(spec.args) == 0:
        return None
    annotation = spec.annotations.get(spec.args[0])
    return annotation if isinstance(annotation, type) and issubclass(annotation, BaseModel) else None


def sub_command(name: str):
    """Decorator for sub command"""

    def _(func: Command):
        if name in _registry:
            if _registry[name] is func:
                return func  # Already registered
            raise ValueError("Command name is already used.")
        _registry[name] = func
        return func

    return _


def parse_poly(text: str) -> Poly:
    """``z2``, ``z4`` or comma separated coefficients, constant term first."""
    text = text.strip()
    if text in _NAMED_POLYS:
        return _NAMED_POLYS[text]
    try:
        coeffs = [complex(part.strip().replace(" ", "")) for part in text.split(",")]
    except ValueError as e:
        raise ConfigError(f"cannot read polynomial {text!r}") from e
    return Poly(coeffs)


# ---------------------------------------------------------------------------
# Command arguments


class BaseMapArgs(BaseModel):
    a: Optional[float] = Field(None, description="parameter a of (z^2 + a)^2 + b")
    b: Optional[float] = Field(None, description="parameter b of (z^2 + a)^2 + b")
    poly: Optional[str] = Field(None, description="z2, z4 or coefficients c0,c1,... instead of a and b")

    def polynomial(self) -> Poly:
        if self.poly is not None and (self.a is not None or self.b is not None):
            raise ConfigError("give either --poly or --a and --b")
        if self.poly is not None:
            return parse_poly(self.poly)
        if self.a is None or self.b is None:
            raise ConfigError("--a and --b are both required without --poly")
        return BiquadParams(a=self.a, b=self.b).poly()


class FamilyArgs(BaseModel):
    family: Literal["example", "product", "sumi"] = Field("example", description="skew product to study")
    base_poly: Optional[str] = Field(None, description="base polynomial of the product family")
    fiber_poly: Optional[str] = Field(None, description="fiber polynomial of the product family")
    sumi_R: float = Field(3.0, gt=0, description="R of the base z^2 - R in the sumi family")
    sumi_eps: float = Field(0.01, ge=0, description="perturbation of the sumi fiber")
    sumi_n: int = Field(1, ge=1, description="iterate count of the sumi family")
    samples: int = Field(4000, ge=1, description="base Julia samples outside the example family")

    def build(self, config: Config) -> Tuple[SkewProduct, PointCloud, Optional[ExampleInstance]]:
        if self.family == "example":
            instance = _construct(config)
            return instance.f, instance.julia, instance
        if self.family == "product":
            if self.base_poly is None or self.fiber_poly is None:
                raise ConfigError("the product family needs --base-poly and --fiber-poly")
            f = product_preset(parse_poly(self.base_poly), parse_poly(self.fiber_poly))
        else:
            f = sumi_preset(self.sumi_R, self.sumi_eps, self.sumi_n)
        return f, base_julia_sample(f.base, max_points=self.samples), None


class RenderBaseArgs(BaseMapArgs):
    name: str = Field("base", description="stem of the output files")


class RenderFiberArgs(FamilyArgs):
    z_re: float = Field(0.0, description="real part of the base point")
    z_im: float = Field(0.0, description="imaginary part of the base point")
    name: str = Field("fiber", description="stem of the output files")


class ParamSpaceArgs(BaseModel):
    a_min: float = Field(-3.0, description="left edge of the (a, b) window")
    a_max: float = Field(1.0, description="right edge of the (a, b) window")
    b_min: float = Field(-3.0, description="bottom edge of the (a, b) window")
    b_max: float = Field(1.0, description="top edge of the (a, b) window")
    curve_points: int = Field(256, ge=2, description="samples per boundary curve")
    query_a: Optional[float] = Field(None, description="classify the single parameter (query-a, query-b)")
    query_b: Optional[float] = Field(None, description="classify the single parameter (query-a, query-b)")
    name: str = Field("params", description="stem of the output files")


class ConstructArgs(BaseModel):
    name: str = Field("instance", description="stem of the output files")


class VerifyArgs(BaseModel):
    search: bool = Field(False, description="try n = 1, 2, ... until a certificate passes")
    name: str = Field("certificate", description="stem of the output files")


class SaddlesArgs(FamilyArgs):
    max_period: int = Field(1, ge=1, description="largest saddle period searched")
    name: str = Field("saddles", description="stem of the output files")


class ClassifyArgs(FamilyArgs):
    steps: int = Field(256, ge=1, description="orbit length before a point counts as unresolved")
    name: str = Field("critical", description="stem of the output files")


class AccumulateArgs(FamilyArgs):
    kind: Literal["pt", "cc", "full"] = Field("pt", description="pointwise, componentwise or full estimate")
    n_skip: int = Field(2, ge=0, description="first iterate kept")
    n_tail: int = Field(16, ge=0, description="number of further iterates kept")
    name: str = Field("accumulation", description="stem of the output files")


class TraceRayArgs(BaseMapArgs):
    theta: str = Field("0", description="external angle, e.g. 3/16")
    depth: int = Field(20, ge=1, description="number of potential levels")
    name: str = Field("ray", description="stem of the output files")


class ReportArgs(BaseModel):
    path: Path = Field(description="certificate JSON written by verify")


def _construct(config: Config) -> ExampleInstance:
    settings = config.instance
    return construct_example(settings.n, eta=settings.eta, julia_depth=settings.julia_depth)


def _summary_table(reports: Sequence[Dict[str, Any]]) -> str:
    width = max((len(r["lemma_id"]) for r in reports), default=8)
    lines = [f"{'check':<{width}}  result  margin"]
    for r in reports:
        lines.append(f"{r['lemma_id']:<{width}}  {'PASS' if r['pass'] else 'FAIL':<6}  {r['margin']:.6g}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Commands


@sub_command("render-base")
def render_base(args: RenderBaseArgs, config: Config) -> int:
    grid = filled_julia_base(args.polynomial(), config.grid.spec(), maxiter=config.maxiter, threads=config.threads)
    boundary = boundary_extract(grid)
    writer = ArtifactWriter(config.output_dir, "render-base", config)
    writer.image(args.name, escape_image(grid), png=config.png)
    writer.grid(args.name, grid)
    writer.cloud(f"{args.name}-boundary", boundary)
    writer.finish({"args": args})
    print(f"{int(grid.bounded.sum())} bounded pixels, {len(boundary)} boundary pixels")
    return EXIT_OK


@sub_command("render-fiber")
def render_fiber(args: RenderFiberArgs, config: Config) -> int:
    f, _, _ = args.build(config)
    z = complex(args.z_re, args.z_im)
    grid = fiber_filled_julia(f, z, config.fiber_grid.spec(), maxiter=config.maxiter, threads=config.threads)
    writer = ArtifactWriter(config.output_dir, "render-fiber", config)
    writer.image(args.name, escape_image(grid), png=config.png)
    writer.grid(args.name, grid)
    writer.finish({"args": args})
    print(f"fiber over z={z}: {int(grid.bounded.sum())} bounded pixels")
    return EXIT_OK


@sub_command("param-space")
def param_space(args: ParamSpaceArgs, config: Config) -> int:
    if (args.query_a is None) != (args.query_b is None):
        raise ConfigError("--query-a and --query-b go together")
    if args.query_a is not None:
        result = classify_params(BiquadParams(a=args.query_a, b=args.query_b), maxiter=max(config.maxiter, 500))
        print(result.label.name)
        return EXIT_OK
    if args.a_min >= args.a_max or args.b_min >= args.b_max:
        raise ConfigError("empty parameter window")
    spec = GridSpec.box(args.a_min, args.a_max, args.b_min, args.b_max, nx=config.grid.nx, ny=config.grid.ny)
    locus = classify_grid(spec, maxiter=config.maxiter, threads=config.threads)
    writer = ArtifactWriter(config.output_dir, "param-space", config)
    writer.image(args.name, locus_image(locus.labels), png=config.png)
    writer.curves(f"{args.name}-curves", curve_samples(args.curve_points))
    writer.finish({"args": args})
    labels, counts = np.unique(locus.labels, return_counts=True)
    print(", ".join(f"{LocusLabel(int(label)).name}: {int(count)}" for label, count in zip(labels, counts)))
    return EXIT_OK


@sub_command("construct-example")
def construct(args: ConstructArgs, config: Config) -> int:
    instance = _construct(config)
    summary = {
        "n": instance.n,
        "a": instance.params.a,
        "b": instance.params.b,
        "eta": instance.eta,
        "beta": instance.beta_n,
        "alpha": instance.alpha_n,
        "epsilon": instance.epsilon_n,
        "cycle": list(instance.cycle),
        "superattracting": instance.superattracting,
    }
    writer = ArtifactWriter(config.output_dir, "construct-example", config)
    writer.json(args.name, summary)
    writer.cloud(f"{args.name}-julia", instance.julia)
    writer.finish({"args": args})
    print(f"f_{instance.n}: a={instance.params.a:.15g} b={instance.params.b:.15g} eps={instance.epsilon_n:.3e}")
    return EXIT_OK


@sub_command("verify")
def verify(args: VerifyArgs, config: Config) -> int:
    report = search_certificate(config) if args.search else full_certificate(config.instance.n, config)
    writer = ArtifactWriter(config.output_dir, "verify", config)
    writer.json(args.name, report)
    writer.finish({"args": args})
    dumped = report.model_dump(mode="json", by_alias=True)
    print(_summary_table(dumped["reports"]))
    print(f"f_{report.n}: {'PASS' if report.verdict else 'FAIL ' + ', '.join(report.failing)}")
    return EXIT_OK if report.verdict else EXIT_FAIL


@sub_command("saddles")
def saddles(args: SaddlesArgs, config: Config) -> int:
    f, _, _ = args.build(config)
    est = find_saddles(f, max_period=args.max_period)
    rows = [
        {
            "z": s.location.z,
            "w": s.location.w,
            "period": s.period,
            "base_multiplier": s.base_multiplier,
            "fiber_multiplier": s.fiber_multiplier,
            "component": s.component_index,
        }
        for s in est.saddles
    ]
    writer = ArtifactWriter(config.output_dir, "saddles", config)
    writer.json(args.name, {"components": est.components, "saddles": rows})
    writer.finish({"args": args})
    for row in rows:
        print(f"period {row['period']} component {row['component']}: ({row['z']:.12g}, {row['w']:.12g})")
    return EXIT_OK


@sub_command("classify-critical")
def classify(args: ClassifyArgs, config: Config) -> int:
    f, base, _ = args.build(config)
    est = find_saddles(f, max_period=1)
    result = classify_critical(f, est, base, T=args.steps, tol=config.tolerances.capture_tol)
    writer = ArtifactWriter(config.output_dir, "classify-critical", config)
    writer.json(args.name, classification_json(result))
    writer.finish({"args": args})
    print(", ".join(f"{label}: {count}" for label, count in sorted(result.counts().items())))
    return EXIT_OK


@sub_command("accumulate")
def accumulate(args: AccumulateArgs, config: Config) -> int:
    f, base, _ = args.build(config)
    est = estimate_accumulation(
        f,
        AccumulationKind(args.kind),
        base,
        N_skip=args.n_skip,
        N_tail=args.n_tail,
        cluster_eps=config.tolerances.cluster_eps,
    )
    writer = ArtifactWriter(config.output_dir, "accumulate", config)
    writer.json(args.name, accumulation_json(est))
    writer.cloud(args.name, est.pts)
    writer.finish({"args": args})
    print(f"{args.kind}: {len(est.clusters)} clusters")
    return EXIT_OK


@sub_command("trace-ray")
def trace_ray(args: TraceRayArgs, config: Config) -> int:
    try:
        theta = Fraction(args.theta)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"cannot read angle {args.theta!r}") from e
    writer = ArtifactWriter(config.output_dir, "trace-ray", config)
    try:
        trace = trace_external_ray(args.polynomial(), theta, depth=args.depth, tol=config.tolerances.landing_tol)
    except RayBlocked as e:
        if e.trace is not None:
            writer.cloud(f"{args.name}-partial", PointCloud(e.trace.points, CloudTag.Generic))
        writer.json(args.name, {"theta": str(theta), "blocked": True, "last_potential": e.last_potential})
        writer.finish({"args": args})
        raise
    writer.json(
        args.name,
        {
            "theta": str(trace.theta),
            "blocked": False,
            "landed": trace.landed,
            "landing": trace.landing,
            "potentials": trace.potentials,
        },
    )
    writer.cloud(args.name, PointCloud(trace.points, CloudTag.Generic))
    writer.finish({"args": args})
    print(f"ray {trace.theta}: " + (f"lands at {trace.landing:.12g}" if trace.landed else "no landing detected"))
    return EXIT_OK


@sub_command("report")
def report(args: ReportArgs, config: Config) -> int:
    try:
        data = json.loads(args.path.read_text())
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read report {args.path}: {e}") from e
    reports: List[Dict[str, Any]] = data.get("reports", [])
    print(_summary_table(reports))
    verdict = bool(data.get("verdict", all(r["pass"] for r in reports)))
    print(f"f_{data.get('n', '?')}: {'PASS' if verdict else 'FAIL'}")
    return EXIT_OK if verdict else EXIT_FAIL


# ---------------------------------------------------------------------------
# Entry point


def build_cli() -> ArgumentParser:
    parser = ArgumentParser(prog="skewlab", description="Dynamics of polynomial skew products of C^2.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="_command")
    for command, callback in _registry.items():
        subparser = subparsers.add_parser(command, help=(callback.__doc__ or "").strip() or None)
        subparser.add_argument("--config", type=Path, help="key = value configuration file")
        build_parser(subparser, get_command_model(callback))
        build_parser(subparser, Config, suppress_defaults=True, groupby_inherit=False)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit status.

    0 on success, 1 when a check fails or a computation raises, 2 on usage
    or configuration errors.
    """
    parser = build_cli()
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if namespace._command not in _registry:
        parser.print_help()
        return EXIT_USAGE

    callback = _registry[namespace._command]
    model_type = get_command_model(callback)
    own, rest = split_namespace(namespace, model_type) if model_type is not None else ({}, vars(namespace))
    config_file = rest.pop("config", None)
    rest.pop("_command", None)
    try:
        config = load_config(config_file, **rest)
        args = model_type(**own) if model_type is not None else None
    except (ConfigError, ValidationError) as e:
        print(f"skewlab: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=config.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logger.debug("running %s with %s", namespace._command, config.model_dump())
    try:
        return int(callback(args, config) or EXIT_OK)
    except (ConfigError, ValidationError) as e:
        print(f"skewlab: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SkewlabError as e:
        print(f"skewlab: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


def run():
    """Console script entry point."""
    sys.exit(main())
