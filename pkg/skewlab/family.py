"""The real biquadratic family p_{a,b}(z) = (z^2 + a)^2 + b and the skew products built on it."""
import enum
import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from skewlab.errors import (
    DegreeMismatch,
    Inconclusive,
    NonConvergence,
    NoRealFixedPoint,
    NotBracketed,
    PerturbationTooLarge,
    PerturbationTooSmall,
    RangeError,
)
from skewlab.julia import GridSpec, PointCloud, attracting_cycle, base_julia_sample, map_rows
from skewlab.numeric import Poly, poly_roots, roots_batch
from skewlab.skew import BiPoly, SkewProduct

logger = logging.getLogger(__name__)

T_MIN = 4.0 ** (-1.0 / 3.0)
T_MAX = 4.0 ** (1.0 / 3.0)
A_MIN = -2.0
A_MAX = -(2.0 ** (1.0 / 3.0)) / 4.0
MAX_PERIOD_INDEX = 8
_RANGE_SLACK = 1e-12
# |w| > 5/2 escapes under w^4 + 4(2 - z) whenever |z - 2| <= 5
EXAMPLE_FIBER_RADIUS = 2.5


class BiquadParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float
    b: float

    @field_validator("a", "b")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("parameters must be finite")
        return v

    def poly(self) -> Poly:
        a, b = self.a, self.b
        return Poly([a * a + b, 0.0, 2.0 * a, 0.0, 1.0])

    def __call__(self, z):
        return (z * z + self.a) ** 2 + self.b

    def derivative(self, z):
        return 4.0 * z * (z * z + self.a)


@dataclass(frozen=True)
class BetaResult:
    beta: float
    multiplier: float
    is_repelling: bool


@dataclass(frozen=True)
class CriticalData:
    points: Tuple[complex, complex, complex]
    values: Tuple[complex, complex, complex]


class LocusLabel(enum.IntEnum):
    Connected = 0
    Escaping = 1
    BoundaryWithinTol = 2
    Inconclusive = 3


@dataclass(frozen=True)
class LocusClass:
    label: LocusLabel
    escaping: Tuple[complex, ...] = ()

    def __post_init__(self):
        if self.label == LocusLabel.Escaping and not self.escaping:
            raise ValueError("an escaping label needs the escaping critical points")


@dataclass(frozen=True, eq=False)
class LocusGrid:
    spec: GridSpec
    labels: np.ndarray
    maxiter: int


@dataclass(frozen=True, eq=False)
class ExampleInstance:
    """The perturbed example f_n(z, w) = (p_n(z), w^4 + 4(2 - z)) and its data."""

    n: int
    params: BiquadParams
    eta: float
    f: SkewProduct
    beta_n: float
    alpha_n: complex
    epsilon_n: float
    superattracting: BiquadParams
    cycle: Tuple[complex, ...]
    julia: PointCloud

    @property
    def period(self) -> int:
        return len(self.cycle)

    @property
    def saddle(self) -> Tuple[complex, complex]:
        return complex(self.beta_n), self.alpha_n


def _check_range(name: str, value: float, lo: float, hi: float):
    if not (lo - _RANGE_SLACK <= value <= hi + _RANGE_SLACK):
        raise RangeError(f"{name}={value} outside [{lo}, {hi}]")


def per1_curve(t: float) -> BiquadParams:
    """Parameters with a real fixed point t/2 of multiplier 1."""
    _check_range("t", t, T_MIN, T_MAX)
    return BiquadParams(a=1.0 / (2.0 * t) - t * t / 4.0, b=t / 2.0 - 1.0 / (4.0 * t * t))


def preper11_b(a: float) -> float:
    """b on the curve where the critical value p(0) is the beta fixed point."""
    _check_range("a", a, A_MIN, A_MAX)
    return -a * a + math.sqrt(max(-2.0 * a, 0.0))


def preper21_a(b: float) -> float:
    """a on the curve where p(b) = -beta, the branch a = -b^2 + sqrt(-2b)."""
    _check_range("b", b, A_MIN, A_MAX)
    return -b * b + math.sqrt(max(-2.0 * b, 0.0))


def rejected_branch_g(b: float) -> float:
    """g(-b) = 4b sqrt(-2b) - 1 for the branch a = -b^2 - sqrt(-2b); negative on the whole range."""
    return 4.0 * b * math.sqrt(-2.0 * b) - 1.0


def curve_samples(count: int = 256) -> Dict[str, np.ndarray]:
    """Points of Per_1(1), Preper_(1)1 and Preper_(2)1 as (t, a, b) columns."""
    t = np.linspace(T_MIN, T_MAX, count)
    s = np.linspace(A_MIN, A_MAX, count)
    pre11 = -s * s + np.sqrt(-2.0 * s)
    return {
        "per1": np.column_stack([t, 1.0 / (2.0 * t) - t * t / 4.0, t / 2.0 - 1.0 / (4.0 * t * t)]),
        "preper11": np.column_stack([s, s, pre11]),
        "preper21": np.column_stack([s, pre11, s]),
    }


def critical_points(params: BiquadParams) -> CriticalData:
    root = complex(np.sqrt(complex(-params.a)))
    points = (0j, root, -root)
    return CriticalData(points, tuple(complex(params(c)) for c in points))


def semiconjugacy_check(a: float, b: float, atol: float = 1e-12) -> bool:
    """s_a o p_{a,b} == p_{b,a} o s_a with s_c(z) = z^2 + c, compared coefficientwise."""
    s_a = Poly([a, 0.0, 1.0])
    lhs = s_a.compose(BiquadParams(a=a, b=b).poly())
    rhs = BiquadParams(a=b, b=a).poly().compose(s_a)
    return lhs.allclose(rhs, atol=atol)


def _beta_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Largest real fixed point for each (a, b); NaN where there is none."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    coeffs = np.zeros((a.size, 5))
    coeffs[:, 0] = a * a + b
    coeffs[:, 1] = -1.0
    coeffs[:, 2] = 2.0 * a
    coeffs[:, 4] = 1.0
    z = roots_batch(coeffs)
    real = np.where(np.abs(z.imag) < 1e-6, z.real, -np.inf).max(axis=1)
    beta = np.where(np.isfinite(real), real, np.nan)
    ok = np.isfinite(beta)
    x = beta[ok]
    aa, bb = a[ok], b[ok]
    for _ in range(8):
        g = (x * x + aa) ** 2 + bb - x
        dg = 4.0 * x * (x * x + aa) - 1.0
        ddg = 12.0 * x * x + 4.0 * aa
        # near a double root, settle on the zero of g' instead
        tangent = np.abs(dg) < 1e-6
        step = np.where(tangent, dg / np.where(ddg == 0, 1.0, ddg), g / np.where(dg == 0, 1.0, dg))
        x = x - step
    beta[ok] = x
    return beta


def beta_fixed(params: BiquadParams) -> BetaResult:
    """The beta fixed point, the largest real root of p(x) - x.

    Raises
    ------
    NoRealFixedPoint
        p(x) > x on the whole real line
    """
    beta = float(_beta_batch(np.array([params.a]), np.array([params.b]))[0])
    if not math.isfinite(beta):
        raise NoRealFixedPoint(f"p_{{{params.a},{params.b}}} has no real fixed point")
    multiplier = float(params.derivative(beta))
    return BetaResult(beta, multiplier, abs(multiplier) > 1.0 + 1e-9)


def _escape_radius(a, b):
    return 2.0 + 2.0 * np.abs(a) + np.abs(a * a + b)


def _critical_orbits(a: np.ndarray, b: np.ndarray, maxiter: int):
    """Iterate the three critical points; returns (escaped, unresolved) of shape (3, ...)."""
    radius = _escape_radius(a, b)
    root = np.sqrt((-a).astype(complex))
    z = np.stack([np.zeros_like(root), root, -root])
    escaped = np.zeros(z.shape, dtype=bool)
    for _ in range(maxiter):
        live = ~escaped
        if not live.any():
            break
        zl = z[live]
        zl = (zl * zl + np.broadcast_to(a, z.shape)[live]) ** 2 + np.broadcast_to(b, z.shape)[live]
        z[live] = zl
        escaped[live] = ~(np.abs(zl) <= np.broadcast_to(radius, z.shape)[live])
    unresolved = ~escaped & (np.abs(z) > radius * (1.0 - 1e-6))
    return escaped, unresolved


def _classify_arrays(a: np.ndarray, b: np.ndarray, maxiter: int, tol: float):
    shape = a.shape
    beta = _beta_batch(a, b).reshape(shape)
    escaped, unresolved = _critical_orbits(a, b, maxiter)
    fast = (a < 0) & np.isfinite(beta)
    with np.errstate(invalid="ignore"):
        lower = b + beta
        upper = beta - (a * a + b)
        # differences at the rounding level of the inputs are exact zeros
        noise = 16 * np.finfo(float).eps * (1 + a * a + np.abs(b) + np.abs(beta))
        lower = np.where(np.abs(lower) <= noise, 0.0, lower)
        upper = np.where(np.abs(upper) <= noise, 0.0, upper)
    # both curves meet only at the tip (-2, -2) of the locus
    tip = fast & (lower == 0) & (upper == 0)
    near = (
        fast
        & ~tip
        & (((np.abs(lower) <= tol) & (upper >= -tol)) | ((np.abs(upper) <= tol) & (lower >= -tol)))
    )
    inside = fast & (lower > tol) & (upper > tol)
    labels = np.full(shape, LocusLabel.Connected, dtype=np.int8)
    any_escaped = escaped.any(axis=0)
    any_unresolved = unresolved.any(axis=0)
    labels[any_escaped] = LocusLabel.Escaping
    labels[~any_escaped & (any_unresolved | (fast & ~inside))] = LocusLabel.Inconclusive
    labels[inside | tip] = LocusLabel.Connected
    labels[near] = LocusLabel.BoundaryWithinTol
    return labels, escaped


def classify_params(params: BiquadParams, maxiter: int = 500, tol: float = 1e-9) -> LocusClass:
    """Place (a, b) relative to the connectedness locus.

    For a < 0 the locus is cut out by -beta <= b and p(0) <= beta; otherwise
    the critical orbits 0 and +-sqrt(-a) are iterated. Parameters where one
    inequality holds or fails by at most ``tol`` are BoundaryWithinTol. The
    Chebyshev map (-2, -2), where both hold with equality, is the tip of the
    locus and is Connected; differences at rounding level count as equality.
    """
    a = np.array([params.a])
    b = np.array([params.b])
    labels, escaped = _classify_arrays(a, b, maxiter, tol)
    label = LocusLabel(int(labels[0]))
    if label == LocusLabel.Escaping:
        points = critical_points(params).points
        hits = dict.fromkeys(c for c, e in zip(points, escaped[:, 0]) if e)
        return LocusClass(label, tuple(hits))
    if label == LocusLabel.Inconclusive:
        logger.warning("classification of (%g, %g) unresolved after %d steps", params.a, params.b, maxiter)
    return LocusClass(label)


def classify_grid(
    spec: GridSpec, maxiter: int = 200, tol: float = 1e-9, threads: int = 1
) -> LocusGrid:
    """Classify every parameter of a grid in the (a, b) plane (x = a, y = b)."""

    def block(start: int, stop: int) -> np.ndarray:
        ab = spec.rows(start, stop)
        labels, _ = _classify_arrays(ab.real.ravel(), ab.imag.ravel(), maxiter, tol)
        return labels.reshape(ab.shape)

    return LocusGrid(spec, map_rows(block, spec.ny, threads), maxiter)


def _largest_preimage_chain(a: np.ndarray, b: np.ndarray, start: np.ndarray, k: int) -> np.ndarray:
    x = start
    with np.errstate(invalid="ignore"):
        for _ in range(k):
            x = np.sqrt(-a + np.sqrt(x - b))
    return x


def _superattracting_residual(a: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    with np.errstate(invalid="ignore"):
        b = -a * a + np.sqrt(-2.0 * a)
        c = np.sqrt(-a)
        second = ((b * b + a) ** 2) + b
        return second - _largest_preimage_chain(a, b, c, n - 1)


def _orbit_residual(params: BiquadParams, n: int) -> float:
    c = math.sqrt(-params.a)
    x = c
    for _ in range(n + 1):
        x = params(x)
    return abs(x - c)


def superattracting_param(n: int, tol: float = 1e-9) -> BiquadParams:
    """(a_n, b_n) on Preper_(1)1 where sqrt(-a) is periodic with p^(n+1)(sqrt(-a)) = sqrt(-a).

    The critical point sqrt(-a) maps to b, then to p(b) near beta; the root is
    located by bisection on p(b) - x_(n-1)(a), where x_k is the chain of
    largest real preimages of sqrt(-a). The scan is geometric towards
    a = -2, where the solutions accumulate.

    Raises
    ------
    NotBracketed
        no sign change along the curve
    NonConvergence
        the located parameter misses the period by ``tol`` or more
    """
    if n < 1:
        raise RangeError("n must be at least 1")
    if n > MAX_PERIOD_INDEX:
        raise RangeError(f"n={n} above the double-precision cap {MAX_PERIOD_INDEX}")
    offsets = np.geomspace(1e-14, A_MAX - A_MIN, 2**10)
    scan_a = A_MIN + offsets
    scan_a[-1] = A_MAX
    h = _superattracting_residual(scan_a, n)
    finite = np.isfinite(h)
    change = finite[:-1] & finite[1:] & (np.sign(h[:-1]) != np.sign(h[1:]))
    idx = np.nonzero(change)[0]
    if idx.size == 0:
        raise NotBracketed(f"no sign change for n={n}", scan=np.column_stack([scan_a, h]))
    lo, hi = float(scan_a[idx[0]]), float(scan_a[idx[0] + 1])
    h_lo = float(h[idx[0]])
    logger.debug("n=%d bracket [%r, %r]", n, lo, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        h_mid = float(_superattracting_residual(np.array([mid]), n)[0])
        if h_mid == 0.0:
            lo = hi = mid
            break
        if np.sign(h_mid) == np.sign(h_lo):
            lo, h_lo = mid, h_mid
        else:
            hi = mid
    ends = np.array([lo, hi])
    a = float(ends[np.argmin(np.abs(_superattracting_residual(ends, n)))])
    params = BiquadParams(a=a, b=preper11_b(a))
    residual = _orbit_residual(params, n)
    if residual >= tol:
        raise NonConvergence(f"n={n}: periodicity residual {residual:.3e} above {tol:.1e}")
    return params


def example_fiber() -> BiPoly:
    """q(z, w) = w^4 + 4(2 - z)."""
    c = np.zeros((2, 5), dtype=complex)
    c[0, 0] = 8.0
    c[1, 0] = -4.0
    c[0, 4] = 1.0
    return BiPoly(c)


def attracting_fiber_fixed_point(beta: float) -> complex:
    """Smallest-modulus root of w^4 - w + 4(2 - beta), attracting for q_beta."""
    roots = [r.value for r in poly_roots(Poly([4.0 * (2.0 - beta), -1.0, 0.0, 0.0, 1.0]))]
    alpha = min(roots, key=abs)
    if abs(4.0 * alpha**3) >= 1.0:
        raise Inconclusive(f"fiber over beta={beta} has no attracting fixed point")
    return alpha


def construct_example(
    n: int,
    eta: float = 1e-3,
    maxiter: int = 500,
    julia_depth: int = 7,
    isolation: float = 1e-2,
    min_eta: float = 1e-14,
) -> ExampleInstance:
    """Perturb the superattracting parameter to (a_n, b_n + eta) outside the locus.

    ``eta`` is divided by 10 until the attracting cycle of +-sqrt(-a)
    survives; the instance records the final value.

    Raises
    ------
    PerturbationTooLarge
        no eta down to ``min_eta`` keeps the attracting cycle
    PerturbationTooSmall
        the critical point 0 does not escape within ``maxiter``
    """
    base = superattracting_param(n)
    if eta <= 0:
        raise PerturbationTooSmall("eta must be positive")
    while True:
        params = BiquadParams(a=base.a, b=base.b + eta)
        radius = float(_escape_radius(params.a, params.b))
        cycle = attracting_cycle(params.poly(), math.sqrt(-params.a), radius=radius)
        if cycle is not None:
            break
        eta /= 10.0
        logger.debug("attracting cycle lost, shrinking eta to %g", eta)
        if eta < min_eta:
            raise PerturbationTooLarge(f"no perturbation above {min_eta} keeps the attracting cycle")
    p = params.poly()
    z = 0j
    for _ in range(maxiter):
        z = p(z)
        if abs(z) > radius:
            break
    else:
        raise PerturbationTooSmall(f"critical point 0 still bounded after {maxiter} steps (eta={eta})")
    beta = beta_fixed(params)
    alpha = attracting_fiber_fixed_point(beta.beta)
    julia = base_julia_sample(p, depth=julia_depth, seed=beta.beta, isolation=isolation)
    epsilon = float(np.abs(julia.pts.imag).max())
    f = SkewProduct(p, example_fiber(), fiber_escape_radius=EXAMPLE_FIBER_RADIUS, name=f"f_{n}")
    logger.info(
        "constructed f_%d: a=%.12g b=%.12g eta=%g beta=%.12g alpha=%s eps=%.3e",
        n, params.a, params.b, eta, beta.beta, alpha, epsilon,
    )
    return ExampleInstance(
        n=n,
        params=params,
        eta=eta,
        f=f,
        beta_n=beta.beta,
        alpha_n=alpha,
        epsilon_n=epsilon,
        superattracting=base,
        cycle=cycle,
        julia=julia,
    )


def product_preset(p: Poly, qw: Poly) -> SkewProduct:
    """f(z, w) = (p(z), q(w)).

    Raises
    ------
    DegreeMismatch
        deg p != deg q
    """
    if p.degree != qw.degree:
        raise DegreeMismatch(f"deg p = {p.degree} but deg q = {qw.degree}")
    return SkewProduct(p, BiPoly(qw.coeffs[None, :]), name="product")


def sumi_preset(R: float, eps: float, n: int) -> SkewProduct:
    """f(z, w) = (p_R^n(z), w^(2^n) + (z + sqrt R)/(2 sqrt R) t(w)).

    p_R(z) = z^2 - R, t(w) = h^n(w) - w^(2^n), h(w) = (w - eps)^2 - 1 + eps.
    """
    if R <= 0 or eps < 0 or n < 1:
        raise RangeError("need R > 0, eps >= 0 and n >= 1")
    base = Poly([-R, 0.0, 1.0]).iterate(n)
    h = Poly([eps * eps - 1.0 + eps, -2.0 * eps, 1.0])
    top = Poly.monomial(2**n)
    t = h.iterate(n) - top
    root = math.sqrt(R)
    coeffs = np.zeros((2, 2**n + 1), dtype=complex)
    coeffs[0, : len(top.coeffs)] += top.coeffs
    coeffs[0, : len(t.coeffs)] += t.coeffs / 2.0
    coeffs[1, : len(t.coeffs)] += t.coeffs / (2.0 * root)
    return SkewProduct(base, BiPoly(coeffs), name=f"sumi(R={R}, eps={eps}, n={n})")
