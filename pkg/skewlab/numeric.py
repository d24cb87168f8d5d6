"""Complex polynomials, simultaneous root finding and outward-rounded intervals."""
import ast
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, NamedTuple, Sequence, Union

import numpy as np

from skewlab.errors import DomainError, NonConvergence

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps

Number = Union[int, float, complex]


@dataclass(frozen=True, eq=False)
class Poly:
    """Univariate complex polynomial, coefficients lowest degree first.

    Trailing zero coefficients are stripped on construction, so the leading
    coefficient is nonzero unless the polynomial is identically zero.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex)).copy()
        nonzero = np.nonzero(c)[0]
        c = c[: nonzero[-1] + 1] if nonzero.size else c[:1]
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def monomial(cls, degree: int, coefficient: Number = 1.0) -> "Poly":
        c = np.zeros(degree + 1, dtype=complex)
        c[degree] = coefficient
        return cls(c)

    @classmethod
    def from_roots(cls, roots: Iterable[Number]) -> "Poly":
        result = cls([1.0])
        for r in roots:
            result = result * cls([-r, 1.0])
        return result

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return complex(self.coeffs[-1])

    @property
    def is_monic(self) -> bool:
        return self.leading == 1.0

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.coeffs.imag == 0.0))

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def __call__(self, z):
        """Horner evaluation, works elementwise on numpy arrays."""
        acc = np.zeros_like(np.asarray(z, dtype=complex)) + self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            acc = acc * z + c
        if np.ndim(acc) == 0:
            return complex(acc)
        return acc

    def derivative(self) -> "Poly":
        if self.degree == 0:
            return Poly([0.0])
        return Poly(self.coeffs[1:] * np.arange(1, self.degree + 1))

    def __add__(self, other: Union["Poly", Number]) -> "Poly":
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly(_pad(self.coeffs, n) + _pad(other.coeffs, n))

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(-self.coeffs)

    def __sub__(self, other: Union["Poly", Number]) -> "Poly":
        return self + (-_as_poly(other))

    def __rsub__(self, other: Number) -> "Poly":
        return _as_poly(other) - self

    def __mul__(self, other: Union["Poly", Number]) -> "Poly":
        other = _as_poly(other)
        return Poly(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        result = Poly([1.0])
        base = self
        while k > 0:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def compose(self, inner: "Poly") -> "Poly":
        """Return ``self(inner(z))``."""
        result = Poly([self.coeffs[-1]])
        for c in self.coeffs[-2::-1]:
            result = result * inner + complex(c)
        return result

    def iterate(self, k: int) -> "Poly":
        """Return the k-th compositional iterate as a polynomial."""
        result = Poly([0.0, 1.0])
        for _ in range(k):
            result = self.compose(result)
        return result

    def allclose(self, other: "Poly", atol: float = 1e-12) -> bool:
        n = max(len(self.coeffs), len(other.coeffs))
        return bool(np.allclose(_pad(self.coeffs, n), _pad(other.coeffs, n), atol=atol))

    def __repr__(self) -> str:
        return f"Poly({np.round(self.coeffs, 12).tolist()})"


def _pad(c: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=complex)
    out[: len(c)] = c
    return out


def _as_poly(x: Union[Poly, Number]) -> Poly:
    return x if isinstance(x, Poly) else Poly([x])


def poly_eval(p: Poly, z: Number) -> complex:
    return p(z)


class Root(NamedTuple):
    value: complex
    multiplicity: int


def _horner_with_derivative(a: np.ndarray, z: np.ndarray):
    # a: (m, d+1) lowest first; z: (m, k)
    pv = np.broadcast_to(a[:, -1:], z.shape).astype(complex)
    dv = np.zeros_like(pv)
    for j in range(a.shape[1] - 2, -1, -1):
        dv = dv * z + pv
        pv = pv * z + a[:, j : j + 1]
    return pv, dv


def roots_batch(coeffs: np.ndarray, tol: float = 1e-12, max_iter: int = 800) -> np.ndarray:
    """Aberth simultaneous iteration over a batch of polynomials.

    Parameters
    ----------
    coeffs : np.ndarray
        shape (m, d+1), lowest degree first, every leading coefficient nonzero
    tol : float
        relative step size at which a root is considered settled

    Returns
    -------
    np.ndarray
        shape (m, d), all roots with repetition
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    m, n1 = coeffs.shape
    d = n1 - 1
    if d < 1:
        raise ValueError("degree must be at least 1")
    a = coeffs / coeffs[:, -1:]
    if d == 1:
        return -a[:, :1]
    radius = 1.0 + np.abs(a[:, :-1]).max(axis=1)
    k = np.arange(d)
    seeds = np.exp(1j * (2.0 * np.pi * k / d + 0.4)) * (1.0 + 0.05 * k / d)
    z = radius[:, None] * seeds[None, :]
    eye = np.eye(d, dtype=bool)
    active = np.ones(m, dtype=bool)
    for it in range(max_iter):
        za = z[active]
        pv, dv = _horner_with_derivative(a[active], za)
        dv = np.where(dv == 0, _EPS, dv)
        ratio = pv / dv
        diff = za[:, :, None] - za[:, None, :]
        diff[:, eye] = 1.0
        inv = 1.0 / diff
        inv[:, eye] = 0.0
        denom = 1.0 - ratio * inv.sum(axis=2)
        denom = np.where(denom == 0, _EPS, denom)
        step = ratio / denom
        za = za - step
        z[active] = za
        settled = np.all(np.abs(step) <= tol * (1.0 + np.abs(za)), axis=1)
        idx = np.nonzero(active)[0]
        active[idx[settled]] = False
        if not active.any():
            logger.debug("aberth converged after %d iterations", it + 1)
            break
    pv, _ = _horner_with_derivative(a, z)
    scale = np.maximum(
        1.0 + np.abs(a).sum(axis=1)[:, None],
        _horner_with_derivative(np.abs(a), np.abs(z))[0].real,
    )
    residual = np.abs(pv) / scale
    if np.any(residual >= max(tol, 1e3 * _EPS)):
        raise NonConvergence(
            f"root residual {residual.max():.3e} above tolerance after {max_iter} iterations"
        )
    return z


def merge_roots(values: Sequence[complex], radius: float) -> List[Root]:
    """Group approximations closer than ``radius`` (relative) into one root."""
    remaining = list(values)
    result: List[Root] = []
    while remaining:
        seed = remaining.pop(0)
        group = [seed]
        changed = True
        while changed:
            changed = False
            for v in list(remaining):
                if any(abs(v - g) <= radius * (1.0 + abs(g)) for g in group):
                    group.append(v)
                    remaining.remove(v)
                    changed = True
        result.append(Root(complex(np.mean(group)), len(group)))
    return result


def poly_roots(p: Poly, tol: float = 1e-12) -> List[Root]:
    """All complex roots of ``p`` with multiplicities merged.

    Raises
    ------
    NonConvergence
        the residual did not drop below ``tol`` within the iteration budget
    """
    if p.degree < 1:
        raise ValueError("degree must be at least 1")
    z = roots_batch(p.coeffs[None, :], tol=tol)[0]
    return merge_roots(sorted(z, key=lambda v: (v.real, v.imag)), 1e3 * tol)


def solve_preimages(p: Poly, values: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Solve ``p(z) = c`` for every c in ``values``; returns shape (len(values), d)."""
    values = np.asarray(values, dtype=complex).ravel()
    coeffs = np.broadcast_to(p.coeffs, (values.size, p.degree + 1)).copy()
    coeffs[:, 0] -= values
    return roots_batch(coeffs, tol=tol)


# ---------------------------------------------------------------------------
# Interval arithmetic


def _down(x: float) -> float:
    return math.nextafter(x, -math.inf)


def _up(x: float) -> float:
    return math.nextafter(x, math.inf)


IntervalLike = Union["RealInterval", int, float, Fraction]


@dataclass(frozen=True)
class RealInterval:
    """Closed real interval whose operations always contain the exact result."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def of(cls, x: IntervalLike) -> "RealInterval":
        if isinstance(x, RealInterval):
            return x
        if isinstance(x, Fraction):
            f = float(x)
            if Fraction(f) == x:
                return cls(f, f)
            return cls(_down(f), _up(f))
        if isinstance(x, int) and not isinstance(x, bool):
            f = float(x)
            if int(f) == x:
                return cls(f, f)
            return cls(_down(f), _up(f))
        f = float(x)
        return cls(f, f)

    @staticmethod
    def _outward(lo: float, hi: float) -> "RealInterval":
        slack = (hi - lo) * 2.0 * _EPS if math.isfinite(hi - lo) else 0.0
        return RealInterval(_down(lo - slack), _up(hi + slack))

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def certainly_positive(self) -> bool:
        return self.lo > 0.0

    def __add__(self, other: IntervalLike) -> "RealInterval":
        o = RealInterval.of(other)
        return self._outward(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self) -> "RealInterval":
        return RealInterval(-self.hi, -self.lo)

    def __sub__(self, other: IntervalLike) -> "RealInterval":
        o = RealInterval.of(other)
        return self._outward(self.lo - o.hi, self.hi - o.lo)

    def __rsub__(self, other: IntervalLike) -> "RealInterval":
        return RealInterval.of(other) - self

    def __mul__(self, other: IntervalLike) -> "RealInterval":
        o = RealInterval.of(other)
        products = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi]
        return self._outward(min(products), max(products))

    __rmul__ = __mul__

    def __truediv__(self, other: IntervalLike) -> "RealInterval":
        o = RealInterval.of(other)
        if o.lo <= 0.0 <= o.hi:
            raise DomainError(f"division by interval containing zero [{o.lo}, {o.hi}]")
        quotients = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi]
        return self._outward(min(quotients), max(quotients))

    def __rtruediv__(self, other: IntervalLike) -> "RealInterval":
        return RealInterval.of(other) / self

    def __abs__(self) -> "RealInterval":
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return -self
        return RealInterval(0.0, max(-self.lo, self.hi))

    def __pow__(self, n: int) -> "RealInterval":
        if not isinstance(n, int) or n < 0:
            raise DomainError("only nonnegative integer powers are supported")
        if n == 0:
            return RealInterval(1.0, 1.0)
        if n % 2 == 0:
            return _repeat(abs(self), n)
        return RealInterval(
            _repeat(RealInterval(self.lo, self.lo), n).lo,
            _repeat(RealInterval(self.hi, self.hi), n).hi,
        )

    def sqrt(self) -> "RealInterval":
        if self.hi < 0.0:
            raise DomainError(f"sqrt of negative interval [{self.lo}, {self.hi}]")
        lo = math.sqrt(max(self.lo, 0.0))
        return RealInterval(max(_down(lo), 0.0), _up(math.sqrt(self.hi)))

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"


def _repeat(x: RealInterval, n: int) -> RealInterval:
    result = x
    for _ in range(n - 1):
        result = result * x
    return result


def isqrt(x: IntervalLike) -> RealInterval:
    return RealInterval.of(x).sqrt()


class _IntervalEvaluator(ast.NodeVisitor):
    _functions = {"sqrt": isqrt, "abs": lambda x: abs(RealInterval.of(x))}

    def __init__(self, source: str, env: dict):
        self.source = source
        self.env = env

    def visit_Expression(self, node):
        return self.visit(node.body)

    def visit_Constant(self, node):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise DomainError(f"unsupported literal {node.value!r}")
        text = ast.get_source_segment(self.source, node) or repr(node.value)
        return RealInterval.of(Fraction(text))

    def visit_Name(self, node):
        if node.id not in self.env:
            raise DomainError(f"unbound name {node.id!r}")
        return RealInterval.of(self.env[node.id])

    def visit_UnaryOp(self, node):
        value = self.visit(node.operand)
        if isinstance(node.op, ast.USub):
            return -value
        if isinstance(node.op, ast.UAdd):
            return value
        raise DomainError("unsupported unary operator")

    def visit_BinOp(self, node):
        if isinstance(node.op, ast.Pow):
            if not isinstance(node.right, ast.Constant) or not isinstance(node.right.value, int):
                raise DomainError("exponent must be an integer literal")
            return self.visit(node.left) ** node.right.value
        left, right = self.visit(node.left), self.visit(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            return left / right
        raise DomainError("unsupported binary operator")

    def visit_Call(self, node):
        if not isinstance(node.func, ast.Name) or node.func.id not in self._functions:
            raise DomainError("only sqrt and abs may be called")
        if len(node.args) != 1:
            raise DomainError(f"{node.func.id} takes one argument")
        return self._functions[node.func.id](self.visit(node.args[0]))

    def generic_visit(self, node):
        raise DomainError(f"unsupported syntax {type(node).__name__}")


def interval_eval(expr: str, **env: IntervalLike) -> RealInterval:
    """Evaluate an arithmetic expression with outward-rounded intervals.

    Decimal literals are read exactly from the source text, so ``1e-7`` is
    enclosed by an interval containing the real number 10^-7.

    Example
    -------
        >>> interval_eval("64**3 * (d + 4*e/63)", d=RealInterval(0, 1e-7), e=1e-9)
    """
    tree = ast.parse(expr, mode="eval")
    return _IntervalEvaluator(expr, env).visit(tree)
