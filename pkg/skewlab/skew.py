"""Polynomial skew products f(z, w) = (p(z), q(z, w)) and their orbits."""
import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np

from skewlab.errors import DegenerateFiber, DegreeMismatch
from skewlab.numeric import Poly, poly_roots

logger = logging.getLogger(__name__)

ESCAPE_CAP = 1e10
ORBIT_WINDOW = 4096


@dataclass(frozen=True, eq=False)
class BiPoly:
    """Bivariate polynomial sum c[j][k] z^j w^k."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=complex)).copy()
        rows = np.nonzero(np.any(c != 0, axis=1))[0]
        cols = np.nonzero(np.any(c != 0, axis=0))[0]
        if rows.size == 0:
            c = np.zeros((1, 1), dtype=complex)
        else:
            c = c[: rows[-1] + 1, : cols[-1] + 1]
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_fiber_terms(cls, terms: Sequence[Poly]) -> "BiPoly":
        """Build from polynomials in z, one per power of w (``terms[k]`` multiplies w^k)."""
        rows = max(t.degree for t in terms) + 1
        c = np.zeros((rows, len(terms)), dtype=complex)
        for k, t in enumerate(terms):
            c[: len(t.coeffs), k] = t.coeffs
        return cls(c)

    @property
    def deg_w(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def deg_total(self) -> int:
        j, k = np.nonzero(self.coeffs)
        return int((j + k).max()) if j.size else 0

    def __call__(self, z, w):
        z = np.asarray(z, dtype=complex)
        acc = np.zeros(np.broadcast(z, np.asarray(w)).shape, dtype=complex)
        for k in range(self.deg_w, -1, -1):
            acc = acc * w + Poly(self.coeffs[:, k])(z)
        if acc.ndim == 0:
            return complex(acc)
        return acc

    def fiber_poly(self, z: complex) -> Poly:
        """q_z as a polynomial in w."""
        return Poly([Poly(self.coeffs[:, k])(z) for k in range(self.deg_w + 1)])

    def d_dw(self) -> "BiPoly":
        if self.deg_w == 0:
            return BiPoly([[0.0]])
        return BiPoly(self.coeffs[:, 1:] * np.arange(1, self.deg_w + 1)[None, :])

    def d_dz(self) -> "BiPoly":
        if self.coeffs.shape[0] == 1:
            return BiPoly([[0.0]])
        return BiPoly(self.coeffs[1:, :] * np.arange(1, self.coeffs.shape[0])[:, None])

    def top_part_at_z0(self, degree: int) -> complex:
        """Coefficient of w^degree in the degree-``degree`` homogeneous part at z = 0."""
        if degree >= self.coeffs.shape[1]:
            return 0j
        return complex(self.coeffs[0, degree])


@dataclass(frozen=True)
class Point2:
    z: complex
    w: complex
    escaped: bool = False

    def __iter__(self):
        return iter((self.z, self.w))

    def distance(self, other: "Point2") -> float:
        return float(np.hypot(abs(self.z - other.z), abs(self.w - other.w)))


@dataclass(frozen=True)
class RegularityReport:
    regular: bool
    resultant: complex
    margin: float


@dataclass(frozen=True, eq=False)
class SkewProduct:
    """f(z, w) = (p(z), q(z, w)) with a monic base of the fiber degree.

    Raises
    ------
    DegreeMismatch
        deg p differs from the degree of q in w, or is below 2
    """

    base: Poly
    fiber: BiPoly
    base_escape_radius: float = 0.0
    fiber_escape_radius: float = 0.0
    name: str = ""

    def __post_init__(self):
        d = self.base.degree
        if d < 2 or self.fiber.deg_w != d:
            raise DegreeMismatch(
                f"base degree {d} and fiber degree {self.fiber.deg_w} must agree and be >= 2"
            )
        if not self.base.is_monic:
            raise DegreeMismatch("base polynomial must be monic")
        if self.base_escape_radius <= 0:
            object.__setattr__(self, "base_escape_radius", 1.0 + self.base.l1_norm)
        if self.fiber_escape_radius <= 0:
            bound = self.base_escape_radius
            j = np.arange(self.fiber.coeffs.shape[0])[:, None]
            radius = 1.0 + float((np.abs(self.fiber.coeffs) * bound**j).sum())
            object.__setattr__(self, "fiber_escape_radius", radius)

    @property
    def degree(self) -> int:
        return self.base.degree

    @cached_property
    def regularity(self) -> RegularityReport:
        return regularity(self)

    @property
    def regular(self) -> bool:
        return self.regularity.regular

    @cached_property
    def fiber_dw(self) -> BiPoly:
        return self.fiber.d_dw()

    @cached_property
    def fiber_dz(self) -> BiPoly:
        return self.fiber.d_dz()

    def __call__(self, z, w):
        return self.base(z), self.fiber(z, w)

    def jacobian(self, z: complex, w: complex) -> np.ndarray:
        """Lower-triangular differential [[p'(z), 0], [dq/dz, dq/dw]]."""
        return np.array(
            [
                [self.base.derivative()(z), 0.0],
                [self.fiber_dz(z, w), self.fiber_dw(z, w)],
            ],
            dtype=complex,
        )


@dataclass
class Orbit:
    """Forward orbit record keeping only the most recent ``window`` points.

    ``start`` is the iteration index of ``points[0]``.
    """

    points: deque = field(default_factory=deque)
    start: int = 0
    escaped_at: Optional[int] = None
    base_escaped_at: Optional[int] = None

    @property
    def length(self) -> int:
        return self.start + len(self.points)

    def tail(self, count: int) -> List[Point2]:
        return list(self.points)[-count:]


def iterate(f: SkewProduct, pt: Point2, n: int) -> Point2:
    """Return f^n(pt), or the last finite point flagged as escaped once a
    coordinate exceeds the escape cap."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    z, w = complex(pt.z), complex(pt.w)
    if pt.escaped:
        return pt
    for _ in range(n):
        z_next, w_next = f.base(z), f.fiber(z, w)
        if not (abs(z_next) <= ESCAPE_CAP and abs(w_next) <= ESCAPE_CAP):
            return Point2(z, w, escaped=True)
        z, w = z_next, w_next
    return Point2(z, w)


def iterate_base(p: Poly, z: complex, n: int) -> complex:
    for _ in range(n):
        z = p(z)
    return z


def fiber_composition(f: SkewProduct, z: complex, w: complex, k: int) -> complex:
    """Q_z^k(w) = q_{p^{k-1}(z)} o ... o q_z(w)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    for _ in range(k):
        z, w = f.base(z), f.fiber(z, w)
    return w


def orbit(f: SkewProduct, pt: Point2, n: int, window: int = ORBIT_WINDOW) -> Orbit:
    """Record up to ``n`` iterates of ``pt``, stopping at escape."""
    record = Orbit(points=deque(maxlen=window))
    z, w = complex(pt.z), complex(pt.w)
    for k in range(n + 1):
        if record.base_escaped_at is None and abs(z) > f.base_escape_radius:
            record.base_escaped_at = k
        if abs(z) > f.base_escape_radius or abs(w) > f.fiber_escape_radius:
            record.escaped_at = k
            break
        if len(record.points) == window:
            record.start += 1
        record.points.append(Point2(z, w))
        if k < n:
            z, w = f.base(z), f.fiber(z, w)
    return record


def critical_points_over(f: SkewProduct, z: complex, tol: float = 1e-12) -> List[complex]:
    """Distinct roots of dq/dw(z, .).

    Raises
    ------
    DegenerateFiber
        dq/dw vanishes identically at z
    """
    derivative = f.fiber_dw.fiber_poly(z)
    if derivative.degree == 0:
        if abs(derivative.coeffs[0]) == 0:
            raise DegenerateFiber(f"dq/dw vanishes identically at z={z}")
        return []
    return [r.value for r in poly_roots(derivative, tol=tol)]


def regularity(f: SkewProduct) -> RegularityReport:
    """Resultant test on the top-degree homogeneous parts (z^d, q_d(z, w)).

    z^d vanishes on the projective line only at [0:1], so the pair has a
    common zero iff q_d(0, 1) = 0; the resultant is q_d(0, 1)^d. A fiber of
    total degree above d has top part (0, q_D) and is never regular.
    """
    d = f.degree
    if f.fiber.deg_total > d:
        return RegularityReport(False, 0j, 0.0)
    lead = f.fiber.top_part_at_z0(d)
    resultant = lead**d
    return RegularityReport(abs(resultant) > 0.0, resultant, float(abs(lead)))


def is_regular(f: SkewProduct) -> bool:
    return regularity(f).regular


def iterate_many(f: SkewProduct, z: np.ndarray, w: np.ndarray, n: int):
    """Vectorised iteration; escaped entries are frozen and flagged."""
    z = np.array(z, dtype=complex)
    w = np.array(w, dtype=complex)
    escaped = np.zeros(z.shape, dtype=bool)
    for _ in range(n):
        live = ~escaped
        zn = f.base(z[live])
        wn = f.fiber(z[live], w[live])
        ok = (np.abs(zn) <= ESCAPE_CAP) & (np.abs(wn) <= ESCAPE_CAP)
        idx = np.nonzero(live)[0]
        z[idx[ok]] = zn[ok]
        w[idx[ok]] = wn[ok]
        escaped[idx[~ok]] = True
    return z, w, escaped
