"""Escape-time grids, Julia boundaries, Green's function and external rays."""
import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from skewlab.errors import EmptyBoundary, EmptyCloud, Inconclusive, RayBlocked
from skewlab.numeric import Poly, poly_roots, solve_preimages
from skewlab.skew import SkewProduct

logger = logging.getLogger(__name__)

BOUNDED = -1


class GridSpec(BaseModel):
    """Rectangular pixel lattice; pixel centers include the four corners."""

    model_config = ConfigDict(frozen=True)

    center_re: float = 0.0
    center_im: float = 0.0
    half_width: float = Field(2.0, gt=0)
    half_height: float = Field(2.0, gt=0)
    nx: int = Field(257, ge=2)
    ny: int = Field(257, ge=2)

    @model_validator(mode="after")
    def _finite(self):
        for v in (self.center_re, self.center_im, self.half_width, self.half_height):
            if not math.isfinite(v):
                raise ValueError("grid bounds must be finite")
        return self

    @classmethod
    def box(cls, x0: float, x1: float, y0: float, y1: float, nx: int, ny: int) -> "GridSpec":
        return cls(
            center_re=0.5 * (x0 + x1),
            center_im=0.5 * (y0 + y1),
            half_width=0.5 * (x1 - x0),
            half_height=0.5 * (y1 - y0),
            nx=nx,
            ny=ny,
        )

    @property
    def center(self) -> complex:
        return complex(self.center_re, self.center_im)

    @property
    def bounds(self) -> tuple:
        return (
            self.center_re - self.half_width,
            self.center_re + self.half_width,
            self.center_im - self.half_height,
            self.center_im + self.half_height,
        )

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.nx - 1)

    @property
    def dy(self) -> float:
        return 2.0 * self.half_height / (self.ny - 1)

    @property
    def pixel(self) -> float:
        return max(self.dx, self.dy)

    def xs(self) -> np.ndarray:
        x0, x1, _, _ = self.bounds
        return np.linspace(x0, x1, self.nx)

    def ys(self) -> np.ndarray:
        """Row coordinates, top row first."""
        _, _, y0, y1 = self.bounds
        return np.linspace(y1, y0, self.ny)

    def rows(self, start: int, stop: int) -> np.ndarray:
        return self.xs()[None, :] + 1j * self.ys()[start:stop, None]

    def lattice(self) -> np.ndarray:
        return self.rows(0, self.ny)


@dataclass(frozen=True, eq=False)
class EscapeGrid:
    spec: GridSpec
    iters: np.ndarray
    maxiter: int
    radius: float

    @property
    def bounded(self) -> np.ndarray:
        return self.iters == BOUNDED

    def bounded_points(self) -> np.ndarray:
        return self.spec.lattice()[self.bounded]


class CloudTag(str, enum.Enum):
    BaseJulia = "base-julia"
    FiberJulia = "fiber-julia"
    Postcritical = "postcritical"
    J2Sample = "j2-sample"
    Generic = "generic"


@dataclass(eq=False)
class PointCloud:
    """Finite sample of C (shape (n,)) or C^2 (shape (n, 2)).

    ``image_index[i]`` is the index of the sample that the base polynomial
    maps sample i to, or -1 when unknown. Clouds built by backward iteration
    carry it, which makes forward base orbits exact on the sample.
    """

    pts: np.ndarray
    tag: CloudTag = CloudTag.Generic
    image_index: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pts = np.asarray(self.pts, dtype=complex)
        if self.pts.ndim == 1 and self.pts.size == 0:
            self.pts = self.pts.reshape(0)

    def __len__(self) -> int:
        return int(self.pts.shape[0])

    @property
    def dimension(self) -> int:
        return 1 if self.pts.ndim == 1 else 2

    def real_coords(self) -> np.ndarray:
        if self.dimension == 1:
            return np.column_stack([self.pts.real, self.pts.imag])
        return np.column_stack(
            [self.pts[:, 0].real, self.pts[:, 0].imag, self.pts[:, 1].real, self.pts[:, 1].imag]
        )

    def forward_index(self, i: np.ndarray, steps: int) -> np.ndarray:
        if self.image_index is None:
            raise ValueError("cloud carries no image index")
        i = np.asarray(i)
        for _ in range(steps):
            i = self.image_index[i]
        return i

    def dedup(self, eps: float) -> "PointCloud":
        keep = _first_in_cell(self.real_coords(), eps)
        return PointCloud(self.pts[keep], self.tag, meta=dict(self.meta))


def _first_in_cell(coords: np.ndarray, eps: float) -> np.ndarray:
    if len(coords) == 0:
        return np.zeros(0, dtype=int)
    keys = np.floor(coords / eps).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return np.sort(first)


@dataclass(frozen=True)
class GreenSample:
    z: complex
    g: float
    escape_iter: Optional[int] = None


@dataclass
class ExternalRayTrace:
    theta: Fraction
    points: np.ndarray
    potentials: np.ndarray
    landing: Optional[complex] = None
    landed: bool = False


class Connectivity(str, enum.Enum):
    Connected = "connected"
    Disconnected = "disconnected"


@dataclass(frozen=True)
class ConnectivityResult:
    status: Connectivity
    escaping: tuple = ()


def map_rows(fn: Callable[[int, int], np.ndarray], ny: int, threads: int = 1) -> np.ndarray:
    """Evaluate ``fn(start, stop)`` on row blocks and stack them in order.

    Every row depends only on its own coordinates, so the result does not
    depend on ``threads``.
    """
    block = 16
    starts = list(range(0, ny, block))
    if threads <= 1 or len(starts) == 1:
        return np.vstack([fn(s, min(s + block, ny)) for s in starts])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda s: fn(s, min(s + block, ny)), starts))
    return np.vstack(parts)


def default_radius(p: Poly) -> float:
    return 1.0 + p.l1_norm


def _escape_counts(step: Callable, z0: np.ndarray, maxiter: int, radius: float) -> np.ndarray:
    counts = np.full(z0.shape, BOUNDED, dtype=np.int32)
    z = z0.copy()
    live = np.abs(z) <= radius
    counts[~live] = 0
    for k in range(1, maxiter + 1):
        idx = np.nonzero(live)
        if idx[0].size == 0:
            break
        values = step(k - 1, z[idx])
        z[idx] = values
        out = ~(np.abs(values) <= radius)
        counts[idx[0][out], idx[1][out]] = k
        live[idx[0][out], idx[1][out]] = False
    return counts


def filled_julia_base(
    p: Poly,
    spec: GridSpec,
    maxiter: int = 200,
    radius: Optional[float] = None,
    threads: int = 1,
) -> EscapeGrid:
    radius = default_radius(p) if radius is None else radius
    if radius < default_radius(p):
        raise ValueError(f"escape radius {radius} below the absorbing radius {default_radius(p)}")

    def block(start: int, stop: int) -> np.ndarray:
        return _escape_counts(lambda k, z: p(z), spec.rows(start, stop), maxiter, radius)

    return EscapeGrid(spec, map_rows(block, spec.ny, threads), maxiter, radius)


def base_orbit(p: Poly, z: complex, n: int) -> np.ndarray:
    out = np.empty(n + 1, dtype=complex)
    out[0] = z
    for k in range(n):
        out[k + 1] = p(out[k]) if abs(out[k]) < 1e150 else out[k]
    return out


def fiber_filled_julia(
    f: SkewProduct,
    z: complex,
    spec: GridSpec,
    maxiter: int = 200,
    radius: Optional[float] = None,
    threads: int = 1,
    orbit_of_z: Optional[Sequence[complex]] = None,
) -> EscapeGrid:
    """Escape grid of w -> Q_z^k(w) over the base orbit of z.

    ``orbit_of_z`` supplies z, p(z), ... when the base orbit is known more
    accurately than forward iteration gives it.
    """
    radius = f.fiber_escape_radius if radius is None else radius
    if radius < f.fiber_escape_radius:
        raise ValueError(f"escape radius {radius} below {f.fiber_escape_radius}")
    zs = base_orbit(f.base, z, maxiter) if orbit_of_z is None else np.asarray(orbit_of_z)
    if len(zs) < maxiter:
        raise ValueError("base orbit shorter than maxiter")

    def block(start: int, stop: int) -> np.ndarray:
        return _escape_counts(lambda k, w: f.fiber(zs[k], w), spec.rows(start, stop), maxiter, radius)

    return EscapeGrid(spec, map_rows(block, spec.ny, threads), maxiter, radius)


def boundary_extract(grid: EscapeGrid) -> PointCloud:
    """Pixel centers of bounded pixels with an escaping 4-neighbour.

    Raises
    ------
    EmptyBoundary
        the grid is entirely bounded or entirely escaping
    """
    inside = grid.bounded
    if inside.all() or not inside.any():
        raise EmptyBoundary("grid has no bounded/escaping interface")
    ny, nx = inside.shape
    padded = np.pad(inside, 1, mode="edge")
    touches = (
        ~padded[:-2, 1:-1] | ~padded[2:, 1:-1] | ~padded[1:-1, :-2] | ~padded[1:-1, 2:]
    )
    mask = inside & touches
    if not mask.any():
        raise EmptyBoundary("no bounded pixel touches an escaping one")
    return PointCloud(grid.spec.lattice()[mask], CloudTag.Generic, meta={"pixel": grid.spec.pixel})


def repelling_fixed_point(p: Poly) -> complex:
    """Repelling fixed point with the largest real part."""
    candidates = [
        r.value for r in poly_roots(p - Poly([0.0, 1.0])) if abs(p.derivative()(r.value)) > 1.0
    ]
    if not candidates:
        raise Inconclusive("no repelling fixed point")
    return max(candidates, key=lambda v: (round(v.real, 12), -abs(v.imag)))


def base_julia_sample(
    p: Poly,
    depth: Optional[int] = None,
    seed: Optional[complex] = None,
    max_points: int = 20000,
    resolution: float = 1e-9,
    isolation: float = 0.0,
) -> PointCloud:
    """Sample J_p by backward iteration from a repelling fixed point.

    Preimages of a repelling fixed point are dense in J_p. The returned cloud
    records for each sample the index of its image, so p maps sample i onto
    sample ``image_index[i]``; the seed maps to itself.

    Parameters
    ----------
    depth : int, optional
        number of backward levels; by default as many as ``max_points`` allows
    resolution : float
        preimages falling in an occupied cell of this size are dropped
    isolation : float
        preimages closer than this to the seed are dropped together with
        their own preimages, leaving the seed alone in its neighbourhood
    """
    seed = repelling_fixed_point(p) if seed is None else complex(seed)
    if depth is None:
        depth = max(1, int(math.log(max_points) / math.log(p.degree)))
    pts: List[complex] = [seed]
    image: List[int] = [0]
    levels: List[int] = [0]
    seen = {_cell(seed, resolution)}
    frontier = np.array([0])
    for level in range(1, depth + 1):
        if frontier.size == 0 or len(pts) >= max_points:
            break
        pre = solve_preimages(p, np.asarray(pts)[frontier])
        new: List[int] = []
        budget = max_points - len(pts)
        order = [(i, j) for i in range(pre.shape[0]) for j in range(pre.shape[1])]
        if len(order) > budget:
            pick = np.linspace(0, len(order) - 1, budget).astype(int)
            order = [order[k] for k in pick]
        for i, j in order:
            v = complex(pre[i, j])
            key = _cell(v, resolution)
            if key in seen or abs(v - seed) < isolation:
                continue
            seen.add(key)
            pts.append(v)
            image.append(int(frontier[i]))
            levels.append(level)
            new.append(len(pts) - 1)
        frontier = np.array(new, dtype=int)
    logger.debug("backward iteration: %d samples at depth %d", len(pts), depth)
    return PointCloud(
        np.asarray(pts),
        CloudTag.BaseJulia,
        image_index=np.asarray(image, dtype=int),
        meta={"seed": seed, "level": np.asarray(levels), "depth": depth},
    )


def _cell(v: complex, resolution: float) -> tuple:
    return (math.floor(v.real / resolution), math.floor(v.imag / resolution))


def green_potential(
    p: Poly, z: complex, maxiter: int = 500, radius: Optional[float] = None
) -> GreenSample:
    """G(z) = lim d^-n log|p^n(z)| for monic p."""
    d = p.degree
    bailout = max(default_radius(p) if radius is None else radius, 1e8)
    w = complex(z)
    for n in range(maxiter + 1):
        if abs(w) > bailout:
            return GreenSample(complex(z), math.log(abs(w)) / d**n, n)
        w = p(w)
    return GreenSample(complex(z), 0.0, None)


def _newton_iterate_root(p: Poly, dp: Poly, m: int, target: complex, z: complex):
    for _ in range(80):
        value, deriv = z, 1.0 + 0j
        for _ in range(m):
            deriv *= dp(value)
            value = p(value)
        if deriv == 0 or not np.isfinite(value):
            return None
        step = (value - target) / deriv
        z -= step
        if abs(step) <= 1e-14 * (1.0 + abs(z)):
            return z
    return z if abs(step) <= 1e-9 * (1.0 + abs(z)) else None


def trace_external_ray(
    p: Poly,
    theta: Union[Fraction, str, float],
    depth: int = 20,
    substeps: int = 8,
    radius: float = 1e3,
    tol: float = 1e-6,
) -> ExternalRayTrace:
    """Backward continuation of R_p(theta) from potential log(radius).

    Point j sits at potential log(radius) / d^(j/substeps) and solves
    p^m(z) = exp(g d^m) exp(2 pi i d^m theta) by Newton's method seeded at
    point j-1, where m = ceil(j/substeps).

    Raises
    ------
    RayBlocked
        Newton continuation stalled, typically at a precritical point
    """
    if isinstance(theta, float):
        theta = Fraction(theta).limit_denominator(2**32)
    theta = Fraction(theta) % 1
    if theta.denominator > 2**32:
        raise ValueError("angle denominator above 2^32")
    if not p.is_monic:
        raise ValueError("external rays need a monic polynomial")
    d = p.degree
    dp = p.derivative()
    g0 = math.log(radius)
    z = radius * complex(math.cos(2 * math.pi * theta), math.sin(2 * math.pi * theta))
    points = [z]
    potentials = [g0]
    last_step = None
    for j in range(1, depth * substeps + 1):
        g = g0 / d ** (j / substeps)
        m = -(-j // substeps)
        angle = float((theta * d**m) % 1)
        target = math.exp(g * d**m) * complex(math.cos(2 * math.pi * angle), math.sin(2 * math.pi * angle))
        z_next = _newton_iterate_root(p, dp, m, target, z)
        blocked = z_next is None
        if not blocked:
            step = abs(z_next - z)
            if last_step is not None and step > 8.0 * last_step + 1e-12:
                blocked = True
        if blocked:
            trace = ExternalRayTrace(theta, np.asarray(points), np.asarray(potentials))
            raise RayBlocked(f"ray {theta} blocked below potential {potentials[-1]:.3e}", potentials[-1], trace)
        last_step = abs(z_next - z)
        z = z_next
        points.append(z)
        potentials.append(g)
    pts = np.asarray(points)
    tail = pts[-8:]
    diameter = float(np.abs(tail[:, None] - tail[None, :]).max())
    landed = diameter < tol
    return ExternalRayTrace(theta, pts, np.asarray(potentials), complex(pts[-1]) if landed else None, landed)


def _nonempty(*clouds: PointCloud):
    for c in clouds:
        if len(c) == 0:
            raise EmptyCloud("point cloud is empty")
    if len({c.dimension for c in clouds}) != 1:
        raise ValueError("clouds live in different dimensions")


def hausdorff_distance(a: PointCloud, b: PointCloud) -> float:
    _nonempty(a, b)
    ca, cb = a.real_coords(), b.real_coords()
    forward, _ = cKDTree(cb).query(ca)
    backward, _ = cKDTree(ca).query(cb)
    return float(max(forward.max(), backward.max()))


def min_distance(a: PointCloud, b: PointCloud) -> float:
    _nonempty(a, b)
    dist, _ = cKDTree(b.real_coords()).query(a.real_coords())
    return float(dist.min())


def connectivity_test(p: Poly, maxiter: int = 500, radius: Optional[float] = None) -> ConnectivityResult:
    """Connected iff every critical point of p stays bounded through maxiter.

    Raises
    ------
    Inconclusive
        a critical orbit ends between radius*(1-1e-6) and radius
    """
    if p.degree < 2:
        raise ValueError("degree must be at least 2")
    radius = default_radius(p) if radius is None else radius
    escaping = []
    for root in poly_roots(p.derivative()):
        z = root.value
        escaped = False
        for _ in range(maxiter):
            z = p(z)
            if abs(z) > radius:
                escaped = True
                break
        if escaped:
            escaping.append(root.value)
        elif abs(z) > radius * (1 - 1e-6):
            raise Inconclusive(f"critical orbit of {root.value} unresolved after {maxiter} steps")
    if escaping:
        return ConnectivityResult(Connectivity.Disconnected, tuple(escaping))
    return ConnectivityResult(Connectivity.Connected)


def attracting_cycle(
    p: Poly,
    start: complex,
    radius: Optional[float] = None,
    warmup: int = 4000,
    max_period: int = 64,
    tol: float = 1e-9,
) -> Optional[tuple]:
    """Attracting cycle on which the orbit of ``start`` settles, or None.

    None covers escape, slow (parabolic) convergence and periods above
    ``max_period``.
    """
    radius = default_radius(p) if radius is None else radius
    dp = p.derivative()
    z = complex(start)
    for _ in range(warmup):
        z = p(z)
        if abs(z) > radius:
            return None
    w = z
    for k in range(1, max_period + 1):
        w = p(w)
        if abs(w - z) < tol * (1.0 + abs(z)):
            cycle = [z]
            for _ in range(k - 1):
                cycle.append(p(cycle[-1]))
            multiplier = np.prod([dp(x) for x in cycle])
            return tuple(cycle) if abs(multiplier) < 1.0 else None
    return None


def single_linkage(coords: np.ndarray, radius: float, norm: float = 2.0) -> np.ndarray:
    """Cluster labels 0..k-1 joining points closer than ``radius``.

    Labels are ordered by first appearance.
    """
    n = len(coords)
    if n == 0:
        return np.zeros(0, dtype=int)
    pairs = cKDTree(coords).query_pairs(radius, p=norm, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    _, first = np.unique(raw, return_index=True)
    relabel = np.argsort(np.argsort(first))
    return relabel[raw]


def pixel_components(cloud: PointCloud, pixel: float, reach: int = 2) -> np.ndarray:
    """Label base samples by connected pixel components.

    Samples are snapped to a lattice of spacing ``pixel``; occupied pixels
    within ``reach`` pixels of each other are connected.
    """
    if cloud.dimension != 1:
        raise ValueError("pixel components are defined for base clouds")
    if len(cloud) == 0:
        return np.zeros(0, dtype=int)
    cells = np.floor(cloud.real_coords() / pixel)
    return single_linkage(cells, reach + 0.5, norm=np.inf)


def bounded_components(grid: EscapeGrid) -> int:
    """Number of 8-connected components of the bounded pixel set."""
    _, count = ndimage.label(grid.bounded, structure=np.ones((3, 3), dtype=bool))
    return int(count)
