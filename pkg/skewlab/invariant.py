"""Saddle sets, stable-set classification of the critical locus, accumulation sets."""
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from skewlab.errors import (
    DegreeOverflow,
    EmptyBoundary,
    Inconclusive,
    PreconditionViolation,
    ResonanceError,
)
from skewlab.julia import (
    CloudTag,
    GridSpec,
    PointCloud,
    attracting_cycle,
    base_julia_sample,
    boundary_extract,
    fiber_filled_julia,
    min_distance,
    pixel_components,
    single_linkage,
)
from skewlab.numeric import Poly, merge_roots, poly_roots, roots_batch, solve_preimages
from skewlab.skew import Point2, SkewProduct, critical_points_over

logger = logging.getLogger(__name__)

UNRESOLVED = -1
MAX_SADDLE_PERIOD = 3
CAPTURE_RUN = 32


@dataclass(frozen=True)
class SaddlePoint:
    location: Point2
    period: int
    base_multiplier: complex
    fiber_multiplier: complex
    component_index: int = 1


@dataclass
class SaddleSetEstimate:
    saddles: List[SaddlePoint]
    cluster_radius: float

    @property
    def components(self) -> int:
        return max((s.component_index for s in self.saddles), default=0)

    def component_points(self, index: int) -> np.ndarray:
        """(k, 2) array of the saddles in component ``index``."""
        return np.array(
            [[s.location.z, s.location.w] for s in self.saddles if s.component_index == index],
            dtype=complex,
        ).reshape(-1, 2)


@dataclass
class CriticalSamples:
    """Critical points of the fibers over a base cloud.

    ``sample_index[i]`` is the position in ``base`` of the fiber that holds
    the critical point ``(z[i], w[i])``.
    """

    base: PointCloud
    sample_index: np.ndarray
    z: np.ndarray
    w: np.ndarray

    def __len__(self) -> int:
        return int(self.z.shape[0])


@dataclass
class StableClassification:
    z: np.ndarray
    w: np.ndarray
    labels: np.ndarray
    entry_time: np.ndarray
    components: int

    def counts(self) -> Dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}


class AccumulationKind(str, enum.Enum):
    Pointwise = "pt"
    Componentwise = "cc"
    Full = "full"


@dataclass(frozen=True)
class Cluster:
    center_z: complex
    center_w: complex
    count: int


@dataclass
class AccumulationEstimate:
    kind: AccumulationKind
    pts: PointCloud
    clusters: List[Cluster]
    params: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class UnstableArc:
    anchor: SaddlePoint
    direction: complex
    points: np.ndarray
    growth_iters: int
    seed_len: float
    side: float


@dataclass(frozen=True)
class AxiomAReport:
    base_hyperbolic: bool
    margin_J: float
    margin_A: float
    attracting_cycles: Tuple[tuple, ...] = ()
    skipped_fibers: int = 0

    @property
    def passed(self) -> bool:
        return self.base_hyperbolic and self.margin_J > 0 and self.margin_A > 0


@dataclass(frozen=True)
class VerticalExpansionReport:
    passed: bool
    negative_step: Tuple[Optional[int], ...]
    jump: Tuple[float, ...]


def _periodic_base_points(p: Poly, k: int) -> List[complex]:
    return [r.value for r in poly_roots(p.iterate(k) - Poly([0.0, 1.0]))]


def _fiber_cycle_poly(f: SkewProduct, zs: Sequence[complex]) -> Poly:
    result = Poly([0.0, 1.0])
    for z in zs:
        result = f.fiber.fiber_poly(z).compose(result)
    return result


def _minimal_period(f: SkewProduct, z: complex, w: complex, k: int, tol: float = 1e-8) -> int:
    z0, w0 = z, w
    for j in range(1, k + 1):
        z, w = f.base(z), f.fiber(z, w)
        if abs(z - z0) < tol * (1 + abs(z0)) and abs(w - w0) < tol * (1 + abs(w0)):
            return j
    return 0


def _newton_polish(q: Poly, x: complex, steps: int = 6) -> complex:
    dq = q.derivative()
    for _ in range(steps):
        d = dq(x)
        if d == 0:
            break
        x = x - q(x) / d
    return x


def find_saddles(
    f: SkewProduct, max_period: int = 1, cluster_eps: float = 1e-6, tol: float = 1e-8
) -> SaddleSetEstimate:
    """Saddle periodic points of period up to ``max_period``.

    Over every repelling base periodic point z* the fiber return map
    Q_{z*}^k is searched for attracting fixed points; saddles are grouped by
    single linkage at 10 * cluster_eps, component 1 holding the saddle with
    the largest real base coordinate.

    Raises
    ------
    DegreeOverflow
        ``max_period`` above the supported bound
    """
    if max_period > MAX_SADDLE_PERIOD:
        raise DegreeOverflow(
            f"max_period={max_period}: p^k(z) - z has degree {f.degree ** max_period}"
        )
    if max_period < 1:
        raise ValueError("max_period must be positive")
    identity = Poly([0.0, 1.0])
    found: List[SaddlePoint] = []
    for k in range(1, max_period + 1):
        base_return = f.base.iterate(k) - identity
        for z0 in _periodic_base_points(f.base, k):
            z0 = _newton_polish(base_return, z0)
            zs = [z0]
            for _ in range(k - 1):
                zs.append(f.base(zs[-1]))
            lam = complex(np.prod([f.base.derivative()(z) for z in zs]))
            if abs(lam) <= 1.0:
                continue
            fiber_return = _fiber_cycle_poly(f, zs)
            for root in poly_roots(fiber_return - identity):
                w0 = _newton_polish(fiber_return - identity, root.value)
                mu = complex(fiber_return.derivative()(w0))
                if abs(mu) >= 1.0 or _minimal_period(f, z0, w0, k) != k:
                    continue
                if any(abs(s.location.z - z0) < tol and abs(s.location.w - w0) < tol for s in found):
                    continue
                found.append(SaddlePoint(Point2(z0, w0), k, lam, mu))
    found.sort(key=lambda s: (-round(s.location.z.real, 9), round(s.location.z.imag, 9),
                              round(s.location.w.real, 9), round(s.location.w.imag, 9)))
    radius = 10.0 * cluster_eps
    if found:
        coords = PointCloud(np.array([[s.location.z, s.location.w] for s in found])).real_coords()
        labels = single_linkage(coords, radius)
        found = [
            SaddlePoint(s.location, s.period, s.base_multiplier, s.fiber_multiplier, int(c) + 1)
            for s, c in zip(found, labels)
        ]
    logger.debug("found %d saddle points in %d components", len(found), max((s.component_index for s in found), default=0))
    return SaddleSetEstimate(found, radius)


def critical_samples(f: SkewProduct, base: PointCloud) -> CriticalSamples:
    """All critical points of q_z for z in the base cloud."""
    derivative = f.fiber_dw
    if base.dimension != 1:
        raise ValueError("critical samples need a base cloud")
    if derivative.coeffs.shape[0] == 1:
        values = [r.value for r in poly_roots(derivative.fiber_poly(0.0))] if derivative.deg_w > 0 else []
        per_sample = [values] * len(base)
    else:
        powers = base.pts[:, None] ** np.arange(derivative.coeffs.shape[0])[None, :]
        rows = powers @ derivative.coeffs
        if np.all(rows[:, -1] != 0):
            roots = roots_batch(rows)
            per_sample = [[r.value for r in merge_roots(list(row), 1e-9)] for row in roots]
        else:
            per_sample = [critical_points_over(f, z) for z in base.pts]
    index = np.array([i for i, vals in enumerate(per_sample) for _ in vals], dtype=int)
    w = np.array([v for vals in per_sample for v in vals], dtype=complex)
    return CriticalSamples(base, index, base.pts[index] if index.size else np.zeros(0, complex), w)


def _step(f: SkewProduct, base: PointCloud, idx: np.ndarray, z: np.ndarray, w: np.ndarray):
    """One application of f; base points with a known image follow the cloud exactly."""
    w_next = f.fiber(z, w)
    if base.image_index is not None:
        idx = base.image_index[idx]
        z_next = base.pts[idx]
    else:
        z_next = f.base(z)
    return idx, z_next, w_next


def _escaped(f: SkewProduct, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    return ~((np.abs(z) <= f.base_escape_radius) & (np.abs(w) <= f.fiber_escape_radius))


def _orbit_table(f: SkewProduct, crit: CriticalSamples, steps: int):
    """Iterates (steps+1, m) of every critical sample and the first escape time."""
    m = len(crit)
    zs = np.empty((steps + 1, m), dtype=complex)
    ws = np.empty((steps + 1, m), dtype=complex)
    escaped_at = np.full(m, np.iinfo(np.int64).max, dtype=np.int64)
    idx, z, w = crit.sample_index.copy(), crit.z.copy(), crit.w.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(steps + 1):
            out = _escaped(f, z, w) & (escaped_at == np.iinfo(np.int64).max)
            escaped_at[out] = t
            gone = escaped_at <= t
            z = np.where(gone, 0, z)
            w = np.where(gone, 0, w)
            zs[t], ws[t] = z, w
            if t < steps:
                idx, z, w = _step(f, crit.base, idx, z, w)
    return zs, ws, escaped_at


def classify_critical(
    f: SkewProduct,
    saddle_est: SaddleSetEstimate,
    base_julia_samples: PointCloud,
    T: int = 256,
    tol: float = 1e-6,
    capture: int = CAPTURE_RUN,
) -> StableClassification:
    """Label every critical point over the base sample by its fate.

    Label i >= 1 once the orbit stays within ``tol`` of component i for
    ``capture`` consecutive steps, 0 once it escapes, UNRESOLVED otherwise.
    """
    crit = critical_samples(f, base_julia_samples)
    m = len(crit)
    labels = np.full(m, UNRESOLVED, dtype=int)
    entry = np.full(m, -1, dtype=int)
    comps = [saddle_est.component_points(c) for c in range(1, saddle_est.components + 1)]
    runs = np.zeros((len(comps), m), dtype=int)
    idx, z, w = crit.sample_index.copy(), crit.z.copy(), crit.w.copy()
    active = np.ones(m, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T + 1):
            out = active & _escaped(f, z, w)
            labels[out] = 0
            entry[out] = t
            active &= ~out
            for c, pts in enumerate(comps):
                dist = np.min(
                    np.hypot(np.abs(z[:, None] - pts[None, :, 0]), np.abs(w[:, None] - pts[None, :, 1])),
                    axis=1,
                )
                runs[c] = np.where(active & (dist < tol), runs[c] + 1, 0)
                hit = active & (runs[c] >= capture)
                labels[hit] = c + 1
                entry[hit] = t - capture + 1
                active &= ~hit
            if not active.any() or t == T:
                break
            idx, z, w = _step(f, crit.base, idx, z, w)
            z = np.where(active, z, 0)
            w = np.where(active, w, 0)
    unresolved = int(np.count_nonzero(labels == UNRESOLVED))
    if unresolved:
        logger.warning("%d of %d critical samples unresolved after %d steps", unresolved, m, T)
    return StableClassification(crit.z, crit.w, labels, entry, len(comps))


def postcritical_sample(f: SkewProduct, Z_samples: PointCloud, n_max: int = 32) -> PointCloud:
    """f^n(C_Z) for 1 <= n <= n_max, each orbit cut at its escape."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    crit = critical_samples(f, Z_samples)
    zs, ws, escaped_at = _orbit_table(f, crit, n_max)
    steps = np.arange(n_max + 1)[:, None]
    keep = (steps >= 1) & (steps < escaped_at[None, :])
    pts = np.column_stack([zs[keep], ws[keep]])
    return PointCloud(pts, CloudTag.Postcritical).dedup(1e-9)


def _chain_orbit(f: SkewProduct, base: PointCloud, i: int, n: int) -> np.ndarray:
    out = np.empty(n + 1, dtype=complex)
    if base.image_index is not None:
        idx = i
        for k in range(n + 1):
            out[k] = base.pts[idx]
            idx = base.image_index[idx]
        return out
    out[0] = base.pts[i]
    for k in range(n):
        out[k + 1] = f.base(out[k])
    return out


def _fiber_preimages(f: SkewProduct, orbit: np.ndarray, depth: int, points: int) -> np.ndarray:
    """Q_z^-depth of the circle |w| = fiber escape radius, thinned to ``points`` per level."""
    ws = f.fiber_escape_radius * np.exp(2j * np.pi * np.arange(points) / points)
    for k in range(depth - 1, -1, -1):
        ws = solve_preimages(f.fiber.fiber_poly(orbit[k]), ws).ravel()
        ws = ws[np.isfinite(ws)]
        if ws.size > points:
            ws = ws[np.linspace(0, ws.size - 1, points).astype(int)]
    return ws


def j2_sample(
    f: SkewProduct,
    base_julia: PointCloud,
    fiber_grid: Optional[GridSpec] = None,
    maxiter: int = 64,
    max_fibers: int = 64,
    threads: int = 1,
    method: Literal["backward", "pixels"] = "backward",
    depth: int = 8,
    points: int = 256,
) -> PointCloud:
    """Union of {z} x J_z over (a subset of) the base sample.

    Parameters
    ----------
    method : {"backward", "pixels"}
        ``backward`` pulls the circle |w| = fiber escape radius back
        ``depth`` times along the base orbit of z, which lands within a
        small Green level of J_z. ``pixels`` takes the boundary of the
        escape grid ``fiber_grid`` after ``maxiter`` steps; fibers without
        a boundary at that resolution are skipped and counted in
        ``meta["skipped"]``.
    """
    if len(base_julia) == 0:
        raise ValueError("base sample is empty")
    if method not in ("backward", "pixels"):
        raise ValueError(f"unknown j2 sampling method {method!r}")
    grid = fiber_grid or _default_fiber_grid()
    chosen = np.unique(np.linspace(0, len(base_julia) - 1, min(max_fibers, len(base_julia))).astype(int))
    parts = []
    skipped = 0
    for i in chosen:
        if method == "backward":
            orbit = _chain_orbit(f, base_julia, int(i), depth)
            ws = _fiber_preimages(f, orbit, depth, points)
            if ws.size == 0:
                skipped += 1
                continue
            parts.append(np.column_stack([np.full(ws.size, orbit[0]), ws]))
            continue
        orbit = _chain_orbit(f, base_julia, int(i), maxiter)
        escape = fiber_filled_julia(f, orbit[0], grid, maxiter=maxiter, orbit_of_z=orbit, threads=threads)
        try:
            boundary = boundary_extract(escape)
        except EmptyBoundary:
            skipped += 1
            continue
        parts.append(np.column_stack([np.full(len(boundary), orbit[0]), boundary.pts]))
    if skipped:
        logger.warning("j2 sample: %d of %d fibers had no boundary", skipped, len(chosen))
    pts = np.vstack(parts) if parts else np.zeros((0, 2), dtype=complex)
    meta = {"skipped": skipped, "fibers": len(chosen), "method": method}
    meta.update({"depth": depth} if method == "backward" else {"pixel": grid.pixel})
    return PointCloud(pts, CloudTag.J2Sample, meta=meta)


def _default_fiber_grid() -> GridSpec:
    return GridSpec(half_width=3.0, half_height=3.0, nx=129, ny=129)


def _base_fates(p: Poly, radius: float) -> Tuple[List[tuple], List[complex]]:
    """Attracting cycles reached by the critical points of p, and the critical
    points whose orbit neither escapes nor settles on one."""
    cycles: List[tuple] = []
    unresolved: List[complex] = []
    for root in poly_roots(p.derivative()):
        cycle = attracting_cycle(p, root.value, radius=radius)
        if cycle is None:
            z = root.value
            for _ in range(4000):
                z = p(z)
                if abs(z) > radius:
                    break
            else:
                unresolved.append(root.value)
            continue
        if not any(min(abs(c - cycle[0]) for c in known) < 1e-7 for known in cycles):
            cycles.append(cycle)
    return cycles, unresolved


def _cycle_cloud(cycles: Sequence[tuple]) -> PointCloud:
    pts: List[complex] = []
    image: List[int] = []
    for cycle in cycles:
        start = len(pts)
        k = len(cycle)
        pts.extend(cycle)
        image.extend(start + (j + 1) % k for j in range(k))
    return PointCloud(np.array(pts, dtype=complex), CloudTag.Generic, image_index=np.array(image, dtype=int))


def axiom_a_check(
    f: SkewProduct,
    base_julia: Optional[PointCloud] = None,
    fiber_grid: Optional[GridSpec] = None,
    maxiter: int = 64,
    n_max: int = 32,
    max_fibers: int = 32,
    threads: int = 1,
    method: Literal["backward", "pixels"] = "backward",
) -> AxiomAReport:
    """Numerical evidence for the three Axiom A conditions.

    (a) every critical orbit of p escapes or settles on an attracting cycle;
    (b) the postcritical set over J_p keeps a positive distance from J_2;
    (c) the same over the attracting cycles A_p.

    ``base_hyperbolic`` records (a); an unresolved critical orbit, such as a
    parabolic one, makes it False.

    Raises
    ------
    Inconclusive
        no fiber Julia set could be sampled
    """
    if not f.regular:
        raise PreconditionViolation("axiom A check needs a regular skew product")
    cycles, unresolved = _base_fates(f.base, f.base_escape_radius)
    if unresolved:
        logger.warning("base critical orbits unresolved: %s", ", ".join(f"{c:.6g}" for c in unresolved))
    julia = base_julia if base_julia is not None else base_julia_sample(f.base, max_points=4000)

    def margin(cloud: PointCloud) -> Tuple[float, int]:
        post = postcritical_sample(f, cloud, n_max)
        j2 = j2_sample(
            f, cloud, fiber_grid, maxiter=maxiter, max_fibers=max_fibers, threads=threads, method=method
        )
        if len(j2) == 0:
            raise Inconclusive("no fiber Julia set resolved")
        if len(post) == 0:
            return math.inf, j2.meta["skipped"]
        return min_distance(post, j2), j2.meta["skipped"]

    margin_j, skipped_j = margin(julia)
    margin_a, skipped_a = margin(_cycle_cloud(cycles)) if cycles else (math.inf, 0)
    logger.info("axiom A margins: J %.4g, A %.4g (%d cycles)", margin_j, margin_a, len(cycles))
    return AxiomAReport(not unresolved, margin_j, margin_a, tuple(cycles), skipped_j + skipped_a)


def vertical_expansion_attracting(instance) -> VerticalExpansionReport:
    """Over each point x of the attracting cycle of p_n the orbit of (x, 0)
    visits a negative base point x_j, after which |w| >= 8 and leaves K."""
    f = instance.f
    steps: List[Optional[int]] = []
    jumps: List[float] = []
    for x in instance.cycle:
        z, w = complex(x), 0j
        negative = None
        for j in range(len(instance.cycle)):
            if z.real < 0:
                negative = j
                break
            z, w = f.base(z), f.fiber(z, w)
        steps.append(negative)
        jumps.append(abs(f.fiber(z, w)) if negative is not None else 0.0)
    passed = all(s is not None for s in steps) and min(jumps, default=0.0) >= 8.0
    return VerticalExpansionReport(passed, tuple(steps), tuple(jumps))


def _cluster(z: np.ndarray, w: np.ndarray, eps: float) -> List[Cluster]:
    if z.size == 0:
        return []
    coords = np.column_stack([z.real, z.imag, w.real, w.imag])
    keys = np.floor(coords / eps).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    sums_z = np.bincount(inverse, weights=z.real) + 1j * np.bincount(inverse, weights=z.imag)
    sums_w = np.bincount(inverse, weights=w.real) + 1j * np.bincount(inverse, weights=w.imag)
    return [
        Cluster(complex(sz / c), complex(sw / c), int(c)) for sz, sw, c in zip(sums_z, sums_w, counts)
    ]


def estimate_accumulation(
    f: SkewProduct,
    kind: AccumulationKind,
    critical_samples_base: PointCloud,
    N_skip: int = 2,
    N_tail: int = 16,
    cluster_eps: float = 1e-3,
    extra: int = 32,
    component_pixel: float = 2e-3,
) -> AccumulationEstimate:
    """Estimate A_pt, A_cc or A of the critical locus over a base sample.

    Iterates f^n with N_skip <= n <= N_skip + N_tail are kept when

    - Pointwise: the orbit stays bounded through N_skip + N_tail + extra;
    - Componentwise: the iterate is bounded and some critical point over the
      same pixel component of the base sample stays bounded;
    - Full: the iterate is bounded.

    Kept iterates are snapped to C^2 cells of size ``cluster_eps``; each
    occupied cell contributes its mean.
    """
    kind = AccumulationKind(kind)
    crit = critical_samples(f, critical_samples_base)
    horizon = N_skip + N_tail + extra
    zs, ws, escaped_at = _orbit_table(f, crit, horizon)
    steps = np.arange(horizon + 1)[:, None]
    window = (steps >= N_skip) & (steps <= N_skip + N_tail)
    bounded = steps < escaped_at[None, :]
    survivor = escaped_at > horizon
    if kind == AccumulationKind.Pointwise:
        keep = window & survivor[None, :]
    elif kind == AccumulationKind.Full:
        keep = window & bounded
    else:
        comp = pixel_components(crit.base, component_pixel)[crit.sample_index]
        alive = np.zeros(comp.max() + 1 if comp.size else 0, dtype=bool)
        alive[comp[survivor]] = True
        keep = window & bounded & (alive[comp][None, :] if comp.size else False)
    clusters = _cluster(zs[keep], ws[keep], cluster_eps)
    pts = np.array([[c.center_z, c.center_w] for c in clusters], dtype=complex).reshape(-1, 2)
    params = {
        "N_skip": N_skip,
        "N_tail": N_tail,
        "cluster_eps": cluster_eps,
        "extra": extra,
        "component_pixel": component_pixel,
    }
    logger.debug("%s estimate: %d clusters from %d samples", kind.value, len(clusters), len(crit))
    return AccumulationEstimate(kind, PointCloud(pts, CloudTag.Generic, meta=dict(params)), clusters, params)


def _apply(f: SkewProduct, pts: np.ndarray, k: int) -> np.ndarray:
    z, w = pts[:, 0], pts[:, 1]
    for _ in range(k):
        z, w = f.base(z), f.fiber(z, w)
    return np.column_stack([z, w])


def _resample(pts: np.ndarray, count: int) -> np.ndarray:
    coords = PointCloud(pts).real_coords()
    seg = np.linalg.norm(np.diff(coords, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0.0, s[-1], count)
    cols = [np.interp(target, s, coords[:, j]) for j in range(4)]
    return np.column_stack([cols[0] + 1j * cols[1], cols[2] + 1j * cols[3]])


def unstable_arc(
    f: SkewProduct,
    saddle: SaddlePoint,
    seed_len: float = 1e-3,
    growth_iters: int = 3,
    samples: int = 400,
    side: float = -1.0,
) -> UnstableArc:
    """Piece of the unstable manifold of a saddle, grown from a tangent segment.

    The tangent line (1, s) is invariant under the lower-triangular
    differential [[lambda, 0], [c, mu]] of f^period, so s = c / (lambda - mu).

    Raises
    ------
    ResonanceError
        lambda and mu (almost) coincide
    """
    k = saddle.period
    z, w = saddle.location.z, saddle.location.w
    jac = np.eye(2, dtype=complex)
    for _ in range(k):
        jac = f.jacobian(z, w) @ jac
        z, w = f.base(z), f.fiber(z, w)
    lam, mu, c = jac[0, 0], jac[1, 1], jac[1, 0]
    if abs(lam - mu) < 1e-8:
        raise ResonanceError(f"base and fiber multipliers coincide: {lam} vs {mu}")
    s = complex(c / (lam - mu))
    t = side * seed_len * np.linspace(0.0, 1.0, samples)
    pts = np.column_stack([saddle.location.z + t, saddle.location.w + s * t])
    for _ in range(growth_iters):
        pts = _resample(_apply(f, pts, k), samples)
    return UnstableArc(saddle, s, pts, growth_iters, seed_len, side)


def _polyline_distance(points: np.ndarray, line: np.ndarray) -> np.ndarray:
    p = PointCloud(points).real_coords()
    q = PointCloud(line).real_coords()
    a, b = q[:-1], q[1:]
    ab = b - a
    denom = np.maximum((ab * ab).sum(axis=1), 1e-300)
    ap = p[:, None, :] - a[None, :, :]
    t = np.clip((ap * ab[None]).sum(axis=2) / denom[None], 0.0, 1.0)
    nearest = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(p[:, None, :] - nearest, axis=2).min(axis=1)


def arc_invariance_error(f: SkewProduct, arc: UnstableArc) -> float:
    """Largest distance from f(arc) to the arc grown one generation further."""
    grown = unstable_arc(
        f, arc.anchor, arc.seed_len, arc.growth_iters + 1, len(arc.points), arc.side
    )
    image = _apply(f, arc.points, arc.anchor.period)
    return float(_polyline_distance(image, grown.points).max())
