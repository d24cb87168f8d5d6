"""Interval-checked inequalities and grid corroboration for the example f_n."""
import enum
import logging
import math
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from skewlab.config import CONTRACTION_RADIUS_BOUND, Config, InstanceConfig
from skewlab.errors import CounterexampleFound, PreconditionViolation, SkewlabError, Unreached
from skewlab.family import BiquadParams, ExampleInstance, construct_example
from skewlab.invariant import (
    UNRESOLVED,
    AccumulationKind,
    axiom_a_check,
    classify_critical,
    estimate_accumulation,
    find_saddles,
    vertical_expansion_attracting,
)
from skewlab.julia import CloudTag, GridSpec, PointCloud, fiber_filled_julia, filled_julia_base, hausdorff_distance
from skewlab.numeric import RealInterval, interval_eval

logger = logging.getLogger(__name__)

FIBER_DISK_RADIUS = Fraction(5, 2)
STRIP_HALF_WIDTH = Fraction(1, 4)
SQRT6_OVER_10 = math.sqrt(6.0) / 10.0


class RegionKind(str, enum.Enum):
    Disk = "disk"
    Box = "box"
    Strip = "strip"


class Region(BaseModel):
    """A closed disk, an axis-parallel box or a strip S(0, 1/4, h) in C.

    A strip is the box ``|Re| <= 1/4, |Im| <= h`` around the origin.
    """

    model_config = ConfigDict(frozen=True)

    kind: RegionKind
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    x_range: Tuple[float, float] = (0.0, 0.0)
    y_range: Tuple[float, float] = (0.0, 0.0)

    @model_validator(mode="after")
    def _extents(self) -> "Region":
        if self.kind == RegionKind.Disk and self.radius < 0:
            raise ValueError("disk radius must be nonnegative")
        if self.kind != RegionKind.Disk:
            if self.x_range[0] > self.x_range[1] or self.y_range[0] > self.y_range[1]:
                raise ValueError(f"empty box {self.x_range} x {self.y_range}")
        return self

    @classmethod
    def disk(cls, center: complex, radius: float) -> "Region":
        center = complex(center)
        return cls(kind=RegionKind.Disk, center=(center.real, center.imag), radius=radius)

    @classmethod
    def box(cls, x0: float, x1: float, y0: float, y1: float) -> "Region":
        return cls(kind=RegionKind.Box, x_range=(x0, x1), y_range=(y0, y1))

    @classmethod
    def strip(cls, height: float) -> "Region":
        if height <= 0:
            raise ValueError("strip height must be positive")
        quarter = float(STRIP_HALF_WIDTH)
        return cls(kind=RegionKind.Strip, x_range=(-quarter, quarter), y_range=(-height, height))

    def sup_distance(self, point: complex) -> RealInterval:
        """Enclosure of max |z - point| over the region."""
        if self.kind == RegionKind.Disk:
            d = complex(*self.center) - point
            return interval_eval("sqrt(x**2 + y**2) + r", x=d.real, y=d.imag, r=self.radius)
        # |z - point| is convex, so its maximum over a box sits at a corner
        corners = [
            interval_eval("sqrt(x**2 + y**2)", x=x - point.real, y=y - point.imag)
            for x in self.x_range
            for y in self.y_range
        ]
        return RealInterval(max(c.lo for c in corners), max(c.hi for c in corners))

    def sample(self, count: int) -> np.ndarray:
        """About ``count`` points covering the region, boundary included."""
        side = max(int(math.ceil(math.sqrt(count))), 2)
        if self.kind == RegionKind.Disk:
            rho = np.linspace(0.0, self.radius, side)
            phi = np.linspace(0.0, 2 * np.pi, side, endpoint=False)
            return (complex(*self.center) + rho[:, None] * np.exp(1j * phi)[None, :]).ravel()
        x = np.linspace(*self.x_range, side)
        y = np.linspace(*self.y_range, side)
        return (x[None, :] + 1j * y[:, None]).ravel()


class LemmaParams(BaseModel):
    n: Optional[int] = None
    r: Optional[float] = None
    delta: Optional[float] = None
    delta_prime: Optional[float] = None
    eps_n: Optional[float] = None
    N: Optional[int] = None

    @model_validator(mode="after")
    def _contraction_radius(self) -> "LemmaParams":
        if self.delta_prime is not None and self.r is not None and self.r >= CONTRACTION_RADIUS_BOUND:
            raise ValueError(f"r={self.r} must stay below 7/128")
        return self


class LemmaReport(BaseModel):
    """Outcome of one check; ``passed`` holds exactly when ``margin > 0``.

    Serializes with the key ``pass`` (``model_dump(by_alias=True)``).
    """

    model_config = ConfigDict(populate_by_name=True)

    lemma_id: str
    params: LemmaParams = LemmaParams()
    margin: float
    passed: bool = Field(alias="pass")
    evidence: Dict[str, Any] = {}

    @model_validator(mode="before")
    @classmethod
    def _derive_pass(cls, data: Any) -> Any:
        if isinstance(data, dict) and "passed" not in data and "pass" not in data:
            data = {**data, "passed": float(data["margin"]) > 0}
        return data

    @model_validator(mode="after")
    def _consistent(self) -> "LemmaReport":
        if self.passed != (self.margin > 0):
            raise ValueError(f"{self.lemma_id}: pass={self.passed} but margin={self.margin}")
        return self


def _report(lemma_id: str, margin: float, params: Optional[LemmaParams] = None, **evidence: Any) -> LemmaReport:
    report = LemmaReport(lemma_id=lemma_id, params=params or LemmaParams(), margin=float(margin), evidence=evidence)
    logger.debug("%s: margin %.6g (%s)", lemma_id, report.margin, "pass" if report.passed else "fail")
    return report


Angle = Union[Fraction, int]


class AngleIntervalSet:
    """Finite union of open intervals of R/Z with rational endpoints.

    Intervals are stored in [0, 1); one crossing 0 is split in two. After
    construction the intervals are disjoint and sorted. Endpoints shared
    by two intervals stay uncovered.
    """

    def __init__(self, intervals: Sequence[Tuple[Angle, Angle]] = ()):
        pieces: List[Tuple[Fraction, Fraction]] = []
        for lo, hi in intervals:
            lo, hi = Fraction(lo), Fraction(hi)
            if hi <= lo:
                raise ValueError(f"empty interval ({lo}, {hi})")
            if hi - lo >= 1:
                raise ValueError(f"interval ({lo}, {hi}) wraps the whole circle")
            shift = math.floor(lo)
            lo, hi = lo - shift, hi - shift
            if hi > 1:
                pieces.extend([(lo, Fraction(1)), (Fraction(0), hi - 1)])
            else:
                pieces.append((lo, hi))
        self.intervals = self._normalize(pieces)

    @staticmethod
    def _normalize(pieces: List[Tuple[Fraction, Fraction]]) -> List[Tuple[Fraction, Fraction]]:
        merged: List[Tuple[Fraction, Fraction]] = []
        for lo, hi in sorted(pieces):
            if merged and lo < merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        return merged

    def union(self, other: "AngleIntervalSet") -> "AngleIntervalSet":
        result = AngleIntervalSet()
        result.intervals = self._normalize(self.intervals + other.intervals)
        return result

    def times(self, k: int) -> "AngleIntervalSet":
        """Image under t -> k t of every interval, each shorter than 1/k."""
        return AngleIntervalSet([(k * lo, k * hi) for lo, hi in self.intervals])

    def contains(self, other: "AngleIntervalSet") -> bool:
        return all(any(a <= lo and hi <= b for a, b in self.intervals) for lo, hi in other.intervals)

    def covers_closed(self, lo: Angle, hi: Angle) -> Optional[Fraction]:
        """Slack by which one interval contains [lo, hi] with 0 < lo <= hi < 1, or None."""
        lo, hi = Fraction(lo), Fraction(hi)
        for a, b in self.intervals:
            if a < lo and hi < b:
                return min(lo - a, b - hi)
        return None

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AngleIntervalSet) and self.intervals == other.intervals

    def __repr__(self) -> str:
        return "AngleIntervalSet(" + ", ".join(f"({lo}, {hi})" for lo, hi in self.intervals) + ")"


# ---------------------------------------------------------------------------
# Analytic checks


def check_fiber_escape(z_region: Region, samples: int = 10_000) -> LemmaReport:
    """q_z maps the outside of D(0, 5/2) outside D(0, 35/2) for z in the region.

    |q_z(w)| >= |w|^4 - 4|2 - z| >= 7|w| at |w| = 5/2, and the gap grows in
    |w| because 4|w|^3 > 7 there.

    Raises
    ------
    PreconditionViolation
        the region certainly leaves the disk |2 - z| <= 5
    """
    rho = z_region.sup_distance(2 + 0j)
    if rho.lo > 5:
        raise PreconditionViolation(f"region reaches |2 - z| = {rho.lo:.6g} > 5")
    R = FIBER_DISK_RADIUS
    gap = interval_eval("R**4 - 4*rho - 35/2", R=R, rho=rho)
    growth = interval_eval("4*R**3 - 7", R=R)
    interval_margin = gap.lo if growth.certainly_positive() else min(gap.lo, growth.lo)

    side = max(int(math.sqrt(samples)), 2)
    zs = z_region.sample(side)
    ws = float(R) * np.exp(2j * np.pi * np.arange(side) / side)
    grid = np.abs(ws[None, :] ** 4 + 4 * (2 - zs[:, None]))
    grid_margin = float(grid.min()) - 17.5
    return _report(
        "fiber-escape",
        min(interval_margin, grid_margin),
        sup_abs_2_minus_z=rho.hi,
        interval_lower_bound=gap.lo,
        growth=growth.lo,
        grid_min=float(grid.min()),
    )


def check_k_box(
    instance: Union[ExampleInstance, BiquadParams],
    grid: Optional[GridSpec] = None,
    maxiter: int = 200,
    threads: int = 1,
) -> LemmaReport:
    """K_{p_n} sits in [-5/2, 5/2] x [-eps_n, eps_n] with eps_n <= 1/4."""
    if isinstance(instance, ExampleInstance):
        p, sample_eps, params = instance.params.poly(), instance.epsilon_n, LemmaParams(n=instance.n)
    else:
        p, sample_eps, params = instance.poly(), 0.0, LemmaParams()
    grid = grid or GridSpec.box(-3.0, 3.0, -1.0, 1.0, nx=601, ny=201)
    pts = filled_julia_base(p, grid, maxiter=maxiter, threads=threads).bounded_points()
    if len(pts) == 0:
        return _report("k-box", 0.0, params, bounded_pixels=0)
    x_extent = float(np.abs(pts.real).max())
    eps = max(float(np.abs(pts.imag).max()), sample_eps)
    params.eps_n = eps
    return _report(
        "k-box",
        min(2.5 - x_extent, 0.25 - eps),
        params,
        x_min=float(pts.real.min()),
        x_max=float(pts.real.max()),
        eps_grid=float(np.abs(pts.imag).max()),
        eps_sample=sample_eps,
        bounded_pixels=int(len(pts)),
    )


def _base_chains(instance: ExampleInstance, length: int) -> Tuple[np.ndarray, np.ndarray]:
    """Sample points other than the seed and their base orbits along the sample chain.

    Orbits reaching the seed continue with forward iteration of p_n.
    """
    cloud = instance.julia
    p = instance.params.poly()
    keep = np.flatnonzero(cloud.image_index != np.arange(len(cloud)))
    chains = np.empty((keep.size, length + 1), dtype=complex)
    idx = keep.copy()
    z = cloud.pts[idx]
    for k in range(length + 1):
        chains[:, k] = z
        parent = cloud.image_index[idx]
        at_seed = parent == idx
        z = np.where(at_seed, p(z), cloud.pts[parent])
        idx = parent
    return cloud.pts[keep], chains


def check_reach_left(instance: ExampleInstance, r: float = 1.0 / 32.0, N_max: int = 64) -> LemmaReport:
    """Every sampled z of J_{p_n} outside B(2, r) has Re p^j(z) <= 1 for some j < N_max.

    Raises
    ------
    Unreached
        a sample stays right of Re z = 1 for ``N_max`` steps
    """
    if r <= 0:
        raise PreconditionViolation("r must be positive")
    zs, chains = _base_chains(instance, N_max)
    outside = np.abs(zs - 2) > r
    params = LemmaParams(n=instance.n, r=r, eps_n=instance.epsilon_n)
    if not outside.any():
        params.N = 0
        return _report("reach-left", N_max + 1, params, samples=0, vacuous=True, N_obs=0)
    left = chains[outside, :N_max].real <= 1
    reached = left.any(axis=1)
    if not reached.all():
        witness = complex(zs[outside][np.argmin(reached)])
        raise Unreached(f"z={witness} stays in Re z > 1 for {N_max} steps", witness=witness)
    first = left.argmax(axis=1)
    N_obs = int(first.max())
    params.N = N_obs
    return _report("reach-left", N_max - N_obs + 1, params, samples=int(outside.sum()), vacuous=False, N_obs=N_obs)


def strip_escape_steps(reach: LemmaReport, N_max: int) -> int:
    """Steps N for the escape checks: one past the last step reaching Re z <= 1.

    Falls back to ``N_max`` when the reach check produced no count.
    """
    if reach.params.N is not None:
        return reach.params.N + 1
    return max(N_max, 1)


def escape_strip_height(N: int, eps_n: float) -> float:
    """Half the largest delta with 64^N (delta + 4 eps_n / 63) < sqrt(6)/10."""
    return 0.5 * (SQRT6_OVER_10 / 64.0**N - 4.0 * eps_n / 63.0)


def check_escape_constant(N: int, delta: float, eps_n: float) -> LemmaReport:
    """64^N (delta + 4 eps_n / 63) < sqrt(6)/10, verified with intervals."""
    if N < 1:
        raise PreconditionViolation("N must be at least 1")
    gap = interval_eval("sqrt(6)/10 - K*(d + 4*e/63)", K=64**N, d=delta, e=eps_n)
    params = LemmaParams(N=N, delta=delta, eps_n=eps_n)
    return _report("escape-constant", gap.lo, params, gap_lo=gap.lo, gap_hi=gap.hi)


def check_contract(
    r: float, delta_prime: float, eps_n: float, samples: int = 2_500
) -> LemmaReport:
    """q_z maps S(0, 1/4, delta') into its interior for z in B(2, r), |Im z| <= eps_n.

    Raises
    ------
    PreconditionViolation
        r >= 7/128, delta' >= 1/4 or eps_n > delta'/8
    """
    if r >= CONTRACTION_RADIUS_BOUND:
        raise PreconditionViolation(f"r={r} must stay below 7/128")
    if not 0 < delta_prime < 0.25:
        raise PreconditionViolation(f"delta'={delta_prime} must lie in (0, 1/4)")
    if eps_n > delta_prime / 8:
        raise PreconditionViolation(f"eps_n={eps_n} exceeds delta'/8")
    v_gap = interval_eval("dp - (4*(1/16 + dp**2)*(1/4)*dp + 4*e)", dp=delta_prime, e=eps_n)
    u_gap = interval_eval("1/4 - ((1/16 + dp**2)**2 + 4*dp**2/16 + 4*r)", dp=delta_prime, r=r)
    coarse_gap = interval_eval("1/4 - (1/8**2 + 1/4**3 + 4*r)", r=r)

    side = max(int(math.sqrt(samples)), 2)
    ws = Region.strip(delta_prime).sample(side * side)
    zs = Region.disk(2, r).sample(side * side)
    zs = zs[np.abs(zs.imag) <= eps_n]
    zs = np.concatenate([zs, [2 - r, 2 + r, complex(2, eps_n), complex(2, -eps_n)]])
    image = ws[None, :] ** 4 + 4 * (2 - zs[:, None])
    grid_margin = float(min((0.25 - np.abs(image.real)).min(), (delta_prime - np.abs(image.imag)).min()))
    analytic = min(v_gap.lo, u_gap.lo)
    params = LemmaParams(r=r, delta_prime=delta_prime, eps_n=eps_n)
    return _report(
        "contract",
        min(analytic, grid_margin),
        params,
        v_chain_gap=v_gap.lo,
        u_chain_gap=u_gap.lo,
        coarse_u_gap=coarse_gap.lo,
        grid_margin=grid_margin,
    )


def check_angle_combinatorics(J: int = 10) -> LemmaReport:
    """Exact rational checks on the quadrupling map of R/Z.

    (i) quadrupling sends (3/64, 13/64) and (51/64, 61/64) into (3/16, 13/16);
    (ii) the intervals (3/4^j, 13/4^j) and (-13/4^j, -3/4^j), 2 <= j <= J + 1,
    cover [4^-J, 1 - 4^-J].
    """
    if J < 1:
        raise PreconditionViolation("J must be positive")
    middle = AngleIntervalSet([(Fraction(3, 16), Fraction(13, 16))])
    pair = AngleIntervalSet([(Fraction(3, 64), Fraction(13, 64)), (Fraction(51, 64), Fraction(61, 64))])
    image_ok = middle.contains(pair.times(4))

    cover = AngleIntervalSet()
    for j in range(2, J + 2):
        scale = Fraction(1, 4**j)
        cover = cover.union(AngleIntervalSet([(3 * scale, 13 * scale), (-13 * scale, -3 * scale)]))
    eta = Fraction(1, 4**J)
    slack = cover.covers_closed(eta, 1 - eta)
    margin = float(slack) if (slack is not None and image_ok) else 0.0
    return _report(
        "angle-combinatorics",
        margin,
        image_ok=image_ok,
        cover=str(cover),
        eta=str(eta),
        slack=str(slack),
        J=J,
    )


# ---------------------------------------------------------------------------
# Checks on a constructed instance


def _spread(count: int, limit: int) -> np.ndarray:
    if count <= limit:
        return np.arange(count)
    return np.unique(np.linspace(0, count - 1, limit).astype(int))


def check_escape_empirical(
    instance: ExampleInstance,
    r: float,
    delta: float,
    N: int,
    w_samples: int = 41,
    max_z: int = 256,
) -> LemmaReport:
    """Q_z^N sends the strip |Im w| < delta out of D(0, 5/2) for z in J_{p_n} \\ B(2, r).

    Along the way every step taken inside D(0, 5/2) obeys
    |Im w_{k+1}| <= 64 |Im w_k| + 4 eps_n. The constants behind that step
    are checked exactly: 4((5/2)^2 + 6/100)(5/2) = 631/10 < 64 and
    4 - 4 (25/4)(6/100) = 5/2.

    Raises
    ------
    PreconditionViolation
        (N, delta, eps_n) fails the escape constant check
    CounterexampleFound
        a grid point stays in D(0, 5/2) or breaks the step bound
    """
    eps = instance.epsilon_n
    constant = check_escape_constant(N, delta, eps)
    if not constant.passed:
        raise PreconditionViolation(f"escape constant fails for N={N}, delta={delta:.3g}, eps={eps:.3g}")
    step_bound = 4 * (Fraction(25, 4) + Fraction(6, 100)) * Fraction(5, 2)
    real_step = 4 - 4 * Fraction(25, 4) * Fraction(6, 100)
    exact_ok = step_bound == Fraction(631, 10) and real_step == Fraction(5, 2)
    const_margin = float(64 - step_bound) if exact_ok else 0.0

    zs, chains = _base_chains(instance, N)
    outside = np.flatnonzero(np.abs(zs - 2) > r)
    params = LemmaParams(n=instance.n, r=r, delta=delta, eps_n=eps, N=N)
    if outside.size == 0:
        return _report("escape-empirical", const_margin, params, samples=0, step_bound=str(step_bound))
    rows = outside[_spread(outside.size, max_z)]
    u = np.linspace(-float(FIBER_DISK_RADIUS), float(FIBER_DISK_RADIUS), w_samples)
    v = np.array([-0.5, 0.0, 0.5]) * delta
    w0 = (u[None, :] + 1j * v[:, None]).ravel()
    w = np.broadcast_to(w0, (rows.size, w0.size)).copy()
    frozen = np.zeros(w.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            z = chains[rows, k][:, None]
            inside = ~frozen & (np.abs(w.real) <= 2.5) & (np.abs(w.imag) < SQRT6_OVER_10)
            nxt = w**4 + 4 * (2 - z)
            slack = 64 * np.abs(w.imag) + 4 * eps + 4 * np.finfo(float).eps * (1 + np.abs(w) ** 4)
            broken = inside & (np.abs(nxt.imag) > slack)
            if broken.any():
                i, j = np.argwhere(broken)[0]
                witness = (complex(zs[rows[i]]), complex(w0[j]))
                raise CounterexampleFound(f"step bound broken at step {k}", witness=witness)
            frozen |= ~np.isfinite(nxt) | (np.abs(nxt) > 1e10)
            w = np.where(frozen, 1e10, nxt)
    size = np.abs(w)
    if (size <= 2.5).any():
        i, j = np.argwhere(size <= 2.5)[0]
        raise CounterexampleFound(
            f"|Q_z^{N}(w)| = {size[i, j]:.6g} stays in D(0, 5/2)", witness=(complex(zs[rows[i]]), complex(w0[j]))
        )
    empirical = float(size.min()) - 2.5
    return _report(
        "escape-empirical",
        min(const_margin, empirical),
        params,
        samples=int(rows.size),
        grid_points=int(w0.size),
        min_abs=float(size.min()),
        step_bound=str(step_bound),
        real_step=str(real_step),
    )


def check_critical_disjoint(
    instance: ExampleInstance,
    delta: float,
    max_fibers: int = 64,
    maxiter: int = 64,
    nx: int = 33,
    ny: int = 5,
    threads: int = 1,
) -> LemmaReport:
    """The strip S(0, 1/4, delta) escapes over J_{p_n} \\ {beta_n} and is bounded over beta_n.

    Raises
    ------
    PreconditionViolation
        delta outside (0, 1/4)
    CounterexampleFound
        a bounded strip pixel away from beta_n, or an escaping one over beta_n
    """
    if not 0 < delta < 0.25:
        raise PreconditionViolation(f"delta={delta} must lie in (0, 1/4)")
    spec = GridSpec(center_re=0.0, center_im=0.0, half_width=0.25, half_height=delta, nx=nx, ny=ny)
    f = instance.f
    zs, chains = _base_chains(instance, maxiter)
    rows = _spread(len(zs), max_fibers)
    slowest = 0
    for i in rows:
        grid = fiber_filled_julia(f, zs[i], spec, maxiter=maxiter, threads=threads, orbit_of_z=chains[i])
        if grid.bounded.any():
            w = complex(spec.lattice()[grid.bounded][0])
            raise CounterexampleFound(f"strip point stays bounded over z={zs[i]}", witness=(complex(zs[i]), w))
        slowest = max(slowest, int(grid.iters.max()))
    beta = instance.beta_n
    grid = fiber_filled_julia(
        f, beta, spec, maxiter=maxiter, threads=threads, orbit_of_z=np.full(maxiter + 1, beta, dtype=complex)
    )
    if not grid.bounded.all():
        w = complex(spec.lattice()[~grid.bounded][0])
        raise CounterexampleFound("strip point escapes over beta_n", witness=(complex(beta), w))
    image = spec.lattice() ** 4 + 4 * (2 - beta)
    inner = float(min((0.25 - np.abs(image.real)).min(), (delta - np.abs(image.imag)).min()))
    escape_margin = 1.0 - slowest / (maxiter + 1)
    return _report(
        "critical-disjoint",
        min(escape_margin, inner / delta),
        LemmaParams(n=instance.n, delta=delta, eps_n=instance.epsilon_n),
        fibers=int(rows.size),
        slowest_escape=slowest,
        beta_strip_slack=inner,
    )


# ---------------------------------------------------------------------------
# Pipeline


class CertificateReport(BaseModel):
    n: int
    verdict: bool
    failing: List[str]
    reports: List[LemmaReport]
    instance: Dict[str, Any] = {}


def _finite(x: float, cap: float = 1e6) -> float:
    return cap if math.isinf(x) and x > 0 else float(x)


def _guarded(lemma_id: str, check: Callable[[], LemmaReport]) -> LemmaReport:
    try:
        return check()
    except SkewlabError as e:
        logger.warning("%s failed: %s", lemma_id, e)
        evidence: Dict[str, Any] = {"error": type(e).__name__, "message": str(e)}
        witness = getattr(e, "witness", None)
        if witness is not None:
            evidence["witness"] = str(witness)
        return _report(lemma_id, 0.0, **evidence)


def _saddle_report(instance: ExampleInstance, tol: float) -> LemmaReport:
    est = find_saddles(instance.f, max_period=1)
    beta, alpha = instance.saddle
    locations = [s.location for s in est.saddles]
    if len(locations) != 1:
        return _report("saddle-set", 0.0, saddles=len(locations), locations=str(locations))
    location = locations[0]
    distance = math.hypot(abs(location.z - beta), abs(location.w - alpha))
    return _report("saddle-set", tol - distance, saddles=1, distance=distance)


def _classification_report(instance: ExampleInstance, tol: float) -> LemmaReport:
    est = find_saddles(instance.f, max_period=1)
    result = classify_critical(instance.f, est, instance.julia, tol=tol)
    over_beta = np.abs(result.z - instance.beta_n) < 1e-12
    captured = bool(over_beta.any() and (result.labels[over_beta] == 1).all())
    rest = result.labels[~over_beta]
    resolved = rest[rest != UNRESOLVED]
    escaping = float((resolved == 0).mean()) if resolved.size else 0.0
    margin = escaping - 0.99 if captured else 0.0
    return _report(
        "critical-classification",
        margin,
        beta_captured=captured,
        escaping_fraction=escaping,
        unresolved=int((rest == UNRESOLVED).sum()),
        counts={str(k): int(v) for k, v in result.counts().items()},
    )


def _accumulation_report(instance: ExampleInstance, cluster_eps: float) -> LemmaReport:
    estimates = {
        kind: estimate_accumulation(instance.f, kind, instance.julia, cluster_eps=cluster_eps)
        for kind in AccumulationKind
    }
    beta, alpha = instance.saddle
    saddle = PointCloud(np.array([[beta, alpha]]), CloudTag.Generic)
    pt = estimates[AccumulationKind.Pointwise].pts
    cc = estimates[AccumulationKind.Componentwise].pts
    full = estimates[AccumulationKind.Full].pts
    d_pt = hausdorff_distance(pt, saddle)
    d_cc = hausdorff_distance(pt, cc)
    far = float(np.abs(full.real_coords() - saddle.real_coords()[0]).max(axis=1).max()) if len(full) else 0.0
    margin = min(5 * cluster_eps - d_pt, 2 * cluster_eps - d_cc, far - 10 * cluster_eps)
    return _report(
        "accumulation-gap",
        margin,
        pointwise_to_saddle=d_pt,
        pointwise_to_componentwise=d_cc,
        full_farthest=far,
        clusters={kind.value: len(est.clusters) for kind, est in estimates.items()},
    )


def _axiom_a_report(instance: ExampleInstance, threads: int) -> LemmaReport:
    report = axiom_a_check(instance.f, instance.julia, threads=threads)
    margin = min(_finite(report.margin_J), _finite(report.margin_A))
    return _report(
        "axiom-a",
        margin if report.base_hyperbolic else 0.0,
        margin_J=_finite(report.margin_J),
        margin_A=_finite(report.margin_A),
        cycles=len(report.attracting_cycles),
        skipped_fibers=report.skipped_fibers,
    )


def _vertical_report(instance: ExampleInstance) -> LemmaReport:
    report = vertical_expansion_attracting(instance)
    reached = all(s is not None for s in report.negative_step)
    margin = min(report.jump) - 8.0 if reached else 0.0
    return _report("vertical-expansion", margin, negative_step=list(report.negative_step), jump=list(report.jump))


def full_certificate(n: int, config: Optional[Config] = None) -> CertificateReport:
    """Construct f_n and run every check on it.

    The verdict holds when all reports pass: a single saddle at
    (beta_n, alpha_n), the critical point over beta_n captured by it,
    A_pt close to both the saddle and A_cc, and A reaching beyond them.
    Errors raised by a check become failing reports.
    """
    config = config or Config()
    settings: InstanceConfig = config.instance
    try:
        instance = construct_example(n, eta=settings.eta, julia_depth=settings.julia_depth)
    except SkewlabError as e:
        logger.info("f_%d not constructed: %s", n, e)
        failed = _report("construct-example", 0.0, LemmaParams(n=n), error=type(e).__name__, message=str(e))
        return CertificateReport(n=n, verdict=False, failing=[failed.lemma_id], reports=[failed])

    eps = instance.epsilon_n
    r, delta_prime = settings.r, settings.delta_prime
    reports = [
        _guarded("fiber-escape", lambda: check_fiber_escape(Region.box(-2.5, 2.5, -eps, eps))),
        _guarded("k-box", lambda: check_k_box(instance, maxiter=config.maxiter, threads=config.threads)),
    ]
    reach = _guarded("reach-left", lambda: check_reach_left(instance, r, settings.N_max))
    reports.append(reach)
    N = strip_escape_steps(reach, settings.N_max)
    delta = max(escape_strip_height(N, eps), 0.0)
    reports += [
        _guarded("escape-constant", lambda: check_escape_constant(N, delta, eps)),
        _guarded("escape-empirical", lambda: check_escape_empirical(instance, r, delta, N)),
        _guarded("contract", lambda: check_contract(r, delta_prime, eps)),
        _guarded("angle-combinatorics", lambda: check_angle_combinatorics(settings.J)),
        _guarded("critical-disjoint", lambda: check_critical_disjoint(instance, delta, threads=config.threads)),
        _guarded("vertical-expansion", lambda: _vertical_report(instance)),
        _guarded("axiom-a", lambda: _axiom_a_report(instance, threads=config.threads)),
        _guarded("saddle-set", lambda: _saddle_report(instance, config.tolerances.capture_tol)),
        _guarded(
            "critical-classification",
            lambda: _classification_report(instance, config.tolerances.capture_tol),
        ),
        _guarded("accumulation-gap", lambda: _accumulation_report(instance, config.tolerances.cluster_eps)),
    ]
    reports.sort(key=lambda report: report.lemma_id)
    failing = [report.lemma_id for report in reports if not report.passed]
    logger.info("certificate for f_%d: %s", n, "PASS" if not failing else "FAIL " + ", ".join(failing))
    return CertificateReport(
        n=n,
        verdict=not failing,
        failing=failing,
        reports=reports,
        instance={
            "a": instance.params.a,
            "b": instance.params.b,
            "eta": instance.eta,
            "beta": instance.beta_n,
            "alpha": str(instance.alpha_n),
            "epsilon": eps,
            "period": instance.period,
            "N": N,
            "delta": delta,
        },
    )


def search_certificate(config: Optional[Config] = None) -> CertificateReport:
    """Certificates for n = 1, 2, ... up to ``instance.max_n``; the first passing one, else the last."""
    config = config or Config()
    report = None
    for n in range(1, config.instance.max_n + 1):
        report = full_certificate(n, config)
        if report.verdict:
            break
    assert report is not None
    return report
