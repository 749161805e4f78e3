"""Bump families, rearrangement sweeps, ratio suites and a best-constant descent.

The central experiment places a small smooth bump ``u_eps`` inside a domain
and compares its domain energy with the energy of its rearrangement over the
symmetrized domain. Near the boundary the first grows like ``eps^(n - sp)``
through the tail term while the second only picks up ``eps^n``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .constants import FracParams, sharp_sobolev_constant
from .geometry import Ball, Box, Domain, Interval, interval_parts, sym_diff_measure, symmetrize
from .grids import GridFunction, GridSpec
from .kernel import DEFAULT_DIRECTIONS, Comparison, tail_kernel
from .rearrange import lp_norm, rearrange
from .seminorm import (
    EnergyResult,
    critical_exponent,
    cross_term,
    energy_domain,
    energy_fullspace,
    energy_rearranged,
    quadratic_form,
)

log = logging.getLogger(__name__)

__all__ = [
    "BumpSpec",
    "DEFAULT_EPSILONS",
    "DescentResult",
    "PLACEMENTS",
    "RatioReport",
    "SweepRecord",
    "SweepReport",
    "best_constant_descent",
    "build_bump",
    "bump_grid",
    "counterexample_sweep",
    "default_corpus",
    "eta",
    "family_ratios",
    "finequality_check",
    "placement_center",
    "sobolev_from_hardy_check",
    "theorem2_ratio_suite",
]

SCHEMA_VERSION = 1
DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025)
CELLS_PER_EPS_MIN = 16
MIN_CELLS_ACROSS = 16
VERDICT_FACTOR = 3.0
PLACEMENTS = ("boundary", "center", "origin", "auto")
CORPUS_SEED = 20240611


def eta(r) -> np.ndarray:
    """Smooth radial cutoff: 1 for ``|r| <= 1/2``, 0 for ``|r| >= 1``, decreasing between."""
    r = np.abs(np.asarray(r, dtype=float))
    t = (r - 0.5) / 0.5
    out = np.where(t <= 0.0, 1.0, 0.0)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / (1.0 - tm))
    b = np.exp(-1.0 / tm)
    out[mid] = a / (a + b)
    return out


@dataclass(frozen=True)
class BumpSpec:
    """``profile(|x - center| / epsilon)``."""

    center: tuple[float, ...]
    epsilon: float
    profile: Callable[[np.ndarray], np.ndarray] = field(default=eta, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2), got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def n(self) -> int:
        return len(self.center)

    def fits(self, d: Domain, tol: float = 1e-12) -> bool:
        return bool(d.contains(np.asarray(self.center))) and d.boundary_distance(self.center) >= self.epsilon - tol


def bump_grid(center, epsilon: float, h: float) -> GridSpec:
    """Smallest grid of spacing ``h`` with a cell edge at ``center`` covering the bump plus two zero cells."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    m = math.ceil(epsilon / h - 1e-9) + 2
    return GridSpec(tuple(c - m * h), h, (2 * m,) * len(c))


def build_bump(spec: BumpSpec, grid: GridSpec) -> GridFunction:
    """Midpoint samples of the bump on ``grid``."""
    if grid.n != spec.n:
        raise ValueError(f"grid dimension {grid.n} does not match bump dimension {spec.n}")
    across = 2.0 * spec.epsilon / grid.h
    if across < MIN_CELLS_ACROSS - 1e-9:
        need = 2.0 * spec.epsilon / MIN_CELLS_ACROSS
        raise ValueError(
            f"bump of radius {spec.epsilon} is under-resolved: {across:.1f} cells across, "
            f"need at least {MIN_CELLS_ACROSS} (grid spacing <= {need:.6g})"
        )
    X = grid.centers()
    r = np.linalg.norm(X - np.asarray(spec.center), axis=1) / spec.epsilon
    return GridFunction(grid, spec.profile(r).reshape(grid.shape))


# ------------------------------------------------------------- placement


def _auto_center(d: Domain, epsilon: float, params: FracParams, step: float) -> np.ndarray:
    lo, hi = d.bbox()
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    step = max(step, float(np.max(hi - lo)) / 200.0)
    axes = [np.arange(a + step / 2.0, b, step) for a, b in zip(lo, hi)]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
    pts = pts[np.asarray(d.contains(pts), dtype=bool)]
    dist = np.array([d.boundary_distance(x) for x in pts])
    pts = pts[dist >= 2.0 * epsilon]
    if len(pts) == 0:
        raise ValueError(f"no interior point at distance >= {2 * epsilon} from the boundary")
    F = np.atleast_1d(tail_kernel(d, pts, params))
    return pts[int(np.argmax(F))]


def placement_center(
    d: Domain, epsilon: float, placement, params: FracParams | None = None, step: float | None = None
) -> np.ndarray:
    """Bump centre for a named placement or an explicit point.

    ``boundary`` puts the bump at distance ``epsilon`` from the right end of
    an interval (or the rightmost interval of a union), of a ball along the
    first axis, or of a box along the first axis. ``center`` uses the point
    halfway between the centre and the boundary along the first axis.
    ``origin`` is the origin. ``auto`` maximises the tail kernel over interior
    points at distance at least ``2 epsilon`` from the boundary.
    """
    n = d.n
    if not isinstance(placement, str):
        c = np.atleast_1d(np.asarray(placement, dtype=float))
        if c.shape != (n,):
            raise ValueError(f"explicit centre needs {n} coordinates, got {c.shape}")
        return c
    e1 = np.eye(n)[0]
    if placement == "origin":
        return np.zeros(n)
    if placement == "auto":
        if params is None:
            raise ValueError("auto placement needs the energy parameters")
        return _auto_center(d, epsilon, params, step if step is not None else epsilon / 2.0)
    if placement not in ("boundary", "center"):
        raise ValueError(f"unknown placement {placement!r}; expected one of {PLACEMENTS} or a point")
    if n == 1:
        parts = interval_parts(d)
        if placement == "boundary":
            return np.array([parts[-1][1] - epsilon])
        a, b = max(parts, key=lambda s: s[1] - s[0])
        return np.array([(a + b) / 2.0 + (b - a) / 4.0])
    if isinstance(d, Ball):
        c = np.asarray(d.center, float)
        off = d.radius - epsilon if placement == "boundary" else d.radius / 2.0
        return c + off * e1
    if isinstance(d, Box):
        lo, hi = np.asarray(d.lo, float), np.asarray(d.hi, float)
        c = (lo + hi) / 2.0
        half = (hi[0] - lo[0]) / 2.0
        off = half - epsilon if placement == "boundary" else half / 2.0
        return c + off * e1
    raise ValueError(
        f"placement {placement!r} is not defined for {type(d).__name__}; use 'auto' or an explicit point"
    )


# ------------------------------------------------------------------ sweep


@dataclass(frozen=True)
class SweepRecord:
    epsilon: float
    h: float
    center: tuple[float, ...]
    lhs: float
    lhs_error: float
    rhs: float
    rhs_error: float
    full_u: float
    full_u_error: float
    full_star: float
    full_star_error: float
    cross_domain: float
    cross_star: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def combined_error(self) -> float:
        return self.lhs_error + self.rhs_error

    @property
    def flagged(self) -> bool:
        return self.margin > VERDICT_FACTOR * self.combined_error

    @property
    def fullspace_gap(self) -> float:
        return abs(self.full_u - self.full_star)

    @property
    def fullspace_error(self) -> float:
        return self.full_u_error + self.full_star_error

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "h": self.h,
            "center": list(self.center),
            "lhs": self.lhs,
            "lhs_error": self.lhs_error,
            "rhs": self.rhs,
            "rhs_error": self.rhs_error,
            "margin": self.margin,
            "combined_error": self.combined_error,
            "flagged": self.flagged,
            "full_u": self.full_u,
            "full_u_error": self.full_u_error,
            "full_star": self.full_star,
            "full_star_error": self.full_star_error,
            "cross_domain": self.cross_domain,
            "cross_star": self.cross_star,
        }


SWEEP_COLUMNS = (
    "epsilon",
    "h",
    "lhs",
    "lhs_error",
    "rhs",
    "rhs_error",
    "margin",
    "combined_error",
    "flagged",
    "full_u",
    "full_u_error",
    "full_star",
    "full_star_error",
    "cross_domain",
    "cross_star",
)


@dataclass(frozen=True)
class SweepReport:
    domain: dict
    params: FracParams
    placement: str
    records: tuple[SweepRecord, ...]
    slope_domain: float | None
    slope_star: float | None
    notes: tuple[str, ...] = ()

    @property
    def flagged(self) -> list[float]:
        return [r.epsilon for r in self.records if r.flagged]

    @property
    def any_flagged(self) -> bool:
        return any(r.flagged for r in self.records)

    @property
    def downward_closed(self) -> bool:
        seen = False
        for r in self.records:
            if seen and not r.flagged:
                return False
            seen = seen or r.flagged
        return True

    def rows(self) -> list[list]:
        out = []
        for r in self.records:
            d = r.as_dict()
            out.append([d[c] for c in SWEEP_COLUMNS])
        return out

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "domain": self.domain,
            "params": self.params.as_dict(),
            "placement": self.placement,
            "records": [r.as_dict() for r in self.records],
            "slope_domain": self.slope_domain,
            "slope_star": self.slope_star,
            "flagged": self.flagged,
            "downward_closed": self.downward_closed,
            "notes": list(self.notes),
        }


def _slope(eps: Sequence[float], vals: Sequence[float]) -> float:
    return float(np.polyfit(np.log(eps), np.log(vals), 1)[0])


def counterexample_sweep(
    d: Domain,
    params: FracParams,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    placement="boundary",
    grid_h: float | None = None,
    threads: int | None = None,
) -> SweepReport:
    """Domain energy of ``u_eps`` against the energy of its rearrangement over ``d*``.

    The grid spacing defaults to ``min(epsilons) / 16`` and is shared by every
    bump. An epsilon is flagged when the rearranged side exceeds the domain
    side by more than three times the summed error estimates.
    """
    if not epsilons:
        raise ValueError("need at least one epsilon")
    if params.n != d.n:
        raise ValueError(f"parameter dimension {params.n} does not match domain dimension {d.n}")
    eps_list = sorted({float(e) for e in epsilons}, reverse=True)
    h = float(grid_h) if grid_h is not None else eps_list[-1] / CELLS_PER_EPS_MIN
    if not h > 0:
        raise ValueError(f"grid spacing must be positive, got {h}")
    ds = symmetrize(d)
    label = placement if isinstance(placement, str) else "explicit"
    records = []
    notes: list[str] = []
    for eps in eps_list:
        c = placement_center(d, eps, placement, params, step=h)
        spec = BumpSpec(tuple(c), eps)
        if not spec.fits(d):
            raise ValueError(f"bump of radius {eps} at {tuple(float(v) for v in c)} escapes the domain")
        u = build_bump(spec, bump_grid(c, eps, h))
        lhs = energy_domain(u, d, params, threads)
        rhs = energy_rearranged(u, ds, params, threads)
        fu = energy_fullspace(u, params, threads=threads)
        fs = energy_rearranged(u, None, params, threads)
        star = rearrange(u)
        rec = SweepRecord(
            eps,
            h,
            tuple(float(v) for v in c),
            lhs.value,
            lhs.error_estimate,
            rhs.value,
            rhs.error_estimate,
            fu.value,
            fu.error_estimate,
            fs.value,
            fs.error_estimate,
            cross_term(u, d, params),
            cross_term(star, ds, params),
        )
        log.info("eps=%g margin=%.6g combined error=%.3g", eps, rec.margin, rec.combined_error)
        records.append(rec)
    slope_d = slope_s = None
    if len(records) >= 3:
        es = [r.epsilon for r in records]
        slope_d = _slope(es, [r.cross_domain for r in records])
        slope_s = _slope(es, [r.cross_star for r in records])
    else:
        msg = f"slope fit skipped: {len(records)} epsilon values, need at least 3"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    report = SweepReport(d.to_json(), params, label, tuple(records), slope_d, slope_s, tuple(notes))
    if not report.downward_closed:
        msg = "flagged epsilons are not downward closed: " + ", ".join(
            f"{r.epsilon}:{'Y' if r.flagged else 'N'}" for r in records
        )
        log.warning(msg)
        report = SweepReport(
            report.domain, params, label, report.records, slope_d, slope_s, report.notes + (msg,)
        )
    return report


def finequality_check(
    d: Domain, params: FracParams, directions: int = DEFAULT_DIRECTIONS
) -> Comparison:
    """Tail kernel at the origin for ``d`` (lhs) and for its symmetrization (rhs).

    The error is zero when both sides have closed forms; otherwise it is the
    change between ``directions`` and twice as many.
    """
    origin = np.zeros(d.n)
    if not d.contains(origin) or d.boundary_distance(origin) <= 0.0:
        raise ValueError("the origin must be an interior point of the domain")
    if sym_diff_measure(d) <= 0.0:
        raise ValueError("domain coincides with its symmetrization; the comparison is an equality")
    ds = symmetrize(d)
    F0 = tail_kernel(d, origin, params, directions=directions)
    Ft0 = tail_kernel(ds, origin, params, directions=directions)
    err = 0.0
    try:
        tail_kernel(d, origin, params, method="closed_form")
    except ValueError:
        F0b = tail_kernel(d, origin, params, directions=2 * directions)
        err = abs(F0b - F0)
        F0 = F0b
    return Comparison(F0, Ft0, err)


# ---------------------------------------------------------- ratio suites


@dataclass(frozen=True)
class RatioReport:
    labels: tuple[str, ...]
    ratios: tuple[float, ...]
    errors: tuple[float, ...]

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)

    def rows(self) -> list[list]:
        return [[lab, r, e] for lab, r, e in zip(self.labels, self.ratios, self.errors)]

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "cases": [{"case": lab, "ratio": r, "error": e} for lab, r, e in zip(self.labels, self.ratios, self.errors)],
            "max_ratio": self.max_ratio,
        }


def _check_sp(params: FracParams) -> None:
    if not params.sp > 1.0:
        raise ValueError(
            f"the rearrangement estimate is stated for sigma * p > 1, got sigma * p = {params.sp:g}"
        )


def _ratio(num: EnergyResult, den: EnergyResult) -> tuple[float, float]:
    r = num.value / den.value
    rel = num.error_estimate / abs(num.value) + den.error_estimate / abs(den.value)
    return r, abs(r) * rel


def theorem2_ratio_suite(
    cases: Sequence[tuple[GridFunction, Domain]],
    params: FracParams,
    labels: Sequence[str] | None = None,
    threads: int | None = None,
) -> RatioReport:
    """``energy_fullspace(u*) / energy_domain(u, d)`` for each case."""
    _check_sp(params)
    if not cases:
        raise ValueError("need at least one case")
    names = list(labels) if labels is not None else [f"case{k}" for k in range(len(cases))]
    ratios, errors = [], []
    for u, d in cases:
        r, e = _ratio(energy_rearranged(u, None, params, threads), energy_domain(u, d, params, threads))
        ratios.append(r)
        errors.append(e)
    return RatioReport(tuple(names), tuple(ratios), tuple(errors))


def default_corpus(
    h: float = 1.0 / 256.0, seed: int = CORPUS_SEED
) -> tuple[list[str], list[tuple[GridFunction, Domain]]]:
    """Ten test functions on (-1, 1): six single bumps and four sums of two bumps."""
    d = Interval(-1.0, 1.0)
    grid = GridSpec.covering((-1.0,), (1.0,), h)
    x = grid.centers()[:, 0]
    rng = np.random.default_rng(seed)

    def one() -> tuple[float, float, np.ndarray]:
        eps = float(rng.uniform(0.1, 0.35))
        c = float(rng.uniform(-0.95 + eps, 0.95 - eps))
        return c, eps, eta((x - c) / eps)

    labels, cases = [], []
    for _ in range(6):
        c, eps, v = one()
        labels.append(f"bump(c={c:.4f},eps={eps:.4f})")
        cases.append((GridFunction(grid, v), d))
    for _ in range(4):
        c1, e1, v1 = one()
        c2, e2, v2 = one()
        w = float(rng.uniform(0.3, 1.0))
        labels.append(f"bump(c={c1:.4f},eps={e1:.4f})+{w:.4f}*bump(c={c2:.4f},eps={e2:.4f})")
        cases.append((GridFunction(grid, v1 + w * v2), d))
    return labels, cases


def family_ratios(
    d: Domain,
    params: FracParams,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    placement="boundary",
    grid_h: float | None = None,
    threads: int | None = None,
) -> RatioReport:
    """The ratio suite on the bump family ``u_eps`` used by the sweep."""
    _check_sp(params)
    eps_list = sorted({float(e) for e in epsilons}, reverse=True)
    h = float(grid_h) if grid_h is not None else eps_list[-1] / CELLS_PER_EPS_MIN
    cases, labels = [], []
    for eps in eps_list:
        c = placement_center(d, eps, placement, params, step=h)
        cases.append((build_bump(BumpSpec(tuple(c), eps), bump_grid(c, eps, h)), d))
        labels.append(f"eps={eps!r}")
    return theorem2_ratio_suite(cases, params, labels, threads)


def sobolev_from_hardy_check(
    u: GridFunction, d: Domain, params: FracParams, threads: int | None = None
) -> Comparison:
    """Squared critical Lebesgue norm (lhs) against the domain energy (rhs)."""
    if params.p != 2.0:
        raise ValueError(f"need p = 2, got p={params.p}")
    if not 0.5 < params.sigma < 1.0:
        raise ValueError(f"need sigma in (1/2, 1), got sigma={params.sigma}")
    if params.n < 2:
        raise ValueError(f"need n >= 2, got n={params.n}")
    if not np.any(u.values > 0):
        return Comparison(0.0, 0.0, 0.0)
    lhs = lp_norm(u, critical_exponent(params.n, params.sigma)) ** 2
    e = energy_domain(u, d, params, threads)
    return Comparison(lhs, e.value, e.error_estimate)


# --------------------------------------------------------------- descent


@dataclass(frozen=True)
class DescentResult:
    trace: tuple[float, ...]
    final: GridFunction
    sharp_constant: float
    step: float

    @property
    def certifies_strict(self) -> bool:
        return self.trace[-1] < self.sharp_constant


def best_constant_descent(
    d: Domain,
    params: FracParams,
    h: float,
    iterations: int = 50,
    step: float = 0.2,
    u0: GridFunction | None = None,
    max_halvings: int = 10,
    margin_cells: float = 2.0,
) -> DescentResult:
    """Projected gradient descent on the Rayleigh quotient over grid functions in ``d``.

    The energy is the pair form of :func:`quadratic_form` without the smooth
    defect correction, which keeps it positive definite on rough iterates.
    Cells closer than ``margin_cells * h`` to the boundary are held at zero.
    Each step moves against the quotient gradient, clips at zero and rescales
    to unit critical norm. A step is accepted only if the quotient does not
    increase; otherwise the step is halved, and after ``max_halvings``
    failures the descent stops if the gradient has vanished and raises
    otherwise.
    """
    if params.p != 2.0:
        raise ValueError(f"need p = 2, got p={params.p}")
    if not 0.5 < params.sigma < 1.0:
        raise ValueError(f"need sigma in (1/2, 1), got sigma={params.sigma}")
    if params.n < 2 or params.n != d.n:
        raise ValueError(f"need a domain of dimension n >= 2 matching the parameters, got n={d.n}")
    q = critical_exponent(params.n, params.sigma)
    if u0 is not None:
        grid = u0.grid
    else:
        lo, hi = d.bbox()
        grid = GridSpec.covering(lo, hi, h)
    A, free = quadratic_form(grid, d, params, defect=False)
    X = grid.centers()[free]
    dist = np.array([d.boundary_distance(x) for x in X])
    active = dist >= margin_cells * grid.h
    if not np.any(active):
        raise ValueError("no cell lies far enough from the boundary; refine the grid")
    A = A[np.ix_(active, active)]
    cells = free[active]
    if np.linalg.eigvalsh(A)[0] <= 0.0:
        raise RuntimeError("the discrete energy is not positive definite on this grid")
    vol = grid.cell_volume
    v = u0.flat()[cells].astype(float) if u0 is not None else dist[active]
    if not np.any(v > 0):
        raise ValueError("the starting function vanishes away from the boundary")

    def norm(w: np.ndarray) -> float:
        return float(np.sum(w**q) * vol) ** (1.0 / q)

    def quotient(w: np.ndarray) -> float:
        return float(w @ A @ w)

    v = v / norm(v)
    Q = quotient(v)
    trace = [Q]
    step0 = step
    for _ in range(iterations):
        # gradient of E(v)/N(v)^2 at N(v) = 1
        g = 2.0 * (A @ v - Q * v ** (q - 1.0) * vol)
        # components pushing a zero cell below zero are inactive
        g = np.where((v > 0) | (g < 0), g, 0.0)
        gmax = float(np.max(np.abs(g)))
        if gmax == 0.0:
            break
        direction = g / gmax * float(np.max(v))
        for _halving in range(max_halvings + 1):
            w = np.maximum(v - step * direction, 0.0)
            if np.any(w > 0):
                w = w / norm(w)
                Qw = quotient(w)
                if Qw <= Q:
                    break
            step /= 2.0
        else:
            if gmax * float(np.max(v)) < 1e-10 * max(Q, 1.0):
                break
            raise RuntimeError(f"descent step failed after {max_halvings} halvings (quotient {Q:.6g})")
        v, Q = w, Qw
        trace.append(Q)
        step = min(2.0 * step, step0)
    vals = np.zeros(grid.size)
    vals[cells] = v
    final = GridFunction(grid, vals.reshape(grid.shape))
    return DescentResult(tuple(trace), final, sharp_sobolev_constant(params.n, params.sigma), step)
