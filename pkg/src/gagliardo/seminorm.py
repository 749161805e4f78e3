"""Gagliardo energies on domains and on the whole space.

Grid functions are read as midpoint samples of a smooth function. For a
domain ``d`` the energy is assembled from the cells ``M`` whose centres lie in
``d``::

    E_d(u) = sum_{i != j in M} |u_i - u_j|^p k_ij h^2n
             + 2 sum_i u_i^p h^n (F_M(x_i) - F_d(x_i))
             - (diagonal defect)

where ``F_A`` is the complement tail of ``A``. The middle term is exact
bookkeeping: it moves the region between the cell union and ``d`` into the
tail integrals. The diagonal defect is the leading midpoint-rule error of the
punctured pair sum, ``h^(n + p - sp) |grad u|^p`` times a lattice constant (see
:mod:`gagliardo.quadrature`); it is applied for n = 1, 2.

Radial profiles are integrated shell against shell with the angular part of
the kernel done in closed form. Profiles produced by :func:`rearrange` are
first binned to radial width h, so that in one dimension a symmetric grid
function and its rearrangement are evaluated on the same lattice.

Every result carries ``error_estimate = |value(h) - value(2h)|``.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .constants import FracParams, sphere_measure
from .geometry import Ball, Domain, interval_parts
from .grids import GridFunction
from .kernel import direction_rule, tail_kernel
from .quadrature import (
    ball_tail,
    box_tail_2d,
    cell_integral_2d,
    euclidean_kernel,
    grid_defect_correction,
    interval_union_tail,
    lattice_defect_2d,
    line_constant,
    line_defect_correction,
    masked_gradient,
    pair_energy,
    radial_kernel_rows,
    window_defect,
)
from .rearrange import RadialProfile, lp_norm, rearrange

log = logging.getLogger(__name__)

__all__ = [
    "EnergyResult",
    "critical_exponent",
    "cross_term",
    "energy_domain",
    "energy_fullspace",
    "energy_rearranged",
    "quadratic_form",
    "rayleigh_quotient",
]

PROFILE_DIRECTIONS = 32
NEAR_CELLS = 8.0


@dataclass(frozen=True)
class EnergyResult:
    value: float
    error_estimate: float
    h: float
    params: FracParams
    timing: float = field(default=0.0, compare=False)

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "value": self.value,
            "error_estimate": self.error_estimate,
            "h": self.h,
            "params": self.params.as_dict(),
        }
        if timing:
            out["timing"] = self.timing
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True)


def _check_params(params: FracParams, n: int) -> None:
    if params.n != n:
        raise ValueError(f"parameter dimension {params.n} does not match data dimension {n}")


# ------------------------------------------------------------- grid energies


def _mask_tail(u: GridFunction, counted: np.ndarray, xs: np.ndarray, sp: float, threads) -> np.ndarray:
    """Complement tail of the union of counted cells at the points ``xs``."""
    g = u.grid
    h, n = g.h, g.n
    if n == 1:
        mask = counted.reshape(-1).astype(int)
        edges = np.diff(np.concatenate([[0], mask, [0]]))
        starts = np.nonzero(edges == 1)[0]
        stops = np.nonzero(edges == -1)[0]
        parts = [(g.lo[0] + a * h, g.lo[0] + b * h) for a, b in zip(starts, stops)]
        return interval_union_tail(xs[:, 0], parts, sp)
    box = g.box()
    if n == 2:
        base = box_tail_2d(xs, g.lo, g.hi, sp)
    else:
        base = np.asarray(tail_kernel(box, xs, FracParams(n, 0.5, 2 * sp), method="directions"))
    off = g.centers()[~counted.reshape(-1)]
    if len(off) == 0:
        return base
    # midpoint rule with its Laplacian correction for distant cells; exact
    # cell integrals (n = 2) for cells within NEAR_CELLS spacings
    e = n + sp
    lap = e * (e + 2.0 - n) / 24.0
    extra = np.empty(len(xs))
    for a in range(0, len(xs), 128):
        diff = xs[a : a + 128, None, :] - off[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        far = r ** (-e) * (1.0 + lap * (h / r) ** 2) * h**n
        if n == 2:
            near = np.nonzero(r < NEAR_CELLS * h)
            if len(near[0]):
                pts = xs[a : a + 128][near[0]]
                far[near] = cell_integral_2d(pts, off[near[1]] - h / 2.0, h, sp)
        extra[a : a + 128] = far.sum(axis=1)
    return base + extra


def _grid_energy(u: GridFunction, d: Domain | None, params: FracParams, threads, coarse: bool = False) -> float:
    """Corrected pair sum over the cells of ``d`` (all cells when ``d`` is None)."""
    g = u.grid
    h, n, p, sp = g.h, g.n, params.p, params.sp
    X = g.centers()
    v = u.flat()
    if d is None:
        counted = np.ones(g.size, dtype=bool)
    else:
        counted = np.asarray(d.contains(X), dtype=bool)
        escaped = (v > 0) & ~counted
        if escaped.any():
            if not coarse:
                bad = X[np.argmax(escaped)]
                raise ValueError(f"support of u leaves the domain (cell centre {bad.tolist()})")
            log.info("coarse level: dropping %d support cells outside the domain", int(escaped.sum()))
            v = np.where(escaped, 0.0, v)
    w = np.full(g.size, h**n)
    pairs = pair_energy(v, w, counted, p, euclidean_kernel(X, n + sp), threads)
    sup = np.nonzero(v > 0)[0]
    if len(sup) == 0:
        return 0.0
    xs = X[sup]
    tail = _mask_tail(u, counted, xs, sp, threads)
    if d is not None:
        tail = tail - np.asarray(tail_kernel(d, xs, params))
    tail_term = 2.0 * math.fsum(v[sup] ** p * h**n * tail)
    corr = grid_defect_correction(v.reshape(g.shape), h, counted.reshape(g.shape), p, sp)
    return pairs + tail_term - corr


def _grid_cross(u: GridFunction, d: Domain, params: FracParams) -> float:
    v = u.flat()
    sup = np.nonzero(v > 0)[0]
    if len(sup) == 0:
        return 0.0
    X = u.grid.centers()[sup]
    if not np.all(d.contains(X)):
        raise ValueError("support of u leaves the domain")
    F = np.asarray(tail_kernel(d, X, params))
    return math.fsum(v[sup] ** params.p * u.grid.cell_volume * F)


# ---------------------------------------------------------- radial profiles


def _bin_profile(prof: RadialProfile, width: float) -> RadialProfile:
    """Group shells into radial bins of the given width (measure-weighted levels)."""
    if len(prof.levels) == 0:
        return prof
    mid = 0.5 * (prof.radii[:-1] + prof.radii[1:])
    idx = np.floor(mid / width + 1e-9).astype(np.int64)
    starts = np.concatenate([[0], np.nonzero(np.diff(idx))[0] + 1])
    m = prof.shell_measures()
    mass = np.add.reduceat(prof.levels * m, starts)
    meas = np.add.reduceat(m, starts)
    levels = np.minimum.accumulate(mass / meas)
    radii = np.append(prof.radii[starts], prof.radii[-1])
    return RadialProfile(prof.n, radii, levels, None)


@dataclass
class _Realization:
    """Sample points of a radial profile, padded by two zero shells."""

    n: int
    x: np.ndarray  # signed positions (n = 1) or radii
    edges: np.ndarray
    weights: np.ndarray  # cell lengths (n = 1) or shell measures
    values: np.ndarray
    r_pad: float


def _realize(prof: RadialProfile, width: float | None) -> _Realization:
    if len(prof.levels) == 0:
        raise ValueError("cannot realise an empty profile")
    binned = prof if width is None else _bin_profile(prof, width)
    n = prof.n
    radii = binned.radii
    levels = binned.levels
    step = width if width is not None else float(radii[-1] - radii[-2])
    R = float(radii[-1])
    radii = np.concatenate([radii, [R + step, R + 2 * step]])
    levels = np.concatenate([levels, [0.0, 0.0]])
    if n == 1:
        edges = np.concatenate([-radii[::-1], radii[1:]])
        x = 0.5 * (edges[:-1] + edges[1:])
        values = np.concatenate([levels[::-1], levels])
        return _Realization(1, x, edges, np.diff(edges), values, float(radii[-1]))
    a, b = radii[:-1], radii[1:]
    cent = n / (n + 1.0) * (b ** (n + 1) - a ** (n + 1)) / (b**n - a**n)
    meas = sphere_measure(n) / n * (b**n - a**n)
    return _Realization(n, cent, radii, meas, levels, float(radii[-1]))


def _profile_pairs(rz: _Realization, params: FracParams, threads) -> float:
    counted = np.ones(len(rz.x), dtype=bool)
    if rz.n == 1:
        kern = euclidean_kernel(rz.x[:, None], 1.0 + params.sp)
    else:
        kern = radial_kernel_rows(rz.x, rz.n, params.sp)
    return pair_energy(rz.values, rz.weights, counted, params.p, kern, threads)


def _profile_defect(rz: _Realization, params: FracParams) -> float:
    if rz.n == 1:
        return line_defect_correction(rz.x, rz.edges, rz.values, rz.weights, params.p, params.sp)
    c = line_constant(rz.n, params.sp)
    return c * line_defect_correction(rz.x, rz.edges, rz.values, rz.weights, params.p, params.sp)


def _support_points(rz: _Realization) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sel = rz.values > 0
    return rz.x[sel], rz.values[sel], rz.weights[sel]


def _profile_full(prof: RadialProfile, params: FracParams, width: float | None, threads) -> float:
    if len(prof.levels) == 0:
        return 0.0
    rz = _realize(prof, width)
    pairs = _profile_pairs(rz, params, threads)
    xs, vs, ws = _support_points(rz)
    if len(xs) == 0:
        return 0.0
    T = ball_tail(rz.n, rz.r_pad, np.abs(xs), params.sp)
    return pairs + 2.0 * math.fsum(vs**params.p * ws * T) - _profile_defect(rz, params)


def _check_profile_inside(prof: RadialProfile, d: Domain) -> None:
    R = prof.support_radius
    if R == 0.0:
        return
    if isinstance(d, Ball) and all(c == 0.0 for c in d.center):
        if R > d.radius * (1.0 + 1e-12):
            raise ValueError(f"rearranged support radius {R!r} exceeds the target radius {d.radius!r}")
        return
    if d.n == 1:
        if not any(a <= -R and R <= b for a, b in interval_parts(d)):
            raise ValueError(f"rearranged support (-{R!r}, {R!r}) is not inside the target domain")
        return
    W, _ = direction_rule(d.n, PROFILE_DIRECTIONS)
    if not np.all(d.contains(W * R * (1.0 - 1e-12))):
        raise ValueError(f"rearranged support ball of radius {R!r} is not inside the target domain")


def _profile_cross(prof: RadialProfile, d: Domain, params: FracParams, width: float | None) -> float:
    _check_profile_inside(prof, d)
    if len(prof.levels) == 0:
        return 0.0
    rz = _realize(prof, width)
    xs, vs, ws = _support_points(rz)
    if len(xs) == 0:
        return 0.0
    if rz.n == 1:
        F = np.asarray(tail_kernel(d, xs[:, None], params))
    elif isinstance(d, Ball) and all(c == 0.0 for c in d.center):
        F = ball_tail(rz.n, d.radius, xs, params.sp)
    else:
        W, wts = direction_rule(rz.n, PROFILE_DIRECTIONS)
        pts = (xs[:, None, None] * W[None, :, :]).reshape(-1, rz.n)
        Fd = np.asarray(tail_kernel(d, pts, params)).reshape(len(xs), len(W))
        F = Fd @ wts / sphere_measure(rz.n)
    return math.fsum(vs**params.p * ws * F)


def _profile_width(prof: RadialProfile) -> float | None:
    if prof.cell_volume is None:
        return None
    return prof.cell_volume ** (1.0 / prof.n)


def _two_levels(fn, prof: RadialProfile):
    """Evaluate ``fn(profile, width)`` at the profile's resolution and at twice it."""
    w = _profile_width(prof)
    if w is None:
        return fn(prof, None), fn(prof.coarsen(), None), float(np.max(np.diff(prof.radii)))
    return fn(prof, w), fn(prof, 2.0 * w), w


# ------------------------------------------------------------------ public


def energy_domain(u, d: Domain, params: FracParams, threads: int | None = None) -> EnergyResult:
    """Gagliardo energy of ``u`` over ``d x d``.

    ``u`` is a :class:`GridFunction` whose positive cells have centres inside
    ``d``, or a :class:`RadialProfile` whose support ball lies in ``d``.
    """
    t0 = time.perf_counter()
    _check_params(params, d.n)
    if isinstance(u, RadialProfile):
        if u.n != d.n:
            raise ValueError("profile and domain dimensions differ")
        _check_profile_inside(u, d)

        def fn(prof, width):
            return _profile_full(prof, params, width, threads) - 2.0 * _profile_cross(prof, d, params, width)

        v1, v2, h = _two_levels(fn, u)
    elif isinstance(u, GridFunction):
        _check_params(params, u.n)
        v1 = _grid_energy(u, d, params, threads)
        v2 = _grid_energy(u.coarsen(), d, params, threads, coarse=True)
        h = u.h
    else:
        raise TypeError(f"expected GridFunction or RadialProfile, got {type(u).__name__}")
    return EnergyResult(v1, abs(v1 - v2), h, params, time.perf_counter() - t0)


def cross_term(u, d: Domain, params: FracParams) -> float:
    """``int_d u^p F_d`` by cell midpoints (grid) or shell centroids (profile)."""
    _check_params(params, d.n)
    if isinstance(u, RadialProfile):
        return _profile_cross(u, d, params, _profile_width(u))
    if isinstance(u, GridFunction):
        return _grid_cross(u, d, params)
    raise TypeError(f"expected GridFunction or RadialProfile, got {type(u).__name__}")


def energy_fullspace(
    u, params: FracParams, hull: Domain | None = None, threads: int | None = None
) -> EnergyResult:
    """Gagliardo energy over ``R^n x R^n``.

    Without ``hull`` the grid box (or, for a profile, the padded support ball)
    is the inner region and its tail is integrated exactly. With ``hull`` the
    value is ``energy_domain(u, hull) + 2 cross_term(u, hull)``.
    """
    t0 = time.perf_counter()
    n = u.n
    _check_params(params, n)
    if hull is not None:
        inner = energy_domain(u, hull, params, threads)
        if isinstance(u, GridFunction):
            c1 = _grid_cross(u, hull, params)
            c2 = _grid_cross(_drop_outside(u.coarsen(), hull), hull, params)
        else:
            w = _profile_width(u)
            c1 = _profile_cross(u, hull, params, w)
            if w is None:
                c2 = _profile_cross(u.coarsen(), hull, params, None)
            else:
                c2 = _profile_cross(u, hull, params, 2.0 * w)
        v1 = inner.value + 2.0 * c1
        err = inner.error_estimate + 2.0 * abs(c1 - c2)
        return EnergyResult(v1, err, inner.h, params, time.perf_counter() - t0)
    if isinstance(u, RadialProfile):
        v1, v2, h = _two_levels(lambda prof, width: _profile_full(prof, params, width, threads), u)
    elif isinstance(u, GridFunction):
        v1 = _grid_energy(u, None, params, threads)
        v2 = _grid_energy(u.coarsen(), None, params, threads)
        h = u.h
    else:
        raise TypeError(f"expected GridFunction or RadialProfile, got {type(u).__name__}")
    return EnergyResult(v1, abs(v1 - v2), h, params, time.perf_counter() - t0)


def _drop_outside(u: GridFunction, d: Domain) -> GridFunction:
    inside = np.asarray(d.contains(u.grid.centers()), dtype=bool).reshape(u.grid.shape)
    return GridFunction(u.grid, np.where(inside, u.values, 0.0))


def energy_rearranged(
    u: GridFunction, target: Domain | None, params: FracParams, threads: int | None = None
) -> EnergyResult:
    """Energy of the symmetric decreasing rearrangement of ``u`` over ``target``.

    ``target=None`` gives the whole-space energy of the rearrangement. The 2h
    level rearranges ``u.coarsen()``, mirroring the grid-side estimate; if that
    coarse support no longer fits ``target`` the fine profile is rebinned
    instead.
    """
    t0 = time.perf_counter()
    _check_params(params, u.n)
    prof = rearrange(u)
    coarse = rearrange(u.coarsen())
    if target is None:
        fn = lambda pr: _profile_full(pr, params, _profile_width(pr), threads)  # noqa: E731
    else:
        _check_params(params, target.n)
        _check_profile_inside(prof, target)

        def fn(pr):
            w = _profile_width(pr)
            return _profile_full(pr, params, w, threads) - 2.0 * _profile_cross(pr, target, params, w)

    v1 = fn(prof)
    try:
        v2 = fn(coarse)
    except ValueError:
        log.info("coarse rearrangement leaves the target; rebinning the fine profile instead")
        w = 2.0 * _profile_width(prof)
        v2 = _profile_full(prof, params, w, threads) - 2.0 * _profile_cross(prof, target, params, w)
    return EnergyResult(v1, abs(v1 - v2), u.h, params, time.perf_counter() - t0)


def critical_exponent(n: int, sigma: float) -> float:
    if not n > 2.0 * sigma:
        raise ValueError(f"need n > 2 sigma, got n={n}, sigma={sigma}")
    return 2.0 * n / (n - 2.0 * sigma)


def rayleigh_quotient(u: GridFunction, d: Domain, params: FracParams, threads: int | None = None) -> float:
    """``energy_domain(u, d) / ||u||^2`` in the critical Lebesgue norm (p = 2)."""
    if params.p != 2.0:
        raise ValueError(f"the Rayleigh quotient is defined for p = 2, got p={params.p}")
    qs = critical_exponent(params.n, params.sigma)
    norm = lp_norm(u, qs)
    if norm == 0.0:
        raise ValueError("the Rayleigh quotient of the zero function is undefined")
    return energy_domain(u, d, params, threads).value / norm**2


# ---------------------------------------------------------- quadratic form


def _gradient_operators(shape: tuple[int, ...], h: float, counted: np.ndarray) -> list[np.ndarray]:
    """Matrices of :func:`masked_gradient` along each axis on a grid of the given shape."""
    N = int(np.prod(shape))
    eye = np.eye(N).reshape((N,) + tuple(shape))
    grads = masked_gradient(eye, h, np.asarray(counted, dtype=bool).reshape(shape))
    return [g.reshape(N, N).T for g in grads]


def quadratic_form(
    grid, d: Domain, params: FracParams, defect: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Matrix ``A`` and free-cell indices with ``energy_domain(u, d) = u_f^T A u_f`` (p = 2).

    Free cells are the grid cells whose centres lie in ``d``. For n = 2 the
    diagonal defect is quadratic only because its lattice constant is
    direction independent when p = 2. ``defect=False`` leaves the defect out;
    the correction is tuned to smooth functions and can make the form
    indefinite on grid-scale oscillations.
    """
    if params.p != 2.0:
        raise ValueError("the quadratic form exists only for p = 2")
    n, h, sp = grid.n, grid.h, params.sp
    X = grid.centers()
    counted = np.asarray(d.contains(X), dtype=bool)
    free = np.nonzero(counted)[0]
    Xf = X[free]
    diff = Xf[:, None, :] - Xf[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(r, np.inf)
    K = r ** (-(n + sp)) * h ** (2 * n)
    A = 2.0 * (np.diag(K.sum(axis=1)) - K)
    dummy = GridFunction(grid, np.zeros(grid.shape))
    tail = _mask_tail(dummy, counted, Xf, sp, None) - np.asarray(tail_kernel(d, Xf, params))
    A += np.diag(2.0 * h**n * tail)
    if defect and n in (1, 2):
        ops = _gradient_operators(grid.shape, h, counted)
        if n == 1:
            x = (np.arange(grid.size) + 0.5) * h
            edges = np.arange(grid.size + 1) * h
            D = window_defect(x, edges, 1.0 - sp)
            wdiag = h * D * counted
        else:
            Z = float(lattice_defect_2d(np.array([0.0]), 2.0, sp)[0])
            wdiag = h**2 * h ** (2.0 - sp) * Z * counted.astype(float)
        C = sum(G.T @ (wdiag[:, None] * G) for G in ops)
        A -= C[np.ix_(free, free)]
    return 0.5 * (A + A.T), free

