"""Complement tail integrals, ray-based Hardy weights and the |x|^-alpha comparisons.

All direction-based quantities share one rule: two signed directions with unit
weights in one dimension (exact), ``M`` equispaced angles on the circle in two
dimensions and a Gauss-Legendre x trapezoid product rule on the sphere in
three.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .constants import FracParams, gamma, sphere_measure
from .geometry import (
    Ball,
    Box,
    Domain,
    Empty,
    Interval,
    Union,
    _as_points,
    interval_parts,
    sym_diff_measure,
    symmetrize,
)
from .quadrature import ball_tail, box_tail_2d, interval_union_tail

__all__ = [
    "Comparison",
    "TailField",
    "direction_rule",
    "exit_distances",
    "field_table",
    "hardy_pointwise_bound",
    "lemma_decrease_inside",
    "lemma_decrease_outside",
    "m_alpha",
    "tail_kernel",
]

BOUNDARY_EXCLUSION = 1e-9
DEFAULT_DIRECTIONS = 256
TAIL_METHODS = ("auto", "closed_form", "directions")


@dataclass(frozen=True)
class Comparison:
    """Two sides of an inequality and the quadrature error attached to them."""

    lhs: float
    rhs: float
    error: float = 0.0

    def __iter__(self):
        yield self.lhs
        yield self.rhs

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "error": self.error}


def direction_rule(n: int, directions: int = DEFAULT_DIRECTIONS) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions (M, n) and weights summing to ``|S^{n-1}|``."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if directions < 4:
        raise ValueError("need at least 4 directions")
    if n == 2:
        phi = (np.arange(directions) + 0.5) * (2.0 * math.pi / directions)
        W = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return W, np.full(directions, 2.0 * math.pi / directions)
    if n == 3:
        n_t = max(2, directions // 4)
        n_p = max(4, directions // 2)
        z, wz = np.polynomial.legendre.leggauss(n_t)
        phi = (np.arange(n_p) + 0.5) * (2.0 * math.pi / n_p)
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1.0 - zz**2)
        W = np.stack([rho * np.cos(pp), rho * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        wts = (wz[:, None] * np.full(n_p, 2.0 * math.pi / n_p)[None, :]).ravel()
        return W, wts
    raise ValueError(f"direction rules are implemented for n <= 3, got n={n}")


# ------------------------------------------------------------ ray casting


def _flatten(d: Domain) -> list[Domain]:
    if isinstance(d, Union):
        out: list[Domain] = []
        for p in d.parts:
            out.extend(_flatten(p))
        return out
    return [d]


def _convex(d: Domain) -> bool:
    return isinstance(d, (Interval, Ball, Box))


def _chords(part: Domain, X: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Entry/exit parameters ``t0 < t1`` of the lines ``x + t w`` (NaN when missed)."""
    m, M = len(X), len(W)
    if isinstance(part, Interval) or (isinstance(part, (Ball, Box)) and part.n == 1):
        lo, hi = (np.asarray(v, float)[0] for v in part.bbox())
        a = (lo - X[:, :1]) / W[None, :, 0]
        b = (hi - X[:, :1]) / W[None, :, 0]
        return np.minimum(a, b), np.maximum(a, b)
    if isinstance(part, Ball):
        xc = X - np.asarray(part.center)
        b = xc @ W.T
        c = np.sum(xc**2, axis=1)[:, None] - part.radius**2
        disc = b * b - c
        hit = disc > 0
        root = np.sqrt(np.where(hit, disc, 0.0))
        t0 = np.where(hit, -b - root, np.nan)
        t1 = np.where(hit, -b + root, np.nan)
        return t0, t1
    if isinstance(part, Box):
        t0 = np.full((m, M), -np.inf)
        t1 = np.full((m, M), np.inf)
        for k in range(part.n):
            wk = W[:, k][None, :]
            xk = X[:, k][:, None]
            lo, hi = part.lo[k], part.hi[k]
            with np.errstate(divide="ignore", invalid="ignore"):
                s0 = (lo - xk) / wk
                s1 = (hi - xk) / wk
            par = wk == 0.0
            inside = (xk > lo) & (xk < hi)
            s_lo = np.where(par, np.where(inside, -np.inf, np.inf), np.minimum(s0, s1))
            s_hi = np.where(par, np.where(inside, np.inf, -np.inf), np.maximum(s0, s1))
            t0 = np.maximum(t0, s_lo)
            t1 = np.minimum(t1, s_hi)
        hit = t1 > t0
        return np.where(hit, t0, np.nan), np.where(hit, t1, np.nan)
    raise TypeError(f"no vectorised chord routine for {type(part).__name__}")


def _ray_data(d: Domain, X: np.ndarray, W: np.ndarray, sp: float | None):
    """Per point and direction: exit distance ``d_w`` (both signs) and the
    integral of ``r^-(1+sp)`` over the part of the forward ray outside ``d``."""
    parts = _flatten(d)
    m, M = len(X), len(W)
    if all(_convex(p) for p in parts):
        owner = np.full(m, -1)
        for k, p in enumerate(parts):
            owner[(owner < 0) & np.asarray(p.contains(X), dtype=bool)] = k
        if np.any(owner < 0):
            raise ValueError("point is not inside the domain")
        dist = np.empty((m, M))
        fwd_exit = np.empty((m, M))
        chords = [_chords(p, X, W) for p in parts]
        for k in range(len(parts)):
            sel = owner == k
            t0, t1 = chords[k]
            dist[sel] = np.minimum(-t0[sel], t1[sel])
            fwd_exit[sel] = t1[sel]
        tail = None
        if sp is not None:
            tail = fwd_exit ** (-sp) / sp
            for k in range(len(parts)):
                t0, t1 = chords[k]
                other = (owner != k)[:, None] & np.isfinite(t0) & (t0 > 0)
                if other.any():
                    t0c = np.where(other, t0, 1.0)
                    t1c = np.where(other, t1, 1.0)
                    tail = tail - np.where(other, (t0c ** (-sp) - t1c ** (-sp)) / sp, 0.0)
        return dist, tail
    # generic path: per-ray segment lists
    dist = np.empty((m, M))
    tail = np.empty((m, M)) if sp is not None else None
    for i in range(m):
        for j in range(M):
            segs = d.segments(X[i], W[j])
            own = [s for s in segs if s[0] < 0.0 < s[1]]
            if not own:
                raise ValueError("point is not inside the domain")
            t0, t1 = own[0]
            dist[i, j] = min(-t0, t1)
            if tail is not None:
                acc = t1 ** (-sp) / sp
                for a, b in segs:
                    if a >= t1:
                        acc -= (a ** (-sp) - b ** (-sp)) / sp
                tail[i, j] = acc
    return dist, tail


def _check_interior(d: Domain, X: np.ndarray) -> None:
    inside = np.asarray(d.contains(X), dtype=bool)
    if not inside.all():
        bad = X[np.argmin(inside)]
        raise ValueError(f"point {bad.tolist()} is not inside the domain")
    for x in X:
        if d.boundary_distance(x) < BOUNDARY_EXCLUSION:
            raise ValueError(
                f"point {x.tolist()} lies within {BOUNDARY_EXCLUSION:g} of the boundary; "
                "the tail kernel is not representable there"
            )


def exit_distances(d: Domain, x, directions: int = DEFAULT_DIRECTIONS) -> tuple[np.ndarray, np.ndarray]:
    """``d_w(x)`` on the direction rule; returns (distances (m, M), weights)."""
    X, _ = _as_points(x, d.n)
    W, wts = direction_rule(d.n, directions)
    _check_interior(d, X)
    dist, _ = _ray_data(d, X, W, None)
    return dist, wts


# ------------------------------------------------------------ tail kernel


def _closed_form_tail(d: Domain, X: np.ndarray, sp: float) -> np.ndarray | None:
    if d.n == 1:
        return interval_union_tail(X[:, 0], interval_parts(d), sp)
    if isinstance(d, Ball) and d.n in (2, 3):
        r = np.linalg.norm(X - np.asarray(d.center), axis=1)
        return ball_tail(d.n, d.radius, r, sp)
    if isinstance(d, Box) and d.n == 2:
        return box_tail_2d(X, d.lo, d.hi, sp)
    return None


def tail_kernel(
    d: Domain,
    x,
    params: FracParams,
    method: str = "auto",
    directions: int = DEFAULT_DIRECTIONS,
):
    """``F(x) = int_{R^n \\ d} |x - y|^-(n + sp) dy``.

    ``method``: ``closed_form`` uses exact or adaptive formulas (1-D unions,
    balls, 2-D boxes), ``directions`` the ray decomposition on the direction
    rule, ``auto`` the former when available. Accepts one point or an (m, n)
    array and returns a float or an array accordingly.
    """
    if method not in TAIL_METHODS:
        raise ValueError(f"unknown tail method {method!r}; expected one of {TAIL_METHODS}")
    if params.n != d.n:
        raise ValueError(f"parameter dimension {params.n} does not match domain dimension {d.n}")
    X, single = _as_points(x, d.n)
    _check_interior(d, X)
    sp = params.sp
    out = None
    if method in ("auto", "closed_form"):
        out = _closed_form_tail(d, X, sp)
        if out is None and method == "closed_form":
            raise ValueError(f"no closed form tail for {type(d).__name__} in n={d.n}")
    if out is None:
        W, wts = direction_rule(d.n, directions)
        _, tail = _ray_data(d, X, W, sp)
        out = tail @ wts
    return float(out[0]) if single else out


@dataclass(frozen=True)
class TailField:
    """Tail kernel of a fixed domain, evaluated on demand."""

    domain: Domain
    params: FracParams
    method: str = "auto"
    directions: int = DEFAULT_DIRECTIONS

    def __post_init__(self) -> None:
        if self.method not in TAIL_METHODS:
            raise ValueError(f"unknown tail method {self.method!r}")

    def __call__(self, x):
        return tail_kernel(self.domain, x, self.params, self.method, self.directions)

    def rearranged(self) -> "TailField":
        """The same field for the symmetrized domain."""
        return TailField(symmetrize(self.domain), self.params, self.method, self.directions)


# ----------------------------------------------------------- Hardy weights


def m_alpha(
    d: Domain,
    x,
    alpha: float,
    directions: int = DEFAULT_DIRECTIONS,
    gamma_dim: int | None = None,
):
    """Gamma-normalised ``L^-alpha`` mean of the exit distances ``d_w(x)``.

    ``gamma_dim`` is the dimension entering ``Gamma((N + alpha)/2)``; it
    defaults to the ambient dimension.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    n = d.n
    N = n if gamma_dim is None else int(gamma_dim)
    _, single = _as_points(x, n)
    dist, wts = exit_distances(d, x, directions)
    pref = (2.0 * math.pi ** ((n - 1) / 2.0) * gamma((1.0 + alpha) / 2.0) / gamma((N + alpha) / 2.0)) ** (
        1.0 / alpha
    )
    # factor out the smallest distance so large alpha does not overflow
    dmin = dist.min(axis=1)
    mean = ((dist / dmin[:, None]) ** (-alpha)) @ wts
    out = pref * dmin * mean ** (-1.0 / alpha)
    return float(out[0]) if single else out


def hardy_pointwise_bound(
    d: Domain, x, params: FracParams, directions: int = DEFAULT_DIRECTIONS
) -> Comparison | tuple[np.ndarray, np.ndarray]:
    """Tail kernel against ``(1/sp) int d_w(x)^-sp dw`` from the same ray data.

    A single point returns a :class:`Comparison`; an array of points returns
    ``(lhs, rhs)`` arrays.
    """
    X, single = _as_points(x, d.n)
    _check_interior(d, X)
    W, wts = direction_rule(d.n, directions)
    dist, tail = _ray_data(d, X, W, params.sp)
    lhs = tail @ wts
    rhs = (dist ** (-params.sp) @ wts) / params.sp
    if single:
        return Comparison(float(lhs[0]), float(rhs[0]))
    return lhs, rhs


# ------------------------------------------------- |x|^-alpha comparisons


def _radial_power_integral(d: Domain, alpha: float, directions: int, inside: bool) -> float:
    """``int_d |x|^-alpha`` (inside) or ``int_{R^n \\ d} |x|^-alpha`` by rays from 0."""
    n = d.n
    W, wts = direction_rule(n, directions)
    e = n - alpha
    anti = lambda r: r**e / e  # noqa: E731
    vals = np.empty(len(W))
    for j, w in enumerate(W):
        segs = [(max(a, 0.0), b) for a, b in d.segments(np.zeros(n), w) if b > 0.0]
        if inside:
            vals[j] = sum(anti(b) - (0.0 if a == 0.0 else anti(a)) for a, b in segs)
        else:
            own = [s for s in segs if s[0] == 0.0]
            r0 = own[0][1]
            acc = -anti(r0)
            for a, b in segs:
                if a > 0.0:
                    acc -= anti(b) - anti(a)
            vals[j] = acc
    return float(vals @ wts)


def _lemma_value(d: Domain, alpha: float, directions: int, inside: bool) -> tuple[float, float]:
    if d.n == 1:
        return _radial_power_integral(d, alpha, directions, inside), 0.0
    a = _radial_power_integral(d, alpha, directions, inside)
    b = _radial_power_integral(d, alpha, 2 * directions, inside)
    return b, abs(b - a)


def lemma_decrease_inside(d: Domain, alpha: float, directions: int = DEFAULT_DIRECTIONS) -> Comparison:
    """``int_{d*} |x|^-alpha`` (lhs) against ``int_d |x|^-alpha`` (rhs) for ``alpha < n``."""
    n = d.n
    if not 0 < alpha < n:
        raise ValueError(f"need 0 < alpha < n for local integrability, got alpha={alpha}, n={n}")
    if isinstance(d, Empty) or d.measure() <= 0:
        raise ValueError("domain has zero measure")
    if sym_diff_measure(d) <= 0:
        raise ValueError("domain coincides with its symmetrization; the comparison is an equality")
    R = (d.measure() / (sphere_measure(n) / n)) ** (1.0 / n)
    lhs = sphere_measure(n) * R ** (n - alpha) / (n - alpha)
    rhs, err = _lemma_value(d, alpha, directions, inside=True)
    return Comparison(lhs, rhs, err)


def lemma_decrease_outside(d: Domain, alpha: float, directions: int = DEFAULT_DIRECTIONS) -> Comparison:
    """``int_{R^n \\ d} |x|^-alpha`` (lhs) against the same over the complement of ``d*``."""
    n = d.n
    if not alpha > n:
        raise ValueError(f"need alpha > n for integrability at infinity, got alpha={alpha}, n={n}")
    origin = np.zeros(n)
    if not d.contains(origin) or d.boundary_distance(origin) <= 0.0:
        raise ValueError("the domain must contain a closed ball around the origin")
    if sym_diff_measure(d) <= 0:
        raise ValueError("domain coincides with its symmetrization; the comparison is an equality")
    R = (d.measure() / (sphere_measure(n) / n)) ** (1.0 / n)
    rhs = sphere_measure(n) * R ** (n - alpha) / (alpha - n)
    lhs, err = _lemma_value(d, alpha, directions, inside=False)
    return Comparison(lhs, rhs, err)


# ------------------------------------------------------------------ export


def field_table(
    d: Domain,
    points: Sequence,
    params: FracParams,
    alpha: float | None = None,
    directions: int = DEFAULT_DIRECTIONS,
    path=None,
) -> list[tuple]:
    """Rows ``(x..., F(x), m_alpha(x))`` for plotting; written as CSV when ``path`` is set.

    ``alpha`` defaults to ``sp``.
    """
    X, _ = _as_points(points, d.n)
    a = params.sp if alpha is None else alpha
    F = np.atleast_1d(tail_kernel(d, X, params, directions=directions))
    m = np.atleast_1d(m_alpha(d, X, a, directions))
    rows = [tuple(float(v) for v in x) + (float(f), float(mm)) for x, f, mm in zip(X, F, m)]
    if path is not None:
        coords = [f"x{k}" for k in range(d.n)]
        lines = [",".join(coords + ["F", "m_alpha"])]
        lines += [",".join(repr(v) for v in r) for r in rows]
        Path(path).write_text("\n".join(lines) + "\n")
    return rows
