"""Distribution functions and symmetric decreasing rearrangement of grid functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import alpha_n
from .grids import GridFunction

__all__ = ["RadialProfile", "distribution", "lp_norm", "rearrange"]


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial non-increasing function given by shells ``radii[k] <= |x| < radii[k+1]``.

    ``cell_volume`` is set when every shell carries the measure of one grid
    cell, which is the case for profiles produced by :func:`rearrange`.
    """

    n: int
    radii: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)
    cell_volume: float | None = None

    def __post_init__(self) -> None:
        radii = np.array(self.radii, dtype=float)
        levels = np.array(self.levels, dtype=float)
        if radii.ndim != 1 or levels.ndim != 1 or len(radii) != len(levels) + 1:
            raise ValueError("need len(radii) == len(levels) + 1")
        if radii[0] != 0.0 or np.any(np.diff(radii) <= 0):
            raise ValueError("radii must start at 0 and increase strictly")
        if np.any(levels < 0) or np.any(np.diff(levels) > 0):
            raise ValueError("levels must be nonnegative and non-increasing")
        radii.setflags(write=False)
        levels.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "levels", levels)

    @property
    def support_radius(self) -> float:
        return float(self.radii[-1])

    def shell_measures(self) -> np.ndarray:
        r = self.radii
        return alpha_n(self.n) * (r[1:] ** self.n - r[:-1] ** self.n)

    def centroids(self) -> np.ndarray:
        """Radius of each shell's centre of mass in the radial variable."""
        a, b, n = self.radii[:-1], self.radii[1:], self.n
        return n / (n + 1.0) * (b ** (n + 1) - a ** (n + 1)) / (b**n - a**n)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if self.n == 1 and (x.ndim == 0 or x.shape[-1] != 1) else np.linalg.norm(
            np.atleast_2d(x), axis=-1
        )
        k = np.searchsorted(self.radii, r, side="right") - 1
        out = np.zeros(np.shape(r))
        ok = k < len(self.levels)
        out[ok] = self.levels[k[ok]]
        return out

    def merged(self, rtol: float = 1e-12) -> "RadialProfile":
        """Join neighbouring shells whose levels agree to ``rtol`` (relative to the max)."""
        if len(self.levels) == 0:
            return self
        tol = rtol * float(self.levels[0])
        lv, m = self.levels, self.shell_measures()
        keep = [0]
        for k in range(1, len(lv)):
            if lv[keep[-1]] - lv[k] > tol:
                keep.append(k)
        bounds = np.asarray(keep + [len(lv)])
        new_levels = np.array(
            [np.average(lv[a:b], weights=m[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
        )
        # guard monotonicity against averaging round-off
        new_levels = np.minimum.accumulate(new_levels)
        return RadialProfile(self.n, self.radii[bounds], new_levels, None)

    def coarsen(self) -> "RadialProfile":
        """Merge consecutive shell pairs, averaging levels by measure."""
        K = len(self.levels)
        m = self.shell_measures()
        idx = np.arange(0, K, 2)
        stops = np.minimum(idx + 2, K)
        levels = np.array([np.average(self.levels[a:b], weights=m[a:b]) for a, b in zip(idx, stops)])
        levels = np.minimum.accumulate(levels)
        cv = None if self.cell_volume is None else 2 * self.cell_volume
        return RadialProfile(self.n, self.radii[np.append(idx, K)], levels, cv)

    def to_csv(self, path) -> None:
        rows = ["shell,r_inner,r_outer,level"]
        for k, (a, b, v) in enumerate(zip(self.radii[:-1], self.radii[1:], self.levels)):
            rows.append(f"{k},{float(a)!r},{float(b)!r},{float(v)!r}")
        Path(path).write_text("\n".join(rows) + "\n")


def rearrange(u: GridFunction) -> RadialProfile:
    """Symmetric decreasing rearrangement of a grid function.

    Cell values are sorted in descending order (stable in the original cell
    index); the k-th value fills the shell whose enclosed volume runs from
    ``(k-1) h^n`` to ``k h^n``. Zero cells are dropped, so the profile ends at
    the radius of the ball with the measure of the support.
    """
    v = u.flat()
    order = np.argsort(-v, kind="stable")
    levels = v[order]
    levels = levels[levels > 0]
    n, vol = u.n, u.grid.cell_volume
    k = np.arange(len(levels) + 1, dtype=float)
    radii = (k * vol / alpha_n(n)) ** (1.0 / n)
    assert np.all(np.isfinite(levels)), "bounded grid data cannot produce an infinite peak"
    return RadialProfile(n, radii, levels, vol)


def _values_and_weights(u) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(u, GridFunction):
        v = u.flat()
        return v, np.full(v.shape, u.grid.cell_volume)
    if isinstance(u, RadialProfile):
        return u.levels, u.shell_measures()
    raise TypeError(f"expected GridFunction or RadialProfile, got {type(u).__name__}")


def distribution(u, t: float) -> float:
    """Measure of ``{|u| > t}`` for ``t > 0``."""
    if not t > 0:
        raise ValueError(f"the distribution function is defined for t > 0, got {t!r}")
    v, w = _values_and_weights(u)
    return float(np.sum(w[np.abs(v) > t]))


def lp_norm(u, q: float) -> float:
    """Cell- or shell-volume weighted L^q norm, ``q >= 1`` or ``q = inf``."""
    v, w = _values_and_weights(u)
    if q == math.inf:
        return float(np.max(np.abs(v))) if len(v) else 0.0
    if not q >= 1:
        raise ValueError(f"lp_norm needs q >= 1, got {q!r}")
    return float(np.sum(np.abs(v) ** q * w) ** (1.0 / q))
