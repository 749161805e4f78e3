"""Low-level quadrature shared by the tail-kernel and energy computations.

Pair sums are evaluated in fixed row chunks; each chunk is reduced by numpy and
the chunk partials are combined in index order with ``math.fsum``. The result
therefore does not depend on how many worker threads evaluate the chunks.

Midpoint pair sums of a smooth function against the kernel ``|x - y|^-(n+sp)``
carry a leading error proportional to ``h^(p - sp) |grad u|^p`` that comes from
the missing diagonal. :func:`window_defect` (one dimension, any spacing) and
:func:`lattice_defect_2d` (square lattice) return the coefficients of that
term so callers can subtract it.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, special

from .constants import gamma, sphere_measure

CHUNK = 128
THREADS_ENV = "GAGLIARDO_THREADS"


def resolve_threads(threads: int | None) -> int:
    """Worker count from the argument, else ``GAGLIARDO_THREADS``, else 1."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if int(threads) < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return int(threads)


def chunked_sum(fn: Callable[[int, int], float], n_rows: int, threads: int | None = None) -> float:
    """``fsum`` of ``fn(start, stop)`` over fixed chunks of ``range(n_rows)``."""
    starts = list(range(0, n_rows, CHUNK))
    if not starts:
        return 0.0
    nt = resolve_threads(threads)
    call = lambda s: float(fn(s, min(s + CHUNK, n_rows)))  # noqa: E731
    if nt == 1 or len(starts) == 1:
        parts = [call(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=nt) as pool:
            parts = list(pool.map(call, starts))
    return math.fsum(parts)


KernelRows = Callable[[np.ndarray, np.ndarray], np.ndarray]


def euclidean_kernel(points: np.ndarray, exponent: float) -> KernelRows:
    """Rows of ``|x_i - x_j|^-exponent`` with zero on the diagonal."""
    pts = np.asarray(points, dtype=float)

    def rows(ri: np.ndarray, cj: np.ndarray) -> np.ndarray:
        diff = pts[ri][:, None, :] - pts[cj][None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        with np.errstate(divide="ignore"):
            k = dist ** (-exponent)
        k[ri[:, None] == cj[None, :]] = 0.0
        return k

    return rows


def pair_energy(
    values: np.ndarray,
    weights: np.ndarray,
    counted: np.ndarray,
    p: float,
    kernel: KernelRows,
    threads: int | None = None,
) -> float:
    """``sum_{i != j} w_i w_j |v_i - v_j|^p K_ij`` over the counted points.

    Only rows with a nonzero value are visited; a pair with exactly one
    nonzero end is counted twice from that end.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    counted = np.asarray(counted, dtype=bool)
    rows = np.nonzero(counted & (v != 0))[0]
    cols = np.nonzero(counted)[0]
    vc = v[cols]
    wc = w[cols] * np.where(vc != 0, 1.0, 2.0)

    def chunk(a: int, b: int) -> float:
        ri = rows[a:b]
        diff = np.abs(v[ri][:, None] - vc[None, :]) ** p
        k = kernel(ri, cols)
        return float(np.sum((w[ri][:, None] * diff * k) @ wc))

    return chunked_sum(chunk, len(rows), threads)


# ------------------------------------------------------------- 1-D defects


def _window_tail(beta: float, window: int) -> float:
    """``zeta(-beta)`` minus the windowed one-sided lattice value (unit spacing)."""
    k = np.arange(1, window + 1, dtype=float)
    windowed = math.fsum(k**beta) - (window + 0.5) ** (1.0 + beta) / (1.0 + beta)
    return float(special.zeta(-beta)) - windowed


def window_defect(x: np.ndarray, edges: np.ndarray, beta: float, window: int = 16) -> np.ndarray:
    """Sum-minus-integral of ``|z - x_i|^beta`` over neighbouring cells.

    ``x`` are sorted sample points and ``edges`` the ``len(x) + 1`` cell
    boundaries. Within ``window`` cells on either side the defect is computed
    directly; the remainder is the uniform-lattice limit scaled by the local
    cell width. On a uniform lattice of spacing h every unclipped entry equals
    ``2 zeta(-beta) h^(1 + beta)``.
    """
    if not beta > -1.0:
        raise ValueError(f"window_defect needs beta > -1, got {beta}")
    x = np.asarray(x, dtype=float)
    edges = np.asarray(edges, dtype=float)
    N = len(x)
    w = np.diff(edges)
    D = np.zeros(N)
    W = min(window, max(N - 1, 0))
    for k in range(1, W + 1):
        gap = np.abs(x[k:] - x[:-k]) ** beta
        D[:-k] += w[k:] * gap
        D[k:] += w[:-k] * gap
    idx = np.arange(N)
    e_lo = edges[np.maximum(idx - window, 0)]
    e_hi = edges[np.minimum(idx + window, N - 1) + 1]
    D -= ((x - e_lo) ** (1.0 + beta) + (e_hi - x) ** (1.0 + beta)) / (1.0 + beta)
    tail = _window_tail(beta, window)
    full_left = idx - window >= 0
    full_right = idx + window <= N - 1
    D += tail * w ** (1.0 + beta) * (full_left.astype(float) + full_right.astype(float))
    return D


def line_defect_correction(
    x: np.ndarray, edges: np.ndarray, values: np.ndarray, weights: np.ndarray, p: float, sp: float
) -> float:
    """Leading diagonal defect of a 1-D midpoint pair sum: ``sum_i w_i |u'_i|^p D_i``."""
    if len(x) < 2:
        return 0.0
    beta = p - 1.0 - sp
    du = np.gradient(np.asarray(values, float), np.asarray(x, float))
    D = window_defect(x, edges, beta)
    return math.fsum(np.asarray(weights) * np.abs(du) ** p * D)


# ------------------------------------------------------------- 2-D defects


def _window_integral_2d(theta: float, p: float, q: float) -> float:
    """``int_0^{2 pi} |cos(phi - theta)|^p rho(phi)^q dphi`` over the unit square gauge."""

    def f(phi: float) -> float:
        rho = 1.0 / max(abs(math.cos(phi)), abs(math.sin(phi)))
        return abs(math.cos(phi - theta)) ** p * rho**q

    brk = sorted(
        {(k * math.pi / 4.0) for k in range(9)}
        | {(theta + math.pi / 2.0) % (2 * math.pi), (theta + 1.5 * math.pi) % (2 * math.pi)}
    )
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        if b - a > 1e-14:
            total += integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return total


def _lattice_window_value(theta: float, p: float, sp: float, K: int) -> float:
    k = np.arange(-K, K + 1, dtype=float)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    r2 = k1**2 + k2**2
    r2[K, K] = 1.0
    psi = np.abs(math.cos(theta) * k1 + math.sin(theta) * k2) ** p * r2 ** (-(2.0 + sp) / 2.0)
    psi[K, K] = 0.0
    q = p - sp
    L = K + 0.5
    return math.fsum(psi.ravel()) - L**q / q * _window_integral_2d(theta, p, q)


@lru_cache(maxsize=32)
def lattice_defect_table(p: float, sp: float, nodes: int = 65) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate ``Z(theta)`` on ``[0, pi/4]`` for the unit square lattice.

    ``Z(theta) = lim (sum_{k != 0} psi(k) - int psi)`` with
    ``psi(y) = |e_theta . y|^p |y|^-(2 + sp)``, evaluated on windows of
    half-width 24 and 48 and extrapolated in the window size.
    """
    q = p - sp
    a = 2.0 - q
    thetas = np.linspace(0.0, math.pi / 4.0, nodes)
    L1, L2 = 24.5, 48.5
    Z = np.empty(nodes)
    for i, th in enumerate(thetas):
        v1 = _lattice_window_value(th, p, sp, 24)
        v2 = _lattice_window_value(th, p, sp, 48)
        Z[i] = (v2 * L2**a - v1 * L1**a) / (L2**a - L1**a)
    return thetas, Z


def lattice_defect_2d(theta: np.ndarray, p: float, sp: float) -> np.ndarray:
    """``Z`` at arbitrary gradient angles, folded by the square lattice symmetries."""
    thetas, Z = lattice_defect_table(float(p), float(sp))
    t = np.mod(np.asarray(theta, dtype=float), math.pi / 2.0)
    t = np.where(t > math.pi / 4.0, math.pi / 2.0 - t, t)
    return np.interp(t, thetas, Z)


def masked_gradient(values: np.ndarray, h: float, counted: np.ndarray) -> list[np.ndarray]:
    """Finite-difference gradient that only differences cells inside ``counted``.

    Central differences where both neighbours along an axis are counted,
    one-sided where one is, zero where none is. ``values`` may carry leading
    batch axes in front of the grid shape of ``counted``. With every cell
    counted this is ``np.gradient`` with first-order edges.
    """
    v = np.asarray(values, dtype=float)
    c = np.asarray(counted, dtype=bool)
    lead = v.ndim - c.ndim
    out = []
    for axis in range(c.ndim):
        ax = lead + axis
        cp = np.zeros_like(c)
        cm = np.zeros_like(c)
        sl_hi = [slice(None)] * c.ndim
        sl_lo = [slice(None)] * c.ndim
        sl_hi[axis] = slice(1, None)
        sl_lo[axis] = slice(None, -1)
        cp[tuple(sl_lo)] = c[tuple(sl_hi)]
        cm[tuple(sl_hi)] = c[tuple(sl_lo)]
        vp = np.zeros_like(v)
        vm = np.zeros_like(v)
        vs_hi = [slice(None)] * v.ndim
        vs_lo = [slice(None)] * v.ndim
        vs_hi[ax] = slice(1, None)
        vs_lo[ax] = slice(None, -1)
        vp[tuple(vs_lo)] = v[tuple(vs_hi)]
        vm[tuple(vs_hi)] = v[tuple(vs_lo)]
        g = np.where(cp & cm, (vp - vm) / (2.0 * h), 0.0)
        g = np.where(cp & ~cm, (vp - v) / h, g)
        g = np.where(~cp & cm, (v - vm) / h, g)
        out.append(g)
    return out


def grid_defect_correction(values: np.ndarray, h: float, counted: np.ndarray, p: float, sp: float) -> float:
    """Leading diagonal defect of a midpoint pair sum on a uniform grid (n = 1, 2).

    ``counted`` is a boolean array of the grid shape selecting the cells whose
    rows enter the energy. Returns 0 for n >= 3.
    """
    v = np.asarray(values, dtype=float)
    n = v.ndim
    if n == 1:
        x = (np.arange(len(v)) + 0.5) * h
        edges = np.arange(len(v) + 1) * h
        beta = p - 1.0 - sp
        (du,) = masked_gradient(v, h, counted)
        D = window_defect(x, edges, beta)
        return math.fsum((h * np.abs(du) ** p * D)[counted])
    if n == 2:
        gx, gy = masked_gradient(v, h, counted)
        mag = np.hypot(gx, gy)
        sel = counted & (mag > 0)
        if not sel.any():
            return 0.0
        Z = lattice_defect_2d(np.arctan2(gy[sel], gx[sel]), p, sp)
        return math.fsum(h**2 * h ** (p - sp) * mag[sel] ** p * Z)
    return 0.0


# ----------------------------------------------------------- radial kernels


def line_constant(n: int, sp: float) -> float:
    """``int_{R^{n-1}} (1 + |z|^2)^-(n + sp)/2 dz``, the hyperplane reduction constant."""
    return math.pi ** ((n - 1) / 2.0) * gamma((1.0 + sp) / 2.0) / gamma((n + sp) / 2.0)


def radial_kernel(n: int, sp: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """``G(r, s) = int_{S^{n-1}} |r e - s w|^-(n + sp) dw`` for r != s (broadcasting)."""
    if n == 1:
        return lambda r, s: np.abs(r - s) ** (-1.0 - sp) + (r + s) ** (-1.0 - sp)
    if n == 2:
        a = (2.0 + sp) / 2.0

        def g2(r, s):
            t = r + s
            return 2.0 * math.pi * t ** (-2.0 * a) * special.hyp2f1(a, 0.5, 1.0, 4.0 * r * s / (t * t))

        return g2
    if n == 3:

        def g3(r, s):
            return (
                2.0
                * math.pi
                / (r * s * (1.0 + sp))
                * (np.abs(r - s) ** (-(1.0 + sp)) - (r + s) ** (-(1.0 + sp)))
            )

        return g3
    raise ValueError(f"radial shell kernel is implemented for n <= 3, got n={n}")


def radial_kernel_rows(radii: np.ndarray, n: int, sp: float) -> KernelRows:
    """Rows of ``G(r_i, r_j) / |S^{n-1}|`` with zero on the diagonal."""
    r = np.asarray(radii, dtype=float)
    G = radial_kernel(n, sp)
    S = sphere_measure(n)

    def rows(ri: np.ndarray, cj: np.ndarray) -> np.ndarray:
        a = r[ri][:, None]
        b = r[cj][None, :]
        same = ri[:, None] == cj[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = G(a, np.where(same, a + 1.0, b)) / S
        k[same] = 0.0
        return k

    return rows


# ------------------------------------------------------------ exact tails


def interval_union_tail(x: np.ndarray, parts: list[tuple[float, float]], sp: float) -> np.ndarray:
    """``int_{R \\ U} |x - y|^-(1 + sp) dy`` for points inside a union of intervals."""
    x = np.asarray(x, dtype=float)
    parts = sorted(parts)
    a0, b1 = parts[0][0], parts[-1][1]
    out = ((x - a0) ** (-sp) + (b1 - x) ** (-sp)) / sp
    for (_, g0), (g1, _) in zip(parts[:-1], parts[1:]):
        if g1 <= g0:
            continue
        right = x < g0
        left = x > g1
        contrib = np.zeros_like(out)
        contrib[right] = ((g0 - x[right]) ** (-sp) - (g1 - x[right]) ** (-sp)) / sp
        contrib[left] = ((x[left] - g1) ** (-sp) - (x[left] - g0) ** (-sp)) / sp
        out = out + contrib
    return out


def _cos_power_integral(psi: np.ndarray, s: float) -> np.ndarray:
    """``int_0^psi cos^s t dt`` for ``psi`` in ``[0, pi/2]``."""
    a, b = 0.5, (s + 1.0) / 2.0
    return 0.5 * special.beta(a, b) * special.betainc(a, b, np.sin(psi) ** 2)


def box_tail_2d(pts: np.ndarray, lo, hi, sp: float) -> np.ndarray:
    """Exact complement integral for points inside an axis-aligned rectangle."""
    x, y = pts[:, 0], pts[:, 1]
    x0, y0 = lo
    x1, y1 = hi
    total = np.zeros(len(pts))
    sides = (
        (x1 - x, y - y0, y1 - y),
        (x - x0, y - y0, y1 - y),
        (y1 - y, x - x0, x1 - x),
        (y - y0, x - x0, x1 - x),
    )
    for a, b1, b2 in sides:
        total += a ** (-sp) * (
            _cos_power_integral(np.arctan(b1 / a), sp) + _cos_power_integral(np.arctan(b2 / a), sp)
        )
    return total / sp


def cell_integral_2d(pts: np.ndarray, lo: np.ndarray, h: float, sp: float) -> np.ndarray:
    """``int_cell |x - y|^-(2 + sp) dy`` for square cells ``[lo, lo + h]`` not containing ``x``.

    ``pts`` and ``lo`` are matching ``(m, 2)`` arrays. In polar coordinates
    around ``x`` each ray crosses the cell between an entry and an exit edge,
    so the integral is a signed sum over the four edges of
    ``|a|^-sp / sp * (C(psi_2) - C(psi_1))``, where ``a`` is the distance to
    the edge line, ``psi`` the angles of its endpoints from the normal and
    ``C(psi) = int_0^psi cos^sp``.
    """
    pts = np.asarray(pts, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = lo + h
    total = np.zeros(len(pts))

    def C(psi):
        return np.sign(psi) * _cos_power_integral(np.abs(psi), sp)

    for axis in (0, 1):
        other = 1 - axis
        t1 = lo[:, other] - pts[:, other]
        t2 = hi[:, other] - pts[:, other]
        for edge, outside in ((lo[:, axis], -1.0), (hi[:, axis], 1.0)):
            a = edge - pts[:, axis]
            dist = np.abs(a)
            ok = dist > 0
            # the edge faces x when x lies on the outer side of its line
            sign = np.where(a * outside < 0, 1.0, -1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                span = C(np.arctan(t2 / dist)) - C(np.arctan(t1 / dist))
                contrib = sign * dist ** (-sp) * span
            total += np.where(ok, contrib, 0.0)
    return total / sp


def ball_tail(n: int, R: float, r: np.ndarray, sp: float) -> np.ndarray:
    """Complement integral of the centred ball of radius R at points of radius ``r < R``."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if n == 1:
        return ((R - r) ** (-sp) + (R + r) ** (-sp)) / sp
    if n not in (2, 3):
        raise ValueError(f"ball_tail supports n <= 3, got n={n}")

    scale = 2.0 if n == 2 else 2.0 * math.pi
    out = np.empty_like(r)
    # split by distance to the sphere so one tolerance suits every point
    gaps = R - r
    order = np.argsort(gaps)
    for grp in np.array_split(order, max(1, len(order) // 64)):
        if len(grp) == 0:
            continue
        sub = r[grp]

        def fg(phi, sub=sub):
            c, s = math.cos(phi), math.sin(phi)
            d = -sub * c + np.sqrt(R * R - (sub * s) ** 2)
            return d ** (-sp) * (1.0 if n == 2 else s)

        val, _ = integrate.quad_vec(fg, 0.0, math.pi, epsabs=0.0, epsrel=1e-11, norm="max", limit=2000)
        out[grp] = scale * val / sp
    return out
