"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected in ``RESULTS`` and repeated in the pytest terminal
summary (see ``conftest.py``), so ``pytest -v`` shows them without ``-s``.
"""

from __future__ import annotations

import math
import time

import mpmath
import numpy as np
import pytest

from gagliardo import Ball, Box, FracParams, GridFunction, GridSpec, Interval, Union, rearrange
from gagliardo.cli import main
from gagliardo.constants import alpha_n, gamma, omega_n, sharp_sobolev_constant
from gagliardo.experiments import (
    BumpSpec,
    build_bump,
    bump_grid,
    counterexample_sweep,
    default_corpus,
    eta,
    family_ratios,
    finequality_check,
    placement_center,
    theorem2_ratio_suite,
)
from gagliardo.kernel import hardy_pointwise_bound, lemma_decrease_inside, lemma_decrease_outside, tail_kernel
from gagliardo.rearrange import distribution, lp_norm
from gagliardo.seminorm import energy_fullspace, energy_rearranged

RESULTS: list[str] = []

# seeds of the randomized criteria
SEED_REARRANGE = 1001
SEED_SMOOTH = 2002
SEED_HARDY = 3003

P1 = FracParams(1, 0.6, 2.0)
OMEGA = Interval(-1.0, 1.0)


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    rep = counterexample_sweep(OMEGA, P1, threads=1)
    return rep, time.perf_counter() - t0


def test_criterion_01_reversal_1d(sweep):
    rep, seconds = sweep
    last = rep.records[-1]
    with pytest.warns(UserWarning):
        fine = counterexample_sweep(OMEGA, P1, [0.025], grid_h=last.h / 2, threads=1)
    half = fine.records[0]
    ok = last.epsilon == 0.025 and last.flagged and half.margin > 0 and seconds < 120
    verdict(
        1,
        "reversal on (-1,1) at eps=0.025, sign kept at h/2",
        ok,
        f"flagged={rep.flagged}, margin/err={last.margin / last.combined_error:.2f}, "
        f"margin at h/2={half.margin:.4g} (err {half.combined_error:.2g}), {seconds:.1f}s",
    )


def test_criterion_02_interior_center_and_union():
    eps_min = 0.025
    c = placement_center(OMEGA, eps_min, "center")
    rep = counterexample_sweep(OMEGA, P1, placement="center", grid_h=eps_min / 128)
    d = Union([Interval(-1.0, 1.0), Interval(1.2, 1.8)])
    fc = finequality_check(d, P1)
    sp = P1.sp
    F0 = (1.0 + 1.0 - 1.2**-sp + 1.8**-sp) / sp
    Ft0 = 2.0 * 1.3**-sp / sp
    closed = abs(fc.lhs - F0) <= 1e-10 * F0 and abs(fc.rhs - Ft0) <= 1e-10 * Ft0
    near0 = counterexample_sweep(d, P1, placement="origin", grid_h=eps_min / 256)
    ok = (
        abs(abs(c[0]) - 0.5) < 1e-15
        and rep.records[-1].flagged
        and fc.lhs > fc.rhs
        and closed
        and near0.records[-1].flagged
    )
    verdict(
        2,
        "interior centre |x|=1/2 and union domain with the bump at 0",
        ok,
        f"centre flagged={rep.flagged}; F0={fc.lhs:.10g} > F~0={fc.rhs:.10g}; "
        f"union sweep flagged={near0.flagged}",
    )


def test_criterion_03_scaling_slopes(sweep):
    rep, _ = sweep
    target_d, target_s = 1.0 - P1.sp, 1.0
    ok = abs(rep.slope_domain - target_d) <= 0.15 * abs(target_d) and abs(rep.slope_star - target_s) <= 0.15
    verdict(
        3,
        "cross-term slopes",
        ok,
        f"domain side {rep.slope_domain:.4f} vs {target_d:.2f}, symmetrized side {rep.slope_star:.4f} vs 1",
    )


def test_criterion_04_equal_fullspace_energy(sweep):
    rep, _ = sweep
    worst = max(r.fullspace_gap / r.fullspace_error for r in rep.records)
    verdict(4, "full-space energy of u_eps and u*_eps", worst <= 2.0, f"max gap/error = {worst:.3g} (limit 2)")


def test_criterion_05_splitting_identity():
    worst = 0.0
    for eps in (0.2, 0.1, 0.05, 0.025):
        c = placement_center(OMEGA, eps, "boundary")
        u = build_bump(BumpSpec(tuple(c), eps), bump_grid(c, eps, 0.025 / 16))
        a = energy_fullspace(u, P1, hull=Interval(-1.0, 1.0))
        b = energy_fullspace(u, P1, hull=Interval(-3.0, 3.0))
        worst = max(worst, abs(a.value - b.value) / (a.error_estimate + b.error_estimate))
    F = tail_kernel(OMEGA, 0.0, FracParams(1, 0.25, 2.0))
    ok = worst <= 1.0 and abs(F - 4.0) <= 1e-10
    verdict(5, "hull (-1,1) vs (-3,3) and F(0)=4", ok, f"max gap/error = {worst:.3g}, F(0)-4 = {F - 4.0:.2g}")


def _random_grid_function(rng: np.random.Generator) -> GridFunction:
    n = int(rng.integers(1, 3))
    shape = tuple(int(s) for s in rng.integers(3, 12 if n == 2 else 40, size=n))
    h = float(rng.uniform(0.05, 1.0))
    v = rng.random(shape) * (rng.random(shape) < 0.7)
    v = np.where(rng.random(shape) < 0.2, np.round(v, 1), v)  # ties
    v = np.pad(v, 1)
    lo = tuple(float(x) for x in rng.uniform(-3.0, 3.0, size=n))
    return GridFunction(GridSpec(lo, h, v.shape), v)


def test_criterion_06_rearrangement_laws():
    rng = np.random.default_rng(SEED_REARRANGE)
    failures = []
    worst = 0.0
    for k in range(100):
        u = _random_grid_function(rng)
        prof = rearrange(u)
        vals = u.flat()
        pos = np.sort(vals[vals > 0])
        multiset = np.array_equal(pos, np.sort(prof.levels))
        levels = set(pos.tolist()) | set((pos / 2.0).tolist())
        dist = all(math.isclose(distribution(u, t), distribution(prof, t), rel_tol=1e-12) for t in levels)
        for q in (1.0, 2.0, math.inf):
            a, b = lp_norm(u, q), lp_norm(prof, q)
            worst = max(worst, abs(a - b) / a if a else abs(b))
        shift = tuple(int(s) for s in rng.integers(-5, 6, size=u.n))
        moved = rearrange(u.shift(shift))
        invariant = np.array_equal(moved.levels, prof.levels) and np.array_equal(moved.radii, prof.radii)
        if not (multiset and dist and invariant):
            failures.append(k)
    ok = not failures and worst <= 1e-12
    verdict(
        6,
        "equimeasurability, L^q norms, translation invariance on 100 random grids",
        ok,
        f"seed {SEED_REARRANGE}, failures {failures}, worst L^q rel diff {worst:.2g}",
    )


def _random_smooth(rng: np.random.Generator, n: int) -> GridFunction:
    h = 1.0 / 64 if n == 1 else 1.0 / 24
    grid = GridSpec.covering((-1.0,) * n, (1.0,) * n, h)
    X = grid.centers()
    v = np.zeros(len(X))
    for _ in range(int(rng.integers(1, 4))):
        c = rng.uniform(-0.5, 0.5, size=n)
        r = rng.uniform(0.3, 0.5)
        v += rng.uniform(0.2, 1.0) * eta(np.linalg.norm(X - c, axis=1) / r)
    return GridFunction(grid, v.reshape(grid.shape))


def test_criterion_07_rearrangement_lowers_energy():
    rng = np.random.default_rng(SEED_SMOOTH)
    worst = -math.inf
    bad = []
    for k in range(20):
        n = 1 if k < 16 else 2
        P = FracParams(n, float(rng.uniform(0.2, 0.9)), float(rng.choice([1.5, 2.0, 3.0])))
        u = _random_smooth(rng, n)
        a = energy_fullspace(u, P)
        b = energy_rearranged(u, None, P)
        slack = (b.value - a.value) / (a.error_estimate + b.error_estimate)
        worst = max(worst, slack)
        if a.value < b.value - 2.0 * (a.error_estimate + b.error_estimate):
            bad.append(k)
    verdict(
        7,
        "rearrangement does not increase the full-space energy (20 smooth functions)",
        not bad,
        f"seed {SEED_SMOOTH}, violations {bad}, max (E(u*)-E(u))/error = {worst:.3g} (limit 2)",
    )


LEMMA_DOMAINS_1D = [
    Interval(-0.5, 1.5),
    Interval(-0.3, 2.0),
    Union([Interval(-1.0, 1.0), Interval(1.2, 1.8)]),
    Union([Interval(-2.0, 0.1), Interval(0.5, 0.7)]),
    Union([Interval(-1.0, 0.5), Interval(0.8, 3.0)]),
]
LEMMA_DOMAINS_2D = [
    Box((-1.0, -0.5), (1.0, 0.5)),
    Union([Ball((0.0, 0.0), 0.6), Ball((1.5, 0.0), 0.4)]),
]


def test_criterion_08_lemma_decrease():
    rows = []
    ok = True
    for d in LEMMA_DOMAINS_1D + LEMMA_DOMAINS_2D:
        n = d.n
        for alpha, fn in ((0.6 * n, lemma_decrease_inside), (1.5 * n, lemma_decrease_outside)):
            c = fn(d, alpha)
            good = c.lhs - c.rhs > 5.0 * c.error and c.lhs > c.rhs
            ok = ok and good
            rows.append(c.margin / c.error if c.error else math.inf)
    verdict(
        8,
        "|x|^-alpha integrals strictly favour the symmetrized set (5 + 2 domains)",
        ok,
        f"min margin/error = {min(rows):.3g} (limit 5)",
    )


HARDY_DOMAINS = [
    Interval(-1.0, 1.0),
    Union([Interval(-1.0, 0.2), Interval(0.5, 1.5)]),
    Ball((0.0, 0.0), 1.0),
    Ball((0.4, -0.3), 0.8),
]


def _interior_points(rng: np.random.Generator, d, count: int) -> np.ndarray:
    lo, hi = (np.asarray(v, float) for v in d.bbox())
    out = []
    while len(out) < count:
        x = rng.uniform(lo, hi)
        if d.contains(x) and d.boundary_distance(x) > 1e-3:
            out.append(x)
    return np.array(out)


def test_criterion_09_hardy_bound():
    rng = np.random.default_rng(SEED_HARDY)
    worst = 0.0
    checked = 0
    for d in HARDY_DOMAINS:
        X = _interior_points(rng, d, 50)
        for sp in (1.2, 1.5):
            lhs, rhs = hardy_pointwise_bound(d, X, FracParams(d.n, sp / 2.0, 2.0))
            worst = max(worst, float(np.max(lhs / rhs)))
            checked += len(X)
    verdict(9, "tail kernel below the Hardy bound", worst <= 1.0 + 1e-6, f"{checked} points, max lhs/rhs = {worst:.8f}")


def test_criterion_10_theorem2_boundedness():
    P = FracParams(1, 0.7, 2.0)
    labels, cases = default_corpus()
    corpus = theorem2_ratio_suite(cases, P, labels)
    fam = family_ratios(OMEGA, P)
    spread = max(fam.ratios) / min(fam.ratios)
    ok = all(math.isfinite(r) and r > 0 for r in corpus.ratios) and spread < 10.0
    verdict(
        10,
        "rearranged full-space energy bounded by the domain energy for sigma*p=1.4",
        ok,
        f"corpus max ratio {corpus.max_ratio:.4g}; family ratios {[round(r, 4) for r in fam.ratios]}, "
        f"spread {spread:.3g} (limit 10)",
    )


def test_criterion_11_constants():
    rec = all(
        math.isclose(gamma(x + 1.0), x * gamma(x), rel_tol=1e-10) for x in (0.1, 0.5, 1.3, 7.7)
    )
    alphas = alpha_n(1) == 2.0 and alpha_n(2) == math.pi and math.isclose(alpha_n(3), 4.0 * math.pi / 3.0, rel_tol=1e-15)
    mpmath.mp.dps = 50
    n, s = mpmath.mpf(2), mpmath.mpf("0.5")
    w = 2 * mpmath.pi ** ((n + 1) / 2) / mpmath.gamma((n + 1) / 2)
    ref = 2 ** (1 - 2 * s) * w ** (2 * s / n) * mpmath.pi ** (n / 2) * mpmath.gamma(2 - s)
    ref = ref / (s * (1 - s) * mpmath.gamma((n - 2 * s) / 2))
    val = sharp_sobolev_constant(2, 0.5)
    rel = abs(val - float(ref)) / float(ref)
    ok = rec and alphas and rel <= 1e-10 and omega_n(2) == pytest.approx(4.0 * math.pi, rel=1e-15)
    verdict(
        11,
        "gamma recurrence, ball volumes, sharp constant S(2, 0.5)",
        ok,
        f"S(2,0.5)={val!r} ({rel:.2g} rel. to 50-digit value, omega_n = |S^n|)",
    )


def test_criterion_12_determinism(tmp_path):
    a, b = tmp_path / "t1", tmp_path / "t8"
    ra = main(["counterexample", "--out", str(a), "--threads", "1", "--expect-reversal"])
    rb = main(["counterexample", "--out", str(b), "--threads", "8", "--expect-reversal"])
    same = (a / "counterexample.csv").read_bytes() == (b / "counterexample.csv").read_bytes()
    verdict(12, "byte-identical CSV for 1 and 8 threads", ra == rb == 0 and same, f"exit codes {ra}, {rb}")
