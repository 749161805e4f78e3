from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from gagliardo import Ball, FracParams, GridFunction, GridSpec, Interval, Union, rearrange
from gagliardo.experiments import (
    BumpSpec,
    best_constant_descent,
    build_bump,
    bump_grid,
    counterexample_sweep,
    default_corpus,
    eta,
    family_ratios,
    finequality_check,
    placement_center,
    sobolev_from_hardy_check,
    theorem2_ratio_suite,
)
from gagliardo.rearrange import lp_norm
from gagliardo.seminorm import energy_domain, energy_fullspace

P1 = FracParams(1, 0.6, 2.0)


def test_eta_shape():
    r = np.linspace(0.0, 1.2, 241)
    v = eta(r)
    assert np.all(v[r <= 0.5] == 1.0)
    assert np.all(v[r >= 1.0] == 0.0)
    assert np.all((v >= 0.0) & (v <= 1.0))
    assert np.all(np.diff(v) <= 0.0)
    # symmetric bridge: phi(t) + phi(1 - t) = 1
    t = np.linspace(0.01, 0.99, 50)
    assert np.allclose(eta(0.5 + 0.5 * t) + eta(0.5 + 0.5 * (1 - t)), 1.0)


def test_bump_plateau_and_support():
    u = build_bump(BumpSpec((0.0,), 0.25), GridSpec.covering((-0.5,), (0.5,), 1.0 / 128))
    x = u.grid.centers()[:, 0]
    assert np.all(u.flat()[np.abs(x) <= 0.125] == 1.0)
    assert np.all(u.flat()[np.abs(x) >= 0.25] == 0.0)


def test_bump_norm_scales_like_eps():
    # ||u_eps||_2^2 = eps * ||eta||_2^2; the fine grid gives the reference
    ref = build_bump(BumpSpec((0.0,), 0.4), bump_grid((0.0,), 0.4, 0.4 / 4096))
    ref_norm = lp_norm(ref, 2.0) ** 2 / 0.4
    errs = []
    for f in (32, 64):
        u = build_bump(BumpSpec((0.3,), 0.1), bump_grid((0.3,), 0.1, 0.1 / f))
        errs.append(abs(lp_norm(u, 2.0) ** 2 - 0.1 * ref_norm))
    assert errs[1] < 1e-6 * 0.1 * ref_norm
    assert errs[1] <= errs[0]


def test_bump_rearrangement_is_translation_invariant():
    h = 1.0 / 256
    a = rearrange(build_bump(BumpSpec((0.9,), 0.1), bump_grid((0.9,), 0.1, h)))
    b = rearrange(build_bump(BumpSpec((0.0,), 0.1), bump_grid((0.0,), 0.1, h)))
    assert np.array_equal(a.levels, b.levels)
    assert np.array_equal(a.radii, b.radii)


def test_bump_validation():
    with pytest.raises(ValueError, match="under-resolved"):
        build_bump(BumpSpec((0.0,), 0.1), bump_grid((0.0,), 0.1, 0.02))
    with pytest.raises(ValueError):
        BumpSpec((0.0,), 0.5)
    with pytest.raises(ValueError, match="dimension"):
        build_bump(BumpSpec((0.0, 0.0), 0.1), bump_grid((0.0,), 0.1, 0.005))
    assert BumpSpec((0.75,), 0.25).fits(Interval(-1, 1))
    assert not BumpSpec((0.8,), 0.25).fits(Interval(-1, 1))


def test_placements():
    d = Interval(-1, 1)
    assert placement_center(d, 0.1, "boundary")[0] == pytest.approx(0.9)
    assert placement_center(d, 0.1, "center")[0] == pytest.approx(0.5)
    assert placement_center(Union([Interval(-1, 1), Interval(1.2, 1.8)]), 0.1, "boundary")[0] == pytest.approx(1.7)
    assert np.allclose(placement_center(Ball((0.0, 0.0), 1.0), 0.1, "boundary"), (0.9, 0.0))
    assert np.allclose(placement_center(Ball((0.0, 0.0), 1.0), 0.1, "center"), (0.5, 0.0))
    assert placement_center(d, 0.1, (0.3,))[0] == 0.3
    # auto keeps distance 2 eps and prefers points close to the boundary
    c = placement_center(d, 0.1, "auto", P1, step=0.01)
    assert 0.75 < abs(c[0]) <= 0.8 + 1e-12
    with pytest.raises(ValueError):
        placement_center(d, 0.1, "nowhere")


def test_sweep_reverses_at_small_eps():
    rep = counterexample_sweep(Interval(-1, 1), P1)
    assert [r.epsilon for r in rep.records] == [0.2, 0.1, 0.05, 0.025]
    assert rep.records[-1].flagged
    assert rep.downward_closed
    assert rep.slope_domain == pytest.approx(1 - P1.sp, rel=0.15)
    assert rep.slope_star == pytest.approx(1.0, rel=0.15)
    for r in rep.records:
        assert r.fullspace_gap <= 2.0 * r.fullspace_error


def test_sweep_with_two_eps_skips_slopes():
    with pytest.warns(UserWarning, match="slope fit skipped"):
        rep = counterexample_sweep(Interval(-1, 1), P1, [0.1, 0.05])
    assert rep.slope_domain is None and rep.notes


def test_sweep_rejects_escaping_bump():
    with pytest.raises(ValueError, match="escapes"):
        counterexample_sweep(Interval(-1, 1), P1, [0.3], placement=(0.8,))


def test_finequality_closed_form():
    for sp in (0.3, 1.2, 1.7):
        P = FracParams(1, sp / 2.0, 2.0)
        c = finequality_check(Interval(-0.5, 1.5), P)
        assert c.lhs == pytest.approx((0.5 ** -sp + 1.5 ** -sp) / sp, rel=1e-12)
        assert c.rhs == pytest.approx(2.0 / sp, rel=1e-12)
        assert c.lhs > c.rhs


def test_finequality_rejects_balls_and_exterior_origin():
    with pytest.raises(ValueError, match="coincides"):
        finequality_check(Interval(-1, 1), P1)
    with pytest.raises(ValueError, match="coincides"):
        finequality_check(Ball((0.0, 0.0), 1.0), FracParams(2, 0.6, 2.0))
    with pytest.raises(ValueError, match="interior"):
        finequality_check(Interval(0.5, 1.5), P1)


def test_finequality_two_disks():
    d = Union([Ball((0.2, 0.0), 0.5), Ball((2.0, 0.0), 0.5)])
    c = finequality_check(d, FracParams(2, 0.6, 2.0))
    assert c.lhs - c.rhs > 5.0 * c.error


def test_ratio_suite_requires_sp_above_one():
    u = build_bump(BumpSpec((0.0,), 0.2), bump_grid((0.0,), 0.2, 0.01))
    with pytest.raises(ValueError, match="sigma \\* p > 1"):
        theorem2_ratio_suite([(u, Interval(-1, 1))], FracParams(1, 0.5, 2.0))


def test_ratio_suite_radial_fixed_point():
    P = FracParams(1, 0.7, 2.0)
    d = Interval(-1, 1)
    u = build_bump(BumpSpec((0.0,), 0.4), GridSpec.covering((-1.0,), (1.0,), 1.0 / 128))
    rep = theorem2_ratio_suite([(u, d)], P)
    direct = energy_fullspace(u, P).value / energy_domain(u, d, P).value
    assert rep.ratios[0] >= 1.0
    assert rep.ratios[0] == pytest.approx(direct, abs=3.0 * rep.errors[0])


def test_default_corpus_is_reproducible_and_finite():
    la, ca = default_corpus(h=1.0 / 128)
    lb, cb = default_corpus(h=1.0 / 128)
    assert la == lb and len(ca) == 10
    assert all(np.array_equal(a[0].values, b[0].values) for a, b in zip(ca, cb))
    rep = theorem2_ratio_suite(ca, FracParams(1, 0.7, 2.0), la)
    assert all(math.isfinite(r) and r > 0 for r in rep.ratios)
    assert rep.max_ratio == max(rep.ratios)


def test_family_ratios_stay_bounded():
    rep = family_ratios(Interval(-1, 1), FracParams(1, 0.7, 2.0))
    assert max(rep.ratios) < 10.0 * rep.ratios[0]


def test_sobolev_check():
    P = FracParams(2, 0.75, 2.0)
    d = Ball((0.0, 0.0), 1.0)
    ratios = []
    for eps in (0.4, 0.2, 0.1):
        u = build_bump(BumpSpec((0.0, 0.0), eps), bump_grid((0.0, 0.0), eps, eps / 10))
        c = sobolev_from_hardy_check(u, d, P)
        assert c.lhs > 0 and c.rhs > 0
        ratios.append(c.lhs / c.rhs)
    # both sides scale like eps^(n - 2 sigma) up to the boundary tail
    assert max(ratios) / min(ratios) < 1.5
    zero = GridFunction(GridSpec((-0.5, -0.5), 0.1, (10, 10)), np.zeros((10, 10)))
    c0 = sobolev_from_hardy_check(zero, d, P)
    assert (c0.lhs, c0.rhs, c0.error) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        sobolev_from_hardy_check(zero, d, FracParams(2, 0.4, 2.0))


def test_descent_trace_is_monotone():
    P = FracParams(2, 0.75, 2.0)
    res = best_constant_descent(Ball((0.0, 0.0), 1.0), P, h=1.0 / 8, iterations=15)
    assert len(res.trace) >= 2
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))
    assert res.trace[-1] < res.trace[0]
    assert np.all(res.final.values >= 0)
    with pytest.raises(ValueError):
        best_constant_descent(Interval(-1, 1), FracParams(1, 0.75, 2.0), h=0.1)


def test_descent_from_given_start():
    P = FracParams(2, 0.75, 2.0)
    d = Ball((0.0, 0.0), 1.0)
    u0 = build_bump(BumpSpec((0.0, 0.0), 0.45), GridSpec.covering((-1.0, -1.0), (1.0, 1.0), 1.0 / 20))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = best_constant_descent(d, P, h=1.0 / 20, iterations=10, u0=u0)
    assert res.trace[-1] <= res.trace[0]
