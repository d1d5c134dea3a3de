from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_force_holds, spectrum_of
from hillbloch.errors import CutoffTooHigh
from hillbloch.potential import from_fourier, random_trig_potential
from hillbloch.spectrum import (detect_gaps, finite_gap_condition, gap_census_demo, gaps_from_bands,
                                merge_reports, oracle_edge_check, sweep_bands)

TWO_PI = 2 * math.pi
LAM = (TWO_PI * 8) ** 2


def test_sweep_preconditions(mathieu):
    with pytest.raises(ValueError):
        sweep_bands(mathieu, 20, 32, 100.0)
    with pytest.raises(ValueError):
        sweep_bands(mathieu, 20, 66, 100.0)
    with pytest.raises(CutoffTooHigh):
        sweep_bands(mathieu, 10, 64, (TWO_PI * 8) ** 2)


def test_grid_contains_edges(mathieu):
    bt = sweep_bands(mathieu, 16, 64, 500.0)
    assert 0.0 in bt.ts and math.pi in bt.ts
    assert bt.ts[0] == pytest.approx(-math.pi / 2)
    assert bt.max_jump <= bt.jump_bound


def test_free_bands_contiguous():
    free = from_fourier(1, [(0, [[0.0]])])
    bt = sweep_bands(free, 16, 64, LAM)
    rep = detect_gaps(bt)
    assert rep.gaps == []
    for n, (lo, hi) in enumerate(rep.bands[:-1]):
        assert lo == pytest.approx((n * math.pi) ** 2, abs=1e-9)
        assert hi == pytest.approx(((n + 1) * math.pi) ** 2, abs=1e-9)
    assert rep.spectrum == [[pytest.approx(0.0, abs=1e-12), LAM]]


def test_shifted_constant_no_gaps():
    p = from_fourier(2, [(0, np.diag([0.0, 100.0]))])
    rep = detect_gaps(sweep_bands(p, 16, 64, LAM))
    assert rep.gaps == []


def test_mathieu_gaps_against_oracle(mathieu):
    bt = sweep_bands(mathieu, 16, 128, 400.0)
    rep = detect_gaps(bt)
    widths = [g["width"] for g in rep.gaps if not g["open_top"]]
    assert len(widths) >= 2 and all(w > 0 for w in widths)
    assert all(a > b for a, b in zip(widths, widths[1:]))
    # first gap: top of band 1 and bottom of band 2, both at t = pi
    assert rep.gaps[0]["lo"] == pytest.approx(bt.edges[0, 2])
    assert bt.edges[0, 3] == pytest.approx(math.pi) and bt.edges[1, 1] == pytest.approx(math.pi)
    worst, rows = oracle_edge_check(mathieu, bt, rep, max_points=4)
    assert worst <= 1e-6 and len(rows) == 4


def scalar(a1, a2):
    return [(1, [[a1]]), (2, [[a2]])]


def test_decoupled_union():
    q1, q2 = (0.8, 0.3), (-1.2, 0.5)
    p1 = from_fourier(1, scalar(*q1))
    p2 = from_fourier(1, scalar(*q2))
    both = from_fourier(2, [(1, np.diag([q1[0], q2[0]])), (2, np.diag([q1[1], q2[1]]))])
    lam = (TWO_PI * 6) ** 2
    r1, r2 = (detect_gaps(sweep_bands(p, 16, 128, lam)) for p in (p1, p2))
    joint = detect_gaps(sweep_bands(both, 16, 128, lam))
    merged = merge_reports(r1, r2)
    assert len(joint.gaps) == len(merged.gaps)
    for a, b in zip(joint.gaps, merged.gaps):
        assert a["lo"] == pytest.approx(b["lo"], abs=1e-6)
        assert a["hi"] == pytest.approx(b["hi"], abs=1e-6)


def test_interior_extrema_refined():
    p = random_trig_potential(2, 2, seed=3, norm=2.0)
    coarse = sweep_bands(p, 16, 64, 300.0, refine=False)
    fine = sweep_bands(p, 16, 64, 300.0)
    assert np.all(fine.edges[:, 0] <= coarse.edges[:, 0] + 1e-12)
    assert np.all(fine.edges[:, 2] >= coarse.edges[:, 2] - 1e-12)


def test_grid_refinement_bound():
    p = random_trig_potential(2, 2, seed=4, norm=1.5)
    a = detect_gaps(sweep_bands(p, 16, 64, 600.0))
    b = detect_gaps(sweep_bands(p, 16, 128, 600.0))
    bound = 2 * (TWO_PI * 16 + TWO_PI) * (TWO_PI / 64)
    assert len(a.gaps) == len(b.gaps)
    for ga, gb in zip(a.gaps, b.gaps):
        assert abs(ga["lo"] - gb["lo"]) <= bound and abs(ga["hi"] - gb["hi"]) <= bound


def test_workers_do_not_change_result():
    p = random_trig_potential(2, 1, seed=8)
    a = sweep_bands(p, 12, 64, 300.0)
    b = sweep_bands(p, 12, 64, 300.0, workers=3)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.edges, b.edges)


def test_gap_bookkeeping():
    rep = gaps_from_bands([(0, 1), (1.5, 2), (2.0 + 1e-9, 3), (4, 4.5)], 5.0, delta_merge=1e-6)
    assert [(g["lo"], g["hi"]) for g in rep.gaps] == [(1, 1.5), (3, 4), (4.5, 5.0)]
    assert rep.gaps[-1]["open_top"]
    assert len(rep.unresolved) == 1
    los = [g["lo"] for g in rep.gaps]
    assert los == sorted(los)
    assert all(g["width"] >= rep.delta_merge for g in rep.gaps)


@pytest.mark.parametrize("mu, holds, witness, violation", [
    ([0, 1, 3], True, (1, 2, 3), None),
    ([0, 1, 2], False, None, [3, 2, 1]),
])
def test_condition_examples(mu, holds, witness, violation):
    v = finite_gap_condition(spectrum_of(mu))
    assert v.holds is holds
    assert v.witness == witness
    if violation:
        assert v.violation["i"] == violation and v.violation["sum"] == pytest.approx(2.0)


def test_condition_needs_three_simple():
    v = finite_gap_condition(spectrum_of([0, 0, 5]))
    assert not v.holds and "fewer than three" in v.reason
    assert not finite_gap_condition(spectrum_of([0, 1])).holds


def test_condition_matches_brute_force():
    rng = np.random.default_rng(2024)
    agree = {True: 0, False: 0}
    for trial in range(100):
        m = int(rng.integers(1, 6))
        if trial % 2:
            mu = rng.integers(0, 4, size=m).astype(float)
        else:
            mu = rng.normal(size=m)
        ms = spectrum_of(mu)
        got = finite_gap_condition(ms).holds
        assert got == brute_force_holds(ms.mu, ms.simple)
        agree[got] += 1
    assert agree[True] > 0 and agree[False] > 0


def test_census_free():
    free = from_fourier(1, [(0, [[0.0]])])
    rep = gap_census_demo(free, LAM, K=16, grid_size=64)
    assert rep["gaps"] == [] and rep["empirical_H"] == pytest.approx(0.0, abs=1e-12)
    assert rep["label"] == "consistency demonstration, not a proof"


def test_census_constant_three_levels():
    p = from_fourier(3, [(0, np.diag([0.0, 1.0, 3.0]))])
    rep = gap_census_demo(p, LAM, K=16, grid_size=64)
    assert rep["condition"]["holds"] is True
    # three shifted copies of [0, inf) leave no gap above the lowest level
    assert rep["gaps"] == []


@settings(max_examples=200, deadline=None)
@given(mu=st.lists(st.integers(-3, 6), min_size=1, max_size=5))
def test_condition_brute_force_lattice(mu):
    ms = spectrum_of(mu)
    assert finite_gap_condition(ms).holds == brute_force_holds(ms.mu, ms.simple)


band = st.tuples(st.floats(0, 100), st.floats(0, 20)).map(lambda ab: (ab[0], ab[0] + ab[1]))


@settings(max_examples=200, deadline=None)
@given(bands=st.lists(band, min_size=1, max_size=8))
def test_gaps_avoid_every_band(bands):
    rep = gaps_from_bands(bands, 150.0, delta_merge=1e-9)
    for g in rep.gaps:
        assert g["lo"] < g["hi"]
        for a, b in bands:
            assert b <= g["lo"] or a >= g["hi"]
    # every band lies inside one spectrum piece, and pieces are disjoint and sorted
    for a, b in bands:
        assert any(lo <= a and min(b, 150.0) <= hi for lo, hi in rep.spectrum)
    flat = [x for piece in rep.spectrum for x in piece]
    assert flat == sorted(flat)
