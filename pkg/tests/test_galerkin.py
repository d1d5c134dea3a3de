from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hillbloch.errors import DimensionMismatch, UnknownLabel
from hillbloch.galerkin import (BlochParams, UnperturbedLadder, assemble, bloch_eigenvalues,
                                eigenfunction_overlap, normalize_t, solve)
from hillbloch.linalg import hermitian_check
from hillbloch.potential import from_fourier, mean_spectrum, random_trig_potential

TWO_PI = 2 * np.pi


def test_assemble_mathieu_k1(mathieu):
    h = assemble(mathieu, BlochParams(0.0, 1, 1))
    s = 4 * np.pi ** 2
    assert np.allclose(h, [[s, 1, 0], [1, 0, 1], [0, 1, s]])


def test_assemble_free_quarter():
    free = from_fourier(1, [(0, [[0.0]])])
    h = assemble(free, BlochParams(np.pi / 2, 1, 1))
    t = np.pi / 2
    assert np.allclose(h, np.diag([(-TWO_PI + t) ** 2, t ** 2, (TWO_PI + t) ** 2]))


def test_assemble_constant_k0(constant14):
    assert np.allclose(assemble(constant14, BlochParams(0.0, 0, 2)), np.diag([1, 4]))


def test_assemble_block_layout():
    p = from_fourier(2, [(0, [[1, 1j], [-1j, 2]]), (1, [[0, 1], [0, 0]])])
    h = assemble(p, BlochParams(0.3, 2, 2)).reshape(5, 2, 5, 2)
    # block (n, p) is Q_{n-p}
    assert np.allclose(h[3, :, 2, :], p.block(1))
    assert np.allclose(h[2, :, 3, :], p.block(-1))
    assert np.allclose(h[0, :, 4, :], 0)


def test_dimension_mismatch(constant14):
    with pytest.raises(DimensionMismatch):
        assemble(constant14, BlochParams(0.0, 2, 3))


def test_free_solution_labels():
    free = from_fourier(1, [(0, [[0.0]])])
    sol = solve(free, BlochParams(np.pi / 2, 1, 1))
    assert np.allclose(sol.raw.values, [np.pi ** 2 / 4, 9 * np.pi ** 2 / 4, 25 * np.pi ** 2 / 4])
    assert sol.labels == [(0, 0), (-1, 0), (1, 0)]


@pytest.mark.parametrize("t", [0.0, 0.3, np.pi / 2, np.pi])
def test_constant_exact(constant14, t):
    sol = solve(constant14, BlochParams(t, 16, 2))
    for k in range(-14, 15):
        for j, mu in enumerate([1.0, 4.0]):
            assert sol.eigenvalue(k, j) == pytest.approx((TWO_PI * k + t) ** 2 + mu, abs=1e-9)


def test_ladder_ties_break_by_k():
    lad = UnperturbedLadder.build(0.0, 2, np.array([0.0]))
    assert list(zip(lad.ks, lad.js)) == [(0, 0), (-1, 0), (1, 0), (-2, 0), (2, 0)]


def test_labels_are_bijection(seeded_m2):
    sol = solve(seeded_m2, BlochParams(1.1, 12, 2))
    assert sorted(sol.labels) == [(k, j) for k in range(-12, 13) for j in range(2)]
    with pytest.raises(UnknownLabel):
        sol.position(13, 0)


def test_contamination_flag(seeded_m2):
    sol = solve(seeded_m2, BlochParams(0.4, 20, 2))
    assert sol.contamination_limit() == 16
    assert sol.is_contaminated(17) and not sol.is_contaminated(-16)


def test_label_band_sanity(seeded_m2):
    sol = solve(seeded_m2, BlochParams(0.7, 40, 2))
    assert sol.label_band_violations(c_label=1.0) == []


@pytest.mark.parametrize("t", [0.3, 1.0, np.pi / 2, np.pi + 0.3])
def test_k_convergence(seeded_m2, t):
    a = solve(seeded_m2, BlochParams(t, 32, 2))
    b = solve(seeded_m2, BlochParams(t, 64, 2))
    for k in range(-8, 9):
        for j in range(2):
            assert abs(a.eigenvalue(k, j) - b.eigenvalue(k, j)) <= 1e-8


def test_gauge_shift(seeded_m2):
    # t and t + 2 pi describe the same operator; the truncation window shifts by one
    K = 30
    a = solve(seeded_m2, BlochParams(0.9, K, 2))
    b = solve(seeded_m2, BlochParams(0.9 + TWO_PI, K, 2))
    for k in range(-20, 21):
        for j in range(2):
            assert abs(a.eigenvalue(k, j) - b.eigenvalue(k - 1, j)) <= 1e-9 * (1 + a.eigenvalue(k, j))
    assert normalize_t(0.9 + TWO_PI) == pytest.approx(0.9)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.floats(-1.5, 4.5))
def test_unitary_equivariance(seed, t):
    p = random_trig_potential(2, 2, seed)
    rng = np.random.default_rng(seed + 1)
    u, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    q = from_fourier(2, [(n, u.conj().T @ b @ u) for n, b in p.blocks()])
    a = solve(p, BlochParams(t, 10, 2))
    b = solve(q, BlochParams(t, 10, 2))
    assert np.max(np.abs(a.raw.values - b.raw.values)) < 1e-9
    # coefficient slices rotate by U^H; compare a well separated eigenvector up to phase
    i = int(np.argmax(np.minimum(np.diff(a.raw.values)[:-1], np.diff(a.raw.values)[1:]))) + 1
    va = a.raw.vectors[:, i].reshape(-1, 2) @ u.conj()
    vb = b.raw.vectors[:, i].reshape(-1, 2)
    assert abs(abs(np.vdot(va.ravel(), vb.ravel())) - 1) < 1e-8


@settings(max_examples=20, deadline=None)
@given(m=st.integers(1, 3), d=st.integers(0, 3), seed=st.integers(0, 2**31), t=st.floats(-2, 5))
def test_assembled_matrix_hermitian(m, d, seed, t):
    p = random_trig_potential(m, d, seed)
    assert hermitian_check(assemble(p, BlochParams(normalize_t(t), 6, m))) == 0.0


def test_overlaps_constant(constant14):
    sol = solve(constant14, BlochParams(0.5, 8, 2))
    assert abs(eigenfunction_overlap(sol, 3, 0, (3, [1, 0]))) == pytest.approx(1)
    assert abs(eigenfunction_overlap(sol, 3, 0, (3, [0, 1]))) == pytest.approx(0, abs=1e-12)
    with pytest.raises(UnknownLabel):
        eigenfunction_overlap(sol, 3, 0, (9, [1, 0]))


def test_mathieu_overlap_matches_second_order(mathieu):
    # leakage into k=9 and k=11, coupling 1 over the level spacings 78 pi^2 and 86 pi^2
    sol = solve(mathieu, BlochParams(np.pi / 2, 48, 1))
    leak = 1 - abs(eigenfunction_overlap(sol, 10, 0, (10, [1.0]))) ** 2
    expected = (78 * np.pi ** 2) ** -2 + (86 * np.pi ** 2) ** -2
    assert leak == pytest.approx(expected, rel=1e-2)
    assert leak <= (np.log(10) / 10) ** 2


def test_bloch_eigenvalues_match_solve(seeded_m2):
    bp = BlochParams(1.0, 20, 2)
    assert np.allclose(bloch_eigenvalues(seeded_m2, 1.0, 20), solve(seeded_m2, bp).raw.values)


def test_mean_used_for_ladder(seeded_m2):
    sol = solve(seeded_m2, BlochParams(1.0, 20, 2))
    assert np.allclose(sol.ladder.mu, mean_spectrum(seeded_m2).mu)


@pytest.mark.parametrize("t, expected", [(2 * np.pi, 0.0), (1.5 * np.pi, -0.5 * np.pi),
                                         (-0.5 * np.pi, -0.5 * np.pi), (-2.0, -2.0 + TWO_PI)])
def test_normalize_t(t, expected):
    assert normalize_t(t) == pytest.approx(expected)
