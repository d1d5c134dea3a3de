from __future__ import annotations

import numpy as np
import pytest

from hillbloch.potential import MeanSpectrum, from_fourier, random_trig_potential


def random_hermitian(n, rng, scale=1.0):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (g + g.conj().T)


def spectrum_of(mu, tol=1e-9):
    mu = np.sort(np.asarray(mu, dtype=float))
    if len(mu) == 1:
        simple = np.ones(1, dtype=bool)
    else:
        gaps = np.abs(mu[:, None] - mu[None, :]) + np.diag(np.full(len(mu), np.inf))
        simple = gaps.min(axis=1) > tol
    return MeanSpectrum(np.diag(mu), mu, np.eye(len(mu)), simple)


def brute_force_holds(mu, simple, tol=1e-9):
    # all three sum rows compared at once by broadcasting
    mu = np.asarray(mu)
    idx = [j for j in range(len(mu)) if simple[j]]
    if len(idx) < 3:
        return False
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            for c in range(b + 1, len(idx)):
                s = mu[[idx[a], idx[b], idx[c]]][:, None] + mu[None, :]
                e12 = np.abs(s[0][:, None] - s[1][None, :]) <= tol
                e23 = np.abs(s[1][:, None] - s[2][None, :]) <= tol
                if not np.any(e12[:, :, None] & e23[None, :, :]):
                    return True
    return False


@pytest.fixture
def mathieu():
    return from_fourier(1, [(1, np.eye(1))], name="mathieu")


@pytest.fixture
def constant14():
    return from_fourier(2, [(0, np.diag([1.0, 4.0]))], name="constant")


@pytest.fixture
def seeded_m2():
    return random_trig_potential(2, 2, seed=1, norm=1.0)
