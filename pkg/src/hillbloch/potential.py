"""Periodic Hermitian matrix potentials as trigonometric matrix polynomials.

Fourier convention, fixed everywhere in the package::

    Q(x)   = sum_n Q_n exp(2 pi i n x)
    Q_n    = int_0^1 Q(x) exp(-2 pi i n x) dx

Hermitian ``Q(x)`` for all real ``x`` is equivalent to ``Q_{-n} = Q_n^H``.
The Galerkin coupling between Fourier rows ``(n, s)`` and columns ``(p, q)``
is the ``(s, q)`` entry of ``Q_{n-p}``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InsufficientSamples, NonHermitianSample, SymmetryViolation
from .linalg import EigenDecomposition, eig_hermitian

SYMMETRY_TOL = 1e-12
SAMPLE_HERMITIAN_TOL = 1e-8
SIMPLE_TOL = 1e-9


@dataclass(frozen=True)
class MatrixPotential:
    """Fourier blocks ``Q_{-d} .. Q_d`` stored as an array of shape (2d+1, m, m)."""

    m: int
    degree: int
    coeffs: np.ndarray = field(repr=False)
    name: str = ""

    def block(self, n: int) -> np.ndarray:
        if abs(n) > self.degree:
            return np.zeros((self.m, self.m), dtype=complex)
        return self.coeffs[n + self.degree]

    @property
    def mean(self) -> np.ndarray:
        return self.block(0)

    def blocks(self):
        """Yield ``(n, Q_n)`` for every stored index."""
        for n in range(-self.degree, self.degree + 1):
            yield n, self.coeffs[n + self.degree]

    def evaluate(self, x):
        """``Q(x)``; scalar ``x`` gives (m, m), array ``x`` gives (len(x), m, m)."""
        xs = np.asarray(x, dtype=float)
        ns = np.arange(-self.degree, self.degree + 1)
        phases = np.exp(2j * np.pi * np.multiply.outer(xs, ns))
        return np.tensordot(phases, self.coeffs, axes=([-1], [0]))

    def to_dict(self) -> dict:
        blocks = []
        for n, q in self.blocks():
            if n < 0 or not np.any(q):
                continue
            blocks.append({"n": n, "re": q.real.tolist(), "im": q.imag.tolist()})
        return {"m": self.m, "blocks": blocks}


def evaluate(p: MatrixPotential, x):
    return p.evaluate(x)


def _as_block(q, m):
    q = np.asarray(q, dtype=complex)
    if q.shape != (m, m):
        raise DimensionMismatch(f"block has shape {q.shape}, expected ({m}, {m})")
    if not np.all(np.isfinite(q)):
        raise ValueError("block has non-finite entries")
    return q


def from_fourier(m: int, blocks, name: str = "", tol: float = SYMMETRY_TOL) -> MatrixPotential:
    """Build a potential from ``(n, Q_n)`` pairs, completing ``Q_{-n} = Q_n^H``."""
    if m < 1:
        raise DimensionMismatch("dimension must be positive")
    given = {}
    for n, q in blocks:
        n = int(n)
        if n in given:
            raise ValueError(f"block index {n} supplied twice")
        given[n] = _as_block(q, m)
    degree = max((abs(n) for n in given), default=0)
    coeffs = np.zeros((2 * degree + 1, m, m), dtype=complex)
    for n in range(0, degree + 1):
        plus, minus = given.get(n), given.get(-n)
        if plus is not None and minus is not None:
            scale = max(1.0, float(np.max(np.abs(plus))))
            if np.max(np.abs(minus - plus.conj().T)) > tol * scale:
                raise SymmetryViolation(f"Q_{-n} is not the conjugate transpose of Q_{n}")
            q = 0.5 * (plus + minus.conj().T)
        elif plus is not None:
            q = plus
        elif minus is not None:
            q = minus.conj().T
        else:
            continue
        if n == 0:
            q = 0.5 * (q + q.conj().T)
        coeffs[degree + n] = q
        coeffs[degree - n] = q.conj().T
    return MatrixPotential(m, degree, coeffs, name)


def from_samples(m: int, samples, degree: int, name: str = "",
                 tol: float = SAMPLE_HERMITIAN_TOL) -> MatrixPotential:
    """Project samples on the grid ``x_j = j/G`` onto Fourier degree ``degree``."""
    s = np.asarray(samples, dtype=complex)
    if s.ndim != 3 or s.shape[1:] != (m, m):
        raise DimensionMismatch(f"samples have shape {s.shape}, expected (G, {m}, {m})")
    grid = s.shape[0]
    if grid < 2 * degree + 1:
        raise InsufficientSamples(f"{grid} samples cannot resolve degree {degree}")
    dev = np.max(np.abs(s - np.conj(np.swapaxes(s, 1, 2))))
    if dev > tol * max(1.0, float(np.max(np.abs(s)))):
        raise NonHermitianSample(f"sample deviates from Hermitian by {dev:.3e}")
    # numpy's fft uses exp(-2 pi i j n / G), matching Q_n
    fourier = np.fft.fft(s, axis=0) / grid
    coeffs = np.zeros((2 * degree + 1, m, m), dtype=complex)
    for n in range(-degree, degree + 1):
        coeffs[n + degree] = fourier[n % grid]
    sym = 0.5 * (coeffs + np.conj(np.swapaxes(coeffs[::-1], 1, 2)))
    return MatrixPotential(m, degree, sym, name)


@dataclass(frozen=True)
class MeanSpectrum:
    c: np.ndarray
    mu: np.ndarray
    vectors: np.ndarray
    simple: np.ndarray
    tol_simple: float = SIMPLE_TOL

    @property
    def m(self) -> int:
        return len(self.mu)


def mean_spectrum(p: MatrixPotential, tol_simple: float = SIMPLE_TOL) -> MeanSpectrum:
    c = p.mean
    dec: EigenDecomposition = eig_hermitian(c)
    mu = dec.values
    simple = np.ones(len(mu), dtype=bool)
    if len(mu) > 1:
        gaps = np.abs(mu[:, None] - mu[None, :]) + np.diag(np.full(len(mu), np.inf))
        simple = gaps.min(axis=1) > tol_simple
    return MeanSpectrum(c.copy(), mu, dec.vectors, simple, tol_simple)


def coefficient_tail(p: MatrixPotential, k: int) -> float:
    """Largest entry modulus of ``Q_n`` over ``n`` in {2k, -2k, 2k+1, -2k-1}."""
    k = int(k)
    return max(float(np.max(np.abs(p.block(n)))) for n in (2 * k, -2 * k, 2 * k + 1, -2 * k - 1))


def random_trig_potential(m: int, degree: int, seed: int, norm: float = 1.0,
                          mean=None, name: str = "") -> MatrixPotential:
    """Seeded random potential with ``sum_n |Q_n|_2 <= norm``, hence ``|Q(x)|_2 <= norm``.

    If ``mean`` is given it is used verbatim as ``Q_0`` and only the
    zero-mean part is drawn and scaled.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    if mean is None:
        g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        blocks.append((0, 0.5 * (g + g.conj().T)))
    for n in range(1, degree + 1):
        blocks.append((n, rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))))
    total = sum(np.linalg.norm(q, 2) * (1 if n == 0 else 2) for n, q in blocks)
    blocks = [(n, q * (norm / total)) for n, q in blocks]
    if mean is not None:
        blocks.append((0, np.asarray(mean, dtype=complex)))
    return from_fourier(m, blocks, name=name)


def _matrix_from_json(entry, m):
    re = np.asarray(entry.get("re", np.zeros((m, m))), dtype=float)
    im = np.asarray(entry.get("im", np.zeros_like(re)), dtype=float)
    return re + 1j * im


def potential_from_dict(data: dict, name: str = "") -> MatrixPotential:
    """Parse the JSON potential schema (Fourier-block or sampled form)."""
    m = int(data["m"])
    name = data.get("name", name)
    if "blocks" in data:
        blocks = [(int(b["n"]), _matrix_from_json(b, m)) for b in data["blocks"]]
        if not blocks:
            blocks = [(0, np.zeros((m, m)))]
        return from_fourier(m, blocks, name=name)
    if "samples" in data:
        samples = [_matrix_from_json(s, m) for s in data["samples"]]
        grid = int(data.get("grid", len(samples)))
        if grid != len(samples):
            raise InsufficientSamples(f"grid={grid} but {len(samples)} samples given")
        return from_samples(m, samples, int(data["degree"]), name=name)
    raise ValueError("potential needs either 'blocks' or 'samples'")


def load_potential(path) -> MatrixPotential:
    path = Path(path)
    with path.open() as fh:
        return potential_from_dict(json.load(fh), name=path.stem)
