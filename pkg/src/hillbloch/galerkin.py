"""Fourier-Galerkin representation of the fiber operator ``L_t(Q)``.

Basis: ``e_s exp(i (2 pi n + t) x)`` for ``|n| <= K`` and ``s = 1..m``, ordered
lexicographically by ``(n, s)``.  In that basis the operator is

    H[(n, s), (p, q)] = (2 pi n + t)^2 delta_{np} delta_{sq} + (Q_{n-p})_{sq}

which is exactly Hermitian once ``Q_{-r} = Q_r^H``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, UnknownLabel
from .linalg import EigenDecomposition, eig_hermitian, eigvals_hermitian
from .potential import MatrixPotential, MeanSpectrum, mean_spectrum

TWO_PI = 2 * np.pi
TIE_TOL = 1e-9


def normalize_t(t: float) -> float:
    """Reduce ``t`` mod 2 pi into ``[-pi/2, 3pi/2)``."""
    r = (float(t) + np.pi / 2) % TWO_PI - np.pi / 2
    if r >= 1.5 * np.pi:  # rounding at the right endpoint
        r -= TWO_PI
    return r


@dataclass(frozen=True)
class BlochParams:
    t: float
    K: int
    m: int

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("truncation K must be nonnegative")
        if self.m < 1:
            raise ValueError("dimension m must be positive")

    @property
    def size(self) -> int:
        return self.m * (2 * self.K + 1)

    def recommended_K(self, k_max: int, degree: int) -> int:
        return 4 * abs(k_max) + degree


@dataclass(frozen=True)
class UnperturbedLadder:
    """Eigenvalues ``(2 pi k + t)^2 + mu_j`` of ``L_t(C)`` for ``|k| <= K``."""

    t: float
    K: int
    mu: np.ndarray
    ks: np.ndarray      # per ladder entry, sorted by value
    js: np.ndarray      # 0-based mean-matrix index
    values: np.ndarray  # ascending

    @classmethod
    def build(cls, t, K, mu):
        mu = np.asarray(mu, dtype=float)
        ks = np.repeat(np.arange(-K, K + 1), len(mu))
        js = np.tile(np.arange(len(mu)), 2 * K + 1)
        vals = (TWO_PI * ks + t) ** 2 + mu[js]
        # ties (t = 0, pi, equal mu) broken by |2 pi k + t|, then k, then j
        order = np.lexsort((js, ks, np.abs(TWO_PI * ks + t), vals))
        return cls(t, K, mu, ks[order], js[order], vals[order])

    def value(self, k, j):
        return (TWO_PI * k + self.t) ** 2 + self.mu[j]


def assemble(p: MatrixPotential, bp: BlochParams) -> np.ndarray:
    if p.m != bp.m:
        raise DimensionMismatch(f"potential has m={p.m}, params have m={bp.m}")
    m, K = p.m, bp.K
    N = 2 * K + 1
    h = np.zeros((N, m, N, m), dtype=complex)
    for r, q in p.blocks():
        if abs(r) >= N or not np.any(q):
            continue
        rows = np.arange(max(0, r), min(N, N + r))
        h[rows, :, rows - r, :] = q
    diag = (TWO_PI * np.arange(-K, K + 1) + bp.t) ** 2
    idx = np.arange(N)
    h[idx, :, idx, :] += diag[:, None, None] * np.eye(m)
    return h.reshape(N * m, N * m)


def label_eigenpairs(raw: EigenDecomposition, ladder: UnperturbedLadder, tie_tol: float = TIE_TOL):
    """Rank matching of sorted eigenvalues against the sorted ladder.

    In one dimension the rank matching is the assignment minimising the total
    ``sum |lambda - mu_{k,j}(t)|``, and it is a bijection by construction.
    Returns ``(labels, ambiguous)`` where ``labels[i] = (k, j)`` with 0-based
    ``j`` and ``ambiguous`` lists adjacent ladder positions closer than
    ``tie_tol`` (labels inside such a pair are deterministic but arbitrary).
    """
    if len(raw.values) != len(ladder.values):
        raise DimensionMismatch("ladder and spectrum sizes differ")
    labels = list(zip(ladder.ks.tolist(), ladder.js.tolist()))
    close = np.flatnonzero(np.diff(ladder.values) <= tie_tol)
    ambiguous = [(int(i), int(i) + 1) for i in close]
    return labels, ambiguous


@dataclass
class BlochSolution:
    params: BlochParams
    degree: int
    mean: MeanSpectrum
    raw: EigenDecomposition
    ladder: UnperturbedLadder
    labels: list
    ambiguous: list
    _position: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._position = {lab: i for i, lab in enumerate(self.labels)}

    @property
    def t(self):
        return self.params.t

    @property
    def K(self):
        return self.params.K

    def position(self, k: int, j: int) -> int:
        """Sorted position of ``lambda_{k,j}``; ``j`` is 0-based."""
        try:
            return self._position[(int(k), int(j))]
        except KeyError:
            raise UnknownLabel(f"no eigenpair labelled (k={k}, j={j})") from None

    def eigenvalue(self, k: int, j: int) -> float:
        return float(self.raw.values[self.position(k, j)])

    def coefficients(self, k: int, j: int) -> np.ndarray:
        """Coefficient vector of ``Psi_{k,j,t}`` as an array of shape (2K+1, m)."""
        col = self.raw.vectors[:, self.position(k, j)]
        return col.reshape(2 * self.K + 1, self.params.m)

    def contamination_limit(self) -> int:
        return self.K - self.degree - 2

    def is_contaminated(self, k: int) -> bool:
        return abs(k) > self.contamination_limit()

    def label_band_violations(self, c_label: float):
        """Labels outside ``|lambda - (2pi k + t)^2| <= c_label (1 + |k|^(1 - 1/2m))``."""
        m = self.params.m
        bad = []
        for i, (k, j) in enumerate(self.labels):
            if self.is_contaminated(k):
                continue
            dev = abs(self.raw.values[i] - (TWO_PI * k + self.t) ** 2)
            if dev > c_label * (1 + abs(k) ** (1 - 1 / (2 * m))):
                bad.append((k, j))
        return bad


def solve(p: MatrixPotential, bp: BlochParams, ms: MeanSpectrum | None = None) -> BlochSolution:
    ms = ms if ms is not None else mean_spectrum(p)
    raw = eig_hermitian(assemble(p, bp))
    ladder = UnperturbedLadder.build(bp.t, bp.K, ms.mu)
    labels, ambiguous = label_eigenpairs(raw, ladder)
    return BlochSolution(bp, p.degree, ms, raw, ladder, labels, ambiguous)


def bloch_eigenvalues(p: MatrixPotential, t: float, K: int) -> np.ndarray:
    """Ascending Galerkin eigenvalues at ``t`` without eigenvectors."""
    return eigvals_hermitian(assemble(p, BlochParams(t, K, p.m)))


def eigenfunction_overlap(sol: BlochSolution, k: int, j: int, target) -> complex:
    """``(Psi_{k,j,t}, v e^{i(2 pi n + t)x})`` for ``target = (n, v)``."""
    n, v = target
    if abs(n) > sol.K:
        raise UnknownLabel(f"basis index {n} outside |n| <= {sol.K}")
    coeffs = sol.coefficients(k, j)
    return complex(np.vdot(np.asarray(v, dtype=complex), coeffs[n + sol.K]))
