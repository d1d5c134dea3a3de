"""Dense Hermitian primitives.

Matrices are plain ``numpy`` complex arrays.  ``eig_hermitian`` wraps LAPACK
(``numpy.linalg.eigh``) and then canonicalises the output so that identical
input always yields identical eigenvectors, including inside degenerate
clusters.  ``jacobi_eigh`` is a self-contained cyclic Jacobi solver kept as an
independent second route for small matrices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, NonHermitianInput, NonSquare

HERMITIAN_RTOL = 1e-12
CLUSTER_RTOL = 1e-10
PHASE_RTOL = 1e-8


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray   # ascending, real
    vectors: np.ndarray  # columns, orthonormal

    def __len__(self):
        return len(self.values)

    def residual(self, a):
        """Largest ``|A v_j - lam_j v_j|`` scaled by ``1 + |lam_j|``."""
        r = a @ self.vectors - self.vectors * self.values
        return float(np.max(np.linalg.norm(r, axis=0) / (1 + np.abs(self.values))))


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise NonSquare(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def hermitian_check(a) -> float:
    """Return ``max |A - A^H|`` entrywise."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise NonSquare(f"matrix is {a.shape[0]}x{a.shape[1]}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)))


def _require_hermitian(a, rtol):
    dev = hermitian_check(a)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if dev > rtol * scale:
        raise NonHermitianInput(f"|A - A^H|_max = {dev:.3e} exceeds {rtol:g} * |A|_max")


def fix_phase(v: np.ndarray, rtol: float = PHASE_RTOL) -> np.ndarray:
    """Rotate each column so its first significant entry is real positive."""
    v = np.array(v, dtype=complex, copy=True)
    mags = np.abs(v)
    big = mags > rtol * mags.max(axis=0, keepdims=True)
    first = np.argmax(big, axis=0)
    cols = np.arange(v.shape[1])
    lead = v[first, cols]
    v *= (np.abs(lead) / lead)[None, :]
    return v


def _canonical_cluster_basis(vc: np.ndarray) -> np.ndarray:
    # Gram-Schmidt of projected unit vectors e_r onto span(vc).  Each step takes
    # the smallest index whose remaining projection is within 1e-6 of the largest,
    # so the result depends only on the subspace, not on the LAPACK basis.
    n, d = vc.shape
    remaining = np.sum(np.abs(vc) ** 2, axis=1)
    chosen = []
    for _ in range(d):
        top = remaining.max()
        r = int(np.argmax(remaining >= top * (1 - 1e-6)))
        u = vc @ vc[r].conj()
        for w in chosen:
            u -= w * np.vdot(w, u)
        u /= np.linalg.norm(u)
        chosen.append(u)
        remaining = np.maximum(remaining - np.abs(u) ** 2, 0.0)
        remaining[r] = 0.0
    return np.column_stack(chosen)


def canonicalize(values, vectors, cluster_rtol: float = CLUSTER_RTOL) -> EigenDecomposition:
    """Sort, fix degenerate-cluster bases and phases deterministically."""
    order = np.argsort(values, kind="stable")
    values = np.asarray(values, dtype=float)[order]
    vectors = np.asarray(vectors, dtype=complex)[:, order]
    if len(values) == 0:
        return EigenDecomposition(values, vectors)
    scale = max(1.0, float(np.max(np.abs(values))))
    breaks = np.flatnonzero(np.diff(values) > cluster_rtol * scale) + 1
    start = 0
    vectors = vectors.copy()
    for stop in list(breaks) + [len(values)]:
        if stop - start > 1:
            vectors[:, start:stop] = _canonical_cluster_basis(vectors[:, start:stop])
        start = stop
    return EigenDecomposition(values, fix_phase(vectors))


def eig_hermitian(a, *, hermitian_rtol: float = HERMITIAN_RTOL,
                  cluster_rtol: float = CLUSTER_RTOL, method: str = "lapack") -> EigenDecomposition:
    """Full eigendecomposition of a Hermitian matrix.

    Eigenvalues come back ascending.  Within clusters of eigenvalues closer than
    ``cluster_rtol * max(1, max|lam|)`` the basis is rebuilt deterministically,
    and every vector has its first significant component real positive.

    ``method="jacobi"`` uses the built-in cyclic Jacobi iteration instead of LAPACK.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise NonSquare(f"matrix is {a.shape[0]}x{a.shape[1]}")
    _require_hermitian(a, hermitian_rtol)
    h = 0.5 * (a + a.conj().T)
    if method == "lapack":
        try:
            w, v = np.linalg.eigh(h)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
    elif method == "jacobi":
        w, v = jacobi_eigh(h)
    else:
        raise ValueError(f"unknown method {method!r}")
    return canonicalize(w, v, cluster_rtol)


def jacobi_eigh(a, tol: float = 1e-14, max_sweeps: int = 60):
    """Cyclic Jacobi for a complex Hermitian matrix.  Returns unsorted (w, V)."""
    a = np.array(a, dtype=complex, copy=True)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    norm = np.linalg.norm(a)
    if norm == 0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * norm:
            return np.real(np.diag(a)).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2 * r)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1 + tau * tau))
                c = 1 / np.sqrt(1 + t * t)
                s = t * c
                # U = D R with D_qq = conj(phase): acts on columns p, q
                cp = a[:, p].copy()
                cq = a[:, q] * phase.conjugate()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :] * phase
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q] * phase.conjugate()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise ConvergenceFailure(f"Jacobi did not converge in {max_sweeps} sweeps")


def eigvals_hermitian(a, *, hermitian_rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """Ascending eigenvalues only; same input checks as ``eig_hermitian``."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise NonSquare(f"matrix is {a.shape[0]}x{a.shape[1]}")
    _require_hermitian(a, hermitian_rtol)
    try:
        return np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
