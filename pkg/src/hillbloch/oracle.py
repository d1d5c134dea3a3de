"""Shooting back-end: monodromy matrices and Bloch eigenvalues as their roots.

For ``-y'' + Q y = lam y`` write ``Y = (y, y')`` so ``Y' = [[0, I], [Q - lam, 0]] Y``.
The monodromy matrix ``M(lam)`` maps ``Y(0)`` to ``Y(1)``; ``lam`` is an
eigenvalue of ``L_t(Q)`` iff ``exp(i t)`` is an eigenvalue of ``M(lam)``.

Integration is classical RK4 on a fixed grid, vectorised over a batch of
``lam`` values.  Everything here is independent of the Galerkin code except the
optional count check in ``find_eigenvalues``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyFailure, SuspectedMissedRoot
from .galerkin import bloch_eigenvalues, normalize_t
from .potential import MatrixPotential

MIN_STEPS = 256
DET_TOL = 1e-5
UNIT_CIRCLE_TOL = 1e-6
MERGE_RTOL = 1e-8


def monodromy_batch(p: MatrixPotential, lams, steps: int) -> np.ndarray:
    """RK4 monodromy matrices for every ``lam``; shape (L, 2m, 2m)."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    m, nl = p.m, len(lams)
    h = 1.0 / steps
    qs = p.evaluate(np.arange(2 * steps + 1) * (h / 2))  # half-step nodes
    # Y = (top; bot) with top' = bot, bot' = (Q - lam) top.  Columns of all
    # lam values sit side by side so each Q product is one (m, m) x (m, 2mL) GEMM.
    top = np.zeros((m, nl, 2 * m), dtype=complex)
    bot = np.zeros_like(top)
    top[np.arange(m), :, np.arange(m)] = 1.0
    bot[np.arange(m), :, m + np.arange(m)] = 1.0
    top = top.reshape(m, -1)
    bot = bot.reshape(m, -1)
    lam = np.repeat(lams, 2 * m)[None, :]
    h2, h6 = h / 2, h / 6
    for i in range(steps):
        q0, qh, q1 = qs[2 * i], qs[2 * i + 1], qs[2 * i + 2]
        a1 = bot
        b1 = q0 @ top - lam * top
        y = top + h2 * a1
        a2 = bot + h2 * b1
        b2 = qh @ y - lam * y
        y = top + h2 * a2
        a3 = bot + h2 * b2
        b3 = qh @ y - lam * y
        y = top + h * a3
        a4 = bot + h * b3
        b4 = q1 @ y - lam * y
        top = top + h6 * (a1 + 2 * a2 + 2 * a3 + a4)
        bot = bot + h6 * (b1 + 2 * b2 + 2 * b3 + b4)
    y = np.concatenate([top.reshape(m, nl, 2 * m), bot.reshape(m, nl, 2 * m)], axis=0)
    return np.transpose(y, (1, 0, 2))


def monodromy_richardson(p: MatrixPotential, lams, steps: int):
    """Step-halving pair extrapolated to fifth order; returns (M, error estimate per lam)."""
    coarse = monodromy_batch(p, lams, steps)
    fine = monodromy_batch(p, lams, 2 * steps)
    diff = (fine - coarse) / 15.0
    return fine + diff, np.max(np.abs(diff), axis=(1, 2))


@dataclass(frozen=True)
class MonodromyMatrix:
    lam: float
    matrix: np.ndarray
    error_estimate: float
    steps: int

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))


def monodromy(p: MatrixPotential, lam: float, steps: int = 2048) -> MonodromyMatrix:
    if steps < MIN_STEPS:
        raise ValueError(f"steps must be >= {MIN_STEPS}")
    mats, err = monodromy_richardson(p, [lam], steps)
    mm = MonodromyMatrix(float(lam), mats[0], float(err[0]), steps)
    dev = abs(mm.det - 1)
    if dev > DET_TOL:
        raise AccuracyFailure(f"det M(lam={lam}) - 1 = {dev:.2e}; increase steps")
    return mm


def quasimomenta(mm: MonodromyMatrix, tol: float = UNIT_CIRCLE_TOL):
    """Quasimomenta ``t`` in [-pi/2, 3pi/2) of the unit-circle eigenvalues of ``M``."""
    rho = np.linalg.eigvals(mm.matrix)
    on_circle = rho[np.abs(np.abs(rho) - 1) <= tol]
    return sorted(normalize_t(np.angle(r)) for r in on_circle)


def distance_to_phase(mats: np.ndarray, t: float) -> np.ndarray:
    """``min_rho |rho(M) - exp(i t)|`` for a stack of matrices."""
    rho = np.linalg.eigvals(mats)
    return np.min(np.abs(rho - np.exp(1j * t)), axis=-1)


def phased_determinant(mats: np.ndarray, t: float) -> np.ndarray:
    """Real function ``Re(exp(-i m t) det(M - exp(i t) I))`` vanishing at the roots.

    For Hermitian ``Q`` and real ``lam``, ``M`` preserves the form
    ``J = [[0, I], [-I, 0]]`` and this quantity is real up to rounding.
    """
    n = mats.shape[-1]
    m = n // 2
    z = np.exp(1j * t)
    d = np.linalg.det(mats - z * np.eye(n))
    return np.real(np.exp(-1j * m * t) * d)


def _multiplicity(mat, t, rtol=1e-6):
    s = np.linalg.svd(mat - np.exp(1j * t) * np.eye(mat.shape[0]), compute_uv=False)
    return int(np.sum(s <= rtol * max(1.0, float(np.max(np.abs(mat))))))


@dataclass
class QuasimomentumRoots:
    t: float
    bracket: tuple
    roots: list                 # ascending lam values
    multiplicities: list
    residuals: list             # min_rho |rho - e^{it}| at each root
    expected_count: int | None = None
    status: str = "ok"
    notes: list = field(default_factory=list)

    def flat(self):
        """Roots repeated according to multiplicity."""
        out = []
        for r, k in zip(self.roots, self.multiplicities):
            out.extend([r] * k)
        return out


def _zoom(p, t, intervals, steps, fn, passes, points=32):
    # Parallel refinement: each pass evaluates ``points`` interior samples of
    # every interval in one batched integration and keeps the sub-interval that
    # contains the sign change (fn="sign") or the minimum of g (fn="min").
    intervals = [tuple(iv) for iv in intervals]
    for _ in range(passes):
        if not intervals:
            break
        grids = [np.linspace(a, b, points + 2) for a, b in intervals]
        lams = np.concatenate(grids)
        mats, _ = monodromy_richardson(p, lams, steps)
        if fn == "sign":
            vals = phased_determinant(mats, t)
        else:
            vals = distance_to_phase(mats, t)
        new = []
        for i, g in enumerate(grids):
            v = vals[i * (points + 2):(i + 1) * (points + 2)]
            if fn == "sign":
                s = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) <= 0)
                j = int(s[0]) if len(s) else int(np.argmin(np.abs(v[:-1])))
                new.append((g[j], g[j + 1], v[j], v[j + 1]))
            else:
                j = int(np.argmin(v))
                new.append((g[max(j - 1, 0)], g[min(j + 1, len(g) - 1)], v[j], g[j]))
        intervals = [iv[:2] for iv in new]
        last = new
    return last


def find_eigenvalues(p: MatrixPotential, t: float, bracket, *, steps: int = 1024,
                     scan_step: float = 0.25, galerkin_K: int | None = None,
                     check_count: bool = True, refine_passes: int = 2,
                     max_densify: int = 2) -> QuasimomentumRoots:
    """All Bloch eigenvalues at quasimomentum ``t`` inside the open ``bracket``.

    Roots are bracketed by sign changes of ``phased_determinant`` and by local
    minima of ``distance_to_phase`` that sit below a threshold (the latter
    catches even-multiplicity roots, where the determinant touches zero).  The
    count is compared with the Galerkin eigenvalue count in the bracket and a
    mismatch raises ``SuspectedMissedRoot`` after up to ``max_densify`` scan
    refinements.
    """
    lo, hi = map(float, bracket)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError("bracket must be a finite increasing pair")
    if scan_step > 0.25 * (2 * np.pi) ** 2:
        raise ValueError("scan step coarser than 0.25 (2 pi)^2 misses bands")
    t = normalize_t(t)
    expected = None
    if check_count:
        if galerkin_K is None:
            top = math.sqrt(max(hi, 0.0) + 4 * float(np.max(np.abs(p.coeffs))) + 1)
            galerkin_K = int(top / (2 * np.pi)) + p.degree + 12
        ev = bloch_eigenvalues(p, t, galerkin_K)
        expected = int(np.sum((ev > lo) & (ev < hi)))

    step = scan_step
    result = None
    for level in range(max_densify + 1):
        result = _find_once(p, t, lo, hi, steps, step, refine_passes)
        result.expected_count = expected
        if expected is None or sum(result.multiplicities) == expected:
            return result
        result.notes.append(f"scan step {step:g}: found {sum(result.multiplicities)}, "
                            f"Galerkin count {expected}")
        step /= 8
    result.status = "suspected-missed-root"
    raise SuspectedMissedRoot(
        f"oracle found {sum(result.multiplicities)} roots in {bracket} at t={t}, "
        f"Galerkin count is {expected}", roots=result, expected=expected)


def _find_once(p, t, lo, hi, steps, scan_step, refine_passes, points=64):
    n = max(int(math.ceil((hi - lo) / scan_step)), 8)
    grid = np.linspace(lo, hi, n + 1)
    mats = monodromy_batch(p, grid, steps)
    f = phased_determinant(mats, t)
    g = distance_to_phase(mats, t)

    sign_iv = [(grid[i], grid[i + 1]) for i in np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)]
    # exact zeros on grid nodes
    for i in np.flatnonzero(f == 0):
        if 0 < i < n:
            sign_iv.append((grid[i - 1], grid[i + 1]))

    # Cells around low local minima of g may hide a pair of close roots (no net
    # sign change) or an even-multiplicity root.  Sample each finely once: new
    # sign changes become sign brackets, otherwise the minimum is zoomed.
    cells = [(grid[i - 1], grid[i + 1]) for i in range(1, n)
             if g[i] <= g[i - 1] and g[i] <= g[i + 1] and g[i] < 0.05]
    min_iv = []
    if cells:
        fine = [np.linspace(a, b, points + 2) for a, b in cells]
        fm, _ = monodromy_richardson(p, np.concatenate(fine), steps)
        ff, gf = phased_determinant(fm, t), distance_to_phase(fm, t)
        w = points + 2
        for c, xs in enumerate(fine):
            fv, gv = ff[c * w:(c + 1) * w], gf[c * w:(c + 1) * w]
            flips = np.flatnonzero(np.sign(fv[:-1]) * np.sign(fv[1:]) <= 0)
            sign_iv.extend((xs[i], xs[i + 1]) for i in flips)
            j = int(np.argmin(gv))
            if not any(i <= j <= i + 1 for i in flips):
                min_iv.append((xs[max(j - 1, 0)], xs[min(j + 1, w - 1)]))

    roots = []
    if sign_iv:
        for a, b, fa, fb in _zoom(p, t, sign_iv, steps, "sign", refine_passes, points=points):
            # final secant step inside the last bracket
            root = a - fa * (b - a) / (fb - fa) if fb != fa else 0.5 * (a + b)
            roots.append(float(root))
    if min_iv:
        # g is V-shaped at a root, so the minimum needs more passes than a sign change
        for a, b, gmin, x in _zoom(p, t, min_iv, steps, "min", 3 * refine_passes, points=points):
            if gmin < 1e-4:
                roots.append(float(x))
    merged = []
    for r in sorted(roots):
        if merged and abs(r - merged[-1]) < MERGE_RTOL * max(1.0, abs(r)):
            continue
        merged.append(r)
    if merged:
        mats, _ = monodromy_richardson(p, merged, steps)
        residuals = distance_to_phase(mats, t).tolist()
        mult = [_multiplicity(mm, t) or 1 for mm in mats]
    else:
        residuals, mult = [], []
    return QuasimomentumRoots(t, (lo, hi), merged, mult, residuals)
