"""Resonance sets, width schedules and numerical checks of the large-|k| asymptotics.

Notation follows the package convention: ``mu_{k,j}(t) = (2 pi k + t)^2 + mu_j``
are the eigenvalues of ``L_t(C)``, ``Phi_{k,j,t} = v_j exp(i (2 pi k + t) x)``
their eigenfunctions, ``b_k`` the Fourier tail from ``coefficient_tail`` and

    eps_k   = c8 * (ln|k| / |k| + b_k)
    alpha_k = sqrt(eps_k)

Indices ``j`` are 0-based in code and 1-based in reports.  The constant ``c8``
has no closed form; ``calibrate_c8`` fits it from data and every suite reports
the constant it used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (IndexTooSmall, InsufficientSamples, InvalidN, NonSimpleEigenvalue,
                     TInForbiddenSet, UnknownLabel)
from .galerkin import BlochParams, BlochSolution, normalize_t, solve
from .potential import MatrixPotential, MeanSpectrum, coefficient_tail, mean_spectrum

FOUR_PI = 4 * np.pi
DEFAULT_C8 = 1.0
DEFAULT_N0 = 8
SLOPE_THRESHOLD = -0.8
ZERO_RESIDUAL = 1e-9


# --- sets -----------------------------------------------------------------

@dataclass(frozen=True)
class ResonanceIndexSet:
    k: int
    t: float
    members: tuple
    branch: str  # "T", "near-0" or "near-pi"


def a_set(k: int, t: float) -> ResonanceIndexSet:
    """Indices ``p`` whose free levels ``(2 pi p + t)^2`` are not separated from level ``k``."""
    k = int(k)
    if abs(k) <= 2:
        raise IndexTooSmall(f"|k| = {abs(k)} <= 2: windows 1/ln|k| are not defined")
    t = normalize_t(t)
    w = 1.0 / math.log(abs(k))
    if abs(t) < w:
        return ResonanceIndexSet(k, t, (k, -k), "near-0")
    if abs(t - math.pi) < w:
        return ResonanceIndexSet(k, t, (k, -k - 1), "near-pi")
    return ResonanceIndexSet(k, t, (k,), "T")


def in_T(k: int, t: float) -> bool:
    return a_set(k, t).branch == "T"


@dataclass(frozen=True)
class WidthSchedule:
    k: int
    eps: float
    alpha: float
    c8: float
    b_k: float


def width_schedule(p: MatrixPotential, k: int, c8: float = DEFAULT_C8) -> WidthSchedule:
    k = int(k)
    if abs(k) <= 1:
        raise IndexTooSmall("ln|k|/|k| vanishes or is undefined for |k| <= 1")
    b = coefficient_tail(p, k)
    eps = c8 * (math.log(abs(k)) / abs(k) + b)
    return WidthSchedule(k, eps, math.sqrt(eps), c8, b)


def _denominator(k, shift):
    # 4 pi (2k + shift), shared by both interval formulas so they agree bit for bit
    return FOUR_PI * (2 * k + shift)


def s_interval(k: int, n: int, mu_i: float, mu_j: float, alpha: float):
    """Open interval of ``t`` where ``|mu_{k,j}(t) - mu_{n,i}(t)| < alpha``; ``n`` in {-k, -k-1}."""
    k = int(k)
    if n == -k:
        shift, centre = 0, 0.0
    elif n == -k - 1:
        shift, centre = 1, math.pi
    else:
        raise InvalidN(f"n={n}: the set is empty unless n is -k or -k-1")
    d = _denominator(k, shift)
    return (centre + (mu_i - mu_j - alpha) / d, centre + (mu_i - mu_j + alpha) / d)


def merge_intervals(intervals):
    """Union of open intervals as a sorted list of disjoint open intervals."""
    out = []
    for a, b in sorted(intervals):
        if out and a < out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


@dataclass(frozen=True)
class ForbiddenSet:
    k: int
    j: int
    alpha: float
    pieces: tuple      # one interval per (n, i), before merging
    intervals: tuple   # merged

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def __contains__(self, t) -> bool:
        t = normalize_t(t)
        return any(a < t < b for a, b in self.intervals)


def forbidden_set(ms: MeanSpectrum, j: int, k: int, ws: WidthSchedule | float) -> ForbiddenSet:
    """Quasimomenta near 0 and pi where ``mu_{k,j}(t)`` may collide with another level.

    Built directly from the closed form ``pi n + (mu_p - mu_j +- alpha) / (4 pi (2k + n))``
    with ``n`` in {0, 1} and ``p = 1..m``.
    """
    if not ms.simple[j]:
        raise NonSimpleEigenvalue(f"mu_{j + 1} = {ms.mu[j]:.6g} is not simple")
    alpha = ws.alpha if isinstance(ws, WidthSchedule) else float(ws)
    pieces = []
    for shift in (0, 1):
        d = _denominator(k, shift)
        for mu_p in ms.mu:
            pieces.append((math.pi * shift + (mu_p - ms.mu[j] - alpha) / d,
                           math.pi * shift + (mu_p - ms.mu[j] + alpha) / d))
    return ForbiddenSet(int(k), int(j), alpha, tuple(pieces), tuple(merge_intervals(pieces)))


def forbidden_set_from_s(ms: MeanSpectrum, j: int, k: int, alpha: float):
    """Same set assembled from the pairwise ``s_interval`` pieces."""
    pieces = [s_interval(k, n, mu_i, ms.mu[j], alpha)
              for n in (-k, -k - 1) for mu_i in ms.mu]
    return merge_intervals(pieces)


# --- eigenpair diagnostics -------------------------------------------------

def _check_label(sol: BlochSolution, k, j):
    if sol.is_contaminated(k):
        raise UnknownLabel(f"k={k} lies in the truncation boundary band |k| > {sol.contamination_limit()}")
    return sol.position(k, j)


def residual(sol: BlochSolution, ms: MeanSpectrum, k: int, j: int) -> float:
    """``lambda_{k,j}(t) - (2 pi k + t)^2 - mu_j``."""
    _check_label(sol, k, j)
    return sol.eigenvalue(k, j) - (2 * np.pi * k + sol.t) ** 2 - ms.mu[j]


def _mean_basis_slices(sol, ms, k, j):
    coeffs = sol.coefficients(k, j)
    # coordinates of every Fourier slice in the eigenbasis of C
    return coeffs, coeffs @ ms.vectors.conj()


def projection_defect(sol: BlochSolution, ms: MeanSpectrum, k: int, j: int) -> float:
    """``|Psi - P Psi|`` with ``P`` onto the ``L_t(C)`` eigenspace cluster of ``mu_{k,j}``.

    The cluster is ``{Phi_{k,i}: mu_i = mu_j}``; when ``t`` falls in the near-0
    or near-pi window of ``a_set`` the whole Fourier block of the paired index
    (``-k`` or ``-k-1``) is added.  Computed from the complement, so small
    defects keep full relative precision.
    """
    _check_label(sol, k, j)
    coeffs, in_v = _mean_basis_slices(sol, ms, k, j)
    K = sol.K
    same = np.abs(ms.mu - ms.mu[j]) <= ms.tol_simple
    paired = set()
    if abs(k) >= 3:
        paired = set(a_set(k, sol.t).members) - {k}
    outside = 0.0
    for n in range(-K, K + 1):
        if n == k:
            outside += float(np.sum(np.abs(in_v[n + K][~same]) ** 2))
        elif n not in paired:
            outside += float(np.sum(np.abs(coeffs[n + K]) ** 2))
    return math.sqrt(outside)


def leading_term_distance(sol: BlochSolution, ms: MeanSpectrum, k: int, j: int):
    """Phase-minimised distances of ``Psi_{k,j}`` from ``v_j exp(i(2 pi k + t)x)``.

    Returns ``(full, slice)``: ``full`` is the L2 distance of the whole
    eigenfunction, ``slice`` only compares the Fourier coefficient block ``k``.
    """
    _check_label(sol, k, j)
    coeffs = sol.coefficients(k, j)
    K = sol.K
    block = coeffs[k + K]
    v = ms.vectors[:, j]
    ov = np.vdot(v, block)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    slice_d2 = float(np.sum(np.abs(block - phase * v) ** 2))
    others = np.delete(coeffs, k + K, axis=0)
    rest = float(np.sum(np.abs(others) ** 2))
    return math.sqrt(slice_d2 + rest), math.sqrt(slice_d2)


def leading_term_check(sol: BlochSolution, ms: MeanSpectrum, k: int, j: int,
                       ws: WidthSchedule) -> float:
    """Full-function distance from the leading term; refuses ``t`` in the forbidden set."""
    fs = forbidden_set(ms, j, k, ws)
    if sol.t in fs:
        raise TInForbiddenSet(f"t={sol.t:.6g} lies in B(alpha_{k}, mu_{j + 1})")
    return leading_term_distance(sol, ms, k, j)[0]


def uniqueness_census(p: MatrixPotential, ms: MeanSpectrum, ws: WidthSchedule, k: int, j: int,
                      t: float, K: int | None = None, sol: BlochSolution | None = None) -> int:
    """Number of eigenvalues of ``L_t(Q)`` in ``(mu_{k,j}(t) - eps_k, mu_{k,j}(t) + eps_k)``."""
    t = normalize_t(t)
    fs = forbidden_set(ms, j, k, ws)
    if t in fs:
        raise TInForbiddenSet(f"t={t:.6g} lies in B(alpha_{k}, mu_{j + 1})")
    if sol is None:
        K = K if K is not None else 4 * abs(k) + p.degree
        sol = solve(p, BlochParams(t, K, p.m), ms)
    centre = (2 * np.pi * k + t) ** 2 + ms.mu[j]
    return int(np.sum(np.abs(sol.raw.values - centre) < ws.eps))


# --- decay regression ------------------------------------------------------

@dataclass
class DecayReport:
    ks: list
    values: list
    slope: float | None
    intercept: float | None
    c_hat: float
    c_hat_upper: float
    c_hat_lower: float
    passed: bool
    reason: str
    criteria: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": "PASS" if self.passed else "FAIL",
            "slope": self.slope,
            "intercept": self.intercept,
            "c_hat": self.c_hat,
            "c_hat_upper_half": self.c_hat_upper,
            "c_hat_lower_half": self.c_hat_lower,
            "criteria": self.criteria,
            "reason": self.reason,
            "table": [{"k": k, "value": v} for k, v in zip(self.ks, self.values)],
        }


def verify_decay(samples, slope_threshold: float = SLOPE_THRESHOLD,
                 zero_tol: float = ZERO_RESIDUAL) -> DecayReport:
    """Check an ``O(ln k / k)`` bound on ``(k, r_k)`` samples.

    PASS needs a log-log slope at most ``slope_threshold`` and a stable fitted
    constant ``c = max |r_k| k / ln k``: the upper-half constant may exceed
    neither twice the full-range constant nor twice the lower-half constant.
    Samples that all vanish below ``zero_tol`` pass without a fit.
    """
    samples = sorted((int(k), float(r)) for k, r in samples)
    if len(samples) < 8:
        raise InsufficientSamples(f"need at least 8 samples, got {len(samples)}")
    ks = np.array([k for k, _ in samples], dtype=float)
    rs = np.abs(np.array([r for _, r in samples]))
    if np.any(ks < 2):
        raise ValueError("k must be >= 2 so that ln k > 0")
    scaled = rs * ks / np.log(ks)
    half = len(ks) // 2
    c_full = float(scaled.max())
    c_upper = float(scaled[half:].max())
    c_lower = float(scaled[:half].max())
    kl, vl = ks.astype(int).tolist(), [r for _, r in samples]
    if rs.max() <= zero_tol:
        return DecayReport(kl, vl, None, None, c_full, c_upper, c_lower, True,
                           "all residuals vanish to tolerance", {"zero_tol": zero_tol})
    pos = rs > 0
    slope, intercept = np.polyfit(np.log(ks[pos]), np.log(rs[pos]), 1)
    criteria = {
        "slope<=threshold": bool(slope <= slope_threshold),
        "c_hat_finite": bool(np.isfinite(c_full)),
        "upper<=2*full": bool(c_upper <= 2 * c_full),
        "upper<=2*lower": bool(c_upper <= 2 * c_lower),
    }
    passed = all(criteria.values())
    reason = "ok" if passed else "failed: " + ", ".join(k for k, v in criteria.items() if not v)
    return DecayReport(kl, vl, float(slope), float(intercept), c_full, c_upper, c_lower,
                       passed, reason, criteria)


# --- calibration and suites -----------------------------------------------

def calibrate_c8(p: MatrixPotential, ks, ts, K: int | None = None,
                 ms: MeanSpectrum | None = None) -> float:
    """``2 max |lambda_{k,j} - mu_{k,j}| / (ln k / k + b_k)`` over a trusted window."""
    ms = ms if ms is not None else mean_spectrum(p)
    ks = [int(k) for k in ks]
    K = K if K is not None else 4 * max(abs(k) for k in ks) + p.degree
    worst = 0.0
    for t in ts:
        sol = solve(p, BlochParams(normalize_t(t), K, p.m), ms)
        for k in ks:
            scale = math.log(abs(k)) / abs(k) + coefficient_tail(p, k)
            for j in range(p.m):
                worst = max(worst, abs(residual(sol, ms, k, j)) / scale)
    return 2 * worst if worst > 0 else DEFAULT_C8


def sample_pairs(p: MatrixPotential, ms: MeanSpectrum, k_range, count: int, seed: int,
                 c8: float, js=None):
    """Seeded ``(k, j, t)`` triples with ``t`` uniform on ``[-pi/2, 3pi/2)`` outside the forbidden set."""
    rng = np.random.default_rng(seed)
    js = [j for j in (range(ms.m) if js is None else js) if ms.simple[j]]
    if not js:
        raise NonSimpleEigenvalue("no simple eigenvalue of C to test")
    out = []
    while len(out) < count:
        k = int(rng.integers(k_range[0], k_range[1] + 1))
        j = int(js[rng.integers(len(js))])
        t = float(rng.uniform(-np.pi / 2, 1.5 * np.pi))
        t = normalize_t(t)
        if t in forbidden_set(ms, j, k, width_schedule(p, k, c8)):
            continue
        out.append((k, j, t))
    return out


def residual_suite(p: MatrixPotential, t: float, ks, K: int, ms: MeanSpectrum | None = None,
                   slope_threshold: float = SLOPE_THRESHOLD) -> dict:
    """Residual decay and projection-defect decay at one ``t`` for each ``j``."""
    ms = ms if ms is not None else mean_spectrum(p)
    sol = solve(p, BlochParams(normalize_t(t), K, p.m), ms)
    out = {"t": sol.t, "K": K, "per_j": []}
    for j in range(p.m):
        res = [(k, residual(sol, ms, k, j)) for k in ks]
        dfc = [(k, projection_defect(sol, ms, k, j)) for k in ks]
        out["per_j"].append({
            "j": j + 1,
            "residual": verify_decay(res, slope_threshold).to_dict(),
            "projection_defect": verify_decay(dfc, slope_threshold).to_dict(),
        })
    out["status"] = "PASS" if all(
        e["residual"]["status"] == "PASS" and e["projection_defect"]["status"] == "PASS"
        for e in out["per_j"]) else "FAIL"
    return out


def concentration_suite(p: MatrixPotential, pairs, c8: float, K: int | None = None,
                        ms: MeanSpectrum | None = None) -> dict:
    """Uniqueness census and leading-term distance for each ``(k, j, t)``.

    The distance is reported as ``c = d / alpha_k``; stability uses the same
    half-range comparison as ``verify_decay`` (pairs split at the median ``k``).
    """
    ms = ms if ms is not None else mean_spectrum(p)
    kmax = max(k for k, _, _ in pairs)
    K = K if K is not None else 4 * kmax + p.degree
    rows = []
    cache = {}
    for k, j, t in pairs:
        ws = width_schedule(p, k, c8)
        if t not in cache:
            cache[t] = solve(p, BlochParams(t, K, p.m), ms)
        sol = cache[t]
        count = uniqueness_census(p, ms, ws, k, j, t, sol=sol)
        full, sl = leading_term_distance(sol, ms, k, j)
        rows.append({"k": k, "j": j + 1, "t": t, "eps": ws.eps, "alpha": ws.alpha,
                     "count": count, "distance": full, "slice_distance": sl,
                     "ratio": full / ws.alpha})
    ks = np.array([r["k"] for r in rows])
    ratios = np.array([r["ratio"] for r in rows])
    mid = np.median(ks)
    c_full = float(ratios.max())
    c_upper = float(ratios[ks >= mid].max())
    c_lower = float(ratios[ks < mid].max()) if np.any(ks < mid) else c_full
    unique = all(r["count"] == 1 for r in rows)
    criteria = {
        "census==1": unique,
        "upper<=2*full": c_upper <= 2 * c_full,
        "upper<=2*lower": c_upper <= 2 * c_lower,
    }
    return {
        "c8": c8, "K": K, "pairs": len(rows), "rows": rows,
        "c_hat": c_full, "c_hat_upper_half": c_upper, "c_hat_lower_half": c_lower,
        "criteria": criteria,
        "status": "PASS" if all(criteria.values()) else "FAIL",
    }
