"""Band functions over quasimomentum, gaps of the union, and the finite-gap test on C.

Band ``n`` is the range over ``t`` of the ``n``-th smallest eigenvalue of
``L_t(Q)``.  Sorted-position functions are continuous in ``t`` even where
labelled branches cross, so each range is an interval and the spectrum is the
union of these intervals.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import AccuracyFailure, CutoffTooHigh
from .galerkin import BlochParams, assemble, normalize_t
from .linalg import eigvals_hermitian
from .potential import MatrixPotential, MeanSpectrum, mean_spectrum

TWO_PI = 2 * np.pi
MIN_GRID = 64
MERGE_RTOL = 1e-7
TOL_SUM = 1e-9
DEMO_LABEL = "consistency demonstration, not a proof"


def cutoff_limit(K: int, degree: int) -> float:
    """Largest cutoff whose eigenvalues stay clear of the truncation boundary."""
    return (TWO_PI * (K - degree - 2)) ** 2 if K > degree + 2 else 0.0


def default_K(p: MatrixPotential, lam_max: float) -> int:
    return int(math.ceil(math.sqrt(max(lam_max, 0.0)) / TWO_PI)) + p.degree + 10


def _spectrum_at(p, K, t):
    return eigvals_hermitian(assemble(p, BlochParams(t, K, p.m)))


@dataclass
class BandTable:
    ts: np.ndarray          # uniform grid on [-pi/2, 3pi/2), contains 0 and pi
    values: np.ndarray      # (grid, B): B lowest eigenvalues at each t
    lam_max: float
    K: int
    m: int
    degree: int
    edges: np.ndarray       # (B, 4): min, t_min, max, t_max after refinement
    max_jump: float
    jump_bound: float

    @property
    def n_bands(self) -> int:
        return self.values.shape[1]

    @property
    def dt(self) -> float:
        return TWO_PI / len(self.ts)


def _refine(p, K, n, t_lo, t_hi, sign):
    res = minimize_scalar(lambda t: sign * _spectrum_at(p, K, t)[n], bounds=(t_lo, t_hi),
                          method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(sign * res.fun)


def sweep_bands(p: MatrixPotential, K: int, grid_size: int, lam_max: float,
                workers: int = 1, refine: bool = True) -> BandTable:
    """Sorted eigenvalues on a uniform ``t`` grid, with band extrema refined.

    The grid has ``grid_size`` points starting at ``-pi/2``; ``grid_size`` must
    be a multiple of 4 so that ``t = 0`` and ``t = pi`` are grid points.  Each
    grid extremum that could bound a gap of the union is polished by bounded
    scalar minimisation over the two adjacent grid cells; the other edges keep
    their grid values, which are within ``jump_bound`` of the true extrema.
    """
    if grid_size < MIN_GRID:
        raise ValueError(f"grid_size must be >= {MIN_GRID}")
    if grid_size % 4:
        raise ValueError("grid_size must be a multiple of 4 so that 0 and pi are grid points")
    if not lam_max > 0:
        raise ValueError("lam_max must be positive")
    limit = cutoff_limit(K, p.degree)
    if lam_max > limit:
        raise CutoffTooHigh(f"lam_max={lam_max:g} exceeds (2 pi (K - d - 2))^2 = {limit:g}; raise K")
    dt = TWO_PI / grid_size
    ts = -np.pi / 2 + dt * np.arange(grid_size)
    ts[grid_size // 4] = 0.0
    ts[3 * grid_size // 4] = np.pi
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda t: _spectrum_at(p, K, t), ts))
    else:
        rows = [_spectrum_at(p, K, t) for t in ts]
    full = np.array(rows)
    B = int(np.max(np.sum(full <= lam_max, axis=1)))
    values = full[:, :B]

    # periodic in t, so the last sample neighbours the first
    jumps = np.abs(np.diff(np.vstack([values, values[:1]]), axis=0))
    max_jump = float(jumps.max()) if B else 0.0
    bound = 2 * (TWO_PI * K + TWO_PI) * dt
    tol = 1e-9 * max(1.0, lam_max)
    if max_jump > bound + tol:
        raise AccuracyFailure(f"band jump {max_jump:.3e} exceeds Lipschitz bound {bound:.3e}")

    imin, imax = np.argmin(values, axis=0), np.argmax(values, axis=0)
    edges = np.column_stack([values[imin, np.arange(B)], ts[imin],
                             values[imax, np.arange(B)], ts[imax]]) if B else np.zeros((0, 4))
    if refine and B:
        # refinement lowers minima and raises maxima, so it can only close a
        # grid gap; edges of bands that already overlap cannot bound a gap
        todo = {(0, 1.0), (B - 1, -1.0)}
        for n in np.flatnonzero(edges[1:, 0] > edges[:-1, 2]):
            todo |= {(int(n), -1.0), (int(n) + 1, 1.0)}
        for n, sign in sorted(todo):
            col = 0 if sign > 0 else 2
            i = int(imin[n] if sign > 0 else imax[n])
            # each adjacent cell separately: the extremum may sit on a
            # crossing kink just off a grid point, including off 0 and pi
            for a, b in ((ts[i] - dt, ts[i]), (ts[i], ts[i] + dt)):
                t_opt, v_opt = _refine(p, K, n, a, b, sign)
                if sign * v_opt < sign * edges[n, col]:
                    edges[n, col], edges[n, col + 1] = v_opt, normalize_t(t_opt)
    return BandTable(ts, values, float(lam_max), K, p.m, p.degree, edges, max_jump, bound)


@dataclass
class GapReport:
    lam_min: float
    lam_max: float
    delta_merge: float
    bands: list          # [lo, hi] per band index, hi clipped to lam_max
    spectrum: list       # merged union
    gaps: list           # dicts: lo, hi, width, open_top
    unresolved: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "lam_min": self.lam_min,
            "lam_max": self.lam_max,
            "delta_merge": self.delta_merge,
            "bands": [list(b) for b in self.bands],
            "spectrum": [list(s) for s in self.spectrum],
            "gaps": self.gaps,
            "unresolved": self.unresolved,
        }


def gaps_from_bands(bands, lam_max: float, delta_merge: float | None = None) -> GapReport:
    """Union of closed band intervals and the open gaps between them below ``lam_max``."""
    delta = MERGE_RTOL * lam_max if delta_merge is None else float(delta_merge)
    kept = sorted((float(a), min(float(b), lam_max)) for a, b in bands if a <= lam_max)
    if not kept:
        return GapReport(lam_max, lam_max, delta, [], [], [])
    spectrum, unresolved = [], []
    for a, b in kept:
        if spectrum and a <= spectrum[-1][1]:
            spectrum[-1][1] = max(spectrum[-1][1], b)
        elif spectrum and a - spectrum[-1][1] < delta:
            unresolved.append({"lo": spectrum[-1][1], "hi": a, "width": a - spectrum[-1][1]})
            spectrum[-1][1] = max(spectrum[-1][1], b)
        else:
            spectrum.append([a, b])
    gaps = [{"lo": lo[1], "hi": hi[0], "width": hi[0] - lo[1], "open_top": False}
            for lo, hi in zip(spectrum, spectrum[1:])]
    top = spectrum[-1][1]
    if lam_max - top >= delta:
        gaps.append({"lo": top, "hi": lam_max, "width": lam_max - top, "open_top": True})
    return GapReport(kept[0][0], lam_max, delta, [list(b) for b in kept],
                     [list(s) for s in spectrum], gaps, unresolved)


def detect_gaps(bt: BandTable, delta_merge: float | None = None) -> GapReport:
    bands = [(row[0], row[2]) for row in bt.edges]
    return gaps_from_bands(bands, bt.lam_max, delta_merge)


def merge_reports(*reports: GapReport, delta_merge: float | None = None) -> GapReport:
    """Report for the direct sum of decoupled problems: union of all bands."""
    lam_max = min(r.lam_max for r in reports)
    if delta_merge is None:
        delta_merge = min(r.delta_merge for r in reports)
    bands = [b for r in reports for b in r.bands]
    return gaps_from_bands(bands, lam_max, delta_merge)


def band_edge_points(bt: BandTable):
    """``(value, t)`` of every band minimum and maximum."""
    return [(row[0], row[1]) for row in bt.edges] + [(row[2], row[3]) for row in bt.edges]


def gap_endpoints_with_t(bt: BandTable, report: GapReport):
    """Each finite gap endpoint paired with the quasimomentum where it is attained."""
    points = band_edge_points(bt)
    vals = np.array([v for v, _ in points])
    out = []
    for g in report.gaps:
        for side in ("lo", "hi"):
            if side == "hi" and g["open_top"]:
                continue
            i = int(np.argmin(np.abs(vals - g[side])))
            out.append((g[side], points[i][1]))
    return out


def oracle_edge_check(p: MatrixPotential, bt: BandTable, report: GapReport,
                      max_points: int | None = None, window: float = 0.05, steps: int = 1024):
    """Largest distance from gap endpoints to shooting roots at the same ``t``."""
    from .oracle import find_eigenvalues

    worst, rows = 0.0, []
    pts = gap_endpoints_with_t(bt, report)
    if max_points is not None:
        pts = pts[:max_points]
    for value, t in pts:
        roots = find_eigenvalues(p, t, (value - window, value + window), steps=steps,
                                 galerkin_K=bt.K).roots
        dist = min((abs(r - value) for r in roots), default=math.inf)
        rows.append({"value": value, "t": t, "oracle_distance": dist})
        worst = max(worst, dist)
    return worst, rows


# --- finite-gap condition on the mean matrix --------------------------------

@dataclass
class FiniteGapVerdict:
    holds: bool
    witness: tuple | None = None      # 1-based (j1, j2, j3)
    violation: dict | None = None     # first violating i-triple, 1-based
    reason: str = ""
    checked: int = 0

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "witness": list(self.witness) if self.witness else None,
            "violation": self.violation,
            "reason": self.reason,
            "triples_checked": self.checked,
        }


def _common_sum(mu, js, tol):
    # first i-triple (lexicographic) making all three sums equal, else None
    m = len(mu)
    for i in itertools.product(range(m), repeat=3):
        s = [mu[j] + mu[ii] for j, ii in zip(js, i)]
        if abs(s[0] - s[1]) <= tol and abs(s[1] - s[2]) <= tol:
            return i, s[0]
    return None


def finite_gap_condition(ms: MeanSpectrum, tol_sum: float = TOL_SUM) -> FiniteGapVerdict:
    """Search for three simple eigenvalues of C whose sum patterns never fully coincide.

    Holds iff some increasing triple of simple eigenvalues ``(j1, j2, j3)``
    admits no ``(i1, i2, i3)`` with ``mu_j1 + mu_i1 = mu_j2 + mu_i2 = mu_j3 + mu_i3``.
    """
    mu = [float(x) for x in ms.mu]
    simple = [j for j in range(len(mu)) if ms.simple[j]]
    if len(mu) < 3 or len(simple) < 3:
        return FiniteGapVerdict(False, reason="fewer than three simple eigenvalues")
    first = None
    checked = 0
    for js in itertools.combinations(simple, 3):
        checked += 1
        hit = _common_sum(mu, js, tol_sum)
        if hit is None:
            return FiniteGapVerdict(True, tuple(j + 1 for j in js), None,
                                    "witness triple has no common sum", checked)
        if first is None:
            i, s = hit
            first = {"j": [j + 1 for j in js], "i": [x + 1 for x in i], "sum": s}
    return FiniteGapVerdict(False, None, first, "every triple admits a common sum", checked)


def gap_census_demo(p: MatrixPotential, lam_max: float, K: int | None = None,
                    grid_size: int = 128, workers: int = 1, tol_sum: float = TOL_SUM,
                    bt: BandTable | None = None, report: GapReport | None = None) -> dict:
    """Gap widths against position, split at ``lam_max / 2``.

    This only observes the computed window; it cannot show finiteness of the
    gap set.  The reported ``empirical_H`` is the top end of the highest gap
    found below ``lam_max`` (``lam_min`` when there is none).
    """
    verdict = finite_gap_condition(mean_spectrum(p), tol_sum)
    if report is None:
        if bt is None:
            bt = sweep_bands(p, K if K is not None else default_K(p, lam_max),
                             grid_size, lam_max, workers)
        report = detect_gaps(bt)
    half = 0.5 * report.lam_max
    closed = [g for g in report.gaps if not g["open_top"]]
    table = [{"lo": g["lo"], "hi": g["hi"], "width": g["width"],
              "midpoint": 0.5 * (g["lo"] + g["hi"]),
              "half": "upper" if 0.5 * (g["lo"] + g["hi"]) > half else "lower"} for g in closed]
    lower = [r["width"] for r in table if r["half"] == "lower"]
    upper = [r["width"] for r in table if r["half"] == "upper"]
    largest_lower = max(lower, default=0.0)
    largest_upper = max(upper, default=0.0)
    if not upper:
        shrink = True
    else:
        shrink = bool(lower) and largest_upper < largest_lower
    return {
        "label": DEMO_LABEL,
        "condition": verdict.to_dict(),
        "lam_max": report.lam_max,
        "gaps": table,
        "lower_half_count": len(lower),
        "upper_half_count": len(upper),
        "largest_lower_width": largest_lower,
        "largest_upper_width": largest_upper,
        "upper_uniformly_smaller": shrink,
        "empirical_H": table[-1]["hi"] if table else report.lam_min,
        "empirical_H_midpoint": table[-1]["midpoint"] if table else report.lam_min,
    }
