"""Command-line front end: ``hillbloch {spectrum,verify,condition,oracle-check}``.

Settings come from three layers: built-in defaults, an optional JSON config
file (``--config``), then explicit flags.  Exit status is 0 when a run
completes (FAIL verdicts included), 1 for usage or configuration errors and 2
when a computation raises.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from .errors import ConfigError, HillBlochError
from .galerkin import bloch_eigenvalues, normalize_t
from .oracle import find_eigenvalues
from .potential import (MatrixPotential, load_potential, mean_spectrum, potential_from_dict,
                        random_trig_potential)
from .spectrum import (cutoff_limit, default_K, detect_gaps, finite_gap_condition,
                       gap_census_demo, oracle_edge_check, sweep_bands)

BUILTINS = ("free", "mathieu", "constant", "mu013", "mu012", "seeded-m2", "seeded-m2-s2",
            "demo-d-holds")


def builtin_potential(name: str) -> MatrixPotential:
    if name not in BUILTINS:
        raise ConfigError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
    text = resources.files("hillbloch").joinpath("data", f"{name}.json").read_text()
    return potential_from_dict(json.loads(text), name=name)


def resolve_potential(source: str, seed: int) -> MatrixPotential:
    """Builtin name, ``random:m:d`` (uses ``seed``) or a JSON file path."""
    if source.startswith("random:"):
        try:
            _, m, d = source.split(":")
            m, d = int(m), int(d)
        except ValueError:
            raise ConfigError(f"random source must be random:m:d, got {source!r}") from None
        if m < 1 or d < 0:
            raise ConfigError("random source needs m >= 1 and d >= 0")
        return random_trig_potential(m, d, seed=seed, name=source)
    if source in BUILTINS:
        return builtin_potential(source)
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"potential {source!r} is neither a builtin nor a file")
    return load_potential(path)


@dataclass
class RunConfig:
    potential: str = "mathieu"
    K: int | None = None
    grid_size: int = 128
    lam_max: float | None = None
    k_min: int = 8
    k_max: int = 64
    t: float | None = None
    c8: float | None = None
    n0: int = asy.DEFAULT_N0
    slope_threshold: float = asy.SLOPE_THRESHOLD
    pairs: int = 50
    pair_k_max: int = 24
    tol_sum: float = 1e-9
    delta_merge: float | None = None
    oracle_count: int = 5
    oracle_steps: int = 1024
    oracle_edges: int = 4
    out: str = "out"
    workers: int = 1
    seed: int = 1

    def validate(self) -> "RunConfig":
        positive = ["grid_size", "k_min", "k_max", "pairs", "pair_k_max", "tol_sum",
                    "oracle_count", "oracle_steps", "workers", "n0"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("K", "lam_max", "c8", "delta_merge"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.oracle_edges < 0:
            raise ConfigError("oracle_edges must be nonnegative")
        if self.k_min <= 2:
            raise ConfigError("k-range must satisfy |k| > 2: the resonance sets are undefined for |k| <= 2")
        if self.k_max < self.k_min:
            raise ConfigError("k_max must be >= k_min")
        if self.pair_k_max < self.k_min:
            raise ConfigError("pair_k_max must be >= k_min")
        if self.k_max - self.k_min + 1 < 8:
            raise ConfigError("the k-range needs at least 8 values for the decay fit")
        if self.grid_size < 64 or self.grid_size % 4:
            raise ConfigError("grid_size must be a multiple of 4 and at least 64")
        if self.t is not None and not math.isfinite(self.t):
            raise ConfigError("t must be finite")
        return self


def _field_types():
    return {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, value):
    kind = _field_types()[name]
    if value is None:
        return None
    try:
        if "int" in kind:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if "float" in kind:
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r}") from None
    return str(value)


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    known = _field_types()
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return {k: _coerce(k, v) for k, v in data.items()}


def build_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = _coerce(f.name, v)
    return RunConfig(**values).validate()


# --- output helpers ---------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def write_bands_csv(path: Path, bt) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"lambda_{n + 1}" for n in range(bt.n_bands)])
        for t, row in zip(bt.ts, bt.values):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def band_svg(bt, report, width: int = 640, height: int = 480) -> str:
    """Band diagram as SVG 1.1: one polyline per band, gaps as shaded rectangles."""
    pad = 40
    t0, t1 = -math.pi / 2, 1.5 * math.pi
    lo = min(report.lam_min, 0.0) if report.bands else 0.0
    hi = bt.lam_max
    span = hi - lo if hi > lo else 1.0

    def sx(t):
        return pad + (t - t0) / (t1 - t0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (min(v, hi) - lo) / span * (height - 2 * pad)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black"/>',
    ]
    for g in report.gaps:
        y_top, y_bot = sy(g["hi"]), sy(g["lo"])
        out.append(f'<rect class="gap" x="{pad}" y="{y_top:.2f}" width="{width - 2 * pad}" '
                   f'height="{max(y_bot - y_top, 0.5):.2f}" fill="#f4c7c3" stroke="none"/>')
    ts = list(bt.ts) + [t1]
    for n in range(bt.n_bands):
        col = list(bt.values[:, n]) + [bt.values[0, n]]
        pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(ts, col))
        out.append(f'<polyline class="band" points="{pts}" fill="none" stroke="#1f4e79" '
                   'stroke-width="1"/>')
    out.append(f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" '
               'font-size="12">t</text>')
    out.append(f'<text x="12" y="{height / 2:.0f}" font-size="12">lambda</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --- commands ---------------------------------------------------------------

def _outdir(cfg):
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_spectrum(cfg: RunConfig) -> dict:
    p = resolve_potential(cfg.potential, cfg.seed)
    lam_max = cfg.lam_max if cfg.lam_max is not None else (2 * math.pi * 10) ** 2
    K = cfg.K if cfg.K is not None else default_K(p, lam_max)
    if lam_max > cutoff_limit(K, p.degree):
        raise ConfigError(f"lam_max={lam_max:g} needs K >= "
                          f"{int(math.ceil(math.sqrt(lam_max) / (2 * math.pi))) + p.degree + 2}")
    bt = sweep_bands(p, K, cfg.grid_size, lam_max, cfg.workers)
    report = detect_gaps(bt, cfg.delta_merge)
    census = gap_census_demo(p, lam_max, tol_sum=cfg.tol_sum, bt=bt, report=report)
    edge_worst, edge_rows = None, []
    if cfg.oracle_edges and report.gaps:
        edge_worst, edge_rows = oracle_edge_check(p, bt, report, max_points=cfg.oracle_edges,
                                                  steps=cfg.oracle_steps)
    out = _outdir(cfg)
    write_bands_csv(out / "bands.csv", bt)
    data = {
        "potential": p.name, "m": p.m, "degree": p.degree, "K": K,
        "grid_size": cfg.grid_size,
        "continuity": {"max_jump": bt.max_jump, "bound": bt.jump_bound},
        **report.to_dict(),
        "oracle_edge_check": {"max_distance": edge_worst, "points": edge_rows},
        "census": census,
    }
    write_json(out / "gaps.json", data)
    (out / "bands.svg").write_text(band_svg(bt, report))
    return data


def cmd_verify(cfg: RunConfig) -> dict:
    p = resolve_potential(cfg.potential, cfg.seed)
    ms = mean_spectrum(p)
    ks = list(range(cfg.k_min, cfg.k_max + 1))
    K = cfg.K if cfg.K is not None else 4 * cfg.k_max + p.degree
    if K - p.degree - 2 < cfg.k_max:
        raise ConfigError(f"K={K} contaminates labels up to k={cfg.k_max}")
    t = normalize_t(cfg.t if cfg.t is not None else math.pi / 2)
    suite = asy.residual_suite(p, t, ks, K, ms, cfg.slope_threshold)
    calib_ks = range(cfg.k_min, min(cfg.k_min + 8, cfg.pair_k_max) + 1)
    calib_ts = [0.4, 1.1, 2.3, 3.7]
    c8 = cfg.c8 if cfg.c8 is not None else asy.calibrate_c8(p, calib_ks, calib_ts, ms=ms)
    report = {"potential": p.name, "m": p.m, "degree": p.degree,
              "mu": ms.mu.tolist(), "c8": c8, "c8_calibrated": cfg.c8 is None,
              "decay": suite}
    if all(ms.simple):
        pairs = asy.sample_pairs(p, ms, (cfg.k_min, cfg.pair_k_max), cfg.pairs, cfg.seed, c8)
        report["concentration"] = asy.concentration_suite(p, pairs, c8, ms=ms)
    else:
        report["concentration"] = {"status": "SKIPPED", "reason": "C has a repeated eigenvalue"}
    checks = {"decay": suite["status"], "concentration": report["concentration"]["status"]}
    report["checks"] = checks
    write_json(_outdir(cfg) / "verify.json", report)
    return report


def cmd_condition(cfg: RunConfig) -> dict:
    p = resolve_potential(cfg.potential, cfg.seed)
    ms = mean_spectrum(p)
    verdict = finite_gap_condition(ms, cfg.tol_sum)
    data = {"potential": p.name, "m": p.m, "mu": ms.mu.tolist(),
            "simple": [bool(s) for s in ms.simple], **verdict.to_dict()}
    write_json(_outdir(cfg) / "condition.json", data)
    return data


def cmd_oracle_check(cfg: RunConfig) -> dict:
    p = resolve_potential(cfg.potential, cfg.seed)
    K = cfg.K if cfg.K is not None else 64
    t = normalize_t(cfg.t if cfg.t is not None else 1.0)
    ev = bloch_eigenvalues(p, t, K)
    n = cfg.oracle_count
    lo = ev[0] - 1.0
    hi = 0.5 * (ev[n - 1] + ev[n])
    roots = find_eigenvalues(p, t, (lo, hi), steps=cfg.oracle_steps, galerkin_K=K)
    flat = roots.flat()[:n]
    diffs = [abs(a - b) for a, b in zip(ev[:n], flat)]
    worst = max(diffs) if len(flat) == n else math.inf
    data = {"potential": p.name, "t": t, "K": K,
            "galerkin": ev[:n].tolist(), "oracle": flat, "multiplicities": roots.multiplicities,
            "max_difference": worst, "tolerance": 1e-6,
            "status": "PASS" if worst <= 1e-6 else "FAIL"}
    write_json(_outdir(cfg) / "oracle_check.json", data)
    return data


COMMANDS = {"spectrum": cmd_spectrum, "verify": cmd_verify, "condition": cmd_condition,
            "oracle-check": cmd_oracle_check}


SUMMARY = {
    "spectrum": lambda d: f"{len(d['gaps'])} gaps below {d['lam_max']:g}",
    "verify": lambda d: ", ".join(f"{k} {v}" for k, v in d["checks"].items()),
    "condition": lambda d: f"holds={d['holds']} ({d['reason']})",
    "oracle-check": lambda d: f"{d['status']}, max difference {d['max_difference']:.2e}",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hillbloch", description="Bloch spectra of matrix Hill operators.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with RunConfig fields")
        sp.add_argument("--potential", help=f"builtin ({', '.join(BUILTINS)}), random:m:d, or JSON path")
        sp.add_argument("--K", type=int)
        sp.add_argument("--grid-size", dest="grid_size", type=int)
        sp.add_argument("--lam-max", dest="lam_max", type=float)
        sp.add_argument("--k-min", dest="k_min", type=int)
        sp.add_argument("--k-max", dest="k_max", type=int)
        sp.add_argument("--t", type=float)
        sp.add_argument("--c8", type=float)
        sp.add_argument("--n0", type=int)
        sp.add_argument("--slope-threshold", dest="slope_threshold", type=float)
        sp.add_argument("--pairs", type=int)
        sp.add_argument("--pair-k-max", dest="pair_k_max", type=int)
        sp.add_argument("--tol-sum", dest="tol_sum", type=float)
        sp.add_argument("--delta-merge", dest="delta_merge", type=float)
        sp.add_argument("--oracle-count", dest="oracle_count", type=int)
        sp.add_argument("--oracle-steps", dest="oracle_steps", type=int)
        sp.add_argument("--oracle-edges", dest="oracle_edges", type=int)
        sp.add_argument("--out")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seed", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"hillbloch: config error: {exc}", file=sys.stderr)
        return 1
    try:
        data = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"hillbloch: config error: {exc}", file=sys.stderr)
        return 1
    except (HillBlochError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"hillbloch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"{args.command}: {SUMMARY[args.command](data)}; results in {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
