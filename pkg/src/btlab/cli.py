"""Experiment driver: ``btl <mode> --spec file.json [--seed N] [--reps N] [--out PATH] [--threads N]``.

The experiment spec is one JSON document. Top-level flags override the matching fields.
Every CSV starts with ``#`` comment lines holding the library version and the
fully resolved configuration, followed by the header row. Floats use 17
significant digits, so identical inputs give byte-identical files.

Grain specs: ``{"type": "ellipse", "p": .., "q": .., "m": 30}``,
``{"type": "rectangle", "p": .., "q": ..}`` (semi-axes) or
``{"type": "polygon", "vertices": [[x, y], ...]}``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analytic import (
    ModelParams,
    c0_coeff,
    c1_coeff,
    density_surface_tensor_X,
    euler_curve,
    euler_density_Z,
    gamma_for_volume_fraction,
    grain_analytics,
    mean_value_window,
    surface_tensor_curve,
    surface_tensor_density_Z,
)
from .geom2d import (
    BaseGrain,
    ConvexPolygon,
    Ellipse,
    PolygonGrain,
    Rectangle,
    discretize,
    euler_characteristic,
    random_convex_polygon,
    square,
)
from .inference import (
    bootstrap_many,
    estimator_study,
    fourier_coefficients,
    reconstruct_radius,
)
from .minkowski import euler_point_tensor, mixed_V11, translative_oracle
from .sampler import SimulationConfig, replicate_rng, sample_window, simulate_batch

__all__ = ["ExperimentSpec", "ConfigError", "parse_spec", "run", "main"]

log = logging.getLogger("btlab")

MODES = ("simulate", "analytic", "estimate", "reconstruct", "oracle", "window")
FAILURE_LIMIT = 0.01
EXIT_OK, EXIT_CONFIG, EXIT_FAILURES = 0, 1, 2

SIMULATE_COLUMNS = [
    "alpha", "phi_target", "gamma", "rep_count", "phi_hat", "phi_se", "v1_hat", "v1_se",
    "chi_hat", "chi_se", "t11_hat", "t11_se", "t22_hat", "t22_se", "t12_hat", "t12_se",
    "t11_analytic", "t22_analytic", "t12_analytic", "chi_analytic",
]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    """Resolved experiment description. ``raw`` keeps the JSON document as given."""

    mode: str
    grain: BaseGrain
    alphas: list
    phis: list | None = None
    gammas: list | None = None
    L: float = 1.0
    n_reps: int = 100
    seed: int = 0
    s_list: tuple = (2,)
    n_boot: int = 2000
    analytic_grain: str = "polygon"
    out: str | None = None
    threads: int | None = None
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def sweep(self):
        """``(alpha, phi_target, gamma)`` triples; gamma follows from phi via the simulated grain's area."""
        area = grain_analytics(self.analysis_grain()).area
        out = []
        for a in self.alphas:
            if self.phis is not None:
                out.extend((a, phi, gamma_for_volume_fraction(phi, area)) for phi in self.phis)
            elif self.gammas is not None:
                out.extend((a, math.nan, g) for g in self.gammas)
        return out

    def validate(self):
        """Fail early on settings that would only break once replicates run."""
        for a, _, g in self.sweep():
            if self.mode in ("simulate", "estimate"):
                SimulationConfig(ModelParams(g, a, self.grain), self.L, self.n_reps, self.seed, self.s_list)

    def analysis_grain(self) -> BaseGrain:
        """Grain whose analytics serve as reference (the simulated polygon by default)."""
        if self.analytic_grain == "polygon" and isinstance(self.grain, Ellipse):
            return PolygonGrain(discretize(self.grain))
        return self.grain


def _alpha(v) -> float:
    if isinstance(v, str) and v.lower() in ("inf", "infinity", "∞"):
        return math.inf
    a = float(v)
    if not a >= 0:
        raise ConfigError(f"alpha must be >= 0 or 'inf', got {v!r}")
    return a


def parse_grain(d: dict) -> BaseGrain:
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError("grain must be an object with a 'type'")
    kind = d["type"]
    try:
        if kind == "ellipse":
            return Ellipse(float(d["p"]), float(d["q"]), int(d.get("m", 30)))
        if kind == "rectangle":
            return Rectangle.from_semi_axes(float(d["p"]), float(d["q"]))
        if kind == "polygon":
            return PolygonGrain(ConvexPolygon(np.array(d["vertices"], dtype=float)))
    except KeyError as exc:
        raise ConfigError(f"grain spec lacks field {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"invalid grain: {exc}") from None
    raise ConfigError(f"unknown grain type {kind!r}")


def _as_list(v, name):
    if v is None:
        return None
    lst = v if isinstance(v, list) else [v]
    if not lst:
        raise ConfigError(f"sweep '{name}' is empty")
    return lst


def _grid(v):
    if isinstance(v, dict):
        return list(np.linspace(float(v["start"]), float(v["stop"]), int(v["num"])))
    return v


def parse_spec(raw: dict, overrides: dict | None = None) -> ExperimentSpec:
    raw = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if "grain" not in raw:
        raise ConfigError("spec needs a 'grain'")
    grain = parse_grain(raw["grain"])
    alphas = [_alpha(a) for a in _as_list(raw.get("alpha", [0.0]), "alpha")]
    phis = _as_list(_grid(raw.get("phi")), "phi")
    gammas = _as_list(raw.get("gamma"), "gamma")
    if phis is None and gammas is None:
        if mode in ("simulate", "analytic", "estimate", "window", "reconstruct"):
            raise ConfigError("give a 'phi' or a 'gamma' sweep")
    if phis is not None and gammas is not None:
        raise ConfigError("give either 'phi' or 'gamma', not both")
    if phis is not None:
        phis = [float(x) for x in phis]
        if not all(0 < x < 1 for x in phis):
            raise ConfigError("volume fraction targets must lie in (0, 1)")
    if gammas is not None:
        gammas = [float(x) for x in gammas]
        if not all(x > 0 for x in gammas):
            raise ConfigError("intensities must be positive")
    n_reps = int(raw.get("n_reps", 100))
    if n_reps < 1:
        raise ConfigError("n_reps must be >= 1")
    seed = int(raw.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    analytic_grain = raw.get("analytic_grain", "polygon")
    if analytic_grain not in ("polygon", "smooth"):
        raise ConfigError("analytic_grain must be 'polygon' or 'smooth'")
    known = {"mode", "grain", "alpha", "phi", "gamma", "L", "n_reps", "seed", "s_list", "n_boot",
             "analytic_grain", "out", "threads"}
    return ExperimentSpec(
        mode=mode, grain=grain, alphas=alphas, phis=phis, gammas=gammas,
        L=float(raw.get("L", 1.0)), n_reps=n_reps, seed=seed,
        s_list=tuple(int(s) for s in raw.get("s_list", [2])),
        n_boot=int(raw.get("n_boot", 2000)), analytic_grain=analytic_grain,
        out=raw.get("out"), threads=raw.get("threads"),
        options={k: v for k, v in raw.items() if k not in known}, raw=raw,
    )


# --------------------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def _resolved(spec: ExperimentSpec) -> dict:
    d = {k: v for k, v in spec.raw.items() if k not in ("out", "threads")}
    d["mode"] = spec.mode
    d["n_reps"] = spec.n_reps
    d["seed"] = spec.seed
    d["L"] = spec.L
    d["n_boot"] = spec.n_boot
    d["analytic_grain"] = spec.analytic_grain
    d["s_list"] = list(spec.s_list)
    return d


def write_table(path: str | None, spec: ExperimentSpec, columns, rows, extra_header=()) -> str:
    buf = io.StringIO()
    buf.write(f"# btlab {__version__}\n")
    buf.write("# config: " + json.dumps(_resolved(spec), sort_keys=True) + "\n")
    for line in extra_header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _side_path(out: str | None, suffix: str) -> str | None:
    if out is None or out == "-":
        return None
    root, ext = os.path.splitext(out)
    return f"{root}_{suffix}{ext or '.csv'}"


# --------------------------------------------------------------------------- modes


def _run_batches(spec: ExperimentSpec):
    results, worst = [], 0.0
    for k, (a, phi, g) in enumerate(spec.sweep()):
        cfg = SimulationConfig(ModelParams(g, a, spec.grain), spec.L, spec.n_reps, (spec.seed + k) % 2**64,
                               tuple(sorted(set(spec.s_list) | {2})))
        batch = simulate_batch(cfg, spec.threads)
        worst = max(worst, batch.failure_rate)
        results.append((k, a, phi, g, batch))
    return results, worst


def run_simulate(spec: ExperimentSpec) -> int:
    results, worst = _run_batches(spec)
    ref = spec.analysis_grain()
    ga = grain_analytics(ref)
    rows = []
    for k, a, phi, g, batch in results:
        if not batch.summaries:
            continue
        rng = replicate_rng(spec.seed + k, 0, stream=1)
        T = batch.tensor_column(2)
        st = bootstrap_many(
            {"phi": batch.column("phi"), "v1": batch.column("v1"), "chi": batch.column("v0"), "T": T},
            spec.n_boot, rng,
        )
        prm = ModelParams(g, a, ref)
        Ta = surface_tensor_density_Z(prm, 2, ga)
        chi_a = euler_density_Z(prm, ga)
        (tm, ts) = st["T"]
        rows.append([
            a, phi, g, batch.n_ok, *st["phi"], *st["v1"], *st["chi"],
            tm[2], ts[2], tm[0], ts[0], tm[1], ts[1], Ta[2], Ta[0], Ta[1], chi_a,
        ])
    failures = [f"replicate failures in batch {k}: {sorted(b.failures)}" for k, *_, b in results if b.failures]
    write_table(spec.out, spec, SIMULATE_COLUMNS, rows, failures)
    return EXIT_FAILURES if worst > FAILURE_LIMIT else EXIT_OK


def run_analytic(spec: ExperimentSpec) -> int:
    ref = spec.analysis_grain()
    ga = grain_analytics(ref)
    cols = ["alpha", "phi", "gamma", "t11", "t22", "t12", "chi_over_gamma", "c1_11", "c1_22", "c1_12", "c0"]
    rows = []
    for a in spec.alphas:
        c1 = c1_coeff(a, ga)
        c0 = c0_coeff(a, ga)
        phis = spec.phis if spec.phis is not None else [-math.expm1(-g * ga.area) for g in spec.gammas]
        for phi in phis:
            g = gamma_for_volume_fraction(phi, ga.area)
            T = surface_tensor_curve(phi, c1)
            rows.append([a, phi, g, T[2], T[0], T[1], float(euler_curve(phi, c0)), c1[2], c1[0], c1[1], c0])
    write_table(spec.out, spec, cols, rows)
    return EXIT_OK


def run_estimate(spec: ExperimentSpec) -> int:
    results, worst = _run_batches(spec)
    grains = {"polygon": grain_analytics(PolygonGrain(discretize(spec.grain)))}
    if isinstance(spec.grain, Ellipse):
        grains["smooth"] = grain_analytics(spec.grain)
    rows, summary, hist = [], [], []
    for k, a, phi, g, batch in results:
        phis = batch.column("phi")
        T = batch.tensor_column(2)
        for label, ga in grains.items():
            rep = estimator_study(phis, T, ga, g, a, label, spec.n_boot, replicate_rng(spec.seed + k, 0, stream=1))
            for i, gh, ah in zip(rep.kept, rep.gamma_hat, rep.alpha_hat):
                s = batch.summaries[i]
                rows.append([a, g, label, s.rep, s.phi, gh, ah])
            for which, truth, mean, se in (("gamma", g, rep.gamma_mean, rep.gamma_se),
                                           ("alpha", a, rep.alpha_mean, rep.alpha_se)):
                summary.append([which, label, truth, mean, se, mean - truth, rep.sigmas(which), rep.n_divergent])
                if not len(rep.kept):
                    continue
                counts, edges = rep.histogram(which, int(spec.options.get("bins", 30)))
                hist.extend([which, label, lo, hi, c] for lo, hi, c in zip(edges[:-1], edges[1:], counts))
    write_table(spec.out, spec, ["alpha_true", "gamma_true", "analytics", "rep", "phi_hat", "gamma_hat", "alpha_hat"], rows)
    side = _side_path(spec.out, "summary")
    write_table(side, spec, ["quantity", "analytics", "truth", "boot_mean", "boot_se", "bias", "bias_sigmas", "n_divergent"], summary)
    write_table(_side_path(spec.out, "hist"), spec, ["quantity", "analytics", "bin_lo", "bin_hi", "count"], hist)
    return EXIT_FAILURES if worst > FAILURE_LIMIT else EXIT_OK


def run_reconstruct(spec: ExperimentSpec) -> int:
    N = int(spec.options.get("N", 32))
    n_grid = int(spec.options.get("n_grid", 256))
    ga = grain_analytics(spec.grain, N)
    grid = np.linspace(0.0, 2 * math.pi, n_grid, endpoint=False)
    rows, notes = [], []
    for a, phi, g in spec.sweep():
        prm = ModelParams(g, a, spec.grain)
        tensors = {s: density_surface_tensor_X(prm, s, ga) for s in range(N + 1)}
        rf = reconstruct_radius(fourier_coefficients(tensors, N), grid)
        notes.append(f"alpha={_fmt(a)} gamma={_fmt(g)} imag_residual={_fmt(rf.imag_residual)}")
        exact = g * ga.radius(grid) if (ga.smooth and math.isinf(a)) else np.full(n_grid, math.nan)
        rows.extend([a, g, N, x, v, e] for x, v, e in zip(grid, rf.values, exact))
    write_table(spec.out, spec, ["alpha", "gamma", "N", "phi", "g_reconstructed", "g_aligned_exact"], rows, notes)
    return EXIT_OK


def run_oracle(spec: ExperimentSpec) -> int:
    n_pairs = int(spec.options.get("pairs", 20))
    h_rel = float(spec.options.get("h_rel", 1e-2))
    rows = []
    for i in range(n_pairs):
        rng = replicate_rng(spec.seed, i)
        P = random_convex_polygon(rng, int(rng.integers(3, 12)))
        Q = random_convex_polygon(rng, int(rng.integers(3, 12)))
        h = h_rel * max(P.diameter(), Q.diameter())
        m = mixed_V11(P, Q)
        exact = P.area() + Q.area() + m
        est = translative_oracle(P, Q, h)
        rows.append([i, P.n, Q.n, P.area(), Q.area(), m, exact, est, abs(est - exact) / exact])
    write_table(spec.out, spec, ["pair", "n_p", "n_q", "area_p", "area_q", "mixed_v11", "translative_exact",
                                 "translative_oracle", "rel_err"], rows)
    return EXIT_OK


WINDOW_FUNCTIONALS = ((2, 0, 0), (2, 1, 0), (1, 0, 0), (1, 0, 2), (1, 1, 0), (1, 1, 2), (0, 0, 0))


def window_functional(sample, j: int, r: int, s: int):
    if j == 2:
        return sample.volume(r)
    if j == 1:
        return sample.surface(r, s)
    chi = euler_characteristic(sample.region) if sample.region.loops else 0
    return euler_point_tensor(chi, s)


def run_window(spec: ExperimentSpec) -> int:
    factor = float(spec.options.get("window_factor", 5.0))
    P = discretize(spec.grain)
    W = ConvexPolygon(square(factor * P.diameter()).vertices + factor * P.diameter() / 2)
    ga = grain_analytics(PolygonGrain(P), 2)
    rows = []
    for k, (a, phi, g) in enumerate(spec.sweep()):
        prm = ModelParams(g, a, PolygonGrain(P))
        data = {f: [] for f in WINDOW_FUNCTIONALS}
        for rep in range(spec.n_reps):
            smp = sample_window(prm, W, spec.seed + k, rep)
            for f in WINDOW_FUNCTIONALS:
                data[f].append(window_functional(smp, *f).comps)
        st = bootstrap_many({str(f): np.array(v) for f, v in data.items()}, spec.n_boot,
                            replicate_rng(spec.seed + k, 0, stream=1))
        for f in WINDOW_FUNCTIONALS:
            mean, se = st[str(f)]
            ana = mean_value_window(prm, W, *f, grain=ga).comps
            for l in range(len(mean)):
                z = abs(mean[l] - ana[l]) / se[l] if se[l] > 0 else (0.0 if mean[l] == ana[l] else math.inf)
                rows.append([a, g, *f, l, mean[l], se[l], ana[l], z])
    write_table(spec.out, spec, ["alpha", "gamma", "j", "r", "s", "component_ones", "mc_mean", "mc_se",
                                 "analytic", "z"], rows, [f"window side {factor} x grain diameter"])
    return EXIT_OK


RUNNERS = {
    "simulate": run_simulate,
    "analytic": run_analytic,
    "estimate": run_estimate,
    "reconstruct": run_reconstruct,
    "oracle": run_oracle,
    "window": run_window,
}


def run(spec: ExperimentSpec) -> int:
    return RUNNERS[spec.mode](spec)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="btl", description=__doc__.splitlines()[0])
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--spec", required=True, help="JSON experiment description")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--reps", type=int, dest="n_reps")
    ap.add_argument("--out", help="output CSV (default: stdout)")
    ap.add_argument("--threads", type=int, help="worker processes (fallback: BTL_THREADS)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.spec) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("spec must be a JSON object")
        if raw.get("mode", args.mode) != args.mode:
            log.info("command-line mode %r overrides spec mode %r", args.mode, raw.get("mode"))
        spec = parse_spec(raw, {"mode": args.mode, "seed": args.seed, "n_reps": args.n_reps,
                                "out": args.out, "threads": args.threads})
        spec.validate()
    except (OSError, json.JSONDecodeError, ConfigError, ValueError, TypeError) as exc:
        print(f"btl: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
