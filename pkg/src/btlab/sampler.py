"""Random realizations of the Boolean model on a flat torus, and batch measurement.

Every replicate owns a Philox stream keyed by ``(seed, rep_index)``, so results
do not depend on how replicates are scheduled across workers.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import ModelParams
from .geom2d import (
    ConvexPolygon,
    PolyconvexRegion,
    TorusWindow,
    UnionError,
    clip_union,
    discretize,
    rotate,
    union,
)
from .minkowski import measure, surface_tensor_polygon, volume_moment_tensor
from .tensor import SymTensor2

__all__ = [
    "SimulationConfig",
    "RealizationSummary",
    "BatchResult",
    "replicate_rng",
    "sample_orientation",
    "sample_grains",
    "sample_realization",
    "summarize",
    "simulate_batch",
    "WindowSample",
    "sample_window",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationConfig:
    """Torus simulation setup. ``L`` is the side of the periodic window."""

    params: ModelParams
    L: float = 1.0
    n_reps: int = 100
    seed: int = 0
    s_list: tuple = (2,)

    def __post_init__(self):
        if self.n_reps < 1:
            raise ValueError(f"need at least one replicate, got {self.n_reps}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "s_list", tuple(int(s) for s in self.s_list))
        R = discretize(self.params.grain).circumradius()
        if not 2.0 * R < self.L:
            raise ValueError(f"window side L={self.L} must exceed the grain diameter bound 2R={2 * R}")

    @property
    def window(self) -> TorusWindow:
        return TorusWindow(self.L)

    @property
    def expected_count(self) -> float:
        return self.params.gamma * self.L * self.L


@dataclass(frozen=True)
class RealizationSummary:
    """Measured densities (per unit area) of one replicate."""

    rep: int
    n_grains: int
    phi: float
    v1: float
    v0: float
    tensors: dict = field(default_factory=dict)

    def tensor(self, s: int) -> SymTensor2:
        return self.tensors[s]


@dataclass
class BatchResult:
    """Successful summaries in replicate order plus failed replicate indices."""

    summaries: list
    failures: dict

    @property
    def n_ok(self) -> int:
        return len(self.summaries)

    @property
    def failure_rate(self) -> float:
        total = len(self.summaries) + len(self.failures)
        return len(self.failures) / total if total else 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.summaries], dtype=float)

    def tensor_column(self, s: int) -> np.ndarray:
        return np.array([r.tensors[s].comps for r in self.summaries])


def replicate_rng(seed: int, rep: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for replicate ``rep``; ``stream`` separates auxiliary uses."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(rep), int(stream)])))


def sample_orientation(alpha: float, rng: np.random.Generator, size=None):
    """Angles in ``[0, 2 pi)`` with density ``c(alpha) |cos theta|^alpha``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if math.isinf(alpha):
        return 0.0 if size is None else np.zeros(size)
    # |cos| restricted to [0, pi/2] has sin^2 beta ~ Beta(1/2, (alpha+1)/2)
    b = rng.beta(0.5, (alpha + 1.0) / 2.0, size=size)
    beta = np.arcsin(np.sqrt(b))
    quadrant = rng.integers(0, 4, size=size)
    theta = np.choose(quadrant, [beta, np.pi - beta, np.pi + beta, 2 * np.pi - beta])
    theta = np.where(theta >= 2 * np.pi, theta - 2 * np.pi, theta)
    return float(theta) if size is None else theta


def _draw_grains(params: ModelParams, lo: np.ndarray, side: np.ndarray, rng: np.random.Generator):
    n = int(rng.poisson(params.gamma * side[0] * side[1]))
    centers = lo + rng.random((n, 2)) * side
    thetas = sample_orientation(params.alpha, rng, size=n)
    base = discretize(params.grain)
    return [(rotate(base, t), c) for t, c in zip(thetas, centers)]


def sample_grains(cfg: SimulationConfig, rep: int):
    """Rotated grain polygons and their centres in ``[0, L)^2`` for replicate ``rep``."""
    rng = replicate_rng(cfg.seed, rep)
    return _draw_grains(cfg.params, np.zeros(2), np.array([cfg.L, cfg.L]), rng)


def sample_realization(cfg: SimulationConfig, rep: int) -> PolyconvexRegion:
    grains = sample_grains(cfg, rep)
    try:
        return union(grains, cfg.window)
    except UnionError as exc:
        raise UnionError(f"seed={cfg.seed} rep={rep}: {exc}") from exc


def summarize(cfg: SimulationConfig, rep: int) -> RealizationSummary:
    grains = sample_grains(cfg, rep)
    try:
        region = union(grains, cfg.window)
        fs = measure(region, cfg.s_list)
    except UnionError as exc:
        raise UnionError(f"seed={cfg.seed} rep={rep}: {exc}") from exc
    return RealizationSummary(rep, len(grains), fs.area, fs.v1, fs.v0, fs.tensors)


def _summarize_many(cfg: SimulationConfig, reps):
    out = []
    for rep in reps:
        try:
            out.append(summarize(cfg, rep))
        except Exception as exc:  # recorded, the batch carries on
            out.append((rep, f"{type(exc).__name__}: {exc}"))
    return out


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("BTL_THREADS", "1") or 1)
    return max(1, int(threads))


def simulate_batch(cfg: SimulationConfig, threads: int | None = None) -> BatchResult:
    """Run all replicates. Output order and values do not depend on ``threads``."""
    threads = _resolve_threads(threads)
    reps = list(range(cfg.n_reps))
    if threads == 1 or cfg.n_reps == 1:
        results = _summarize_many(cfg, reps)
    else:
        chunks = [reps[i::threads] for i in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_summarize_many, [cfg] * len(chunks), chunks))
        results = sorted((x for part in parts for x in part), key=lambda x: x.rep if isinstance(x, RealizationSummary) else x[0])
    summaries, failures = [], {}
    for x in results:
        if isinstance(x, RealizationSummary):
            summaries.append(x)
        else:
            failures[x[0]] = x[1]
            log.warning("replicate %d failed: %s", x[0], x[1])
    return BatchResult(summaries, failures)


# --------------------------------------------------------------------------- fixed windows


@dataclass(frozen=True)
class WindowSample:
    """Functionals of ``Z cap W`` for one planar replicate."""

    rep: int
    region: PolyconvexRegion

    def volume(self, r: int = 0) -> SymTensor2:
        return volume_moment_tensor(self.region, r)

    def surface(self, r: int = 0, s: int = 0) -> SymTensor2:
        return surface_tensor_polygon(self.region, r, s)


def sample_window(params: ModelParams, W: ConvexPolygon, seed: int, rep: int) -> WindowSample:
    """Planar Boolean model restricted to the convex window ``W``.

    Germs are drawn on the bounding box of ``W`` grown by the grain
    circumradius, which catches every grain that can hit ``W``.
    """
    R = discretize(params.grain).circumradius()
    lo = W.vertices.min(axis=0) - R
    side = W.vertices.max(axis=0) + R - lo
    grains = _draw_grains(params, lo, side, replicate_rng(seed, rep))
    return WindowSample(rep, clip_union(grains, W))
