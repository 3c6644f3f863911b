"""Estimation of intensity and orientation parameter, bootstrap errors, and
Fourier reconstruction of the mean curvature-radius function."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .analytic import GrainAnalytics
from .tensor import SymTensor2, omega

__all__ = [
    "IsotropicGrainError",
    "AlphaDivergenceError",
    "estimate_gamma",
    "estimate_alpha",
    "bootstrap",
    "bootstrap_many",
    "EstimatorReport",
    "estimator_study",
    "x_tensors_from_z",
    "FourierCoefficients",
    "fourier_coefficients",
    "RadiusFunction",
    "reconstruct_radius",
]

ISOTROPY_TOL = 1e-12
DIVERGENCE_TOL = 1e-10


class IsotropicGrainError(ValueError):
    """The base grain has equal (1,1) and (2,2) surface tensor components."""


class AlphaDivergenceError(ArithmeticError):
    """The orientation estimate diverges (aligned-grain regime)."""


def estimate_gamma(phi_hat: float, area: float) -> float:
    """``-ln(1 - phi_hat) / V_2(E)``."""
    if not area > 0:
        raise ValueError(f"grain area must be positive, got {area}")
    if not phi_hat < 1:
        raise ValueError(f"volume fraction {phi_hat} >= 1: intensity estimate diverges")
    if phi_hat < 0:
        raise ValueError(f"volume fraction must be non-negative, got {phi_hat}")
    return -math.log1p(-phi_hat) / area


def _alpha_from(comp_z: float, comp_e: float, trace_e: float, gamma: float, boost: float) -> float:
    a = boost * comp_z
    den = a - gamma * comp_e
    if abs(den) <= DIVERGENCE_TOL * gamma * trace_e:
        raise AlphaDivergenceError("denominator vanishes: orientation estimate diverges (alpha -> inf)")
    return (gamma * trace_e - 2.0 * a) / den


def estimate_alpha(phi_tensor: SymTensor2, phi_hat: float, grain: GrainAnalytics,
                   symmetrized: bool = False) -> float:
    """Orientation parameter from the rank-2 surface tensor density of Z.

    The default uses the (1,1) component exactly as printed. ``symmetrized``
    (not from the source) averages it with the analogous (2,2) estimate.
    Values below -1 can occur for noisy input and are returned unchanged.
    """
    if phi_tensor.rank != 2:
        raise ValueError("estimate_alpha needs a rank-2 tensor")
    e22, _, e11 = grain.tensor(2).comps
    trace_e = e11 + e22
    if abs(e11 - e22) <= ISOTROPY_TOL * trace_e:
        raise IsotropicGrainError("base grain is isotropic for Phi_1^{0,2}; alpha is not identifiable")
    g = estimate_gamma(phi_hat, grain.area)
    boost = math.exp(g * grain.area)
    z22, _, z11 = phi_tensor.comps
    a11 = _alpha_from(z11, e11, trace_e, g, boost)
    if not symmetrized:
        return a11
    return 0.5 * (a11 + _alpha_from(z22, e22, trace_e, g, boost))


# --------------------------------------------------------------------------- bootstrap


def bootstrap_many(columns: dict, n_boot: int = 10000, rng: np.random.Generator | None = None):
    """Bootstrap means of several replicate-level statistics with shared resample indices.

    ``columns`` maps names to arrays whose first axis is the replicate. Returns
    ``{name: (mean, standard_error)}`` using the standard deviation of the
    resampled means (componentwise for multi-column statistics).
    """
    if n_boot < 100:
        raise ValueError("n_boot must be at least 100")
    arrays = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
    sizes = {a.shape[0] for a in arrays.values()}
    if len(sizes) != 1 or 0 in sizes:
        raise ValueError("all statistics need the same non-zero number of replicates")
    n = sizes.pop()
    rng = rng if rng is not None else np.random.default_rng()
    idx = rng.integers(0, n, size=(n_boot, n))
    out = {}
    for k, a in arrays.items():
        means = a[idx].mean(axis=1)
        out[k] = (means.mean(axis=0), means.std(axis=0, ddof=1))
    return out


def bootstrap(values, n_boot: int = 10000, rng: np.random.Generator | None = None):
    """Bootstrap mean and standard error of a list of reals or of ``SymTensor2``."""
    values = list(values)
    if not values:
        raise ValueError("bootstrap needs at least one value")
    if isinstance(values[0], SymTensor2):
        mean, se = bootstrap_many({"x": np.array([v.comps for v in values])}, n_boot, rng)["x"]
        return SymTensor2(mean), SymTensor2(se)
    mean, se = bootstrap_many({"x": np.array(values)}, n_boot, rng)["x"]
    return float(mean), float(se)


@dataclass
class EstimatorReport:
    """Per-replicate estimates and their bootstrap summaries.

    ``grain_label`` records which single-grain analytics were plugged in
    (for instance the simulated polygon or the smooth shape it approximates).
    """

    gamma_true: float
    alpha_true: float
    grain_label: str
    gamma_hat: np.ndarray
    alpha_hat: np.ndarray
    gamma_mean: float
    gamma_se: float
    alpha_mean: float
    alpha_se: float
    n_divergent: int = 0
    kept: np.ndarray | None = None

    @property
    def gamma_bias(self) -> float:
        return self.gamma_mean - self.gamma_true

    @property
    def alpha_bias(self) -> float:
        return self.alpha_mean - self.alpha_true

    def sigmas(self, which: str) -> float:
        """Bias in units of the bootstrap standard error."""
        bias, se = (self.gamma_bias, self.gamma_se) if which == "gamma" else (self.alpha_bias, self.alpha_se)
        return abs(bias) / se if se > 0 else (0.0 if bias == 0 else math.inf)

    def histogram(self, which: str, bins: int = 30):
        data = self.gamma_hat if which == "gamma" else self.alpha_hat
        return np.histogram(data, bins=bins)


def estimator_study(phis, tensors, grain: GrainAnalytics, gamma_true: float, alpha_true: float,
                    grain_label: str = "", n_boot: int = 10000, rng: np.random.Generator | None = None,
                    symmetrized: bool = False) -> EstimatorReport:
    """Estimate (gamma, alpha) per replicate and bootstrap the means with shared indices.

    Replicates whose orientation estimate diverges are dropped and counted.
    """
    g_hat, a_hat, kept = [], [], []
    for i, (phi, T) in enumerate(zip(phis, tensors)):
        T = T if isinstance(T, SymTensor2) else SymTensor2(T)
        try:
            a = estimate_alpha(T, phi, grain, symmetrized)
        except AlphaDivergenceError:
            continue
        g_hat.append(estimate_gamma(phi, grain.area))
        a_hat.append(a)
        kept.append(i)
    g_hat, a_hat = np.array(g_hat), np.array(a_hat)
    bad = len(phis) - len(kept)
    if not kept:
        nan = math.nan
        return EstimatorReport(gamma_true, alpha_true, grain_label, g_hat, a_hat, nan, nan, nan, nan, bad,
                               np.array(kept, dtype=int))
    res = bootstrap_many({"gamma": g_hat, "alpha": a_hat}, n_boot, rng)
    return EstimatorReport(
        gamma_true, alpha_true, grain_label, g_hat, a_hat,
        float(res["gamma"][0]), float(res["gamma"][1]),
        float(res["alpha"][0]), float(res["alpha"][1]), bad, np.array(kept, dtype=int),
    )


# --------------------------------------------------------------------------- Fourier reconstruction


def x_tensors_from_z(tensors_z: dict, phi: float) -> dict:
    """Grain-process densities from union-set densities, ``Phi(X) = Phi(Z) / (1 - phi)``."""
    if not 0 <= phi < 1:
        raise ValueError("volume fraction must lie in [0, 1)")
    return {s: T / (1.0 - phi) for s, T in tensors_z.items()}


@dataclass(frozen=True)
class FourierCoefficients:
    """``values[k]`` is the coefficient of order ``k - N``; ``se`` holds (real, imag) errors."""

    N: int
    values: np.ndarray
    se: np.ndarray | None = None

    def __getitem__(self, s: int) -> complex:
        if abs(s) > self.N:
            raise KeyError(f"order {s} beyond truncation {self.N}")
        return complex(self.values[s + self.N])

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)


def _weights(s: int) -> np.ndarray:
    """Complex weights turning ``(Phi_X)_j`` into the order-s coefficient."""
    scale = math.factorial(s) * omega(1 + s) / (2 * math.pi)
    return np.array([comb(s, j, exact=True) * (-1j) ** (s - j) * scale for j in range(s + 1)])


def fourier_coefficients(tensors: dict, N: int, tensor_se: dict | None = None) -> FourierCoefficients:
    """Fourier coefficients of ``g(phi) = gamma E r(Z_0, u(phi))`` up to order ``N``.

    ``tensors[s]`` must hold the grain-process density ``Phi_1^{0,s}(X)`` for
    ``s = 0..N``. Optional componentwise standard errors (``tensor_se``) are
    propagated linearly, treating components as uncorrelated.
    """
    if N < 0:
        raise ValueError("truncation order must be non-negative")
    vals = np.zeros(2 * N + 1, dtype=complex)
    se = np.zeros((2 * N + 1, 2)) if tensor_se is not None else None
    for s in range(N + 1):
        if s not in tensors:
            raise KeyError(f"missing surface tensor of rank {s}")
        T = tensors[s]
        if T.rank != s:
            raise ValueError(f"tensor for s={s} has rank {T.rank}")
        w = _weights(s)
        c = complex(w @ T.comps)
        vals[N + s] = c
        # negative order: conjugate weights, i^(s-j)
        vals[N - s] = complex(np.conj(w) @ T.comps)
        if se is not None:
            e = tensor_se[s].comps if isinstance(tensor_se[s], SymTensor2) else np.asarray(tensor_se[s])
            pair = [math.sqrt(float(np.sum((w.real * e) ** 2))), math.sqrt(float(np.sum((w.imag * e) ** 2)))]
            se[N + s] = pair
            se[N - s] = pair
    return FourierCoefficients(N, vals, se)


@dataclass(frozen=True)
class RadiusFunction:
    """Partial Fourier sum of ``g`` on a grid; ``imag_residual`` is the largest discarded imaginary part."""

    grid: np.ndarray
    values: np.ndarray
    N: int
    imag_residual: float

    def __call__(self, phi):
        return np.interp(np.mod(phi, 2 * math.pi), self.grid, self.values, period=2 * math.pi)


def reconstruct_radius(coeffs: FourierCoefficients, grid=None) -> RadiusFunction:
    if grid is None:
        grid = np.linspace(0.0, 2 * math.pi, 512, endpoint=False)
    grid = np.asarray(grid, dtype=float)
    series = np.exp(1j * np.outer(grid, coeffs.orders)) @ coeffs.values
    return RadiusFunction(grid, series.real, coeffs.N, float(np.abs(series.imag).max(initial=0.0)))
