"""Closed-form and quadrature densities for the planar Boolean model Z_{alpha,gamma,E}.

Grains are copies of a base grain ``E`` rotated by an angle with density
``f_alpha(theta) = c(alpha) |cos theta|^alpha`` (``alpha = inf`` means no
rotation). Quantities of the particle process carry an ``_X`` suffix, those of
the union set a ``_Z`` suffix.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import comb, gammaln

from .geom2d import (
    BaseGrain,
    ConvexPolygon,
    Ellipse,
    Rectangle,
    discretize,
    rotate,
)
from .minkowski import (
    euler_point_tensor,
    mixed_V11,
    surface_tensor_polygon,
    volume_moment_tensor,
)
from .tensor import SymTensor2, omega, sym_product

__all__ = [
    "ModelParams",
    "GrainAnalytics",
    "QuadratureWarning",
    "normalization_c",
    "orientation_density",
    "rotation_moment",
    "grain_analytics",
    "ellipse_radius",
    "density_surface_tensor_X",
    "volume_fraction",
    "gamma_for_volume_fraction",
    "surface_tensor_density_Z",
    "c1_coeff",
    "surface_tensor_curve",
    "relative_rotation_density",
    "mixed_V11_rotated",
    "mixed_density_V11_X",
    "mixed_density_V11_WX",
    "euler_density_Z",
    "c0_coeff",
    "euler_curve",
    "intrinsic_volume_densities_Z",
    "isotropic_constant",
    "mean_value_window",
    "papaya_normalization",
    "from_papaya_normalization",
    "anisotropy_ratio",
    "extract_mixed_from_dilations",
]

GRAIN_RTOL = 1e-10
ANGULAR_RTOL = 1e-6


class QuadratureWarning(RuntimeWarning):
    pass


def _quad(f, a, b, points=None, epsrel=ANGULAR_RTOL, epsabs=0.0, limit=400):
    pts = None
    if points is not None:
        pts = sorted({float(p) for p in points if a < p < b})
    val, err = integrate.quad(f, a, b, points=pts or None, epsrel=epsrel, epsabs=epsabs, limit=limit)
    if err > 10 * max(epsabs, epsrel * abs(val)) and err > 1e-300:
        warnings.warn(
            QuadratureWarning(f"quadrature on [{a}, {b}] reached only abs err {err:.3g} (value {val:.6g})"),
            stacklevel=3,
        )
    return val


@dataclass(frozen=True)
class ModelParams:
    """Intensity ``gamma``, orientation parameter ``alpha`` (``math.inf`` = aligned) and base grain."""

    gamma: float
    alpha: float
    grain: BaseGrain

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"intensity must be positive, got {self.gamma}")
        if not (self.alpha >= 0):
            raise ValueError(f"orientation parameter must be >= 0 or inf, got {self.alpha}")

    @property
    def aligned(self) -> bool:
        return math.isinf(self.alpha)

    def with_gamma(self, gamma: float) -> "ModelParams":
        return ModelParams(gamma, self.alpha, self.grain)


# --------------------------------------------------------------------------- orientation law


def normalization_c(alpha: float) -> float:
    """``c(alpha) = Gamma(1 + alpha/2) / (2 sqrt(pi) Gamma((alpha + 1)/2))``."""
    if math.isinf(alpha):
        raise ValueError("c(alpha) is undefined for alpha = inf (the law is a point mass)")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return math.exp(gammaln(1 + alpha / 2) - gammaln((alpha + 1) / 2)) / (2 * math.sqrt(math.pi))


def orientation_density(theta, alpha: float):
    return normalization_c(alpha) * np.abs(np.cos(theta)) ** alpha


def rotation_moment(s1: int, s2: int, s3: int, s4: int, alpha: float) -> float:
    """``E[R11^s1 R12^s2 R21^s3 R22^s4]`` for the random rotation ``R = R(theta)``."""
    if math.isinf(alpha):
        return 1.0 if s2 == 0 and s3 == 0 else 0.0
    a, b = s1 + s4, s2 + s3
    if a % 2 or b % 2:
        return 0.0
    s = a + b
    num = math.prod(2 * m - 1 for m in range(1, b // 2 + 1))
    num *= math.prod(alpha + 2 * m - 1 for m in range(1, a // 2 + 1))
    den = math.prod(alpha + 2 * m for m in range(1, s // 2 + 1))
    return (-1) ** s2 * num / den


# --------------------------------------------------------------------------- grains


def ellipse_radius(p: float, q: float, u1, u2):
    """Curvature radius of the ellipse at the boundary point with outer normal ``(u1, u2)``."""
    return p * p * q * q / (p * p * u1 * u1 + q * q * u2 * u2) ** 1.5


@dataclass(frozen=True, eq=False)
class GrainAnalytics:
    """Single-grain quantities of a base grain.

    ``tensors[s]`` is ``Phi_1^{0,s}(E)``; ``radius(phi)`` is the curvature radius
    at outer normal ``u(phi)`` for smooth grains, ``polygon`` the exact shape
    for polygonal ones.
    """

    grain: BaseGrain
    area: float
    v1: float
    tensors: dict
    radius: Callable | None = None
    polygon: ConvexPolygon | None = None

    def tensor(self, s: int) -> SymTensor2:
        if s not in self.tensors:
            return grain_analytics(self.grain, s).tensors[s]
        return self.tensors[s]

    @property
    def smooth(self) -> bool:
        return self.radius is not None

    def __repr__(self):
        return f"GrainAnalytics({self.grain!r}, area={self.area:.6g}, v1={self.v1:.6g})"


def grain_analytics(E: BaseGrain, s_max: int = 2) -> GrainAnalytics:
    """Area, half perimeter and surface tensors up to rank ``s_max`` of a base grain.

    Ellipses are treated as true ellipses (boundary quadrature); use
    ``grain_analytics(PolygonGrain(discretize(E)))`` for the simulated polygon.
    """
    return _grain_analytics(E, max(int(s_max), 2))


@lru_cache(maxsize=256)
def _grain_analytics(E: BaseGrain, s_max: int) -> GrainAnalytics:
    if isinstance(E, Ellipse):
        return _ellipse_analytics(E, s_max)
    P = discretize(E)
    tensors = {s: surface_tensor_polygon(P, 0, s) for s in range(s_max + 1)}
    return GrainAnalytics(E, P.area(), 0.5 * P.perimeter(), tensors, None, P)


def _ellipse_analytics(E: Ellipse, s_max: int) -> GrainAnalytics:
    p, q = E.p, E.q
    sizes = [s + 1 for s in range(s_max + 1)]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    # boundary parametrization x(phi) = (p cos phi, q sin phi)
    def integrand(phi):
        speed = math.hypot(p * math.sin(phi), q * math.cos(phi))
        u1, u2 = q * math.cos(phi) / speed, p * math.sin(phi) / speed
        out = np.empty(offsets[-1])
        for s in range(s_max + 1):
            out[offsets[s] : offsets[s + 1]] = [u1**l * u2 ** (s - l) for l in range(s + 1)]
        return out * speed

    val, err = integrate.quad_vec(
        integrand, 0.0, 2 * math.pi, epsrel=GRAIN_RTOL, epsabs=0.0,
        points=[math.pi / 2, math.pi, 3 * math.pi / 2], limit=2000,
    )
    scale = np.abs(val).max()
    if err > 10 * GRAIN_RTOL * scale:
        warnings.warn(QuadratureWarning(f"ellipse tensor quadrature error {err:.3g}"), stacklevel=3)
    tensors = {}
    for s in range(s_max + 1):
        raw = val[offsets[s] : offsets[s + 1]]
        tensors[s] = SymTensor2(0.5 * omega(1) / (math.factorial(s) * omega(1 + s)) * raw)
    # Phi_1^{0,0} is V_1, half the perimeter
    v1 = float(tensors[0].comps[0])

    def radius(phi):
        return ellipse_radius(p, q, np.cos(phi), np.sin(phi))

    return GrainAnalytics(E, math.pi * p * q, v1, tensors, radius, None)


def _grain(params_or_grain) -> GrainAnalytics:
    if isinstance(params_or_grain, GrainAnalytics):
        return params_or_grain
    if isinstance(params_or_grain, ModelParams):
        return grain_analytics(params_or_grain.grain)
    return grain_analytics(params_or_grain)


# --------------------------------------------------------------------------- surface tensors


@lru_cache(maxsize=None)
def _density_matrix(s: int, alpha: float) -> np.ndarray:
    """``M[l, j]`` such that ``(Phi_X)_l = gamma * sum_j M[l, j] (Phi_E)_j``, as printed."""
    M = np.zeros((s + 1, s + 1))
    if s % 2:
        return M
    den = math.prod(alpha + 2 * m for m in range(1, s // 2 + 1))
    for l in range(s + 1):
        for j in range(s + 1):
            if (j + l) % 2:
                continue
            total = 0.0
            for k in range(max(0, j - s + l), min(j, l) + 1):
                odd = (l + j - 2 * k) // 2
                even = (s - l - j + 2 * k) // 2
                term = (-1) ** (l - k) * comb(l, k, exact=True) * comb(s - l, j - k, exact=True)
                term *= math.prod(2 * m - 1 for m in range(1, odd + 1))
                term *= math.prod(alpha + 2 * m - 1 for m in range(1, even + 1))
                total += term
            M[l, j] = total / den
    return M


def density_surface_tensor_X(params: ModelParams, s: int, grain: GrainAnalytics | None = None) -> SymTensor2:
    """Density ``Phi_1^{0,s}(X)`` of the grain process."""
    ga = grain or grain_analytics(params.grain, s)
    T = ga.tensor(s)
    if params.aligned:
        return T * params.gamma
    if s == 2:
        t22, t12, t11 = T.comps
        a = params.alpha
        return SymTensor2.from_matrix(
            params.gamma / (a + 2) * np.array([[(a + 1) * t11 + t22, a * t12], [a * t12, t11 + (a + 1) * t22]])
        )
    return SymTensor2(params.gamma * _density_matrix(s, float(params.alpha)) @ T.comps)


def volume_fraction(params: ModelParams, grain: GrainAnalytics | None = None) -> float:
    ga = grain or grain_analytics(params.grain)
    return -math.expm1(-params.gamma * ga.area)


def gamma_for_volume_fraction(phi: float, area: float) -> float:
    """Intensity giving expected volume fraction ``phi`` for grains of the given area."""
    if not 0 <= phi < 1:
        raise ValueError(f"volume fraction must lie in [0, 1), got {phi}")
    return -math.log1p(-phi) / area


def surface_tensor_density_Z(params: ModelParams, s: int, grain: GrainAnalytics | None = None) -> SymTensor2:
    ga = grain or grain_analytics(params.grain, s)
    return density_surface_tensor_X(params, s, ga) * math.exp(-params.gamma * ga.area)


def c1_coeff(alpha: float, grain, s: int = 2) -> SymTensor2:
    """``c_1^{0,s}(alpha, E) = Phi_1^{0,s}(X) / (gamma V_2(E))`` (independent of gamma)."""
    ga = _grain(grain)
    params = ModelParams(1.0, alpha, ga.grain)
    return density_surface_tensor_X(params, s, ga) / ga.area


def surface_tensor_curve(phi, c1: SymTensor2) -> SymTensor2:
    """Surface tensor density of Z as a function of the volume fraction."""
    return c1 * ((phi - 1.0) * math.log1p(-phi))


def anisotropy_ratio(params: ModelParams, grain: GrainAnalytics | None = None) -> float:
    """Ratio of expected (1,1) and (2,2) surface tensor components (independent of gamma)."""
    T = density_surface_tensor_X(params, 2, grain)
    return T.comps[2] / T.comps[0]


# --------------------------------------------------------------------------- mixed functionals


def relative_rotation_density(theta: float, alpha: float) -> float:
    """Density of ``theta_1 - theta_2`` for independent angles drawn from ``f_alpha``."""
    if alpha == 0:
        return 1.0 / (2 * math.pi)
    c = normalization_c(alpha)
    kinks = [math.pi / 2, 3 * math.pi / 2]
    kinks += [(k * math.pi / 2 - theta) % (2 * math.pi) for k in (1, 3)]
    return c * c * _quad(
        lambda t: abs(math.cos(theta + t)) ** alpha * abs(math.cos(t)) ** alpha,
        0.0, 2 * math.pi, points=kinks, epsrel=1e-10,
    )


@lru_cache(maxsize=16)
def _half_turn_nodes(n: int):
    b1, w1 = np.polynomial.legendre.leggauss(n)
    return 0.5 * math.pi * (b1 + 1.0), 0.5 * math.pi * w1


def _ellipse_mixed_relative(radius: Callable, theta: float, n: int = 256) -> float:
    """``0V_{1,1}(R(theta) E, E)`` for a smooth grain from its curvature radius."""
    b1, w1 = _half_turn_nodes(n)
    b2 = 2 * math.pi * np.arange(2 * n) / (2 * n)
    w2 = 2 * math.pi / (2 * n)
    B1, B2 = np.meshgrid(b1, b2, indexing="ij")
    inner = (radius(B1 + B2 - theta) + radius(-B1 + B2 - theta)) * radius(b2)[None, :]
    val = (b1 * np.sin(b1) * w1) @ inner.sum(axis=1) * w2
    return float(val) / (2 * math.pi)


def mixed_V11_rotated(grain, theta: float) -> float:
    """``0V_{1,1}(R(theta) E, E)`` for a base grain ``E``."""
    ga = _grain(grain)
    if isinstance(ga.grain, Rectangle):
        a, b = ga.grain.a, ga.grain.b
        return (a * a + b * b) * abs(math.sin(theta)) + 2 * a * b * abs(math.cos(theta))
    if ga.polygon is not None:
        return mixed_V11(rotate(ga.polygon, theta), ga.polygon)
    return _smooth_mixed_relative(ga, theta)


def _smooth_mixed_relative(ga: GrainAnalytics, theta: float) -> float:
    E = ga.grain
    return _ellipse_relative_cached(E.p, E.q, round(float(theta) % (2 * math.pi), 15))


@lru_cache(maxsize=4096)
def _ellipse_relative_cached(p: float, q: float, theta: float) -> float:
    def radius(phi):
        return ellipse_radius(p, q, np.cos(phi), np.sin(phi))

    n = 64
    prev = _ellipse_mixed_relative(radius, theta, n)
    while True:
        n *= 2
        cur = _ellipse_mixed_relative(radius, theta, n)
        if abs(cur - prev) <= 1e-11 * abs(cur) or n >= 2048:
            if abs(cur - prev) > 1e-9 * abs(cur):
                warnings.warn(QuadratureWarning(f"ellipse mixed functional converged only to {abs(cur - prev):.3g}"))
            return cur
        prev = cur


def _kinks(ga: GrainAnalytics, against: np.ndarray | None = None) -> np.ndarray:
    """Angles in ``[0, 2 pi]`` where ``theta -> 0V_{1,1}(., R(theta) E)`` may fail to be smooth.

    For polygons this happens when a rotated grain normal becomes antipodal to
    a normal of the other body; quarter turns are added for the orientation law.
    """
    pts = [k * math.pi / 2 for k in range(5)]
    if ga.polygon is not None and (against is not None or not isinstance(ga.grain, Rectangle)):
        own = ga.polygon.normals()
        psi = np.arctan2(own[:, 1], own[:, 0])
        other = psi if against is None else np.arctan2(against[:, 1], against[:, 0])
        diff = np.mod(other[None, :] - psi[:, None] + math.pi, 2 * math.pi).ravel()
        pts.extend(diff.tolist())
    pts = np.unique(np.clip(np.round(np.asarray(pts), 13), 0.0, 2 * math.pi))
    pts[0], pts[-1] = 0.0, 2 * math.pi
    return pts


def _piecewise(g: Callable, kinks: np.ndarray, epsrel: float) -> float:
    """Integral of ``g`` over ``[0, 2 pi]`` split at ``kinks``.

    Few pieces: adaptive quadrature on each. Many short pieces (polygon grains):
    fixed 12-point Gauss-Legendre, exact enough since ``g`` is smooth inside.
    """
    if len(kinks) <= 9:
        return sum(_quad(g, a, b, epsrel=epsrel) for a, b in zip(kinks[:-1], kinks[1:]))
    x, w = np.polynomial.legendre.leggauss(12)
    total = 0.0
    for a, b in zip(kinks[:-1], kinks[1:]):
        if b - a < 1e-14:
            continue
        half = 0.5 * (b - a)
        total += half * sum(wi * g(a + half * (xi + 1.0)) for xi, wi in zip(x, w))
    return total


def mixed_density_V11_X(params: ModelParams, grain: GrainAnalytics | None = None) -> float:
    """Mixed density ``0V_{1,1}(X, X)``.

    Both grain orientations enter only through their difference, so the double
    angular integral is the integral of ``0V_{1,1}(R(theta) E, E)`` against the
    density of the relative rotation.
    """
    ga = grain or grain_analytics(params.grain)
    g2 = params.gamma**2
    if params.aligned:
        return g2 * mixed_V11_rotated(ga, 0.0)
    kinks = _kinks(ga)
    if params.alpha == 0:
        return g2 * _piecewise(lambda t: mixed_V11_rotated(ga, t), kinks, 1e-10) / (2 * math.pi)
    a = params.alpha
    val = _piecewise(lambda t: mixed_V11_rotated(ga, t) * relative_rotation_density(t, a), kinks, 1e-9)
    return g2 * val


def _mixed_window_grain(W: ConvexPolygon, ga: GrainAnalytics, theta: float) -> float:
    """``0V_{1,1}(W, R(theta) E)`` for a convex polygon window."""
    if ga.polygon is not None:
        return mixed_V11(W, rotate(ga.polygon, theta))
    # smooth grain: the first support measure is r(E, u) dH^1(u) / 2 on the circle
    psi = np.arctan2(W.normals()[:, 1], W.normals()[:, 0])
    total = 0.0
    for L_i, ang in zip(W.edge_lengths(), psi):
        def f(phi):
            a = abs((phi - ang + math.pi) % (2 * math.pi) - math.pi)
            return a * math.sin(a) * float(ga.radius(phi - theta))

        total += L_i * _quad(f, ang - math.pi, ang + math.pi, points=[ang], epsrel=1e-10)
    return total / (2 * math.pi)


def mixed_density_V11_WX(params: ModelParams, W: ConvexPolygon, grain: GrainAnalytics | None = None) -> float:
    """``0V_{1,1}(W, X) = gamma * int 0V_{1,1}(W, R(theta) E) f_alpha(theta) dtheta``."""
    ga = grain or grain_analytics(params.grain)
    if params.aligned:
        return params.gamma * _mixed_window_grain(W, ga, 0.0)
    a = params.alpha
    kinks = _kinks(ga, W.normals())
    val = _piecewise(
        lambda t: _mixed_window_grain(W, ga, t) * float(orientation_density(t, a)), kinks, 1e-9
    )
    return params.gamma * val


# --------------------------------------------------------------------------- Euler characteristic


def c0_coeff(alpha: float, grain) -> float:
    """``c_0(alpha, E) = 0V_{1,1}(X, X) / (2 V_2(E) gamma^2)`` (independent of gamma)."""
    ga = _grain(grain)
    return mixed_density_V11_X(ModelParams(1.0, alpha, ga.grain), ga) / (2 * ga.area)


def euler_density_Z(params: ModelParams, grain: GrainAnalytics | None = None) -> float:
    ga = grain or grain_analytics(params.grain)
    v0x = params.gamma
    return math.exp(-params.gamma * ga.area) * (v0x - 0.5 * mixed_density_V11_X(params, ga))


def euler_curve(phi, c0: float):
    """Euler characteristic density of Z divided by gamma, as a function of the volume fraction."""
    return (1.0 - phi) * (1.0 + c0 * np.log1p(-phi))


def intrinsic_volume_densities_Z(params: ModelParams, grain: GrainAnalytics | None = None):
    """``(V0(Z), V1(Z), V2(Z))`` densities."""
    ga = grain or grain_analytics(params.grain)
    e = math.exp(-params.gamma * ga.area)
    return euler_density_Z(params, ga), e * params.gamma * ga.v1, -math.expm1(-params.gamma * ga.area)


def isotropic_constant(n: int, j: int, s: int) -> float:
    """Proportionality constant between tensor and intrinsic volume densities of isotropic sets."""
    if s % 2 or s < 0:
        raise ValueError(f"isotropic constant needs even s >= 0, got {s}")
    if not 0 <= j <= n - 1:
        raise ValueError(f"need 0 <= j <= n - 1, got j={j}, n={n}")
    h = s // 2
    logv = (
        gammaln((n - j + s) / 2) + gammaln(n / 2) - gammaln((n + s) / 2) - gammaln((n - j) / 2)
    )
    return math.exp(logv) / ((4 * math.pi) ** h * math.factorial(h))


# --------------------------------------------------------------------------- window mean values


def mean_value_window(params: ModelParams, W: ConvexPolygon, j: int, r: int, s: int,
                      grain: GrainAnalytics | None = None) -> SymTensor2:
    """Expected ``Phi_j^{r,s}(Z cap W)`` for a convex polygon window ``W``."""
    if j not in (0, 1, 2):
        raise ValueError(f"j must be 0, 1 or 2, got {j}")
    if not (0 <= r <= 4 and 0 <= s <= 8):
        raise ValueError("supported ranges are r <= 4, s <= 8")
    if j == 2 and s != 0:
        raise ValueError("volume tensors have s = 0")
    if j == 0 and r != 0:
        raise ValueError("window mean values for j = 0 are implemented for r = 0 only")
    ga = grain or grain_analytics(params.grain, s)
    vx = params.gamma * ga.area
    covered = -math.expm1(-vx)
    e = math.exp(-vx)
    if j == 2:
        return volume_moment_tensor(W, r) * covered
    if j == 1:
        return surface_tensor_polygon(W, r, s) * covered + sym_product(
            volume_moment_tensor(W, r), density_surface_tensor_X(params, s, ga)
        ) * e
    # j == 0, r == 0
    base = euler_point_tensor(1.0, s) * covered
    if s % 2:
        return base
    mixed_w = mixed_density_V11_WX(params, W, ga)
    mixed_x = mixed_density_V11_X(params, ga)
    bracket = mixed_w + W.area() * (params.gamma - 0.5 * mixed_x)
    return base + euler_point_tensor(1.0, s) * (e * bracket)


def extract_mixed_from_dilations(rhos, chi_means, W: ConvexPolygon, volume_density_X: float):
    """Split expected Euler characteristics of ``Z cap rho W`` by homogeneity degree.

    Experimental. With ``E chi(Z cap rho W) = (1 - e) + e [rho m_W + rho^2 V_2(W) d]``,
    ``e = exp(-V_2(X))``, a least-squares fit over the dilation factors returns
    ``(m_W, d)``: the mixed density ``0V_{1,1}(W, X)`` and
    ``V_0(X) - 0V_{1,1}(X, X) / 2``. No conditioning guarantees.
    """
    rhos = np.asarray(rhos, dtype=float)
    y = np.asarray(chi_means, dtype=float)
    if len(rhos) < 2 or len(np.unique(rhos)) != len(rhos):
        raise ValueError("need at least two distinct dilation factors")
    e = math.exp(-volume_density_X)
    rhs = (y - (1 - e)) / e
    A = np.column_stack([rhos, rhos**2 * W.area()])
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return float(coef[0]), float(coef[1])


# --------------------------------------------------------------------------- conventions


def _papaya_factor(j: int, r: int, s: int, n: int = 2) -> float:
    if not 0 < j <= n:
        raise ValueError(f"Papaya index j must satisfy 0 < j <= {n}, got {j}")
    return math.factorial(r) * math.factorial(s) * omega(j + s) / (n * comb(n - 1, j - 1, exact=True))


def papaya_normalization(j: int, r: int, s: int, T: SymTensor2) -> SymTensor2:
    """Convert ``Phi_{2-j}^{r,s}`` into Papaya's ``W_j^{r,s}``."""
    return T * _papaya_factor(j, r, s)


def from_papaya_normalization(j: int, r: int, s: int, W: SymTensor2) -> SymTensor2:
    return W / _papaya_factor(j, r, s)
