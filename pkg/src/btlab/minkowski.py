"""Minkowski functionals and tensors of polygons and union sets, plus brute-force oracles.

Normalizations (n = 2):

* surface tensors ``Phi_1^{r,s} = 1/(r! s! omega_{1+s}) * sum_F u_F^s int_F x^r``,
  using the polytope weight 1/2 of the first support measure on each edge;
* volume tensors ``Phi_2^{r,0} = 1/r! int_P x^r dx``;
* ``Phi_0^{0,s} = 2/(s! omega_{s+1}) V_0 Q^{s/2}`` for even ``s``, zero otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import comb

from .geom2d import ConvexPolygon, PolyconvexRegion, convex_intersect, euler_characteristic
from .tensor import SymTensor2, omega, q_power

__all__ = [
    "FunctionalSet",
    "LAMBDA1_EDGE_WEIGHT",
    "surface_tensor_polygon",
    "volume_moment_tensor",
    "euler_point_tensor",
    "mixed_V11",
    "measure",
    "translative_oracle",
    "intrinsic_volumes",
    "inclusion_exclusion_euler",
]

# each polytope edge carries half its length as first support measure
LAMBDA1_EDGE_WEIGHT = 0.5

Shape = Union[ConvexPolygon, PolyconvexRegion]


def _edge_data(P: Shape) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(P, ConvexPolygon):
        return P.vertices, P.edges()
    return P.edges()


def _edge_moments(starts: np.ndarray, vecs: np.ndarray, r: int) -> np.ndarray:
    """``int_F x1^l x2^(r-l) dH^1`` for every edge, shape ``(n_edges, r + 1)``.

    Gauss-Legendre with ``r // 2 + 1`` nodes is exact for the degree-r integrand.
    """
    nodes, weights = np.polynomial.legendre.leggauss(r // 2 + 1)
    t = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    lengths = np.hypot(vecs[:, 0], vecs[:, 1])
    x = starts[:, None, 0] + t[None, :] * vecs[:, None, 0]
    y = starts[:, None, 1] + t[None, :] * vecs[:, None, 1]
    out = np.empty((len(starts), r + 1))
    for l in range(r + 1):
        out[:, l] = (x**l * y ** (r - l)) @ w
    return out * lengths[:, None]


def surface_tensor_polygon(P: Shape, r: int = 0, s: int = 0) -> SymTensor2:
    """Surface tensor ``Phi_1^{r,s}`` of a convex polygon or of a region's boundary."""
    if r < 0 or s < 0:
        raise ValueError("tensor ranks must be non-negative")
    if r > 0 and isinstance(P, PolyconvexRegion) and P.window is not None:
        raise ValueError("position-weighted tensors are not defined on the torus")
    starts, vecs = _edge_data(P)
    if len(vecs) == 0:
        return SymTensor2.zeros(r + s)
    lengths = np.hypot(vecs[:, 0], vecs[:, 1])
    u1 = vecs[:, 1] / lengths
    u2 = -vecs[:, 0] / lengths
    upow = np.column_stack([u1**l * u2 ** (s - l) for l in range(s + 1)])  # (E, s+1)
    if r == 0:
        raw = upow.T @ lengths
    else:
        xmom = _edge_moments(starts, vecs, r)  # (E, r+1)
        raw = np.zeros(r + s + 1)
        for k in range(r + 1):
            for m in range(s + 1):
                raw[k + m] += comb(r, k, exact=True) * comb(s, m, exact=True) / comb(
                    r + s, k + m, exact=True
                ) * float(xmom[:, k] @ upow[:, m])
    pref = LAMBDA1_EDGE_WEIGHT * omega(1) / (math.factorial(r) * math.factorial(s) * omega(1 + s))
    return SymTensor2(pref * np.asarray(raw))


def volume_moment_tensor(P: Shape, r: int = 0) -> SymTensor2:
    """Volume tensor ``Phi_2^{r,0} = (1/r!) int_P x^r dx``.

    Uses Green's theorem, ``int_P x1^l x2^m dA = oint x1^(l+1) x2^m / (l+1) dx2``,
    with exact Gauss-Legendre edge integrals.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if isinstance(P, PolyconvexRegion):
        if P.window is not None and r > 0:
            raise ValueError("position-weighted tensors are not defined on the torus")
        if r == 0:
            return SymTensor2.scalar(P.area)
    starts, vecs = _edge_data(P)
    if len(vecs) == 0:
        return SymTensor2.zeros(r)
    nodes, weights = np.polynomial.legendre.leggauss(r // 2 + 2)
    t = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    x = starts[:, None, 0] + t[None, :] * vecs[:, None, 0]
    y = starts[:, None, 1] + t[None, :] * vecs[:, None, 1]
    dy = vecs[:, 1][:, None]
    out = np.empty(r + 1)
    for l in range(r + 1):
        out[l] = float((((x ** (l + 1) * y ** (r - l)) * dy) @ w).sum()) / (l + 1)
    return SymTensor2(out / math.factorial(r))


def euler_point_tensor(v0: float, s: int) -> SymTensor2:
    """``Phi_0^{0,s}`` of a set with Euler characteristic ``v0``."""
    if s < 0:
        raise ValueError("s must be non-negative")
    if s % 2:
        return SymTensor2.zeros(s)
    return q_power(s) * (2.0 * v0 / (math.factorial(s) * omega(s + 1)))


def _angle_between(n1: np.ndarray, n2: np.ndarray) -> np.ndarray:
    """Angle in [0, pi] between all pairs of unit vectors, shape (len(n1), len(n2))."""
    cross = n1[:, None, 0] * n2[None, :, 1] - n1[:, None, 1] * n2[None, :, 0]
    dot = n1[:, None, 0] * n2[None, :, 0] + n1[:, None, 1] * n2[None, :, 1]
    return np.abs(np.arctan2(cross, dot))


def mixed_V11(P: ConvexPolygon, Q: ConvexPolygon) -> float:
    """Mixed functional ``0V_{1,1}(P, Q)`` of translative integral geometry."""
    a = _angle_between(P.normals(), Q.normals())
    kernel = a * np.sin(a)
    w = 2.0 / math.pi * LAMBDA1_EDGE_WEIGHT**2
    return float(w * (P.edge_lengths() @ kernel @ Q.edge_lengths()))


def intrinsic_volumes(P: Shape) -> tuple[float, float, float]:
    """``(V0, V1, V2)`` of a polygon or region (V1 is half the boundary length)."""
    if isinstance(P, ConvexPolygon):
        return 1.0, 0.5 * P.perimeter(), P.area()
    return float(euler_characteristic(P)), 0.5 * P.boundary_length(), P.area


@dataclass
class FunctionalSet:
    """Per-unit-area densities measured on a torus realization.

    ``area`` is the volume fraction, ``v1`` the half boundary length density,
    ``v0`` the Euler characteristic density and ``tensors[s]`` the density of
    ``Phi_1^{0,s}``.
    """

    area: float
    v1: float
    v0: float
    tensors: dict = field(default_factory=dict)

    @property
    def phi(self) -> float:
        return self.area


def measure(R: PolyconvexRegion, s_list=(2,)) -> FunctionalSet:
    """Densities of a torus region (per unit area of the fundamental domain)."""
    if R.window is None:
        raise ValueError("densities need a torus region; use the raw functionals for planar ones")
    A = R.window.area
    chi = euler_characteristic(R) if R.loops else 0
    tensors = {s: surface_tensor_polygon(R, 0, s) / A for s in s_list}
    return FunctionalSet(R.area / A, 0.5 * R.boundary_length() / A, chi / A, tensors)


def translative_oracle(P: ConvexPolygon, Q: ConvexPolygon, h: float) -> float:
    """Hit-or-miss estimate of ``int 1{P cap (Q + x) != empty} dx``.

    Midpoint rule on a grid of step ``h`` over the bounding box of ``P + (-Q)``.
    Membership of ``x`` in the Minkowski difference is decided by the
    separating-axis test over both polygons' edge normals.
    """
    if h <= 0:
        raise ValueError("grid step must be positive")
    # facet normals of P + (-Q) are those of P and of -Q
    normals = np.vstack([P.normals(), -Q.normals()])
    support = (normals @ P.vertices.T).max(axis=1) + (normals @ (-Q.vertices).T).max(axis=1)
    lo = P.vertices.min(axis=0) - Q.vertices.max(axis=0)
    hi = P.vertices.max(axis=0) - Q.vertices.min(axis=0)
    xs = np.arange(lo[0] + h / 2, hi[0], h)
    ys = np.arange(lo[1] + h / 2, hi[1], h)
    count = 0
    for chunk in np.array_split(ys, max(1, len(ys) // 256)):
        X, Y = np.meshgrid(xs, chunk)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        inside = np.all(pts @ normals.T <= support[None, :], axis=1)
        count += int(inside.sum())
    return count * h * h


def inclusion_exclusion_euler(polygons) -> int:
    """Euler characteristic of a union of convex polygons by inclusion-exclusion.

    Every non-empty intersection of convex sets is convex with ``chi = 1``, so
    ``chi = sum over non-empty index sets I of (-1)^(|I|+1) 1{cap_I K_i != empty}``.
    Branches are pruned as soon as an intersection becomes empty.
    """
    polys = list(polygons)

    def grow(current: ConvexPolygon, start: int, size: int) -> int:
        total = 0
        for k in range(start, len(polys)):
            nxt = convex_intersect(current, polys[k])
            if nxt is None:
                continue
            total += (-1) ** size + grow(nxt, k + 1, size + 1)
        return total

    # size counts the polygons already in the set; a set of size m adds (-1)^(m+1)
    chi = 0
    for i, P in enumerate(polys):
        chi += 1 + grow(P, i + 1, 1)
    return chi
