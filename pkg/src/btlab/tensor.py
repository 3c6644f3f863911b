"""Symmetric tensors over R^2 and the sphere-area constants used for normalization.

A rank-``s`` symmetric tensor over R^2 is fixed by ``s + 1`` numbers. We store
them in ``comps`` with ``comps[l]`` the component carrying ``l`` indices equal
to 1 and ``s - l`` indices equal to 2, so a rank-2 tensor ``T`` has
``comps == (T22, T12, T11)``.

Products of symmetric tensors use the normalized symmetrization (average over
all index permutations). Under that convention ``Q @ Q`` has
``(Q^2)_{1111} = 1`` and ``(Q^2)_{1122} = 1/3``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import comb, gamma

__all__ = [
    "SymTensor2",
    "omega",
    "q_power",
    "sym_product",
    "vector_power",
]


@lru_cache(maxsize=None)
def omega(m: int) -> float:
    """Surface area of the unit sphere S^{m-1} in R^m (omega_1 = 2, omega_2 = 2 pi)."""
    if m < 1:
        raise ValueError(f"omega needs m >= 1, got {m}")
    return float(2.0 * math.pi ** (m / 2.0) / gamma(m / 2.0))


@dataclass(frozen=True, eq=False)
class SymTensor2:
    """Symmetric rank-``rank`` tensor over R^2 (see module docstring for layout)."""

    comps: np.ndarray

    def __post_init__(self):
        arr = np.array(self.comps, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValueError("a tensor needs at least one component")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor components must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "comps", arr)

    @property
    def rank(self) -> int:
        return self.comps.size - 1

    @classmethod
    def zeros(cls, rank: int) -> "SymTensor2":
        return cls(np.zeros(rank + 1))

    @classmethod
    def scalar(cls, value: float) -> "SymTensor2":
        return cls(np.array([value]))

    @classmethod
    def from_matrix(cls, m) -> "SymTensor2":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2) or not np.isclose(m[0, 1], m[1, 0], rtol=1e-12, atol=1e-300):
            raise ValueError("expected a symmetric 2x2 matrix")
        return cls(np.array([m[1, 1], m[0, 1], m[0, 0]]))

    def __getitem__(self, l: int) -> float:
        return float(self.comps[l])

    def component(self, n_ones: int) -> float:
        return float(self.comps[n_ones])

    def matrix(self) -> np.ndarray:
        if self.rank != 2:
            raise ValueError(f"matrix() only for rank 2, tensor has rank {self.rank}")
        t22, t12, t11 = self.comps
        return np.array([[t11, t12], [t12, t22]])

    def full(self) -> np.ndarray:
        """Dense ``(2,)*rank`` array; index 0 means coordinate 1."""
        s = self.rank
        out = np.empty((2,) * s)
        for idx in np.ndindex(*out.shape):
            out[idx] = self.comps[s - sum(idx)]
        return out

    def trace(self) -> "SymTensor2":
        """Contract one pair of indices (rank drops by 2)."""
        s = self.rank
        if s < 2:
            raise ValueError("trace needs rank >= 2")
        # (tr T)_{l ones} = T_{l+2 ones} + T_{l ones}
        return SymTensor2(self.comps[2:] + self.comps[:-2])

    def rotate(self, theta: float) -> "SymTensor2":
        """Push forward under the rotation by ``theta``: (R T)_{i..} = R_{i j}.. T_{j..}."""
        s = self.rank
        if s == 0:
            return self
        c, sn = math.cos(theta), math.sin(theta)
        # T(x,...,x) = sum_l C(s,l) T_l x1^l x2^(s-l) as a homogeneous polynomial,
        # stored by power of x1. The rotated tensor is x -> T(R^T x) with
        # R^T x = (c x1 + sn x2, -sn x1 + c x2).
        first = np.array([sn, c])
        second = np.array([c, -sn])
        poly = np.zeros(s + 1)
        for l in range(s + 1):
            term = np.array([1.0])
            for _ in range(l):
                term = np.convolve(term, first)
            for _ in range(s - l):
                term = np.convolve(term, second)
            poly += comb(s, l, exact=True) * self.comps[l] * term
        binom = np.array([comb(s, k, exact=True) for k in range(s + 1)], dtype=float)
        return SymTensor2(poly / binom)

    def allclose(self, other: "SymTensor2", rtol=1e-12, atol=1e-14) -> bool:
        return self.rank == other.rank and np.allclose(self.comps, other.comps, rtol=rtol, atol=atol)

    def _check(self, other):
        if not isinstance(other, SymTensor2):
            return NotImplemented
        if other.rank != self.rank:
            raise ValueError(f"rank mismatch: {self.rank} vs {other.rank}")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return SymTensor2(self.comps + other.comps)

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return SymTensor2(self.comps - other.comps)

    def __neg__(self):
        return SymTensor2(-self.comps)

    def __mul__(self, k):
        if isinstance(k, SymTensor2):
            return sym_product(self, k)
        return SymTensor2(self.comps * float(k))

    __rmul__ = __mul__

    def __truediv__(self, k):
        return SymTensor2(self.comps / float(k))

    def __repr__(self):
        return f"SymTensor2(rank={self.rank}, comps={np.array2string(self.comps, precision=6)})"


def sym_product(a: SymTensor2, b: SymTensor2) -> SymTensor2:
    """Normalized symmetric tensor product ``ab``."""
    r, s = a.rank, b.rank
    p = r + s
    out = np.zeros(p + 1)
    for l in range(p + 1):
        total = 0.0
        for k in range(max(0, l - s), min(r, l) + 1):
            total += comb(r, k, exact=True) * comb(s, l - k, exact=True) * a.comps[k] * b.comps[l - k]
        out[l] = total / comb(p, l, exact=True)
    return SymTensor2(out)


def vector_power(v, s: int) -> SymTensor2:
    """``v^s`` for a vector v in R^2."""
    v1, v2 = float(v[0]), float(v[1])
    return SymTensor2(np.array([v1**l * v2 ** (s - l) for l in range(s + 1)]))


@lru_cache(maxsize=None)
def _q_power_comps(s: int) -> tuple:
    out = []
    for l in range(s + 1):
        if l % 2:
            out.append(0.0)
        else:
            out.append(_double_factorial(l - 1) * _double_factorial(s - l - 1) / _double_factorial(s - 1))
    return tuple(out)


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def q_power(s: int) -> SymTensor2:
    """Symmetric power ``Q^{s/2}`` of the metric tensor, for even ``s``."""
    if s < 0 or s % 2:
        raise ValueError(f"Q^(s/2) needs even s >= 0, got {s}")
    return SymTensor2(np.array(_q_power_comps(s)))
