"""Planar and flat-torus geometry: convex polygons, base grains, unions, boundary loops.

Unions are delegated to GEOS through shapely. On the torus, grains near the
frame of the fundamental domain are replicated into the neighbouring copies,
the planar union is taken, and the boundary is then folded back onto the
torus by keeping each edge whose start vertex lies in ``[0, L)^2`` and
stitching edges into loops across the identified frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import shapely
from scipy.spatial import cKDTree

__all__ = [
    "ConvexPolygon",
    "Ellipse",
    "Rectangle",
    "PolygonGrain",
    "BaseGrain",
    "TorusWindow",
    "PolyconvexRegion",
    "UnionError",
    "rotation_matrix",
    "rotate",
    "discretize",
    "convex_intersect",
    "union",
    "clip_union",
    "euler_characteristic",
    "square",
    "random_convex_polygon",
]

CONVEXITY_TOL = 1e-12
SNAP_REL = 1e-12


class UnionError(RuntimeError):
    """The boundary arrangement of a union could not be made consistent."""


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Convex polygon given by its counterclockwise vertex loop (not closed)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("a convex polygon needs an (n >= 3, 2) vertex array")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        e = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(e[:, 0], e[:, 1])
        scale = float(lengths.max())
        if np.any(lengths <= CONVEXITY_TOL * scale):
            raise ValueError("polygon has repeated vertices")
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        if np.any(cross <= CONVEXITY_TOL * scale * scale):
            raise ValueError("polygon is not strictly convex and counterclockwise")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    def edges(self) -> np.ndarray:
        """Edge vectors; edge k runs from vertex k to vertex k + 1."""
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.hypot(e[:, 0], e[:, 1])

    def normals(self) -> np.ndarray:
        """Outer unit normals of the edges."""
        e = self.edges()
        return np.column_stack([e[:, 1], -e[:, 0]]) / self.edge_lengths()[:, None]

    def area(self) -> float:
        return _signed_area(self.vertices)

    def perimeter(self) -> float:
        return float(self.edge_lengths().sum())

    def circumradius(self, center=(0.0, 0.0)) -> float:
        d = self.vertices - np.asarray(center, dtype=float)
        return float(np.hypot(d[:, 0], d[:, 1]).max())

    def diameter(self) -> float:
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    @classmethod
    def _trusted(cls, v: np.ndarray) -> "ConvexPolygon":
        # for rigid motions of an already validated polygon
        v = np.ascontiguousarray(v, dtype=float)
        v.setflags(write=False)
        obj = object.__new__(cls)
        object.__setattr__(obj, "vertices", v)
        return obj

    def translate(self, shift) -> "ConvexPolygon":
        return ConvexPolygon._trusted(self.vertices + np.asarray(shift, dtype=float))

    def scale(self, factor: float) -> "ConvexPolygon":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return ConvexPolygon(self.vertices * factor)

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        e = self.edges()
        d = p - self.vertices
        return bool(np.all(e[:, 0] * d[:, 1] - e[:, 1] * d[:, 0] >= -tol))

    def to_shapely(self):
        return shapely.Polygon(self.vertices)

    def __repr__(self):
        return f"ConvexPolygon(n={self.n}, area={self.area():.6g})"


def square(side: float, center=(0.0, 0.0)) -> ConvexPolygon:
    h = side / 2.0
    c = np.asarray(center, dtype=float)
    return ConvexPolygon(np.array([[-h, -h], [h, -h], [h, h], [-h, h]]) + c)


@dataclass(frozen=True)
class Ellipse:
    """Ellipse with semi-axes ``p >= q`` along e1, e2; simulated as its inscribed ``m``-gon."""

    p: float
    q: float
    m: int = 30

    def __post_init__(self):
        if not (self.p >= self.q > 0):
            raise ValueError(f"ellipse needs p >= q > 0, got p={self.p}, q={self.q}")
        if self.m < 8:
            raise ValueError(f"ellipse discretization needs m >= 8, got {self.m}")


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle with full side lengths ``a`` (along e1) and ``b``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"rectangle sides must be positive, got a={self.a}, b={self.b}")

    @classmethod
    def from_semi_axes(cls, p: float, q: float) -> "Rectangle":
        return cls(2.0 * p, 2.0 * q)


@dataclass(frozen=True, eq=False)
class PolygonGrain:
    polygon: ConvexPolygon

    def __hash__(self):
        return hash(self.polygon.vertices.tobytes())

    def __eq__(self, other):
        return isinstance(other, PolygonGrain) and np.array_equal(
            self.polygon.vertices, other.polygon.vertices
        )


BaseGrain = Union[Ellipse, Rectangle, PolygonGrain]


def random_convex_polygon(rng: np.random.Generator, n_points: int = 12, scale: float = 1.0) -> ConvexPolygon:
    """Convex hull of ``n_points`` uniform points in ``[-scale, scale]^2``."""
    from scipy.spatial import ConvexHull

    while True:
        pts = rng.uniform(-scale, scale, size=(n_points, 2))
        hull = ConvexHull(pts)
        try:
            # 2D hull vertices come counterclockwise
            return ConvexPolygon(pts[hull.vertices])
        except ValueError:
            continue


def rotate(P: ConvexPolygon, theta: float) -> ConvexPolygon:
    """Rotate about the origin by ``theta``."""
    return ConvexPolygon._trusted(P.vertices @ rotation_matrix(theta).T)


def discretize(E: BaseGrain) -> ConvexPolygon:
    if isinstance(E, Ellipse):
        phi = 2.0 * np.pi * np.arange(E.m) / E.m
        return ConvexPolygon(np.column_stack([E.p * np.cos(phi), E.q * np.sin(phi)]))
    if isinstance(E, Rectangle):
        ha, hb = E.a / 2.0, E.b / 2.0
        return ConvexPolygon(np.array([[-ha, -hb], [ha, -hb], [ha, hb], [-ha, hb]]))
    if isinstance(E, PolygonGrain):
        return E.polygon
    raise TypeError(f"not a base grain: {E!r}")


def convex_intersect(P: ConvexPolygon, Q: ConvexPolygon) -> ConvexPolygon | None:
    """Intersection of two convex polygons, ``None`` when it has no interior."""
    pts = [tuple(v) for v in P.vertices]
    qv = Q.vertices
    scale = max(P.diameter(), Q.diameter())
    for k in range(Q.n):
        a, b = qv[k], qv[(k + 1) % Q.n]
        ex, ey = b[0] - a[0], b[1] - a[1]
        side = [ex * (p[1] - a[1]) - ey * (p[0] - a[0]) for p in pts]
        out = []
        m = len(pts)
        for i in range(m):
            cur, nxt = pts[i], pts[(i + 1) % m]
            sc, sn = side[i], side[(i + 1) % m]
            if sc >= 0:
                out.append(cur)
            if (sc >= 0) != (sn >= 0):
                t = sc / (sc - sn)
                out.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
        pts = out
        if len(pts) < 3:
            return None
    v = np.array(pts)
    # drop near-duplicate and collinear points produced by clipping
    keep = []
    n = len(v)
    for i in range(n):
        prev, cur, nxt = v[i - 1], v[i], v[(i + 1) % n]
        if np.hypot(*(cur - prev)) <= 1e-12 * scale:
            continue
        cr = (cur[0] - prev[0]) * (nxt[1] - cur[1]) - (cur[1] - prev[1]) * (nxt[0] - cur[0])
        if cr <= 1e-13 * scale * scale:
            continue
        keep.append(cur)
    if len(keep) < 3:
        return None
    v = np.array(keep)
    if _signed_area(v) <= 1e-14 * scale * scale:
        return None
    try:
        return ConvexPolygon(v)
    except ValueError:
        return None


@dataclass(frozen=True)
class TorusWindow:
    """Square fundamental domain ``[0, L)^2`` of a flat torus."""

    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"window side must be positive, got {self.L}")

    @property
    def area(self) -> float:
        return self.L * self.L

    def admits(self, P: ConvexPolygon) -> bool:
        """Whether a grain centred at the origin cannot overlap itself through wraparound."""
        return self.L > 2.0 * P.circumradius()


@dataclass(frozen=True, eq=False)
class PolyconvexRegion:
    """Boundary loops and area of a union set.

    Each loop is an ``(n, 2)`` vertex array ordered with the occupied phase on
    the left, so outer loops run counterclockwise and holes clockwise. On a
    torus ``window`` the vertices of a loop are unwrapped (consecutive
    vertices differ by the true edge vector) and ``shifts[i]`` is the lattice
    vector, in units of ``L``, picked up when loop ``i`` closes; it is nonzero
    only for loops winding around the torus. With ``window=None`` the region
    is planar.
    """

    loops: tuple
    area: float
    window: TorusWindow | None = None
    shifts: tuple | None = None
    _edge_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        loops = tuple(np.asarray(l, dtype=float) for l in self.loops)
        for l in loops:
            l.setflags(write=False)
        object.__setattr__(self, "loops", loops)
        shifts = self.shifts
        if shifts is None:
            shifts = tuple(np.zeros(2, dtype=int) for _ in loops)
        if len(shifts) != len(loops):
            raise ValueError("need one lattice shift per loop")
        object.__setattr__(self, "shifts", tuple(np.asarray(t, dtype=int) for t in shifts))
        if self.window is None and any(t.any() for t in self.shifts):
            raise ValueError("planar loops cannot wind")
        if self.area < 0:
            raise ValueError("region area must be non-negative")
        if self.window is not None and self.area > self.window.area * (1 + 1e-9):
            raise ValueError("region area exceeds the fundamental domain")

    @classmethod
    def empty(cls, window: TorusWindow | None = None) -> "PolyconvexRegion":
        return cls((), 0.0, window)

    def loop_edges(self, i: int) -> np.ndarray:
        loop = self.loops[i]
        e = np.roll(loop, -1, axis=0) - loop
        if self.window is not None:
            e[-1] += self.shifts[i] * self.window.L
        return e

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """All boundary edges as ``(starts, vectors)``."""
        if "edges" not in self._edge_cache:
            if self.loops:
                starts = np.concatenate(self.loops)
                vecs = np.concatenate([self.loop_edges(i) for i in range(len(self.loops))])
            else:
                starts = vecs = np.zeros((0, 2))
            self._edge_cache["edges"] = (starts, vecs)
        return self._edge_cache["edges"]

    def normals(self) -> np.ndarray:
        """Outer unit normal of each edge, aligned with :meth:`edges`."""
        _, e = self.edges()
        lengths = np.hypot(e[:, 0], e[:, 1])
        return np.column_stack([e[:, 1], -e[:, 0]]) / lengths[:, None]

    def boundary_length(self) -> float:
        _, e = self.edges()
        return float(np.hypot(e[:, 0], e[:, 1]).sum())

    def turning_angles(self) -> np.ndarray:
        """Signed exterior angle at every vertex (left turns positive)."""
        out = []
        for i in range(len(self.loops)):
            e = self.loop_edges(i)
            prev = np.roll(e, 1, axis=0)
            cross = prev[:, 0] * e[:, 1] - prev[:, 1] * e[:, 0]
            dot = (prev * e).sum(axis=1)
            out.append(np.arctan2(cross, dot))
        return np.concatenate(out) if out else np.zeros(0)

    def contains(self, point) -> bool:
        """Point-in-region test by winding number (planar regions only)."""
        if self.window is not None:
            raise NotImplementedError("point location is only implemented for planar regions")
        p = np.asarray(point, dtype=float)
        wn = 0.0
        for loop in self.loops:
            d = loop - p
            a = np.arctan2(d[:, 1], d[:, 0])
            da = np.diff(np.append(a, a[0]))
            da = (da + np.pi) % (2 * np.pi) - np.pi
            wn += da.sum()
        return round(wn / (2 * np.pi)) != 0


def euler_characteristic(R: PolyconvexRegion) -> int:
    """Euler characteristic by discrete Gauss-Bonnet (sum of turning angles / 2 pi)."""
    total = R.turning_angles().sum() / (2.0 * np.pi)
    chi = int(round(total))
    if abs(total - chi) > 1e-6:
        raise UnionError(f"turning angles sum to non-integer multiple of 2 pi: {total}")
    return chi


def _placed(grains) -> list[np.ndarray]:
    out = []
    for item in grains:
        if isinstance(item, ConvexPolygon):
            out.append(item.vertices)
        else:
            P, c = item
            out.append(P.vertices + np.asarray(c, dtype=float))
    return out


def _rings(geom) -> list[np.ndarray]:
    """Oriented rings (occupied phase on the left) of a polygonal geometry."""
    rings = []
    for poly in shapely.orient_polygons(shapely.get_parts(geom), exterior_cw=False):
        if poly.geom_type != "Polygon" or poly.is_empty:
            continue
        for ring in [poly.exterior, *poly.interiors]:
            c = np.asarray(ring.coords)[:-1]
            if len(c) >= 3:
                rings.append(c)
    return rings


def clip_union(grains, window: ConvexPolygon) -> PolyconvexRegion:
    """Planar region ``(union of grains) cap window``.

    ``grains`` holds placed polygons: either ``ConvexPolygon`` in absolute
    coordinates or ``(polygon, center)`` pairs.
    """
    verts = _placed(grains)
    if not verts:
        return PolyconvexRegion.empty()
    u = shapely.union_all(shapely.polygons(_stack(verts)))
    geom = shapely.intersection(u, window.to_shapely())
    geom = _polygonal(geom)
    return PolyconvexRegion(tuple(_rings(geom)), float(geom.area), None)


def _polygonal(geom):
    parts = [g for g in shapely.get_parts(geom) if g.geom_type == "Polygon" and not g.is_empty]
    if not parts:
        return shapely.Polygon()
    return shapely.MultiPolygon(parts) if len(parts) > 1 else parts[0]


def _stack(verts: list[np.ndarray]):
    n = {v.shape[0] for v in verts}
    if len(n) == 1:
        return np.stack(verts)
    return [shapely.linearrings(v) for v in verts]


def union(grains, window: TorusWindow | None = None) -> PolyconvexRegion:
    """Union of placed convex grains, on the plane or on the flat torus ``window``.

    On the torus, grain centres are taken modulo ``L`` and each grain must fit
    the window (``L > 2 * circumradius`` about its centre).
    """
    if window is None:
        verts = _placed(grains)
        if not verts:
            return PolyconvexRegion.empty()
        u = _polygonal(shapely.union_all(shapely.polygons(_stack(verts))))
        return PolyconvexRegion(tuple(_rings(u)), float(u.area), None)

    L = window.L
    polys, centers = [], []
    for item in grains:
        if isinstance(item, ConvexPolygon):
            raise TypeError("torus union needs (polygon, center) pairs")
        P, c = item
        c = np.mod(np.asarray(c, dtype=float), L)
        if not P.circumradius() * 2.0 < L:
            raise ValueError("grain does not fit the torus window (L <= 2 * circumradius)")
        polys.append(P)
        centers.append(c)
    if not polys:
        return PolyconvexRegion.empty(window)
    return _torus_union(polys, np.array(centers), window)


def _torus_union(polys, centers, window: TorusWindow) -> PolyconvexRegion:
    L = window.L
    radii = np.array([P.circumradius() for P in polys])
    # union must be exact on [-margin, L + margin]^2 so every edge starting in
    # the domain ends inside the exact zone
    margin = 2.0 * radii.max()
    verts = []
    for P, c, rad in zip(polys, centers, radii):
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                cx, cy = c[0] + i * L, c[1] + j * L
                if (cx + rad < -margin or cx - rad > L + margin
                        or cy + rad < -margin or cy - rad > L + margin):
                    continue
                verts.append(P.vertices + (cx, cy))
    u = _polygonal(shapely.union_all(shapely.polygons(_stack(verts))))
    area = float(shapely.clip_by_rect(u, 0.0, 0.0, L, L).area)
    rings = _rings(u)
    if not rings:
        # either nothing (impossible here) or the torus is fully covered
        return PolyconvexRegion((), min(area, L * L), window)
    loops, shifts = _fold_onto_torus(rings, L)
    return PolyconvexRegion(loops, min(area, L * L), window, shifts)


def _fold_onto_torus(rings: list[np.ndarray], L: float):
    tol = SNAP_REL * L * 1e3
    starts, ends = [], []
    for r in rings:
        nxt = np.roll(r, -1, axis=0)
        inside = np.all((r >= -tol) & (r < L + tol), axis=1)
        starts.append(r[inside])
        ends.append(nxt[inside])
    starts = np.concatenate(starts)
    vec = np.concatenate(ends) - starts
    red = np.mod(starts, L)
    red[red >= L] -= L
    # the slack above can admit the same torus vertex twice; keep one copy
    tree = cKDTree(red, boxsize=L)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    if len(pairs):
        drop = np.zeros(len(red), dtype=bool)
        for a, b in pairs:
            if not drop[a] and not drop[b] and np.allclose(vec[a], vec[b], atol=10 * tol):
                drop[b] = True
        red, vec = red[~drop], vec[~drop]
        tree = cKDTree(red, boxsize=L)
    if len(red) == 0:
        return (), ()
    targets = np.mod(red + vec, L)
    targets[targets >= L] -= L
    dist, nxt = tree.query(targets, k=1)
    if np.any(dist > tol) or len(np.unique(nxt)) != len(nxt):
        raise UnionError("torus boundary edges do not stitch into closed loops")
    seen = np.zeros(len(red), dtype=bool)
    loops, shifts = [], []
    for k in range(len(red)):
        if seen[k]:
            continue
        idx = []
        i = k
        while not seen[i]:
            seen[i] = True
            idx.append(i)
            i = nxt[i]
        if i != k:
            raise UnionError("torus boundary stitching produced an open chain")
        steps = vec[idx]
        pos = red[idx[0]] + np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])
        # pos[-1] is the start vertex again, up to a lattice translation
        wind = np.round((pos[-1] - pos[0]) / L).astype(int)
        loops.append(pos[:-1])
        shifts.append(wind)
    return tuple(loops), tuple(shifts)
