"""Set-valued local IFS operator on finite point clouds, attractor iteration and codes."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError
from .functions import FunctionSpec, SampledFunction
from .geometry import Box, Partition, Similitude, similitude_apply
from .rb import LocalFractalSystem, RBOperator, rb_apply

log = logging.getLogger(__name__)

SNAP = 1e-12


@dataclass(frozen=True)
class LocalMap:
    """One map of a local IFS: ``func`` acts on the points of ``domain``.

    ``domain`` is a box of the base space; for graph systems the last
    coordinate is constrained to ``y_range`` as well.  ``ratio`` bounds the
    Lipschitz constant used for code-space diameters.
    """

    domain: Box
    func: Callable[[np.ndarray], np.ndarray]
    ratio: float
    y_range: tuple[float, float] | None = None


@dataclass(frozen=True)
class LocalMapSystem:
    maps: tuple[LocalMap, ...]
    ambient: Box
    y_range: tuple[float, float] | None = None
    # closed domains for compact-set iteration; half-open ones match the partition semantics
    closed: bool = True

    @property
    def dim(self) -> int:
        return self.ambient.n + (1 if self.y_range is not None else 0)

    @property
    def m(self) -> int:
        return len(self.maps)

    def member(self, k: int, pts: np.ndarray) -> np.ndarray:
        mp = self.maps[k]
        n = self.ambient.n
        base = pts[:, :n]
        if self.closed:
            ok = mp.domain.contains(base, closed=True)
        else:
            ok = mp.domain.contains(base)
        if mp.y_range is not None:
            y = pts[:, n]
            ok &= (y >= mp.y_range[0]) & (y <= mp.y_range[1])
        return ok


def ifs_from_partition(p: Partition, closed: bool = True) -> LocalMapSystem:
    """The base-space local IFS {X; (X_i, u_i)}."""
    maps = tuple(LocalMap(piece.subdomain, _similitude_func(piece.map), piece.map.gamma)
                 for piece in p.pieces)
    return LocalMapSystem(maps, p.domain, None, closed)


def ifs_from_maps(ambient: Box, pieces: Sequence[tuple[Box, Similitude]], closed: bool = True) -> LocalMapSystem:
    maps = tuple(LocalMap(b, _similitude_func(u), u.gamma) for b, u in pieces)
    return LocalMapSystem(maps, ambient, None, closed)


def _similitude_func(u: Similitude):
    return lambda pts: similitude_apply(u, pts.reshape(-1, u.n)).reshape(-1, u.n)


def _graph_func(u: Similitude, lam: FunctionSpec, s: FunctionSpec):
    n = u.n

    def w(pts: np.ndarray) -> np.ndarray:
        x, y = pts[:, :n], pts[:, n]
        out = np.empty_like(pts)
        out[:, :n] = similitude_apply(u, x).reshape(-1, n)
        out[:, n] = lam.evaluate(x) + s.evaluate(x) * y
        return out

    return w


def wloc_system(sys: LocalFractalSystem, y_bound: float, closed: bool = False) -> LocalMapSystem:
    """Graph-space local IFS w_i(x, y) = (u_i(x), lambda_i(x) + S_i(x) y) on X x [-y_bound, y_bound]."""
    if not y_bound > 0:
        raise DomainError("y_bound must be positive")
    c = sys.max_scaling()
    if not c < 1:
        raise DomainError(f"graph IFS needs max ||S_i|| < 1, got {c!r}")
    yr = (-float(y_bound), float(y_bound))
    maps = tuple(
        LocalMap(piece.subdomain, _graph_func(piece.map, lam, s), max(piece.map.gamma, c), yr)
        for piece, lam, s in zip(sys.partition.pieces, sys.lambdas, sys.scalings)
    )
    return LocalMapSystem(maps, sys.domain, yr, closed)


def as_cloud(points, dim: int) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.zeros((0, dim))
    arr = arr.reshape(-1, dim) if arr.ndim != 2 or arr.shape[1] != dim else arr
    if not np.all(np.isfinite(arr)):
        raise DomainError("point coordinates must be finite")
    return arr


def dedupe(points: np.ndarray, cell: float = SNAP) -> np.ndarray:
    """Keep the first point of every ``cell``-sized lattice cell, in input order."""
    if points.shape[0] == 0:
        return points
    keys = np.floor(points / cell + 0.5).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]


def floc_apply(sys: LocalMapSystem, S) -> np.ndarray:
    """Union over i of f_i(S intersected with X_i); points in no domain are dropped."""
    pts = as_cloud(S, sys.dim)
    if pts.shape[0] == 0:
        return pts
    out = []
    for k, mp in enumerate(sys.maps):
        sel = sys.member(k, pts)
        if np.any(sel):
            out.append(mp.func(pts[sel]))
    if not out:
        return np.zeros((0, sys.dim))
    return dedupe(np.concatenate(out))


def hausdorff_distance(A, B) -> float:
    """Brute-force Hausdorff distance between two finite non-empty point sets."""
    a, b = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DomainError("Hausdorff distance needs non-empty sets")
    if a.shape[1] != b.shape[1]:
        raise DomainError("point sets live in different dimensions")
    return max(_directed(a, b), _directed(b, a))


def _directed(a: np.ndarray, b: np.ndarray, chunk: int = 2048) -> float:
    best = 0.0
    for start in range(0, a.shape[0], chunk):
        d = np.sqrt(((a[start:start + chunk, None, :] - b[None, :, :]) ** 2).sum(axis=2))
        best = max(best, float(d.min(axis=1).max()))
    return best


def hausdorff_kdtree(a: np.ndarray, b: np.ndarray) -> float:
    """Same metric as :func:`hausdorff_distance`, via nearest-neighbour trees."""
    da = cKDTree(b).query(a)[0].max()
    db = cKDTree(a).query(b)[0].max()
    return float(max(da, db))


def directed_distance(a: np.ndarray, b: np.ndarray) -> float:
    """sup over a of dist(a, B)."""
    return float(cKDTree(b).query(a)[0].max())


@dataclass
class AttractorRun:
    points: np.ndarray
    distances: list[float]
    floors: list[float]
    empty: bool = False


def default_k0(sys: LocalMapSystem, points: int = 4096) -> np.ndarray:
    """Uniform grid sample of the closed ambient space with about ``points`` points."""
    per_axis = max(2, int(round(points ** (1.0 / sys.dim))))
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(sys.ambient.lower, sys.ambient.upper)]
    if sys.y_range is not None:
        axes.append(np.linspace(sys.y_range[0], sys.y_range[1], per_axis))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _spacing_floor(k0: np.ndarray) -> float:
    if k0.shape[0] < 2:
        return 0.0
    d, _ = cKDTree(k0).query(k0, k=2)
    return float(d[:, 1].max())


def iterate_attractor(
    sys: LocalMapSystem, K0=None, steps: int = 12, max_points: int = 1 << 16
) -> AttractorRun:
    """K_l = F_loc(K_{l-1}) with the Hausdorff distance d(K_{l-1}, K_l) of every step.

    Clouds larger than ``max_points`` are thinned by merging points that share
    a lattice cell (doubling the cell until the cap holds); each distance is
    reported with its resolution floor (sample spacing of K0 or thinning cell).
    """
    if steps < 0:
        raise DomainError("steps must be non-negative")
    K = default_k0(sys) if K0 is None else as_cloud(K0, sys.dim)
    if K.shape[0] == 0:
        raise DomainError("K0 must be non-empty")
    base_floor = _spacing_floor(K)
    distances: list[float] = []
    floors: list[float] = []
    cell = 0.0
    for _ in range(steps):
        nxt = floc_apply(sys, K)
        if nxt.shape[0] == 0:
            log.warning("attractor iteration collapsed to the empty set")
            return AttractorRun(nxt, distances, floors, empty=True)
        if nxt.shape[0] > max_points:
            cell = max(cell, base_floor / 4 or 1e-6)
            while nxt.shape[0] > max_points:
                nxt = dedupe(nxt, cell)
                if nxt.shape[0] > max_points:
                    cell *= 2
        distances.append(hausdorff_kdtree(K, nxt))
        floors.append(max(base_floor, cell))
        K = nxt
    return AttractorRun(K, distances, floors)


def graph_points(f: SampledFunction, half_open: bool = True) -> np.ndarray:
    """(x, f(x)) for the grid points of X; the upper faces are dropped when ``half_open``."""
    pts = f.points()
    vals = f.values.ravel()
    if half_open:
        keep = f.box.contains(pts)
        pts, vals = pts[keep], vals[keep]
    return np.column_stack([pts, vals])


def preimage_graph(sys: LocalFractalSystem, f: SampledFunction) -> np.ndarray:
    """(y, f(y)) for the preimages y = u_i^{-1}(x') of the grid points x' of X.

    For a grid-compatible system these y are grid points, so the sample is exact.
    """
    op = RBOperator(sys, f.level)
    keep = sys.domain.contains(f.points())
    y = op.preimages[keep]
    fy = op.pull(f.values)[keep]
    return dedupe(np.column_stack([y, fy]))


def graph_identity_sets(sys: LocalFractalSystem, f: SampledFunction, y_bound: float | None = None):
    """Both sides of graph(Phi f) = W_loc(graph f) on a sampled graph.

    Returns ``(graph of Phi f on the grid of X, W_loc applied to the sampled
    graph of f over the grid preimages)``.
    """
    pre = preimage_graph(sys, f)
    bound = y_bound or max(1.0, 2 * float(np.max(np.abs(pre[:, -1]))))
    lhs = graph_points(rb_apply(sys, f))
    rhs = floc_apply(wloc_system(sys, bound), pre)
    return lhs, rhs


def same_point_set(a: np.ndarray, b: np.ndarray, tol: float = SNAP) -> bool:
    """Equality of finite point sets after snapping to ``tol``."""
    ka = np.unique(np.floor(a / tol + 0.5).astype(np.int64), axis=0)
    kb = np.unique(np.floor(b / tol + 0.5).astype(np.int64), axis=0)
    if ka.shape == kb.shape and np.array_equal(ka, kb):
        return True
    if a.shape[0] == 0 or b.shape[0] == 0:
        return False
    # snapping can split equal points across a cell boundary
    return ka.shape[0] == kb.shape[0] and hausdorff_kdtree(a, b) <= tol


@dataclass
class Address:
    point: np.ndarray
    diameter: float
    valid_length: int
    requested_length: int

    @property
    def complete(self) -> bool:
        return self.valid_length == self.requested_length


def _compose(sys: LocalMapSystem, code: list[int]) -> tuple[Box, float] | None:
    current, diameter = sys.ambient, sys.ambient.diameter
    for c in reversed(code):
        mp = sys.maps[c - 1]
        part = current.intersect(mp.domain)
        if part is None:
            return None
        corners = mp.func(part.corners())
        current = Box(tuple(corners.min(axis=0)), tuple(corners.max(axis=0)))
        diameter *= mp.ratio
    return current, diameter


def address_point(sys: LocalMapSystem, code: Sequence[int]) -> Address:
    """Centre and diameter bound of f_{c1} o ... o f_{ck}(X) for a base-space IFS.

    The innermost map is applied first, to X intersected with its domain.  If
    some intermediate set misses the next domain, the longest prefix of the
    code that composes is used and ``valid_length`` says how long it is.
    """
    code = [int(c) for c in code]
    if not code:
        raise DomainError("code must be non-empty")
    if any(c < 1 or c > sys.m for c in code):
        raise DomainError(f"code entries must lie in 1..{sys.m}")
    if sys.y_range is not None:
        raise DomainError("address_point works on base-space systems")
    for k in range(len(code), 0, -1):
        res = _compose(sys, code[:k])
        if res is not None:
            box, diameter = res
            return Address(box.center, diameter, k, len(code))
    return Address(sys.ambient.center, sys.ambient.diameter, 0, len(code))


def code_metric(a: Sequence[int], b: Sequence[int], m: int) -> float:
    """sum_n |a_n - b_n| / (m + 1)^n over the compared prefix (n starting at 1)."""
    if len(a) != len(b):
        raise DomainError("codes must have equal length; pad explicitly")
    for c in list(a) + list(b):
        if int(c) != c or c < 1 or c > m:
            raise DomainError(f"code entries must lie in 1..{m}")
    return float(sum(abs(x - y) / (m + 1) ** k for k, (x, y) in enumerate(zip(a, b), 1)))

