"""Difference-based estimates of L^p norms and Besov / Triebel-Lizorkin seminorms.

Differences are domain restricted: Delta_h^M f(x; X) is zero unless every
node x + mu*h (mu = 0..M) lies in the closed domain.  The h-integral over
R^n is truncated to h_min <= |h| <= h_max and discretised by a log-midpoint
rule in |h| times a uniform rule over directions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .conditions import SpaceParams
from .errors import ConfigurationError, DomainError
from .functions import SampledFunction, multilinear
from .geometry import as_points

DIVERGENCE_THRESHOLD = 0.20
DEFAULT_PER_OCTAVE = 8
DEFAULT_DIRECTIONS = 64


def binomial_weights(M: int) -> np.ndarray:
    """(-1)^(M-mu) C(M, mu) for mu = 0..M."""
    return np.array([(-1) ** (M - mu) * math.comb(M, mu) for mu in range(M + 1)], dtype=float)


@dataclass(frozen=True, eq=False)
class HGrid:
    """Quadrature nodes for the measure dh / |h|^n on h_min <= |h| <= h_max."""

    n: int
    h_min: float
    h_max: float
    count: int | None = None
    directions: int = DEFAULT_DIRECTIONS
    snap: float | None = None
    radii: np.ndarray = field(init=False, repr=False)
    radius_weights: np.ndarray = field(init=False, repr=False)
    unit_vectors: np.ndarray = field(init=False, repr=False)
    direction_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.h_min < self.h_max:
            raise ConfigurationError(f"need 0 < h_min < h_max, got {self.h_min!r}, {self.h_max!r}")
        span = math.log(self.h_max / self.h_min)
        count = self.count or max(1, math.ceil(DEFAULT_PER_OCTAVE * span / math.log(2)))
        edges = self.h_min * np.exp(np.linspace(0.0, span, count + 1))
        mids = np.sqrt(edges[:-1] * edges[1:])
        if self.snap:
            # 1-D: whole multiples of the grid spacing keep differences exact
            j = np.unique(np.clip(np.rint(mids / self.snap), 1, None))
            mids = j * self.snap
            mids = mids[(mids >= self.h_min * (1 - 1e-12)) & (mids <= self.h_max * (1 + 1e-12))]
            if mids.size == 0:
                raise ConfigurationError("no grid-aligned radius between h_min and h_max")
            inner = np.sqrt(mids[:-1] * mids[1:])
            edges = np.concatenate([[self.h_min], inner, [self.h_max]])
        weights = np.log(edges[1:] / edges[:-1])
        if self.n == 1:
            units = np.array([[1.0], [-1.0]])
            dw = np.ones(2)
        elif self.n == 2:
            theta = 2 * np.pi * np.arange(self.directions) / self.directions
            units = np.stack([np.cos(theta), np.sin(theta)], axis=1)
            dw = np.full(self.directions, 2 * np.pi / self.directions)
        else:
            raise DomainError("only dimensions 1 and 2 are supported")
        for name, arr in (("radii", mids), ("radius_weights", weights),
                          ("unit_vectors", units), ("direction_weights", dw)):
            arr = np.array(arr, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def with_h_min(self, h_min: float) -> "HGrid":
        count = None
        if self.count is not None:
            count = max(1, round(self.count * math.log(self.h_max / h_min) / math.log(self.h_max / self.h_min)))
        return replace(self, h_min=h_min, count=count)

    @property
    def direction_measure(self) -> float:
        return float(self.direction_weights.sum())


def make_hgrid(
    f: SampledFunction,
    h_min: float | None = None,
    h_max: float | None = None,
    count: int | None = None,
    directions: int = DEFAULT_DIRECTIONS,
) -> HGrid:
    """Default h-grid for a sampled function: h_min = 4 spacings, h_max = diam(X)."""
    spacing = float(np.max(f.spacing))
    h_min = 4 * spacing if h_min is None else float(h_min)
    h_max = f.box.diameter if h_max is None else float(h_max)
    snap = spacing if f.n == 1 else None
    return HGrid(f.n, h_min, h_max, count, directions, snap)


@dataclass
class SeminormEstimate:
    value: float
    h_range: tuple[float, float]
    level: int
    divergence_flag: bool
    coarse_value: float
    profile: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self, with_profile: bool = False) -> dict:
        d = {
            "value": self.value,
            "h_range": list(self.h_range),
            "level": self.level,
            "divergence_flag": self.divergence_flag,
            "coarse_value": self.coarse_value,
        }
        if with_profile:
            d["profile"] = [list(r) for r in self.profile]
        return d


def trapezoid_weights(f: SampledFunction) -> np.ndarray:
    w = np.ones((f.npts,) * f.n)
    for ax in range(f.n):
        edge = [slice(None)] * f.n
        for k in (0, -1):
            edge[ax] = k
            w[tuple(edge)] *= 0.5
        w *= f.spacing[ax]
    return w.ravel()


def _lp(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    a = np.abs(values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    top = a.max() if a.size else 0.0
    if top == 0:
        return 0.0
    return float(top * np.sum(weights * (a / top) ** p) ** (1.0 / p))


def lp_norm_grid(f: SampledFunction, p: float) -> float:
    """Composite trapezoidal L^p quasi-norm over X (grid maximum for p = inf)."""
    if not p > 0:
        raise DomainError("p must be positive")
    return _lp(f.values.ravel(), trapezoid_weights(f), p)


def _nodes_inside(f: SampledFunction, pts: np.ndarray) -> np.ndarray:
    return f.box.contains(pts, closed=True)


def difference_field(f: SampledFunction, h, M: int, cells=None, keep: str = "inside") -> np.ndarray:
    """Delta_h^M f(x; X) at every grid point x (flattened, C order).

    With ``cells`` (a list of half-open boxes, closed on faces shared with the
    domain) only stencils whose end points share a cell are kept (``keep="inside"``), or only those that do not
    (``keep="crossing"``).
    """
    if M < 1:
        raise DomainError("difference order M must be at least 1")
    h = np.asarray(h, dtype=float).reshape(f.n)
    out = _difference_field(f, h, M)
    if cells is None:
        return out
    if keep not in ("inside", "crossing"):
        raise DomainError(f"keep must be 'inside' or 'crossing', got {keep!r}")
    pts = f.points()
    same = np.zeros(pts.shape[0], dtype=bool)
    for box in cells:
        same |= box.contains(pts, closure_of=f.box) & box.contains(pts + M * h, closure_of=f.box)
    out[same if keep == "crossing" else ~same] = 0.0
    return out


def _difference_field(f: SampledFunction, h: np.ndarray, M: int) -> np.ndarray:
    coeff = binomial_weights(M)
    steps = h / f.spacing
    shift = np.rint(steps)
    npts = f.npts
    if np.all(np.abs(steps - shift) <= 1e-9):
        shift = shift.astype(int)
        out = np.zeros((npts,) * f.n)
        lo = [max(0, -M * j) for j in shift]
        hi = [npts - max(0, M * j) for j in shift]
        if any(a >= b for a, b in zip(lo, hi)):
            return out.ravel()
        acc = np.zeros(tuple(b - a for a, b in zip(lo, hi)))
        for mu, c in enumerate(coeff):
            sl = tuple(slice(a + mu * j, b + mu * j) for a, b, j in zip(lo, hi, shift))
            acc += c * f.values[sl]
        out[tuple(slice(a, b) for a, b in zip(lo, hi))] = acc
        return out.ravel()
    pts = f.points()
    valid = _nodes_inside(f, pts + M * h) & _nodes_inside(f, pts)
    out = np.zeros(pts.shape[0])
    if not np.any(valid):
        return out
    base = pts[valid]
    acc = np.zeros(base.shape[0])
    for mu, c in enumerate(coeff):
        acc += c * multilinear(f.values, f.box, base + mu * h)
    out[valid] = acc
    return out


def forward_difference(f: SampledFunction, x, h, M: int, X=None) -> float:
    """Domain-restricted M-th forward difference at one point (0 if a node leaves X)."""
    if M < 1:
        raise DomainError("difference order M must be at least 1")
    box = X or f.box
    x = as_points(x, f.n)[0]
    h = as_points(h, f.n)[0]
    nodes = np.array([x + mu * h for mu in range(M + 1)])
    if not np.all(box.contains(nodes, closed=True)):
        return 0.0
    return float(binomial_weights(M) @ f.interpolate(nodes))


def _check_h(f: SampledFunction, hg: HGrid) -> None:
    spacing = float(np.max(f.spacing))
    if hg.h_min < spacing * (1 - 1e-9):
        raise ConfigurationError(
            f"h_min = {hg.h_min!r} is below the grid spacing; minimum admissible value is {spacing!r}"
        )
    if hg.n != f.n:
        raise ConfigurationError("h-grid dimension differs from the function dimension")


def _map(fn, items, workers: int):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            yield from ex.map(fn, items)
    else:
        yield from map(fn, items)


def _besov(f: SampledFunction, sp: SpaceParams, hg: HGrid, workers: int, cells=None, keep="inside"):
    w = trapezoid_weights(f)
    q, s = sp.q, sp.s

    def per_radius(k):
        r = hg.radii[k]
        return [r**-s * _lp(difference_field(f, r * e, sp.M, cells, keep), w, sp.p) for e in hg.unit_vectors]

    total = 0.0
    profile = []
    for k, terms in enumerate(_map(per_radius, range(hg.radii.size), workers)):
        terms = np.array(terms)
        if math.isinf(q):
            total = max(total, float(terms.max()))
            profile.append((float(hg.radii[k]), float(terms.max())))
        else:
            part = float(np.sum(hg.direction_weights * terms**q))
            total += hg.radius_weights[k] * part
            profile.append((float(hg.radii[k]), (part / hg.direction_measure) ** (1.0 / q)))
    value = total if math.isinf(q) else total ** (1.0 / q)
    return float(value), profile


def _triebel(f: SampledFunction, sp: SpaceParams, hg: HGrid, workers: int, cells=None, keep="inside"):
    w = trapezoid_weights(f)
    q, s = sp.q, sp.s

    def per_radius(k):
        r = hg.radii[k]
        a = np.stack([r**-s * np.abs(difference_field(f, r * e, sp.M, cells, keep)) for e in hg.unit_vectors])
        if math.isinf(q):
            return a.max(axis=0)
        return hg.direction_weights @ a**q

    inner = np.zeros(f.values.size)
    profile = []
    for k, part in enumerate(_map(per_radius, range(hg.radii.size), workers)):
        if math.isinf(q):
            inner = np.maximum(inner, part)
            profile.append((float(hg.radii[k]), _lp(part, w, sp.p)))
        else:
            inner += hg.radius_weights[k] * part
            profile.append((float(hg.radii[k]), _lp((part / hg.direction_measure) ** (1.0 / q), w, sp.p)))
    if not math.isinf(q):
        inner = inner ** (1.0 / q)
    return _lp(inner, w, sp.p), profile


def _estimate(kernel, f, sp, hg, workers, **kw) -> SeminormEstimate:
    _check_h(f, hg)
    value, profile = kernel(f, sp, hg, workers, **kw)
    coarse, _ = kernel(f, sp, hg.with_h_min(2 * hg.h_min), workers, **kw)
    change = abs(value - coarse)
    flag = bool(change > DIVERGENCE_THRESHOLD * abs(coarse) + 1e-12)
    return SeminormEstimate(value, (hg.h_min, hg.h_max), f.level, flag, coarse, profile)


def besov_seminorm_estimate(
    f: SampledFunction, sp: SpaceParams, hg: HGrid | None = None, workers: int = 1
) -> SeminormEstimate:
    """Discretised homogeneous Besov seminorm |f|_{B^s_{p,q}}.

    ``divergence_flag`` is set when the estimate over [h_min, h_max] differs by
    more than 20% from the one over [2 h_min, h_max].
    """
    return _estimate(_besov, f, sp, hg or make_hgrid(f), workers)


def triebel_seminorm_estimate(
    f: SampledFunction, sp: SpaceParams, hg: HGrid | None = None, workers: int = 1
) -> SeminormEstimate:
    """Discretised homogeneous Triebel-Lizorkin seminorm (inner h-integral, outer L^p)."""
    if math.isinf(sp.p):
        raise ConfigurationError("Triebel-Lizorkin seminorms need p < inf")
    return _estimate(_triebel, f, sp, hg or make_hgrid(f), workers)


@dataclass
class NormBreakdown:
    lp_part: float
    seminorm_part: float
    estimate: SeminormEstimate

    @property
    def value(self) -> float:
        return self.lp_part + self.seminorm_part

    def to_dict(self) -> dict:
        return {"value": self.value, "lp_part": self.lp_part, "seminorm_part": self.seminorm_part,
                "divergence_flag": self.estimate.divergence_flag}


def full_norm(
    f: SampledFunction, sp: SpaceParams, hg: HGrid | None = None, family: str = "B", workers: int = 1
) -> NormBreakdown:
    """||f||_{L^p} + |f|_{B or F}, itemised."""
    family = family.upper()
    if family == "B":
        est = besov_seminorm_estimate(f, sp, hg, workers)
    elif family == "F":
        est = triebel_seminorm_estimate(f, sp, hg, workers)
    else:
        raise DomainError(f"family must be 'B' or 'F', got {family!r}")
    return NormBreakdown(lp_norm_grid(f, sp.p), est.value, est)


@dataclass
class PieceSplit:
    """Seminorm estimate split into differences inside one piece and across pieces."""

    total: SeminormEstimate
    interior: SeminormEstimate
    boundary: SeminormEstimate

    def to_dict(self) -> dict:
        return {"total": self.total.to_dict(), "interior": self.interior.to_dict(),
                "boundary": self.boundary.to_dict()}


def piece_split_estimate(
    f: SampledFunction, sp: SpaceParams, cells, hg: HGrid | None = None,
    family: str = "B", workers: int = 1,
) -> PieceSplit:
    """Estimates from all differences, from those inside a single cell and from the rest."""
    family = family.upper()
    if family not in ("B", "F"):
        raise DomainError(f"family must be 'B' or 'F', got {family!r}")
    if family == "F" and math.isinf(sp.p):
        raise ConfigurationError("Triebel-Lizorkin seminorms need p < inf")
    kernel = _besov if family == "B" else _triebel
    hg = hg or make_hgrid(f)
    cells = list(cells)
    return PieceSplit(
        _estimate(kernel, f, sp, hg, workers),
        _estimate(kernel, f, sp, hg, workers, cells=cells, keep="inside"),
        _estimate(kernel, f, sp, hg, workers, cells=cells, keep="crossing"),
    )
