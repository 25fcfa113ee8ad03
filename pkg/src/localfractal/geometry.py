"""Boxes, similitudes and partitions of a bounded domain.

Boxes are half-open, ``[lower, upper)`` per axis.  Grids used elsewhere in
the package live on the closure of the domain, so membership tests accept a
point on an upper face of a piece when that face is also an upper face of
the whole domain ("closure rule").
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# relative tolerance for boundary comparisons
EPS = 1e-12


def as_points(x, n: int) -> np.ndarray:
    """Coerce scalars, vectors or stacks of points to a float array of shape (N, n)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if n != 1:
            raise DomainError(f"scalar point given for dimension {n}")
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        if n == 1:
            return arr.reshape(-1, 1)
        if arr.shape[0] != n:
            raise DomainError(f"point of length {arr.shape[0]} given for dimension {n}")
        return arr.reshape(1, n)
    if arr.shape[-1] != n:
        raise DomainError(f"points of dimension {arr.shape[-1]} given for dimension {n}")
    return arr.reshape(-1, n)


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise DomainError("lower and upper corners differ in length")
        if len(lo) not in (1, 2):
            raise DomainError(f"only dimensions 1 and 2 are supported, got {len(lo)}")
        if not all(np.isfinite(lo + hi)):
            raise DomainError("box corners must be finite")
        if not all(a < b for a, b in zip(lo, hi)):
            raise DomainError(f"box requires lower < upper componentwise, got {lo}, {hi}")

    @classmethod
    def unit(cls, n: int = 1) -> "Box":
        return cls((0.0,) * n, (1.0,) * n)

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def measure(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def _tol(self) -> np.ndarray:
        return EPS * np.maximum(1.0, np.maximum(np.abs(self.lo), np.abs(self.hi)))

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lower, self.upper))))

    def contains(self, x, closed: bool = False, closure_of: "Box | None" = None) -> np.ndarray:
        """Vectorised membership test.

        ``closed=True`` tests the closed box.  Otherwise the box is half-open;
        with ``closure_of`` set, upper faces shared with that box are closed.
        """
        pts = as_points(x, self.n)
        tol = self._tol()
        lo_ok = pts >= self.lo - tol
        if closed:
            hi_ok = pts <= self.hi + tol
        else:
            hi_ok = pts < self.hi - tol
            if closure_of is not None:
                shared = np.abs(self.hi - closure_of.hi) <= tol
                hi_ok |= shared & (pts <= self.hi + tol)
        return np.all(lo_ok & hi_ok, axis=1)

    def contains_box(self, other: "Box") -> bool:
        tol = self._tol()
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def intersect(self, other: "Box") -> "Box | None":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(hi - lo <= self._tol()):
            return None
        return Box(tuple(lo), tuple(hi))


def _check_ortho(ortho: np.ndarray) -> None:
    if not np.allclose(ortho @ ortho.T, np.eye(ortho.shape[0]), rtol=0.0, atol=1e-12):
        raise DomainError("linear part of a similitude must be orthogonal")


@dataclass(frozen=True, eq=False)
class Similitude:
    """u(x) = gamma * O x + tau with O orthogonal (reflections allowed)."""

    gamma: float
    ortho: np.ndarray = field(default=None)
    tau: np.ndarray = field(default=None)

    def __post_init__(self):
        gamma = float(self.gamma)
        if not (gamma > 0 and np.isfinite(gamma)):
            raise DomainError(f"similitude ratio must be positive, got {self.gamma!r}")
        tau = np.atleast_1d(np.asarray(self.tau if self.tau is not None else 0.0, dtype=float))
        n = tau.shape[0]
        if self.ortho is None:
            ortho = np.eye(n)
        else:
            ortho = np.asarray(self.ortho, dtype=float)
            if ortho.ndim == 0:
                ortho = ortho.reshape(1, 1)
        if ortho.shape != (n, n):
            raise DomainError(f"ortho has shape {ortho.shape}, expected {(n, n)}")
        _check_ortho(ortho)
        ortho.setflags(write=False)
        tau.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "ortho", ortho)
        object.__setattr__(self, "tau", tau)

    def __eq__(self, other):
        if not isinstance(other, Similitude):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and np.array_equal(self.ortho, other.ortho)
            and np.array_equal(self.tau, other.tau)
        )

    def __hash__(self):
        return hash((self.gamma, self.ortho.tobytes(), self.tau.tobytes()))

    @property
    def n(self) -> int:
        return self.tau.shape[0]

    @property
    def axis_aligned(self) -> bool:
        """True when O is a signed permutation, so boxes map onto boxes."""
        return bool(np.all(np.isclose(np.abs(self.ortho), 0.0) | np.isclose(np.abs(self.ortho), 1.0)))

    def __call__(self, x) -> np.ndarray:
        return similitude_apply(self, x)

    def image_box(self, box: Box) -> Box | None:
        """Image of ``box`` when it is again a box, else ``None``."""
        if not self.axis_aligned:
            return None
        c = similitude_apply(self, box.corners())
        return Box(tuple(c.min(axis=0)), tuple(c.max(axis=0)))

    def bounding_box(self, box: Box) -> Box:
        c = similitude_apply(self, box.corners())
        return Box(tuple(c.min(axis=0)), tuple(c.max(axis=0)))


def similitude_apply(u: Similitude, x) -> np.ndarray:
    """Evaluate gamma * O x + tau; scalars in, scalars out in one dimension."""
    pts = as_points(x, u.n)
    out = u.gamma * pts @ u.ortho.T + u.tau
    if np.ndim(x) == 0:
        return out[0, 0]
    if np.ndim(x) == 1 and u.n > 1:
        return out[0]
    if np.ndim(x) == 1:
        return out[:, 0]
    return out


def similitude_invert(u: Similitude) -> Similitude:
    ortho_t = u.ortho.T
    return Similitude(1.0 / u.gamma, ortho_t, -(ortho_t @ u.tau) / u.gamma)


@dataclass(frozen=True)
class Piece:
    subdomain: Box
    map: Similitude

    def __post_init__(self):
        if self.subdomain.n != self.map.n:
            raise DomainError("subdomain and map dimensions differ")


@dataclass(frozen=True)
class Partition:
    domain: Box
    pieces: tuple[Piece, ...]

    def __post_init__(self):
        pieces = tuple(
            p if isinstance(p, Piece) else Piece(*p) for p in self.pieces
        )
        if not pieces:
            raise DomainError("a partition needs at least one piece")
        for p in pieces:
            if p.subdomain.n != self.domain.n:
                raise DomainError("piece dimension differs from the domain dimension")
        object.__setattr__(self, "pieces", pieces)

    @property
    def m(self) -> int:
        return len(self.pieces)

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def inverses(self) -> tuple[Similitude, ...]:
        return tuple(similitude_invert(p.map) for p in self.pieces)

    def image_boxes(self) -> list[Box | None]:
        return [p.map.image_box(p.subdomain) for p in self.pieces]


@dataclass
class ValidationReport:
    valid: bool
    method: str
    subdomains_inside: bool
    disjoint: bool
    covering: bool
    overlaps: list[tuple[int, int]] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)
    failure_points: list[tuple[float, ...]] = field(default_factory=list)

    def summary(self) -> str:
        head = "valid partition" if self.valid else "INVALID partition"
        lines = [f"{head} (checked {self.method})"]
        lines += [f"  - {msg}" for msg in self.messages]
        return "\n".join(lines)


def partition_validate(p: Partition, resolution: int = 512, max_failures: int = 20) -> ValidationReport:
    """Check the partition property: images of the pieces tile the domain.

    Axis-aligned images are checked exactly by box arithmetic; otherwise a
    probe grid of ``resolution`` cell centres per axis is used.  Pieces are
    reported 1-based in messages.
    """
    if resolution < 2:
        raise DomainError("resolution must be at least 2")
    messages: list[str] = []
    inside = True
    for i, piece in enumerate(p.pieces, 1):
        if not p.domain.contains_box(piece.subdomain):
            inside = False
            messages.append(f"subdomain X_{i} is not contained in X")

    images = p.image_boxes()
    overlaps: list[tuple[int, int]] = []
    failure_points: list[tuple[float, ...]] = []
    if all(b is not None for b in images):
        method = "exactly"
        disjoint = True
        for (i, a), (j, b) in itertools.combinations(enumerate(images, 1), 2):
            common = a.intersect(b)
            if common is not None:
                disjoint = False
                overlaps.append((i, j))
                messages.append(
                    f"images u_{i}(X_{i}) and u_{j}(X_{j}) overlap on "
                    f"{_fmt_box(common)}"
                )
        outside = [i for i, b in enumerate(images, 1) if not p.domain.contains_box(b)]
        for i in outside:
            messages.append(f"image u_{i}(X_{i}) = {_fmt_box(images[i - 1])} leaves X")
        total = sum(b.measure for b in images)
        covering = not outside and abs(total - p.domain.measure) <= 1e-12 * p.domain.measure
        if disjoint and not outside and not covering:
            messages.append(
                f"images do not cover X: total measure {total!r} vs {p.domain.measure!r}"
            )
        covering = covering and disjoint
    else:
        method = f"on a {resolution}^{p.n} probe grid"
        axes = [
            lo + (np.arange(resolution) + 0.5) * (hi - lo) / resolution
            for lo, hi in zip(p.domain.lower, p.domain.upper)
        ]
        probes = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        hits = np.zeros((p.m, probes.shape[0]), dtype=bool)
        for k, (piece, inv) in enumerate(zip(p.pieces, p.inverses)):
            hits[k] = piece.subdomain.contains(similitude_apply(inv, probes))
        count = hits.sum(axis=0)
        covering = bool(np.all(count >= 1))
        disjoint = bool(np.all(count <= 1))
        for i, j in itertools.combinations(range(p.m), 2):
            if np.any(hits[i] & hits[j]):
                overlaps.append((i + 1, j + 1))
                messages.append(f"images u_{i + 1}(X_{i + 1}) and u_{j + 1}(X_{j + 1}) overlap")
        bad = np.flatnonzero(count != 1)
        if not covering:
            messages.append(f"{int(np.sum(count == 0))} probe points are not covered by any image")
        failure_points = [tuple(map(float, probes[b])) for b in bad[:max_failures]]
    return ValidationReport(
        valid=inside and disjoint and covering,
        method=method,
        subdomains_inside=inside,
        disjoint=disjoint,
        covering=covering,
        overlaps=overlaps,
        messages=messages,
        failure_points=failure_points,
    )


def _fmt_box(b: Box) -> str:
    return " x ".join(f"[{lo:g},{hi:g})" for lo, hi in zip(b.lower, b.upper))


def locate_many(p: Partition, x) -> tuple[np.ndarray, np.ndarray]:
    """Piece indices (0-based) and preimages for a stack of points of the closed domain.

    Points covered by no piece get index -1 and a NaN preimage.
    """
    pts = as_points(x, p.n)
    index = np.full(pts.shape[0], -1, dtype=int)
    pre = np.full_like(pts, np.nan)
    images = p.image_boxes()
    for k, (piece, inv, img) in enumerate(zip(p.pieces, p.inverses, images)):
        todo = index < 0
        if not np.any(todo):
            break
        if img is not None:
            hit = img.contains(pts, closure_of=p.domain)
        else:
            y = similitude_apply(inv, pts)
            hit = piece.subdomain.contains(y, closure_of=p.domain)
        hit &= todo
        index[hit] = k
        pre[hit] = similitude_apply(inv, pts[hit])
    return index, pre


def locate(p: Partition, x) -> tuple[int, np.ndarray | float]:
    """Return the 1-based piece index i with x in u_i(X_i) and the preimage u_i^{-1}(x)."""
    pts = as_points(x, p.n)
    if pts.shape[0] != 1:
        raise DomainError("locate takes a single point; use locate_many for stacks")
    if not p.domain.contains(pts, closed=True)[0]:
        raise DomainError(f"point {pts[0].tolist()} lies outside the domain")
    index, pre = locate_many(p, pts)
    if index[0] < 0:
        raise DomainError(f"point {pts[0].tolist()} is not covered by any piece")
    y = pre[0]
    return int(index[0]) + 1, (float(y[0]) if p.n == 1 else y)


def halving_partition() -> Partition:
    """[0,1) split by x -> x/2 and x -> x/2 + 1/2."""
    unit = Box.unit(1)
    return Partition(
        unit,
        (
            Piece(unit, Similitude(0.5, None, [0.0])),
            Piece(unit, Similitude(0.5, None, [0.5])),
        ),
    )


def uniform_partition(m: int, domain: Box | None = None) -> Partition:
    """m equal pieces of a 1-D interval, each map of ratio 1/m without reflection."""
    domain = domain or Box.unit(1)
    a, b = domain.lower[0], domain.upper[0]
    w = (b - a) / m
    pieces = [
        Piece(domain, Similitude(1.0 / m, None, [a + k * w - a / m]))
        for k in range(m)
    ]
    return Partition(domain, tuple(pieces))

