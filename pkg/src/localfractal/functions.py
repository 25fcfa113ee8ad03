"""Function specifications (the lambda_i and S_i data) and sampled grid functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigurationError, DomainError
from .geometry import Box, as_points

MAX_DEGREE = 4
DEFAULT_PROBES = 4096


def multilinear(values: np.ndarray, box: Box, x) -> np.ndarray:
    """Multilinear interpolation of grid ``values`` (uniform over the closed ``box``).

    Points outside the box are clamped onto it.
    """
    pts = as_points(x, box.n)
    shape = values.shape
    idx0 = []
    frac = []
    for ax in range(box.n):
        npts = shape[ax]
        t = (pts[:, ax] - box.lower[ax]) / (box.upper[ax] - box.lower[ax]) * (npts - 1)
        t = np.clip(t, 0.0, npts - 1)
        i0 = np.minimum(np.floor(t).astype(int), npts - 2)
        idx0.append(i0)
        frac.append(t - i0)
    out = np.zeros(pts.shape[0])
    for corner in np.ndindex(*(2,) * box.n):
        w = np.ones(pts.shape[0])
        index = []
        for ax, c in enumerate(corner):
            w = w * (frac[ax] if c else 1.0 - frac[ax])
            index.append(idx0[ax] + c)
        out += w * values[tuple(index)]
    return out


class FunctionSpec:
    """A bounded real function on a box; subclasses define ``evaluate``."""

    domain: Box

    def evaluate(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        out = self.evaluate(x)
        return float(out[0]) if np.ndim(x) == 0 else out

    def sup_norm(self, box: Box | None = None, probes: int = DEFAULT_PROBES) -> float:
        """sup |f| over ``box`` (default: the whole domain of the spec)."""
        box = box or self.domain
        cache = self.__dict__.setdefault("_sup_cache", {})
        key = (box, probes)
        if key not in cache:
            cache[key] = self._sup_norm(box, probes)
        return cache[key]

    def _sup_norm(self, box: Box, probes: int) -> float:
        axes = [np.linspace(lo, hi, probes) for lo, hi in zip(box.lower, box.upper)]
        if box.n == 1:
            return float(np.max(np.abs(self.evaluate(axes[0]))))
        best = 0.0
        for x0 in np.array_split(axes[0], max(1, probes // 256)):
            gx, gy = np.meshgrid(x0, axes[1], indexing="ij")
            pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
            best = max(best, float(np.max(np.abs(self.evaluate(pts)))))
        return best

    @property
    def is_constant(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ConstantSpec(FunctionSpec):
    value: float
    domain: Box

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise DomainError("constant must be finite")
        object.__setattr__(self, "value", float(self.value))

    def evaluate(self, x) -> np.ndarray:
        return np.full(as_points(x, self.domain.n).shape[0], self.value)

    def _sup_norm(self, box, probes):
        return abs(self.value)

    @property
    def is_constant(self) -> bool:
        return True

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True, eq=False)
class PolynomialSpec(FunctionSpec):
    """Tensor polynomial; ``coefficients[j]`` (1-D) or ``[j][k]`` (2-D) multiplies x^j (y^k)."""

    coefficients: np.ndarray
    domain: Box

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if c.ndim != self.domain.n:
            raise DomainError(
                f"polynomial coefficients have {c.ndim} axes for a {self.domain.n}-D domain"
            )
        if any(s - 1 > MAX_DEGREE for s in c.shape):
            raise DomainError(f"polynomial degree per axis is limited to {MAX_DEGREE}")
        if not np.all(np.isfinite(c)):
            raise DomainError("polynomial coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def evaluate(self, x) -> np.ndarray:
        pts = as_points(x, self.domain.n)
        if self.domain.n == 1:
            return P.polyval(pts[:, 0], self.coefficients)
        return P.polyval2d(pts[:, 0], pts[:, 1], self.coefficients)

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.coefficients.ravel()[1:] == 0))

    def to_dict(self) -> dict:
        return {"kind": "polynomial", "coefficients": self.coefficients.tolist()}


@dataclass(frozen=True, eq=False)
class SampledSpec(FunctionSpec):
    """Samples on a uniform grid over the closed domain, multilinearly interpolated."""

    values: np.ndarray
    domain: Box

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != self.domain.n:
            raise DomainError(f"samples have {v.ndim} axes for a {self.domain.n}-D domain")
        if any(s < 2 for s in v.shape):
            raise DomainError("sampled specs need at least 2 points per axis")
        if not np.all(np.isfinite(v)):
            raise DomainError("samples must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def evaluate(self, x) -> np.ndarray:
        return multilinear(self.values, self.domain, x)

    def _sup_norm(self, box, probes):
        if box == self.domain:
            # multilinear interpolants attain extrema at nodes
            return float(np.max(np.abs(self.values)))
        return super()._sup_norm(box, probes)

    def to_dict(self) -> dict:
        return {"kind": "samples", "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class CombinedSpec(FunctionSpec):
    """Linear combination sum_k a_k f_k of specs sharing a domain."""

    terms: tuple[tuple[float, FunctionSpec], ...]
    domain: Box

    def evaluate(self, x) -> np.ndarray:
        return sum(a * f.evaluate(x) for a, f in self.terms)

    def to_dict(self) -> dict:
        return {"kind": "combination", "terms": [[a, f.to_dict()] for a, f in self.terms]}


def constant(value: float, domain: Box | None = None) -> ConstantSpec:
    return ConstantSpec(value, domain or Box.unit(1))


def polynomial(coefficients, domain: Box | None = None) -> PolynomialSpec:
    return PolynomialSpec(coefficients, domain or Box.unit(1))


def combine(a: float, f: FunctionSpec, b: float, g: FunctionSpec) -> FunctionSpec:
    """The spec a*f + b*g, kept polynomial when both inputs are."""
    if f.domain != g.domain:
        raise DomainError("cannot combine specs on different domains")
    if isinstance(f, ConstantSpec) and isinstance(g, ConstantSpec):
        return ConstantSpec(a * f.value + b * g.value, f.domain)
    polys = []
    for h in (f, g):
        if isinstance(h, ConstantSpec):
            polys.append(np.full((1,) * h.domain.n, h.value))
        elif isinstance(h, PolynomialSpec):
            polys.append(h.coefficients)
        else:
            return CombinedSpec(((a, f), (b, g)), f.domain)
    shape = tuple(max(s) for s in zip(polys[0].shape, polys[1].shape))
    c = np.zeros(shape)
    for w, pc in zip((a, b), polys):
        c[tuple(slice(0, s) for s in pc.shape)] += w * pc
    return PolynomialSpec(c, f.domain)


def spec_from_dict(d: dict, domain: Box) -> FunctionSpec:
    kind = d.get("kind")
    if kind == "constant":
        return ConstantSpec(d["value"], domain)
    if kind == "polynomial":
        return PolynomialSpec(d["coefficients"], domain)
    if kind == "samples":
        return SampledSpec(d["values"], domain)
    raise DomainError(f"unknown function kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values on the uniform (2^level + 1)^n grid over the closure of ``box``."""

    box: Box
    level: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.level < 1:
            raise ConfigurationError("grid level must be at least 1")
        v = np.array(self.values, dtype=float)
        npts = 2**self.level + 1
        if v.shape != (npts,) * self.box.n:
            raise ConfigurationError(
                f"values of shape {v.shape} do not match level {self.level} "
                f"(expected {(npts,) * self.box.n})"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("sampled values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, func, box: Box, level: int) -> "SampledFunction":
        pts = grid_points(box, level)
        vals = np.asarray(func(pts if box.n > 1 else pts[:, 0]), dtype=float)
        return cls(box, level, vals.reshape((2**level + 1,) * box.n))

    @classmethod
    def zeros(cls, box: Box, level: int) -> "SampledFunction":
        return cls(box, level, np.zeros((2**level + 1,) * box.n))

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def npts(self) -> int:
        return 2**self.level + 1

    @property
    def spacing(self) -> np.ndarray:
        return self.box.widths / 2**self.level

    def axes(self) -> list[np.ndarray]:
        return grid_axes(self.box, self.level)

    def points(self) -> np.ndarray:
        return grid_points(self.box, self.level)

    def interpolate(self, x) -> np.ndarray:
        return multilinear(self.values, self.box, x)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def grid_axes(box: Box, level: int) -> list[np.ndarray]:
    k = np.arange(2**level + 1)
    return [lo + k * ((hi - lo) / 2**level) for lo, hi in zip(box.lower, box.upper)]


def grid_points(box: Box, level: int) -> np.ndarray:
    axes = grid_axes(box, level)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)
