"""Read-Bajraktarevic operator, its fixed point and pointwise evaluation.

On a grid the operator is affine, ``(Phi f)(x') = c(x') + s(x') * f(u_i^{-1} x')``,
so it is assembled once into an :class:`RBOperator` (offsets ``c``, factors
``s`` and a lookup/interpolation map for ``f(u_i^{-1} x')``) and iterated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, ContractionError, DomainError
from .functions import DEFAULT_PROBES, FunctionSpec, SampledFunction, combine, grid_points
from .geometry import Partition, as_points, locate_many

log = logging.getLogger(__name__)

# preimages closer than this (in grid units) to a node are treated as on-grid
_NODE_TOL = 1e-9


@dataclass(frozen=True)
class LocalFractalSystem:
    partition: Partition
    lambdas: tuple[FunctionSpec, ...]
    scalings: tuple[FunctionSpec, ...]
    probes: int = DEFAULT_PROBES

    def __post_init__(self):
        lambdas, scalings = tuple(self.lambdas), tuple(self.scalings)
        m = self.partition.m
        if len(lambdas) != m or len(scalings) != m:
            raise DomainError(
                f"need {m} lambda and scaling specs, got {len(lambdas)} and {len(scalings)}"
            )
        for i, (piece, lam, s) in enumerate(zip(self.partition.pieces, lambdas, scalings), 1):
            if lam.domain != piece.subdomain or s.domain != piece.subdomain:
                raise DomainError(f"lambda_{i} and S_{i} must be defined on X_{i}")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "scalings", scalings)

    @property
    def m(self) -> int:
        return self.partition.m

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def domain(self):
        return self.partition.domain

    def scaling_sups(self) -> list[float]:
        return [s.sup_norm(probes=self.probes) for s in self.scalings]

    def lambda_sups(self) -> list[float]:
        return [lam.sup_norm(probes=self.probes) for lam in self.lambdas]

    def max_scaling(self) -> float:
        return max(self.scaling_sups())

    def with_lambdas(self, lambdas) -> "LocalFractalSystem":
        return LocalFractalSystem(self.partition, tuple(lambdas), self.scalings, self.probes)


@dataclass
class SolveDiagnostics:
    iterations: int
    final_residual: float
    converged: bool
    step_changes: list[float] = field(default_factory=list)
    # ratio of consecutive step changes; the first entry has no predecessor (nan)
    contraction_history: list[float] = field(default_factory=list)
    grid_compatible: bool = True

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "converged": self.converged,
            "grid_compatible": self.grid_compatible,
            "step_changes": self.step_changes,
            "contraction_history": [None if math.isnan(r) else r for r in self.contraction_history],
        }


class RBOperator:
    """The operator of a system discretised on the level-``level`` grid."""

    def __init__(self, sys: LocalFractalSystem, level: int):
        self.sys = sys
        self.level = level
        box = sys.domain
        pts = grid_points(box, level)
        index, pre = locate_many(sys.partition, pts)
        if np.any(index < 0):
            raise DomainError("some grid points are covered by no piece image")
        missing = sorted(set(range(sys.m)) - set(index.tolist()))
        if missing:
            raise ConfigurationError(
                f"grid level {level} is too coarse: no grid point falls in the image of "
                f"piece(s) {[i + 1 for i in missing]}"
            )
        offset = np.empty(pts.shape[0])
        factor = np.empty(pts.shape[0])
        for k in range(sys.m):
            sel = index == k
            offset[sel] = sys.lambdas[k].evaluate(pre[sel])
            factor[sel] = sys.scalings[k].evaluate(pre[sel])
        self.offset = offset
        self.factor = factor
        self.index = index
        self.preimages = pre

        npts = 2**level + 1
        t = (pre - box.lo) / box.widths * (npts - 1)
        nodes = np.rint(t)
        self.grid_compatible = bool(np.all(np.abs(t - nodes) <= _NODE_TOL))
        if self.grid_compatible:
            nodes = np.clip(nodes.astype(int), 0, npts - 1)
            self._lookup = np.ravel_multi_index(tuple(nodes.T), (npts,) * box.n)
            self._interp = None
        else:
            log.info("system is not grid compatible at level %d; using multilinear interpolation", level)
            self._lookup = None
            self._interp = _interpolation_matrix(t, npts, box.n)
        self.shape = (npts,) * box.n

    def pull(self, values: np.ndarray) -> np.ndarray:
        """f(u_i^{-1} x') for every grid point x' (flattened)."""
        flat = np.asarray(values).ravel()
        if self._lookup is not None:
            return flat[self._lookup]
        return self._interp @ flat

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        return (self.offset + self.factor * self.pull(values)).reshape(self.shape)

    def __call__(self, f: SampledFunction) -> SampledFunction:
        self._check(f)
        return SampledFunction(f.box, f.level, self.apply_values(f.values))

    def _check(self, f: SampledFunction) -> None:
        if f.box != self.sys.domain or f.level != self.level:
            raise ConfigurationError("sampled function grid does not match the operator grid")


def _interpolation_matrix(t: np.ndarray, npts: int, n: int) -> sparse.csr_matrix:
    t = np.clip(t, 0.0, npts - 1)
    i0 = np.minimum(np.floor(t).astype(int), npts - 2)
    fr = t - i0
    rows, cols, vals = [], [], []
    r = np.arange(t.shape[0])
    for corner in np.ndindex(*(2,) * n):
        w = np.ones(t.shape[0])
        idx = []
        for ax, c in enumerate(corner):
            w = w * (fr[:, ax] if c else 1.0 - fr[:, ax])
            idx.append(i0[:, ax] + c)
        rows.append(r)
        cols.append(np.ravel_multi_index(tuple(idx), (npts,) * n))
        vals.append(w)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(t.shape[0], npts**n),
    )


def rb_apply(sys: LocalFractalSystem, f: SampledFunction) -> SampledFunction:
    """One application of the operator to a sampled function."""
    return RBOperator(sys, f.level)(f)


def _check_contraction(sys: LocalFractalSystem) -> float:
    c = sys.max_scaling()
    if not c < 1.0:
        raise ContractionError(c)
    return c


def fixed_point(
    sys: LocalFractalSystem,
    level: int = 10,
    tol: float = 1e-10,
    max_iter: int = 200,
    initial: SampledFunction | None = None,
    operator: RBOperator | None = None,
) -> tuple[SampledFunction, SolveDiagnostics]:
    """Banach iteration from ``initial`` (default: zero) to the fixed point.

    Stops at the first iterate whose residual ``||Phi f - f||_inf`` is below
    ``tol``.  If ``max_iter`` is exhausted the last iterate is returned with
    ``converged=False`` and a warning is logged.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    _check_contraction(sys)
    op = operator or RBOperator(sys, level)
    f = np.zeros(op.shape) if initial is None else np.array(initial.values, dtype=float)
    if initial is not None:
        op._check(initial)
    g = op.apply_values(f)
    steps: list[float] = []
    ratios: list[float] = []
    residual = math.inf
    converged = False
    for _ in range(max_iter):
        step = float(np.max(np.abs(g - f)))
        ratios.append(step / steps[-1] if steps and steps[-1] > 0 else math.nan)
        steps.append(step)
        f = g
        g = op.apply_values(f)
        residual = float(np.max(np.abs(g - f)))
        if residual < tol:
            converged = True
            break
    if not converged:
        log.warning("fixed point iteration did not converge: residual %.3e after %d iterations",
                    residual, len(steps))
    diag = SolveDiagnostics(
        iterations=len(steps),
        final_residual=residual,
        converged=converged,
        step_changes=steps,
        contraction_history=ratios,
        grid_compatible=op.grid_compatible,
    )
    return SampledFunction(sys.domain, op.level, f), diag


@dataclass
class PointEvaluation:
    value: float
    truncation_bound: float
    depth_reached: int
    address: list[int]
    exited: bool = False


def evaluate_exact(sys: LocalFractalSystem, x, depth: int) -> PointEvaluation:
    """Unroll f(x) = lambda_i(y) + S_i(y) f(y), y = u_i^{-1}(x), ``depth`` times.

    The returned bound is (max ||S_i||)^k * ||f||_inf with ||f||_inf estimated
    by max ||lambda_i|| / (1 - max ||S_i||), k the depth actually reached.
    """
    if depth < 1:
        raise DomainError("depth must be at least 1")
    pts = as_points(x, sys.n)
    if pts.shape[0] != 1:
        raise DomainError("evaluate_exact takes a single point")
    if not sys.domain.contains(pts, closed=True)[0]:
        raise DomainError(f"point {pts[0].tolist()} lies outside the domain")
    c = _check_contraction(sys)
    f_bound = max(sys.lambda_sups()) / (1.0 - c)

    value, weight = 0.0, 1.0
    address: list[int] = []
    cur = pts
    exited = False
    for _ in range(depth):
        index, pre = locate_many(sys.partition, cur)
        k = int(index[0])
        if k < 0:
            exited = True
            break
        y = pre[:1]
        value += weight * float(sys.lambdas[k].evaluate(y)[0])
        weight *= float(sys.scalings[k].evaluate(y)[0])
        address.append(k + 1)
        cur = y
        if weight == 0.0:
            break
    reached = len(address)
    bound = 0.0 if weight == 0.0 else c**reached * f_bound
    return PointEvaluation(value, bound, reached, address, exited)


def sup_contraction_estimate(
    sys: LocalFractalSystem, trials: int = 100, seed: int = 0, level: int = 10,
    operator: RBOperator | None = None,
) -> float:
    """Largest observed ||Phi g - Phi h||_inf / ||g - h||_inf over random pairs."""
    if trials < 1:
        raise DomainError("trials must be at least 1")
    op = operator or RBOperator(sys, level)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        g = rng.uniform(-1.0, 1.0, op.shape)
        h = rng.uniform(-1.0, 1.0, op.shape)
        num = np.max(np.abs(op.apply_values(g) - op.apply_values(h)))
        best = max(best, float(num / np.max(np.abs(g - h))))
    return best


def lambda_linearity_check(
    sys_a: LocalFractalSystem,
    sys_b: LocalFractalSystem,
    a: float,
    b: float,
    tol: float,
    level: int = 10,
    solver_tol: float = 1e-10,
) -> bool:
    """Check f(a*lam + b*lam') = a*f(lam) + b*f(lam') on the grid."""
    if sys_a.partition != sys_b.partition:
        raise DomainError("systems must share the partition")
    if [s.to_dict() for s in sys_a.scalings] != [s.to_dict() for s in sys_b.scalings]:
        raise DomainError("systems must share the scaling functions")
    mixed = sys_a.with_lambdas(
        combine(a, la, b, lb) for la, lb in zip(sys_a.lambdas, sys_b.lambdas)
    )
    op = RBOperator(sys_a, level)
    fa, _ = fixed_point(sys_a, level, solver_tol, operator=op)
    fb, _ = fixed_point(sys_b, level, solver_tol, operator=RBOperator(sys_b, level))
    fm, _ = fixed_point(mixed, level, solver_tol, operator=RBOperator(mixed, level))
    return bool(np.max(np.abs(fm.values - a * fa.values - b * fb.values)) <= tol)
