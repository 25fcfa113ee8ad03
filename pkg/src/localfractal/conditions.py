"""Sufficient conditions for the fixed point to lie in L^p, B^s_{p,q} and F^s_{p,q}.

All verdicts are one-directional: ``"sufficient"`` means the contraction
condition holds and membership follows; ``"not-implied"`` means nothing
follows either way.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ParameterError

INF = math.inf
SUFFICIENT = "sufficient"
NOT_IMPLIED = "not-implied"


def p_quasinorm(v, p: float) -> float:
    """(sum |v_i|^p)^(1/p) for 0 < p < inf, max |v_i| for p = inf."""
    if not p > 0:
        raise DomainError(f"p must be positive, got {p!r}")
    a = np.abs(np.asarray(v, dtype=float))
    if not np.all(np.isfinite(a)):
        raise DomainError("vector components must be finite")
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    top = a.max()
    if top == 0:
        return 0.0
    # scale to avoid overflow/underflow for large p
    return float(top * np.sum((a / top) ** p) ** (1.0 / p))


def sigma_p(p: float) -> float:
    if not p > 0:
        raise DomainError(f"p must be positive, got {p!r}")
    return 1.0 / min(p, 1.0) - 1.0


def sigma_npq(n: int, p: float, q: float) -> float:
    if not (p > 0 and q > 0):
        raise DomainError("p and q must be positive")
    if math.isinf(p):
        raise DomainError("sigma_{n,p,q} needs p < inf")
    return n / min(p, q)


def _n_over_p(n: int, p: float) -> float:
    return 0.0 if math.isinf(p) else n / p


@dataclass(frozen=True)
class SpaceParams:
    n: int
    p: float
    q: float
    s: float
    M: int

    def __post_init__(self):
        p, q, s = float(self.p), float(self.q), float(self.s)
        if self.n not in (1, 2):
            raise ParameterError(f"dimension must be 1 or 2, got {self.n}")
        if not (p > 0 and q > 0):
            raise ParameterError("p and q must lie in (0, inf]")
        if not s > 0:
            raise ParameterError(f"smoothness s must be positive, got {s!r}")
        if int(self.M) != self.M or self.M < 1:
            raise ParameterError(f"M must be a positive integer, got {self.M!r}")
        if not (self.M > s >= self.M - 1):
            raise ParameterError(f"need M > s >= M - 1, got M={self.M}, s={s!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "M", int(self.M))

    def to_dict(self) -> dict:
        return {"n": self.n, "p": _num(self.p), "q": _num(self.q), "s": self.s, "M": self.M}


def minimal_order(s: float) -> int:
    """Smallest M with M > s >= M - 1."""
    return int(math.floor(s)) + 1


@dataclass(frozen=True)
class SystemSummary:
    n: int
    gammas: tuple[float, ...]
    sup_S: tuple[float, ...]

    def __post_init__(self):
        g = tuple(float(x) for x in self.gammas)
        s = tuple(float(x) for x in self.sup_S)
        if len(g) != len(s) or not g:
            raise DomainError("gammas and sup_S must be non-empty and of equal length")
        if any(not x > 0 for x in g):
            raise DomainError("all gamma_i must be positive")
        if any(x < 0 for x in s):
            raise DomainError("all sup-norms must be non-negative")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "sup_S", s)

    @property
    def m(self) -> int:
        return len(self.gammas)

    @classmethod
    def from_system(cls, sys) -> "SystemSummary":
        return cls(sys.n, tuple(p.map.gamma for p in sys.partition.pieces), tuple(sys.scaling_sups()))

    @classmethod
    def uniform(cls, s_values: Sequence[float], n: int = 1) -> "SystemSummary":
        m = len(s_values)
        return cls(n, (1.0 / m,) * m, tuple(abs(v) for v in s_values))


def xi_vector(summary: SystemSummary, p: float) -> np.ndarray:
    if not p > 0:
        raise DomainError("p must be positive")
    g = np.array(summary.gammas)
    return g ** _n_over_p(summary.n, p) * np.array(summary.sup_S)


def eta_vector(summary: SystemSummary, p: float, s: float) -> np.ndarray:
    """gamma_i^(n/p - s) ||S_i||, with n/p read as 0 for p = inf."""
    if not p > 0:
        raise DomainError("p must be positive")
    g = np.array(summary.gammas)
    return g ** (_n_over_p(summary.n, p) - s) * np.array(summary.sup_S)


@dataclass
class ConditionReport:
    space: str
    xi: list[float]
    xi_norm: float
    verdict: str
    eta: list[float] | None = None
    eta_norm: float | None = None
    threshold: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def sufficient(self) -> bool:
        return self.verdict == SUFFICIENT

    def to_dict(self) -> dict:
        return {
            "space": self.space,
            "xi": self.xi,
            "xi_norm": self.xi_norm,
            "eta": self.eta,
            "eta_norm": self.eta_norm,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "notes": list(self.notes),
        }


_ONE_WAY = "the condition is sufficient only; failure does not rule out membership"


def check_Lp(summary: SystemSummary, p: float) -> ConditionReport:
    xi = xi_vector(summary, p)
    norm = p_quasinorm(xi, p)
    return ConditionReport(
        space=f"L^{_fmt(p)}",
        xi=xi.tolist(),
        xi_norm=norm,
        verdict=SUFFICIENT if norm < 1 else NOT_IMPLIED,
        notes=[_ONE_WAY],
    )


def check_besov(summary: SystemSummary, sp: SpaceParams) -> ConditionReport:
    if sp.n != summary.n:
        raise ParameterError("space dimension differs from the system dimension")
    threshold = sigma_p(sp.p)
    if not sp.s > threshold:
        raise ParameterError(f"Besov condition needs s > sigma_p = {threshold!r}, got s = {sp.s!r}")
    xi = xi_vector(summary, sp.p)
    eta = eta_vector(summary, sp.p, sp.s)
    xn, en = p_quasinorm(xi, sp.p), p_quasinorm(eta, sp.q)
    return ConditionReport(
        space=f"B^{_fmt(sp.s)}_{{{_fmt(sp.p)},{_fmt(sp.q)}}}",
        xi=xi.tolist(),
        xi_norm=xn,
        eta=eta.tolist(),
        eta_norm=en,
        threshold=threshold,
        verdict=SUFFICIENT if max(xn, en) < 1 else NOT_IMPLIED,
        notes=[_ONE_WAY],
    )


def check_triebel(summary: SystemSummary, sp: SpaceParams) -> ConditionReport:
    if sp.n != summary.n:
        raise ParameterError("space dimension differs from the system dimension")
    if math.isinf(sp.p):
        raise ParameterError("Triebel-Lizorkin spaces need p < inf")
    threshold = sigma_npq(sp.n, sp.p, sp.q)
    if not sp.s > threshold:
        raise ParameterError(
            f"Triebel-Lizorkin condition needs s > sigma_(n,p,q) = {threshold!r}, got s = {sp.s!r}"
        )
    xi = xi_vector(summary, sp.p)
    eta = eta_vector(summary, sp.p, sp.s)
    xn, en = p_quasinorm(xi, sp.p), p_quasinorm(eta, sp.p)
    return ConditionReport(
        space=f"F^{_fmt(sp.s)}_{{{_fmt(sp.p)},{_fmt(sp.q)}}}",
        xi=xi.tolist(),
        xi_norm=xn,
        eta=eta.tolist(),
        eta_norm=en,
        threshold=threshold,
        verdict=SUFFICIENT if max(xn, en) < 1 else NOT_IMPLIED,
        notes=[_ONE_WAY, "the condition does not depend on q"],
    )


@dataclass(frozen=True)
class Preset:
    """A classical space expressed in the B or F scale."""

    name: str
    label: str
    family: str
    n: int
    p: float
    q: float
    s: float
    M: int
    args: tuple[float, ...] = ()
    caveat: str | None = None

    @property
    def params(self) -> SpaceParams:
        if self.caveat is not None:
            raise ParameterError(self.caveat)
        return SpaceParams(self.n, self.p, self.q, self.s, self.M)


def _is_int(x: float) -> bool:
    return float(x).is_integer()


def classical_preset(name: str, *args: float, n: int = 1) -> Preset:
    """sobolev(k,p), slodeckij(s,p), hoelder(s), bessel(s,p), local_hardy(p) as B/F spaces."""
    key = name.lower().replace("-", "_")
    try:
        if key == "hoelder" or key == "holder":
            (s,) = args
            if not s > 0 or _is_int(s):
                raise ParameterError("Hoelder preset C^s = B^s_{inf,inf} needs s > 0, s not an integer")
            return Preset("hoelder", f"C^{_fmt(s)}", "B", n, INF, INF, s, minimal_order(s), (s,))
        if key == "sobolev":
            k, p = args
            if not _is_int(k) or k < 1:
                raise ParameterError("Sobolev preset W^{k,p} = F^k_{p,2} needs an integer k >= 1")
            if not 1 < p < INF:
                raise ParameterError("Sobolev preset W^{k,p} = F^k_{p,2} needs 1 < p < inf")
            k = int(k)
            return Preset("sobolev", f"W^{{{k},{_fmt(p)}}}", "F", n, p, 2.0, float(k), k + 1, (k, p))
        if key == "slodeckij":
            s, p = args
            if not s > 0 or _is_int(s):
                raise ParameterError("Slodeckij preset W^{s,p} = B^s_{p,p} needs s > 0, s not an integer")
            if not 1 <= p < INF:
                raise ParameterError("Slodeckij preset W^{s,p} = B^s_{p,p} needs 1 <= p < inf")
            return Preset("slodeckij", f"W^{{{_fmt(s)},{_fmt(p)}}}", "B", n, p, p, s, minimal_order(s), (s, p))
        if key == "bessel":
            s, p = args
            if not s > 0:
                raise ParameterError("Bessel potential preset H^{s,p} = F^s_{p,2} needs s > 0")
            if not 1 < p < INF:
                raise ParameterError("Bessel potential preset H^{s,p} = F^s_{p,2} needs 1 < p < inf")
            return Preset("bessel", f"H^{{{_fmt(s)},{_fmt(p)}}}", "F", n, p, 2.0, s, minimal_order(s), (s, p))
        if key in ("local_hardy", "hardy"):
            (p,) = args
            if not 0 < p < INF:
                raise ParameterError("local Hardy preset h_p = F^0_{p,2} needs 0 < p < inf")
            caveat = (
                "h_p = F^0_{p,2} has s = 0, outside the range s > sigma_(n,p,q) of the "
                "Triebel-Lizorkin condition; only the limiting formula is reported"
            )
            return Preset("local_hardy", f"h_{_fmt(p)}", "F", n, p, 2.0, 0.0, 1, (p,), caveat)
    except ValueError as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"wrong number of arguments for preset {name!r}") from exc
    raise ParameterError(f"unknown preset {name!r}")


def raw_space(family: str, n: int, p: float, q: float, s: float, M: int | None = None) -> Preset:
    family = family.upper()
    if family not in ("B", "F"):
        raise ParameterError(f"family must be B or F, got {family!r}")
    M = minimal_order(s) if M is None else M
    label = f"{family}^{_fmt(s)}_{{{_fmt(p)},{_fmt(q)}}}"
    return Preset("raw", label, family, n, p, q, s, M)


_CALL = re.compile(r"^\s*([A-Za-z_]+)\s*\((.*)\)\s*$")


def parse_space(text: str, n: int = 1) -> Preset:
    """Parse ``hoelder(0.5)``, ``sobolev(1,2)``, ``B(p=2,q=2,s=0.5,M=1)`` and the like."""
    m = _CALL.match(text)
    if not m:
        raise ParameterError(f"cannot parse space query {text!r}")
    name, body = m.group(1), m.group(2).strip()
    parts = [b.strip() for b in body.split(",")] if body else []
    if name.upper() in ("B", "F"):
        kw = {}
        for part in parts:
            if "=" not in part:
                raise ParameterError(f"raw space arguments must be key=value, got {part!r}")
            k, v = (t.strip() for t in part.split("=", 1))
            if k not in ("p", "q", "s", "M"):
                raise ParameterError(f"unknown raw space argument {k!r}")
            kw[k] = _parse_number(v)
        missing = {"p", "q", "s"} - set(kw)
        if missing:
            raise ParameterError(f"raw space query misses {sorted(missing)}")
        M = kw.get("M")
        return raw_space(name, n, kw["p"], kw["q"], kw["s"], None if M is None else int(M))
    return classical_preset(name, *(_parse_number(p) for p in parts), n=n)


def _parse_number(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "oo"):
        return INF
    try:
        return float(t)
    except ValueError:
        raise ParameterError(f"not a number: {text!r}") from None


def check_space(summary: SystemSummary, preset: Preset) -> ConditionReport:
    """Run the B or F checker that applies to ``preset``.

    The local Hardy preset is reported through its limiting (s -> 0) form,
    with the caveat attached, instead of through the general checker.
    """
    if preset.caveat is not None:
        xi = xi_vector(summary, preset.p)
        eta = eta_vector(summary, preset.p, 0.0)
        xn, en = p_quasinorm(xi, preset.p), p_quasinorm(eta, preset.p)
        return ConditionReport(
            space=preset.label,
            xi=xi.tolist(),
            xi_norm=xn,
            eta=eta.tolist(),
            eta_norm=en,
            threshold=sigma_npq(preset.n, preset.p, preset.q),
            verdict=SUFFICIENT if max(xn, en) < 1 else NOT_IMPLIED,
            notes=[_ONE_WAY, preset.caveat],
        )
    sp = preset.params
    report = check_besov(summary, sp) if preset.family == "B" else check_triebel(summary, sp)
    if preset.name != "raw":
        report.space = f"{preset.label} = {report.space}"
    if preset.name == "sobolev" and preset.p == 2:
        report.notes.append("for p = 2, W^{k,2} = B^k_{2,2} and the Besov condition coincides")
    return report


@dataclass
class UniformFormula:
    expression: str
    value: float
    bound: float
    verdict: str

    def to_dict(self) -> dict:
        return {"expression": self.expression, "value": self.value, "bound": self.bound,
                "verdict": self.verdict}


def is_uniform(summary: SystemSummary, tol: float = 1e-12) -> bool:
    m = summary.m
    return summary.n == 1 and all(abs(g - 1.0 / m) <= tol for g in summary.gammas)


def uniform_formula(summary: SystemSummary, preset: Preset) -> UniformFormula | None:
    """Closed-form condition for gamma_i = 1/m, n = 1 and constant S_i = s_i.

    ``summary.sup_S`` is read as |s_i|.  Returns ``None`` when no specialised
    formula applies to the preset.
    """
    if not is_uniform(summary):
        return None
    m = summary.m
    s_abs = np.array(summary.sup_S)
    name, p, s = preset.name, preset.p, preset.s
    if name == "sobolev" and p == 2:
        k = int(s)
        value = float(np.sum(s_abs**2) * m ** (2 * k - 1))
        return UniformFormula(f"sum |s_i|^2 m^(2k-1), k={k}", value, 1.0, _cmp(value, 1.0))
    if name in ("sobolev", "bessel") or (name == "slodeckij"):
        value = float(np.sum(s_abs**p) * m ** (p * s - 1))
        return UniformFormula(f"sum |s_i|^p m^(ps-1), p={_fmt(p)}, s={_fmt(s)}", value, 1.0, _cmp(value, 1.0))
    if name == "hoelder":
        value = float(max(s_abs.max(), (m**s * s_abs).max()))
        return UniformFormula(f"max(max |s_i|, max m^s |s_i|), s={_fmt(s)}", value, 1.0, _cmp(value, 1.0))
    if name == "local_hardy":
        value = float(np.sum(s_abs**p))
        return UniformFormula(f"sum |s_i|^p < m, p={_fmt(p)}", value, float(m), _cmp(value, float(m)))
    return None


def _cmp(value: float, bound: float) -> str:
    return SUFFICIENT if value < bound else NOT_IMPLIED


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:g}"


def _num(x: float):
    return "inf" if math.isinf(x) else x
