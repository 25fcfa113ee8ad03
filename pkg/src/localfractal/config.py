"""TOML system descriptions for the command line front end.

Grammar (all tables optional unless stated)::

    dimension = 1                      # required, 1 or 2
    [domain]                           # required
    lower = [0.0]
    upper = [1.0]
    [[pieces]]                         # required, one table per piece
    lower = [0.0]
    upper = [1.0]
    gamma = 0.5
    tau = [0.0]                        # default: zero vector
    ortho = [[1.0]]                    # default: identity
    lambda = { kind = "polynomial", coefficients = [0.0, 1.0] }
    scaling = { kind = "constant", value = 0.5 }
    [solver]
    level = 10
    tol = 1e-10
    max_iter = 200
    [check]
    spaces = ["hoelder(0.5)", { family = "B", p = 2, q = 2, s = 0.5 }]
    [seminorm]
    h_min = 0.01                       # default: 4 grid spacings
    h_max = 1.0                        # default: diameter of the domain
    count = 40                         # default: 8 radii per octave
    directions = 64
    [attractor]
    mode = "base"                      # or "graph"
    k0_points = 4096
    max_points = 65536
    y_bound = 4.0                      # graph mode only

``lambda`` and ``scaling`` may be omitted when only the partition is used
(``validate`` and base-mode ``attractor``).  Unknown keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .conditions import Preset, parse_space, raw_space
from .errors import ConfigParseError, ConfigurationError, DomainError, ParameterError
from .functions import FunctionSpec, spec_from_dict
from .geometry import Box, Partition, Piece, Similitude
from .rb import LocalFractalSystem

_TOP = {"dimension", "domain", "pieces", "solver", "check", "seminorm", "attractor"}
_BOX = {"lower", "upper"}
_PIECE = {"lower", "upper", "gamma", "tau", "ortho", "lambda", "scaling"}
_SOLVER = {"level", "tol", "max_iter"}
_CHECK = {"spaces"}
_SEMINORM = {"h_min", "h_max", "count", "directions"}
_ATTRACTOR = {"mode", "k0_points", "max_points", "y_bound"}
_SPEC = {"constant": {"kind", "value"}, "polynomial": {"kind", "coefficients"},
         "samples": {"kind", "values"}}
_RAW = {"family", "p", "q", "s", "M"}


@dataclass
class SolverSettings:
    level: int = 10
    tol: float = 1e-10
    max_iter: int = 200


@dataclass
class SeminormSettings:
    h_min: float | None = None
    h_max: float | None = None
    count: int | None = None
    directions: int = 64


@dataclass
class AttractorSettings:
    mode: str = "base"
    k0_points: int = 4096
    max_points: int = 1 << 16
    y_bound: float | None = None


@dataclass
class SystemConfig:
    n: int
    partition: Partition
    lambdas: tuple[FunctionSpec, ...] | None
    scalings: tuple[FunctionSpec, ...] | None
    solver: SolverSettings = field(default_factory=SolverSettings)
    spaces: list[object] = field(default_factory=list)
    seminorm: SeminormSettings = field(default_factory=SeminormSettings)
    attractor: AttractorSettings = field(default_factory=AttractorSettings)

    def system(self) -> LocalFractalSystem:
        if self.lambdas is None or self.scalings is None:
            raise ConfigurationError("every piece needs 'lambda' and 'scaling' for this command")
        return LocalFractalSystem(self.partition, self.lambdas, self.scalings)

    def space_queries(self) -> list[tuple[str, Preset | Exception]]:
        """(query text, preset or the error raised while building it), in order."""
        out = []
        for q in self.spaces:
            text = q if isinstance(q, str) else _raw_label(q)
            try:
                preset = parse_space(q, self.n) if isinstance(q, str) else _raw_preset(q, self.n)
            except (ParameterError, DomainError) as exc:
                out.append((text, exc))
            else:
                out.append((text, preset))
        return out


def load_config(path) -> SystemConfig:
    """Read and validate a configuration file.

    Raises ``ConfigParseError`` for malformed documents and
    ``ConfigurationError``/``DomainError`` for well-formed but invalid ones.
    """
    text = Path(path).read_bytes().decode("utf-8")
    return parse_config(text)


def parse_config(text: str) -> SystemConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigParseError(f"malformed configuration: {exc}") from exc
    return _build(doc)


def _keys(table, allowed: set[str], where: str) -> dict:
    if not isinstance(table, dict):
        raise ConfigurationError(f"{where} must be a table")
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) {unknown} in {where}")
    return table


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigurationError(f"missing key {key!r} in {where}")
    return table[key]


def _box(table: dict, n: int, where: str) -> Box:
    lo = _require(table, "lower", where)
    hi = _require(table, "upper", where)
    if len(lo) != n or len(hi) != n:
        raise ConfigurationError(f"{where}: lower/upper must have {n} entries")
    return Box(tuple(float(v) for v in lo), tuple(float(v) for v in hi))


def _spec(table, box: Box, where: str) -> FunctionSpec:
    if not isinstance(table, dict):
        raise ConfigurationError(f"{where} must be a table")
    kind = table.get("kind")
    if kind not in _SPEC:
        raise ConfigurationError(f"{where}: kind must be one of {sorted(_SPEC)}, got {kind!r}")
    _keys(table, _SPEC[kind], where)
    for key in _SPEC[kind] - {"kind"}:
        _require(table, key, where)
    return spec_from_dict(table, box)


def _build(doc: dict) -> SystemConfig:
    _keys(doc, _TOP, "the top level")
    n = _require(doc, "dimension", "the top level")
    if n not in (1, 2) or isinstance(n, bool):
        raise ConfigurationError(f"dimension must be 1 or 2, got {n!r}")
    domain = _box(_keys(_require(doc, "domain", "the top level"), _BOX, "[domain]"), n, "[domain]")

    raw_pieces = _require(doc, "pieces", "the top level")
    if not isinstance(raw_pieces, list) or not raw_pieces:
        raise ConfigurationError("[[pieces]] must list at least one piece")
    pieces, lambdas, scalings = [], [], []
    for k, table in enumerate(raw_pieces, 1):
        where = f"piece {k}"
        _keys(table, _PIECE, where)
        box = _box(table, n, where)
        gamma = float(_require(table, "gamma", where))
        tau = table.get("tau", [0.0] * n)
        ortho = table.get("ortho")
        pieces.append(Piece(box, Similitude(gamma, ortho, tau)))
        lambdas.append(_spec(table["lambda"], box, f"{where} lambda") if "lambda" in table else None)
        scalings.append(_spec(table["scaling"], box, f"{where} scaling") if "scaling" in table else None)
    has = [x is not None for x in lambdas + scalings]
    if any(has) and not all(has):
        raise ConfigurationError("either every piece or no piece declares 'lambda' and 'scaling'")
    partition = Partition(domain, tuple(pieces))

    cfg = SystemConfig(n, partition, tuple(lambdas) if all(has) else None,
                       tuple(scalings) if all(has) else None)

    if "solver" in doc:
        t = _keys(doc["solver"], _SOLVER, "[solver]")
        cfg.solver = SolverSettings(int(t.get("level", 10)), float(t.get("tol", 1e-10)),
                                    int(t.get("max_iter", 200)))
        if cfg.solver.level < 1 or cfg.solver.max_iter < 1 or not cfg.solver.tol > 0:
            raise ConfigurationError("[solver] needs level >= 1, max_iter >= 1 and tol > 0")
    if "check" in doc:
        t = _keys(doc["check"], _CHECK, "[check]")
        spaces = t.get("spaces", [])
        if not isinstance(spaces, list):
            raise ConfigurationError("[check] spaces must be a list")
        for q in spaces:
            if isinstance(q, dict):
                _keys(q, _RAW, "a raw space entry")
            elif not isinstance(q, str):
                raise ConfigurationError(f"space entries must be strings or tables, got {q!r}")
        cfg.spaces = list(spaces)
    if "seminorm" in doc:
        t = _keys(doc["seminorm"], _SEMINORM, "[seminorm]")
        cfg.seminorm = SeminormSettings(
            _opt_float(t.get("h_min")), _opt_float(t.get("h_max")),
            None if t.get("count") is None else int(t["count"]), int(t.get("directions", 64)),
        )
    if "attractor" in doc:
        t = _keys(doc["attractor"], _ATTRACTOR, "[attractor]")
        mode = t.get("mode", "base")
        if mode not in ("base", "graph"):
            raise ConfigurationError(f"[attractor] mode must be 'base' or 'graph', got {mode!r}")
        cfg.attractor = AttractorSettings(mode, int(t.get("k0_points", 4096)),
                                          int(t.get("max_points", 1 << 16)), _opt_float(t.get("y_bound")))
    return cfg


def _opt_float(v) -> float | None:
    return None if v is None else float(v)


def _raw_preset(table: dict, n: int) -> Preset:
    try:
        fam, p, q, s = (table[k] for k in ("family", "p", "q", "s"))
    except KeyError as exc:
        raise ParameterError(f"raw space entry misses {exc.args[0]!r}") from None
    return raw_space(str(fam), n, _num(p), _num(q), float(s), table.get("M"))


def _num(v) -> float:
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


def _raw_label(table: dict) -> str:
    return "{}({})".format(table.get("family", "?"),
                           ",".join(f"{k}={table[k]}" for k in ("p", "q", "s", "M") if k in table))
