"""Command line front end: ``localfractal validate|solve|check|seminorm|attractor``.

Exit status is 0 on success, 1 for semantic or runtime errors and 2 for
malformed configuration documents (or bad command line usage).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attractor import default_k0, ifs_from_partition, iterate_attractor, wloc_system
from .conditions import SystemSummary, check_space, is_uniform, parse_space, uniform_formula
from .config import SystemConfig, load_config
from .errors import ConfigParseError, ConfigurationError, LocalFractalError
from .functions import SampledFunction
from .geometry import Box, partition_validate
from .rb import RBOperator, fixed_point, sup_contraction_estimate
from .seminorms import (
    besov_seminorm_estimate,
    lp_norm_grid,
    make_hgrid,
    piece_split_estimate,
    triebel_seminorm_estimate,
)

log = logging.getLogger("localfractal")

AXES = ("x", "y", "z")


# ---------------------------------------------------------------- output helpers

def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def fmt_float(x: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(x))


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) for v in row])


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric entry ({exc})") from None
    return header, data.reshape(-1, len(header))


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def function_rows(f: SampledFunction) -> np.ndarray:
    return np.column_stack([f.points(), f.values.ravel()])


def function_from_rows(header: list[str], data: np.ndarray) -> SampledFunction:
    """Rebuild a sampled function from ``x[,y],value`` rows of a full grid."""
    n = len(header) - 1
    if n not in (1, 2) or header[-1] != "value" or header[:n] != list(AXES[:n]):
        raise ConfigurationError(f"expected columns x[,y],value, got {','.join(header)}")
    per_axis = round(data.shape[0] ** (1.0 / n))
    level = int(round(math.log2(per_axis - 1))) if per_axis > 2 else 0
    if level < 1 or (2**level + 1) ** n != data.shape[0]:
        raise ConfigurationError(
            f"{data.shape[0]} rows do not form a (2^L+1)^{n} grid"
        )
    order = np.lexsort(tuple(data[:, k] for k in reversed(range(n))))
    data = data[order]
    box = Box(tuple(data[:, :n].min(axis=0)), tuple(data[:, :n].max(axis=0)))
    f = SampledFunction(box, level, data[:, n].reshape((2**level + 1,) * n))
    if not np.allclose(f.points(), data[:, :n], rtol=0, atol=1e-9 * box.diameter):
        raise ConfigurationError("sample coordinates do not lie on a uniform grid")
    return f


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    report = partition_validate(cfg.partition)
    print(report.summary())
    if report.valid and cfg.lambdas is not None:
        # building the system checks the remaining invariants
        cfg.system()
    return 0 if report.valid else 1


def _solve(cfg: SystemConfig, seed: int):
    system = cfg.system()
    s = cfg.solver
    op = RBOperator(system, s.level)
    f, diag = fixed_point(system, s.level, s.tol, s.max_iter, operator=op)
    report = {
        "command": "solve",
        "level": s.level,
        "tol": s.tol,
        "max_scaling": system.max_scaling(),
        "solver": diag.to_dict(),
        "contraction_estimate": sup_contraction_estimate(system, trials=20, seed=seed, operator=op),
        "seed": seed,
    }
    return f, report


def _meta_path(out: Path) -> Path:
    return out.with_name(out.name + ".meta.json")


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or "fixed_point.csv")
    f, report = _solve(cfg, args.seed)
    write_csv(out, list(AXES[: f.n]) + ["value"], function_rows(f))
    meta = {"config_sha256": sha256_file(args.config), "csv_sha256": sha256_file(out),
            "level": f.level, "report": report}
    _meta_path(out).write_text(dump_json(meta), encoding="utf-8")
    report["artifacts"] = {"fixed_point": str(out), "meta": str(_meta_path(out))}
    sys.stdout.write(dump_json(report))
    return 0


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    summary = SystemSummary.from_system(cfg.system())
    queries = cfg.space_queries()
    if args.space:
        queries = [(q, p) for q, p in queries] + _cli_queries(args.space, cfg.n)
    entries = []
    for text, preset in queries:
        if isinstance(preset, Exception):
            entries.append({"query": text, "error": str(preset)})
            continue
        try:
            report = check_space(summary, preset)
        except (LocalFractalError, ValueError) as exc:
            entries.append({"query": text, "error": str(exc)})
            continue
        entry = {"query": text, "report": report.to_dict()}
        formula = uniform_formula(summary, preset)
        if formula is not None:
            entry["uniform_formula"] = formula.to_dict()
        entries.append(entry)
    out = {
        "command": "check",
        "system": {"n": summary.n, "gammas": list(summary.gammas), "sup_S": list(summary.sup_S),
                   "uniform": is_uniform(summary)},
        "spaces": entries,
    }
    sys.stdout.write(dump_json(out))
    return 0


def _cli_queries(texts, n):
    out = []
    for t in texts:
        try:
            out.append((t, parse_space(t, n)))
        except (LocalFractalError, ValueError) as exc:
            out.append((t, exc))
    return out


def _cached_fixed_point(cfg: SystemConfig, args):
    """Load the fixed point written by ``solve`` if it is fresh, else solve now."""
    path = Path(args.fixed_point) if args.fixed_point else None
    if path is not None and path.exists() and _meta_path(path).exists():
        meta = json.loads(_meta_path(path).read_text(encoding="utf-8"))
        fresh = (meta.get("config_sha256") == sha256_file(args.config)
                 and meta.get("csv_sha256") == sha256_file(path))
        if fresh:
            header, data = read_csv(path)
            return function_from_rows(header, data), "hit"
        log.info("cached fixed point %s is stale; solving again", path)
    f, _ = _solve(cfg, args.seed)
    return f, ("miss" if path is not None else "none")


def cmd_seminorm(args) -> int:
    if bool(args.config) == bool(args.function):
        raise ConfigurationError("give exactly one of --config and --function")
    cfg = load_config(args.config) if args.config else None
    n = cfg.n if cfg else None
    if args.function:
        header, data = read_csv(Path(args.function))
        f = function_from_rows(header, data)
        cache = "none"
    else:
        f, cache = _cached_fixed_point(cfg, args)
    preset = parse_space(args.space, n or f.n)
    sp = preset.params
    st = cfg.seminorm if cfg else None
    hg = make_hgrid(f, st.h_min if st else None, st.h_max if st else None,
                    st.count if st else None, st.directions if st else 64)
    workers = max(1, args.threads)
    if preset.family == "B":
        est = besov_seminorm_estimate(f, sp, hg, workers)
    else:
        est = triebel_seminorm_estimate(f, sp, hg, workers)
    out = {
        "command": "seminorm",
        "space": preset.label,
        "family": preset.family,
        "params": sp.to_dict(),
        "estimate": est.to_dict(),
        "lp_norm": lp_norm_grid(f, sp.p),
        "cache": cache,
    }
    if cfg is not None and cfg.partition.m > 1:
        cells = [cfg.partition.pieces[k].map.image_box(cfg.partition.pieces[k].subdomain)
                 for k in range(cfg.partition.m)]
        if all(c is not None for c in cells):
            split = piece_split_estimate(f, sp, cells, hg, preset.family, workers)
            out["interior"] = split.interior.to_dict()
            out["boundary"] = split.boundary.to_dict()
    if args.out:
        write_csv(Path(args.out), ["h", "value"], est.profile)
        out["artifacts"] = {"profile": str(args.out)}
    sys.stdout.write(dump_json(out))
    return 0


def cmd_attractor(args) -> int:
    cfg = load_config(args.config)
    st = cfg.attractor
    if st.mode == "graph":
        system = cfg.system()
        c = system.max_scaling()
        bound = st.y_bound
        if bound is None:
            if not c < 1:
                raise ConfigurationError(f"graph mode needs max ||S_i|| < 1, got {c!r}")
            bound = max(1.0, 1.5 * max(system.lambda_sups()) / (1.0 - c))
        ifs = wloc_system(system, bound)
    else:
        ifs = ifs_from_partition(cfg.partition)
    k0 = default_k0(ifs, st.k0_points)
    run = iterate_attractor(ifs, k0, args.steps, st.max_points)
    out = Path(args.out or "attractor.csv")
    dist = out.with_name(out.stem + "_distances.csv")
    cols = list(AXES[: ifs.dim])
    write_csv(out, cols, run.points)
    write_csv(dist, ["step", "distance", "floor"],
              [(k + 1, d, fl) for k, (d, fl) in enumerate(zip(run.distances, run.floors))])
    if run.empty:
        print("warning: the iteration collapsed to the empty set", file=sys.stderr)
    sys.stdout.write(dump_json({
        "command": "attractor",
        "mode": st.mode,
        "steps": args.steps,
        "points": int(run.points.shape[0]),
        "empty": run.empty,
        "k0_diameter": float(np.linalg.norm(k0.max(axis=0) - k0.min(axis=0))),
        "distances": run.distances,
        "artifacts": {"points": str(out), "distances": str(dist)},
    }))
    return 0


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localfractal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, config_required=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=config_required, help="TOML system description")
        p.add_argument("--seed", type=int, default=0, help="seed for randomised diagnostics")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.set_defaults(func=func)
        return p

    add("validate", cmd_validate, "check the partition property of a system")
    p = add("solve", cmd_solve, "solve for the fixed point and write it as CSV")
    p.add_argument("--out", help="fixed point CSV (default: fixed_point.csv)")
    p = add("check", cmd_check, "report the sufficient conditions for each queried space")
    p.add_argument("--space", action="append", help="extra space query (repeatable)")
    p = add("seminorm", cmd_seminorm, "estimate a Besov or Triebel-Lizorkin seminorm", False)
    p.add_argument("--space", required=True, help="space query, e.g. 'hoelder(0.5)'")
    p.add_argument("--function", help="sampled function CSV (x[,y],value) instead of a config")
    p.add_argument("--fixed-point", help="fixed point CSV written by 'solve' (reused when fresh)")
    p.add_argument("--out", help="h-profile CSV (h,value)")
    p = add("attractor", cmd_attractor, "iterate the local IFS set operator")
    p.add_argument("--steps", type=int, default=12, help="number of iterations")
    p.add_argument("--out", help="point cloud CSV (default: attractor.csv)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LocalFractalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
