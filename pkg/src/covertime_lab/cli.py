"""Experiment runner CLI.

Usage:
    covertime-lab <experiment> --replicas N --seed S --out PATH [params...]
    covertime-lab suite --manifest FILE [--trends-out PATH]

Every replica runs on its own derived seed (output replica+1 of the master
stream), so results are a pure function of the config: the --jobs level and
worker scheduling cannot change a single byte of the output files.  Rows are
sorted by replica index before writing.  Exit codes: 0 success, 2 usage
error, 3 capacity error or no replica finished under its step cap.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels, rng, trajectory
from .branching import OffspringLaw, simulate_gw_survival
from .errors import CapacityError, StepCapExceeded, UsageError
from .excursions import (
    ExcursionSpec,
    SpecialVertexConfig,
    classify_special,
    count_excursions,
)
from .graphs import TorusTopology, TreeTopology, exact_cover_time
from .stats import EstimatorSummary, TrendSeries, summarize, trend_check
from .walker import (
    Lattice2D,
    WalkConfig,
    run_eps_cover_proxy,
    run_thick_points,
    run_torus_cover,
    run_tree_cover,
    torus_first_visits,
)

CSV_SCHEMA_LINE = "# covertime-lab csv v1"
JSON_SCHEMA = "covertime-lab/1"

CAP_STATUS = "cap-exceeded"


def _fmt(v: float) -> str:
    """12 significant digits, '.' separator, locale-independent."""
    return format(float(v), ".12g")


def _parse_law(text: str) -> OffspringLaw:
    """Parse '0:0.25,2:0.75' into an offspring law."""
    pairs = []
    try:
        for item in text.split(","):
            c, p = item.split(":")
            pairs.append((int(c), float(p)))
    except ValueError as exc:
        raise UsageError(f"cannot parse offspring law {text!r}: {exc}") from None
    return OffspringLaw(tuple(pairs))


@dataclass(frozen=True)
class ExperimentDef:
    name: str
    required: tuple[str, ...]
    run: Callable[[dict, int], float]
    # trend metadata: size parameter, normalization, and the limit constant
    size_of: Callable[[dict], float] | None = None
    normalize: Callable[[float, dict], float] | None = None
    target_of: Callable[[dict], float] | None = None
    statistic: str | None = None
    optional: tuple[str, ...] = ()
    dump: Callable[[dict, int, str], None] | None = None
    check: Callable[[dict], None] | None = None


def _tree_of(params) -> TreeTopology:
    return TreeTopology(params["b"], params["k"])


def _run_tree_cover(params, seed) -> float:
    rec = run_tree_cover(WalkConfig(_tree_of(params), seed=seed))
    return float(rec.cover_time)


def _dump_tree_cover(params, seed, path):
    t = _tree_of(params)
    rec = run_tree_cover(WalkConfig(t, seed=seed))
    trajectory.write_trajectory(path, t, trajectory.tree_walk_codes(t, seed, rec.cover_and_return_time))


def _run_torus_cover(params, seed) -> float:
    return float(run_torus_cover(WalkConfig(TorusTopology(params["n"]), seed=seed)))


def _dump_torus_cover(params, seed, path):
    topo = TorusTopology(params["n"])
    steps = run_torus_cover(WalkConfig(topo, seed=seed))
    trajectory.write_trajectory(path, topo, trajectory.move_codes(seed, steps))


def _run_thick_points(params, seed) -> float:
    return float(run_thick_points(params["steps"], seed).max_count)


def _dump_thick_points(params, seed, path):
    trajectory.write_trajectory(path, Lattice2D(), trajectory.move_codes(seed, params["steps"]))


def _run_eps_cover(params, seed) -> float:
    return run_eps_cover_proxy(params["n"], params["eps"], seed)


def _check_eps(params):
    # surface bad eps before any replica runs
    if not 0.0 < params["eps"] < 0.5:
        raise UsageError("eps must lie in (0, 1/2)")
    if params["eps"] * params["n"] < 2.0:
        raise UsageError("eps too small for this grid: eps*n must be >= 2")


def _dump_eps_cover(params, seed, path):
    topo = TorusTopology(params["n"])
    fv = torus_first_visits(WalkConfig(topo, seed=seed))
    trajectory.write_trajectory(path, topo, trajectory.move_codes(seed, int(fv.max())))


def _excursion_parts(params):
    # canonical pair: inner = leftmost vertex at level ell, outer = the root
    t = _tree_of(params)
    spec = ExcursionSpec(inner=t.descendant(0, params["ell"]), outer=0)
    stop = math.ceil(params["lam"] * params["b"] * params["k"] ** 2)
    return t, spec, stop


def _check_excursions(params):
    if params.get("steps") is None and params.get("lam") is None:
        raise UsageError("excursions needs either --lambda (T_lambda stop) or --steps")
    if params.get("lam") is not None and not params["lam"] > 0:
        raise UsageError("lambda must be positive")
    if not 1 <= params["ell"] <= params["k"]:
        raise UsageError("need 1 <= ell <= k")


def _run_excursions(params, seed) -> float:
    if params.get("lam") is not None:
        t, spec, stop = _excursion_parts(params)
        return float(count_excursions(WalkConfig(t, seed=seed), spec, root_visits=stop))
    t = _tree_of(params)
    spec = ExcursionSpec(inner=t.descendant(0, params["ell"]), outer=0)
    return float(count_excursions(WalkConfig(t, seed=seed), spec, steps=params["steps"]))


def _dump_excursions(params, seed, path):
    t, spec, stop = _excursion_parts(params)
    walk = WalkConfig(t, seed=seed)
    if params.get("lam") is not None:
        # replay length = steps until the stopping rule fired
        _, steps, _, status = _kernels.tree_pair_excursion_kernel(
            t.b, t.k, t.n_k, t.first_leaf, int(spec.inner), 0, stop, 0,
            np.uint64(seed & rng.MASK64), walk.resolved_cap(),
        )
        if status != _kernels.OK:
            raise StepCapExceeded("cannot dump: stopping rule never fired")
        n_steps = int(steps)
    else:
        n_steps = params["steps"]
    trajectory.write_trajectory(path, t, trajectory.tree_walk_codes(t, seed, n_steps))


def _special_cfg(params) -> SpecialVertexConfig:
    return SpecialVertexConfig(
        lam=params["lam"], r=params["r"], ell=params["ell"], b=params["b"], k=params["k"]
    )


def _run_special(params, seed) -> float:
    cfg = _special_cfg(params)
    cls = classify_special(cfg, WalkConfig(cfg.topology, seed=seed))
    return float(sum(len(v) for v in cls.special.values()))


def _dump_special(params, seed, path):
    cfg = _special_cfg(params)
    cls = classify_special(cfg, WalkConfig(cfg.topology, seed=seed))
    t = cfg.topology
    trajectory.write_trajectory(path, t, trajectory.tree_walk_codes(t, seed, cls.steps))


def _run_gw(params, seed) -> float:
    return simulate_gw_survival(_parse_law(params["law"]), params["generations"], 1, seed)


def _run_oracle_check(params, seed) -> float:
    return float(run_torus_cover(WalkConfig(TorusTopology(params["n"]), seed=seed)))


EXPERIMENTS: dict[str, ExperimentDef] = {
    "tree-cover": ExperimentDef(
        "tree-cover",
        required=("b", "k"),
        run=_run_tree_cover,
        size_of=lambda p: float(p["k"]),
        normalize=lambda v, p: v / (_tree_of(p).n_k * p["k"] ** 2),
        target_of=lambda p: 2.0 * math.log(p["b"]),
        statistic="C_k/(n_k*k^2)",
        dump=_dump_tree_cover,
    ),
    "torus-cover": ExperimentDef(
        "torus-cover",
        required=("n",),
        run=_run_torus_cover,
        size_of=lambda p: float(p["n"]),
        normalize=lambda v, p: v / (p["n"] * math.log(p["n"])) ** 2,
        target_of=lambda p: 4.0 / math.pi,
        statistic="T_n/(n*log n)^2",
        dump=_dump_torus_cover,
    ),
    "thick-points": ExperimentDef(
        "thick-points",
        required=("steps",),
        run=_run_thick_points,
        size_of=lambda p: float(p["steps"]),
        normalize=lambda v, p: v / math.log(p["steps"]) ** 2,
        target_of=lambda p: 1.0 / math.pi,
        statistic="T_n*/(log n)^2",
        dump=_dump_thick_points,
    ),
    "eps-cover": ExperimentDef(
        "eps-cover",
        required=("n", "eps"),
        run=_run_eps_cover,
        size_of=lambda p: 1.0 / p["eps"],
        normalize=lambda v, p: v / math.log(p["eps"]) ** 2,
        target_of=lambda p: 2.0 / math.pi,
        statistic="C_eps/(log eps)^2",
        dump=_dump_eps_cover,
        check=_check_eps,
    ),
    "excursions": ExperimentDef(
        "excursions",
        required=("b", "k", "ell"),
        optional=("lam", "steps"),
        run=_run_excursions,
        dump=_dump_excursions,
        check=_check_excursions,
    ),
    "special-vertices": ExperimentDef(
        "special-vertices",
        required=("b", "k", "ell", "lam", "r"),
        run=_run_special,
        dump=_dump_special,
    ),
    "gw-survival": ExperimentDef(
        "gw-survival",
        required=("law", "generations"),
        run=_run_gw,
    ),
    "oracle-check": ExperimentDef(
        "oracle-check",
        required=("n",),
        run=_run_oracle_check,
    ),
}

_PARAM_FLAGS = {
    "b": int,
    "k": int,
    "n": int,
    "steps": int,
    "eps": float,
    "lam": float,
    "r": float,
    "ell": int,
    "generations": int,
    "law": str,
}


@dataclass
class RunResult:
    experiment: str
    params: dict
    master_seed: int
    rows: list[tuple[int, int, float | None, str]] = field(default_factory=list)
    summary: EstimatorSummary | None = None
    extra_summary: dict = field(default_factory=dict)

    def ok_values(self) -> list[float]:
        return [v for _, _, v, s in self.rows if s == "ok"]


def _validate_params(exp: ExperimentDef, params: dict) -> dict:
    allowed = set(exp.required) | set(exp.optional)
    given = {k: v for k, v in params.items() if v is not None}
    for name in exp.required:
        if name not in given:
            raise UsageError(f"experiment {exp.name!r} requires --{_flag_name(name)}")
    for name in given:
        if name not in allowed:
            raise UsageError(f"parameter --{_flag_name(name)} is not used by {exp.name!r}")
    if exp.check:
        exp.check(given)
    return given


def _flag_name(param: str) -> str:
    return {"lam": "lambda"}.get(param, param)


def _replica_task(args):
    name, params, index, seed = args
    exp = EXPERIMENTS[name]
    try:
        return index, seed, exp.run(params, seed), "ok"
    except StepCapExceeded:
        return index, seed, None, CAP_STATUS


def run_experiment(
    name: str,
    params: dict,
    replicas: int,
    master_seed: int,
    out: str | Path,
    fmt: str = "csv",
    jobs: int = 1,
    dump_trajectory: str | None = None,
) -> RunResult:
    """Run one experiment and write its result file; returns the in-memory rows."""
    if name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {name!r}")
    exp = EXPERIMENTS[name]
    if replicas < 1:
        raise UsageError("replicas must be >= 1")
    if fmt not in ("csv", "json"):
        raise UsageError(f"unknown output format {fmt!r}")
    params = _validate_params(exp, params)

    tasks = [
        (name, params, i, rng.replica_seed(master_seed, i)) for i in range(replicas)
    ]
    if jobs > 1 and replicas > 1:
        with Pool(processes=jobs) as pool:
            rows = pool.map(_replica_task, tasks, chunksize=max(1, replicas // (jobs * 8)))
    else:
        rows = [_replica_task(t) for t in tasks]
    rows.sort(key=lambda r: r[0])

    result = RunResult(name, params, master_seed, rows)
    ok = result.ok_values()
    if not ok:
        raise CapacityError("every replica exceeded its step cap; nothing to summarize")
    if len(ok) >= 2:
        result.summary = summarize(ok)
    if name == "oracle-check":
        exact = exact_cover_time(TorusTopology(params["n"]), (0, 0))
        result.extra_summary["exact"] = exact
        if result.summary and result.summary.std_error > 0:
            result.extra_summary["z_score"] = (result.summary.mean - exact) / result.summary.std_error

    if dump_trajectory is not None:
        if exp.dump is None:
            raise UsageError(f"experiment {name!r} has no trajectory to dump")
        exp.dump(params, rng.replica_seed(master_seed, 0), dump_trajectory)

    out = Path(out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        _write_csv(out, exp, result)
    else:
        _write_json(out, exp, result)
    return result


def _param_columns(exp: ExperimentDef) -> list[str]:
    return [_flag_name(p) for p in (*exp.required, *exp.optional)]


def _write_csv(path: Path, exp: ExperimentDef, result: RunResult):
    cols = _param_columns(exp)
    header = ["experiment", *cols, "replicate", "seed", "value", "status"]
    extra = sorted(result.extra_summary)
    header += extra
    lines = [CSV_SCHEMA_LINE, ",".join(header)]
    pvals = [_param_cell(result.params.get(_unflag(c))) for c in cols]
    for index, seed, value, status in result.rows:
        row = [exp.name, *pvals, str(index), str(seed), "" if value is None else _fmt(value), status]
        row += [""] * len(extra)
        lines.append(",".join(row))
    mean = result.summary.mean if result.summary else result.ok_values()[0]
    srow = [exp.name, *pvals, "summary", "", _fmt(mean), "summary"]
    srow += [_fmt(result.extra_summary[k]) for k in extra]
    lines.append(",".join(srow))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="")


def _unflag(col: str) -> str:
    return {"lambda": "lam"}.get(col, col)


def _param_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def _write_json(path: Path, exp: ExperimentDef, result: RunResult):
    doc = {
        "schema": JSON_SCHEMA,
        "experiment": exp.name,
        "params": {_flag_name(k): v for k, v in result.params.items()},
        "master_seed": result.master_seed,
        "rows": [
            {"replicate": i, "seed": s, "value": v, "status": st}
            for i, s, v, st in result.rows
        ],
    }
    if result.summary:
        s = result.summary
        doc["summary"] = {
            "n_replicas": s.n_replicas,
            "mean": s.mean,
            "variance": s.variance,
            "std_error": s.std_error,
            "ci95": list(s.ci95),
        }
    doc.update({k: v for k, v in result.extra_summary.items()})
    path.write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )


# --- suites -----------------------------------------------------------------


def run_suite(manifest: list[dict], trends_out: str | Path, jobs: int = 1) -> list[dict]:
    """Run a list of experiment configs, then assemble trend series.

    Configs run sequentially (replicas in parallel).  Any failure aborts,
    preserving completed outputs and writing an error manifest next to the
    trends file.
    """
    if not manifest:
        raise UsageError("suite manifest is empty")
    seen_outs = set()
    normalized = []
    for i, cfg in enumerate(manifest):
        if "experiment" not in cfg:
            raise UsageError(f"manifest entry {i} lacks an 'experiment' field")
        if "out" not in cfg:
            raise UsageError(f"manifest entry {i} lacks an 'out' field")
        out = str(Path(cfg["out"]))
        if out in seen_outs:
            raise UsageError(f"duplicate output path in manifest: {out}")
        seen_outs.add(out)
        name = cfg["experiment"]
        if name not in EXPERIMENTS:
            raise UsageError(f"manifest entry {i}: unknown experiment {name!r}")
        params = {
            _unflag(k): v
            for k, v in cfg.items()
            if k not in ("experiment", "out", "format", "seed", "replicas")
        }
        _validate_params(EXPERIMENTS[name], params)
        normalized.append((name, params, cfg))

    trends_out = Path(trends_out)
    completed: list[RunResult] = []
    for name, params, cfg in normalized:
        try:
            completed.append(
                run_experiment(
                    name,
                    params,
                    replicas=int(cfg.get("replicas", 1)),
                    master_seed=int(cfg.get("seed", 0)),
                    out=cfg["out"],
                    fmt=cfg.get("format", "csv"),
                    jobs=jobs,
                )
            )
        except Exception as exc:
            err = {
                "failed": cfg,
                "error": f"{type(exc).__name__}: {exc}",
                "completed": [str(c["out"]) for _, _, c in normalized[: len(completed)]],
            }
            err_path = trends_out.with_name("error-manifest.json")
            err_path.write_text(json.dumps(err, sort_keys=True, indent=2) + "\n", encoding="utf-8")
            raise

    trends = assemble_trends(completed)
    trends_out.write_text(json.dumps(trends, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return trends


def assemble_trends(results: list[RunResult]) -> list[dict]:
    """Group trendable results into series and attach verdicts."""
    groups: dict[tuple, list[tuple[float, EstimatorSummary, RunResult]]] = {}
    for res in results:
        exp = EXPERIMENTS[res.experiment]
        if exp.size_of is None or res.summary is None:
            continue
        norm = summarize([exp.normalize(v, res.params) for v in res.ok_values()])
        size = exp.size_of(res.params)
        size_param = _size_param(res.experiment)
        key_params = tuple(
            sorted((k, v) for k, v in res.params.items() if k != size_param)
        )
        groups.setdefault((res.experiment, key_params), []).append((size, norm, res))

    out = []
    for (name, key_params), pts in sorted(groups.items()):
        exp = EXPERIMENTS[name]
        pts.sort(key=lambda p: p[0])
        target = exp.target_of(pts[0][2].params)
        entry = {
            "experiment": name,
            "statistic": exp.statistic,
            "target": target,
            "fixed_params": {k: v for k, v in key_params},
            "points": [
                {
                    "size": size,
                    "mean": s.mean,
                    "std_error": s.std_error,
                    "ci95": list(s.ci95),
                    "n_replicas": s.n_replicas,
                    "distance": abs(s.mean - target),
                }
                for size, s, _ in pts
            ],
        }
        if len(pts) >= 3:
            verdict = trend_check(
                TrendSeries(tuple((size, s) for size, s, _ in pts), target)
            )
            entry["verdict"] = verdict.verdict
        else:
            entry["verdict"] = "insufficient-points"
        out.append(entry)
    return out


def _size_param(name: str) -> str:
    return {
        "tree-cover": "k",
        "torus-cover": "n",
        "thick-points": "steps",
        "eps-cover": "eps",
    }[name]


# --- entry point ------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="covertime-lab",
        description="Monte Carlo laboratory for cover times and thick points",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        for param, typ in _PARAM_FLAGS.items():
            sp.add_argument(f"--{_flag_name(param)}", dest=param, type=typ, default=None)
        sp.add_argument("--replicas", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=str, required=False)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--dump-trajectory", type=str, default=None)
    sp = sub.add_parser("suite")
    sp.add_argument("--manifest", type=str, required=True)
    sp.add_argument("--trends-out", type=str, default="trends.json")
    sp.add_argument("--jobs", type=int, default=None)
    return ap


def _resolve_jobs(flag_value: int | None) -> int:
    env = os.environ.get("COVERTIME_LAB_JOBS")
    if env is not None:
        try:
            jobs = int(env)
        except ValueError:
            raise UsageError(f"COVERTIME_LAB_JOBS={env!r} is not an integer") from None
    elif flag_value is not None:
        jobs = flag_value
    else:
        jobs = os.cpu_count() or 1
    if jobs < 1:
        raise UsageError("jobs must be >= 1")
    return jobs


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        jobs = _resolve_jobs(args.jobs)
        if args.command == "suite":
            with open(args.manifest, encoding="utf-8") as fh:
                doc = json.load(fh)
            manifest = doc["experiments"] if isinstance(doc, dict) else doc
            run_suite(manifest, args.trends_out, jobs=jobs)
            return 0
        if args.out is None:
            raise UsageError("--out is required")
        params = {p: getattr(args, p) for p in _PARAM_FLAGS}
        run_experiment(
            args.command,
            params,
            replicas=args.replicas,
            master_seed=args.seed,
            out=args.out,
            fmt=args.format,
            jobs=jobs,
            dump_trajectory=args.dump_trajectory,
        )
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CapacityError, StepCapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
