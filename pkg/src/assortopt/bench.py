"""Benchmark harness: run formulation x instance grids and tabulate gaps.

Records are appended to a JSON-lines file, one per (cell, formulation); a
cell is one generated instance, identified by family, nu0, kappa, seed and
replication. Wall time covers the solve only; bound computation is timed
separately.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bb import OPTIMAL, SolveConfig, compute_gaps, solve
from .bounds import build_bounds_table
from .generators import FULL_GRIDS, GeneratorConfig, generate
from .instance import Instance
from .model import FormulationKind, build

ALL_FORMULATIONS = tuple(k.value for k in FormulationKind)

# reduced grids that run on a laptop; same structure as the experiment grids
DESK_GRIDS = {
    "uniform200": {"n_products": 50, "n_classes": 10, "nu0": (5.0, 10.0), "kappa": (5, 10, 25, 50)},
    "uniform500": {"n_products": 100, "n_classes": 10, "nu0": (10.0, 20.0), "kappa": (10, 25, 50, 100)},
    "hard-graph": {"n_products": 30, "n_classes": 30, "nu0": (1.0, 2.0), "kappa": (3, 6, 15, 30)},
    "general-capacity": {"n_products": 50, "n_classes": 10, "nu0": (10.0, 20.0),
                         "kappa": ((2, 1), (3, 1), (6, 3), (12, 5), (25, 10))},
}

JOBS_ENV = "ASSORTOPT_JOBS"


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def scale_grid(family: str, scale: str) -> dict:
    if scale == "desk":
        return dict(DESK_GRIDS[family])
    if scale == "paper":
        return dict(FULL_GRIDS[family])
    raise ValueError("scale must be desk or paper")


@dataclass
class BenchmarkRecord:
    family: str
    nu0: float
    kappa: float | list
    seed: int
    rep: int
    formulation: str
    rgap: float
    egap: float
    seconds: float
    solved: bool
    nodes: int
    assort_size: int
    binding: list = field(default_factory=list)
    bound_seconds: float = 0.0
    status: str = ""
    zroot: float = math.nan
    zbb: float = math.nan
    zopt: float = math.nan
    zopt_exact: bool = True
    revenue: float = math.nan
    error: str | None = None

    @property
    def cell(self) -> tuple:
        k = tuple(self.kappa) if isinstance(self.kappa, (list, tuple)) else self.kappa
        return (self.family, self.nu0, k, self.seed, self.rep)

    def to_json(self) -> str:
        return json.dumps(asdict(self), allow_nan=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkRecord":
        return cls(**d)


def binding_flags(inst: Instance, assortment) -> list[bool]:
    """A row binds when no product outside the assortment still fits in its slack."""
    x = np.zeros(inst.n_products)
    x[list(assortment)] = 1.0
    beta, kappa = inst.capacity_matrix()
    flags = []
    for b, k in zip(beta, kappa):
        slack = k - float(b @ x)
        outside = b[(x < 0.5) & (b > 0)]
        flags.append(bool(outside.size) and bool(slack < outside.min() - 1e-9))
    return flags


def _solve_cell(family: str, gen: dict, formulations, cfg: dict, extend_factor: float) -> list[dict]:
    gcfg = GeneratorConfig(**gen)
    inst = generate(gcfg)
    t0 = time.perf_counter()
    bounds = build_bounds_table(inst)
    bound_secs = time.perf_counter() - t0
    reports, errors = {}, {}
    for f in formulations:
        try:
            reports[f] = solve(build(inst, f, bounds), SolveConfig(**cfg))
        except Exception as exc:  # recorded, the suite goes on
            errors[f] = f"{type(exc).__name__}: {exc}"
    exact = [r for r in reports.values() if r.status == OPTIMAL]
    best = min(reports.values(), key=lambda r: r.zinc, default=None)
    zopt, zopt_exact, assort = math.nan, False, ()
    if exact:
        winner = min(exact, key=lambda r: r.zinc)
        zopt, zopt_exact, assort = winner.zinc, True, winner.assortment
    else:
        long_cfg = SolveConfig(**{**cfg, "time_limit": cfg.get("time_limit", 600.0) * extend_factor})
        long = solve(build(inst, "conic-mc", bounds), long_cfg)
        cand = [r for r in [long, best] if r is not None and r.assortment is not None]
        winner = min(cand, key=lambda r: r.zinc)
        zopt, zopt_exact, assort = winner.zinc, long.status == OPTIMAL, winner.assortment
    if best is not None and best.zinc < zopt:
        zopt, assort = best.zinc, best.assortment
    bind = binding_flags(inst, assort)
    kappa = list(gcfg.kappa) if isinstance(gcfg.kappa, (tuple, list)) else gcfg.kappa
    out = []
    for f in formulations:
        base = dict(family=family, nu0=gcfg.nu0_value, kappa=kappa, seed=gcfg.seed, rep=gcfg.rep,
                    formulation=f, assort_size=len(assort), binding=bind, bound_seconds=bound_secs,
                    zopt=zopt, zopt_exact=zopt_exact)
        if f in errors:
            out.append(asdict(BenchmarkRecord(rgap=math.nan, egap=math.nan, seconds=math.nan, solved=False,
                                              nodes=0, status="error", error=errors[f], **base)))
            continue
        r = reports[f]
        rgap, egap = compute_gaps(r, zopt) if zopt != 0 and math.isfinite(zopt) else (math.nan, math.nan)
        out.append(asdict(BenchmarkRecord(rgap=rgap, egap=egap, seconds=r.seconds, solved=r.status == OPTIMAL,
                                          nodes=r.nodes, status=r.status, zroot=r.zroot, zbb=r.zbb,
                                          revenue=r.revenue, **base)))
    return out


def suite_cells(family: str, grid: dict, reps: int = 5, seed: int = 0) -> list[dict]:
    cells = []
    for nu0 in grid["nu0"]:
        for kappa in grid["kappa"]:
            for rep in range(reps):
                cells.append(dict(family=family, n_products=grid["n_products"], n_classes=grid["n_classes"],
                                  nu0_value=float(nu0), kappa=tuple(kappa) if isinstance(kappa, (list, tuple)) else kappa,
                                  seed=seed, rep=rep, **grid.get("extra", {})))
    return cells


def _cell_key(gen: dict) -> tuple:
    k = gen["kappa"]
    k = tuple(float(v) for v in k) if isinstance(k, (list, tuple)) else float(k)
    return (gen["family"], float(gen["nu0_value"]), k, gen["seed"], gen["rep"])


def _record_key(r: BenchmarkRecord) -> tuple:
    k = tuple(float(v) for v in r.kappa) if isinstance(r.kappa, (list, tuple)) else float(r.kappa)
    return (r.family, float(r.nu0), k, r.seed, r.rep)


def load_records(path) -> list[BenchmarkRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(BenchmarkRecord.from_dict(json.loads(line)))
    return out


def run_suite(family: str, grid: dict, formulations=ALL_FORMULATIONS, config: SolveConfig | None = None,
              jobs: int | None = None, out=None, resume: bool = False, reps: int = 5, seed: int = 0,
              extend_factor: float = 4.0, progress=None) -> list[BenchmarkRecord]:
    """Run every requested formulation on every (nu0, kappa, replication) cell of ``grid``.

    ``zopt`` comes from the best exact solve of the cell; when none finished,
    CONIC+MC is rerun with ``extend_factor`` times the limit. With ``out``,
    records are appended to that JSON-lines file as cells finish and
    ``resume`` skips cells already present there.
    """
    formulations = [FormulationKind(f).value for f in formulations]
    cfg = config or SolveConfig()
    cfg_d = {k: v for k, v in cfg.__dict__.items() if k != "node_log"}
    cells = suite_cells(family, grid, reps, seed)
    done: dict[tuple, list[BenchmarkRecord]] = {}
    if resume and out is not None and os.path.exists(out):
        for r in load_records(out):
            done.setdefault(_record_key(r), []).append(r)
    todo = [c for c in cells if not (resume and {r.formulation for r in done.get(_cell_key(c), [])} >= set(formulations))]
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    sink = open(out, "a") if out is not None else None
    results: list[BenchmarkRecord] = []
    try:
        def emit(batch):
            recs = [BenchmarkRecord.from_dict(d) for d in batch]
            results.extend(recs)
            if sink is not None:
                for r in recs:
                    sink.write(r.to_json() + "\n")
                sink.flush()
            if progress is not None:
                progress(recs)

        if jobs == 1:
            for c in todo:
                emit(_solve_cell(family, c, formulations, cfg_d, extend_factor))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futs = [pool.submit(_solve_cell, family, c, formulations, cfg_d, extend_factor) for c in todo]
                for fut in futs:
                    emit(fut.result())
    finally:
        if sink is not None:
            sink.close()
    prior = [r for c in cells for r in done.get(_cell_key(c), []) if r.formulation in formulations]
    return prior + results if resume else results


# tables ----------------------------------------------------------------------

def _mean(values) -> float:
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return float(sum(vals) / len(vals)) if vals else math.nan


def _kappa_label(k) -> str:
    if isinstance(k, (list, tuple)):
        return ",".join(f"{v:g}" for v in k)
    return f"{k:g}"


def _summary(recs: list[BenchmarkRecord]) -> dict:
    solved = [r for r in recs if r.solved]
    return {
        "rgap": _mean(r.rgap for r in recs),
        "egap": _mean(r.egap for r in recs),
        "time": _mean(r.seconds for r in solved),
        "solved": len(solved),
        "count": len(recs),
        "nodes": _mean(r.nodes for r in recs),
    }


def table_rows(records: list[BenchmarkRecord]):
    """Group by (nu0, kappa) in order of appearance; one summary per formulation plus an average row."""
    forms = list(dict.fromkeys(r.formulation for r in records))
    groups: dict[tuple, list[BenchmarkRecord]] = {}
    for r in records:
        groups.setdefault((r.nu0, _kappa_label(r.kappa)), []).append(r)
    rows = []
    for (nu0, kappa), recs in groups.items():
        cells = {}
        for r in recs:
            cells.setdefault(r.cell, r)
        rows.append({
            "nu0": nu0, "kappa": kappa,
            "assort": _mean(r.assort_size for r in cells.values()),
            "bind": sum(1 for r in cells.values() if r.binding and r.binding[0]),
            "by_formulation": {f: _summary([r for r in recs if r.formulation == f]) for f in forms},
        })
    average = {f: _summary([r for r in records if r.formulation == f]) for f in forms}
    return forms, rows, average


def _pct(v) -> str:
    return "--" if math.isnan(v) else f"{v:.2f}%"


def _time(s) -> str:
    return "--" if s["solved"] == 0 else f"{s['time']:.2f}/{s['solved']}"


def _nodes(v) -> str:
    return "--" if math.isnan(v) else f"{v:.0f}" if v == int(v) else f"{v:.1f}"


def emit_table(records: list[BenchmarkRecord], format: str = "markdown") -> str:
    """Two lines per (nu0, kappa) cell: rgap and time/# first, egap and nodes second."""
    if not records:
        raise ValueError("no records")
    if format == "json":
        return json.dumps([asdict(r) for r in records], indent=1)
    forms, rows, average = table_rows(records)
    header1 = ["nu0", "kappa", "assort"] + [f"{f} {c}" for f in forms for c in ("rgap", "time/#")]
    header2 = ["", "", "bind"] + [f"{f} {c}" for f in forms for c in ("egap", "nodes")]
    lines = []
    for row in rows:
        s = row["by_formulation"]
        lines.append([f"{row['nu0']:g}", row["kappa"], f"{row['assort']:.1f}"]
                     + [v for f in forms for v in (_pct(s[f]["rgap"]), _time(s[f]))])
        lines.append(["", "", str(row["bind"])] + [v for f in forms for v in (_pct(s[f]["egap"]), _nodes(s[f]["nodes"]))])
    lines.append(["Average", "", ""] + [v for f in forms for v in (_pct(average[f]["rgap"]), _time(average[f]))])
    lines.append(["", "", ""] + [v for f in forms for v in (_pct(average[f]["egap"]), _nodes(average[f]["nodes"]))])
    if format == "tsv":
        return "\n".join("\t".join(r) for r in [header1, header2] + lines) + "\n"
    if format == "markdown":
        out = ["| " + " | ".join(header1) + " |", "|" + "---|" * len(header1),
               "| " + " | ".join(header2) + " |"]
        out += ["| " + " | ".join(r) + " |" for r in lines]
        return "\n".join(out) + "\n"
    raise ValueError("format must be tsv, markdown or json")


def records_from_json(text: str) -> list[BenchmarkRecord]:
    return [BenchmarkRecord.from_dict(d) for d in json.loads(text)]
