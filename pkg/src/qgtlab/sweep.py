"""Parameter/size sweeps producing canonical CSV datasets and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SchemaError
from .geometry import DEFAULT_DELTA, qgt
from .hamiltonian import DEFAULT_DIMENSION_CAP, ModelSpec, default_sector

SWEEP_SCHEMA = "qgtlab-sweep/1"
FIT_SCHEMA = "qgtlab-fit/1"
METHOD_ALIASES = {"fd": "fd-overlap", "spectral": "spectral-sum", "corr": "corr-integral"}


def fmt(x) -> str:
    """Floats at 17 significant digits, the CSV convention everywhere."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def sweep_header(spec: ModelSpec) -> list:
    m = spec.m
    re_cols = [f"ReQ_{i}{j}" for i in range(m) for j in range(m)]
    im_cols = [f"ImQ_{i}{j}" for i in range(m) for j in range(m)]
    return ["model", "L", *spec.param_names, "method", *re_cols, *im_cols, "q", "gap", "fidelity_used"]


@dataclass
class SweepPlan:
    spec: ModelSpec
    sizes: list
    grid: list  # values of the first (driving) parameter
    method: str = "fd-overlap"
    delta: float = DEFAULT_DELTA
    out: str | None = None
    workers: int = 1
    seed: int = 42
    solver: str = "auto"
    cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        self.method = METHOD_ALIASES.get(self.method, self.method)
        if not self.sizes:
            raise ValueError("sweep needs at least one system size")
        if not self.grid:
            raise ValueError("sweep needs at least one parameter value")
        if self.delta <= 0:
            raise ValueError("finite-difference step must be positive")
        if self.method not in ("fd-overlap", "spectral-sum", "corr-integral"):
            raise ValueError(f"unknown method {self.method!r}")
        self.sizes = sorted(int(L) for L in self.sizes)
        self.grid = sorted(float(x) for x in self.grid)
        for L in self.sizes:
            if self.spec.kind == "XXZ" and self.spec.sz2 == 0 and L % 2:
                raise ValueError(f"XXZ sweeps use the Sz=0 sector and need even L, got {L}")
            default_sector(self.spec.at(L=L), cap=self.cap)

    def points(self):
        base = list(self.spec.params)
        for L in self.sizes:
            for x in self.grid:
                yield L, tuple([x] + base[1:])

    def resolved(self) -> dict:
        d = asdict(self)
        d["spec"] = asdict(self.spec)
        return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def run_point(plan: SweepPlan, L: int, params: tuple) -> dict:
    """Solve one (L, params) point; failures are captured, never raised."""
    t0 = time.perf_counter()
    kw = {}
    if plan.method == "fd-overlap":
        kw = {"delta": plan.delta, "solver": plan.solver, "seed": plan.seed}
    try:
        result = qgt(plan.spec, L, params, method=plan.method, **kw)
    except Exception as exc:  # recorded in the manifest
        return {"L": L, "params": list(params), "status": "failed",
                "error": f"{type(exc).__name__}: {exc}", "wall_s": time.perf_counter() - t0}
    Q = result.Q
    row = [plan.spec.kind, L, *params, result.method, *Q.real.ravel(), *Q.imag.ravel(),
           Q[0, 0].real / L, result.diagnostics.get("gap", math.nan),
           result.diagnostics.get("fidelity_used", math.nan)]
    diag = {k: v for k, v in result.diagnostics.items() if k not in ("fidelities",)}
    return {"L": L, "params": list(params), "status": "done", "row": row,
            "wall_s": time.perf_counter() - t0, "diagnostics": diag}


def _run_star(args):
    return run_point(*args)


def format_rows(header: list, rows: list) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {SWEEP_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([row[0], fmt(row[1]), *(r if isinstance(r, str) else fmt(r) for r in row[2:])])
    return buf.getvalue()


def run_sweep(plan: SweepPlan):
    """Run every planned point; returns (csv_text, manifest dict)."""
    points = list(plan.points())
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            records = list(pool.map(_run_star, [(plan, L, p) for L, p in points]))
    else:
        records = [run_point(plan, L, p) for L, p in points]
    records.sort(key=lambda r: (r["L"], tuple(r["params"])))
    rows = [r["row"] for r in records if r["status"] == "done"]
    text = format_rows(sweep_header(plan.spec), rows)
    manifest = {
        "tool": "qgtlab",
        "version": __version__,
        "schema": SWEEP_SCHEMA,
        "config": plan.resolved(),
        "points": [{k: v for k, v in r.items() if k != "row"} for r in records],
        "n_planned": len(points),
        "n_done": len(rows),
        "n_failed": len(points) - len(rows),
        "csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
    }
    manifest = _jsonable(manifest)
    if plan.out:
        out = Path(plan.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(text.encode())
        manifest["csv"] = str(out)
        manifest_path(out).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return text, manifest


def manifest_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".manifest.json")


# ---------------------------------------------------------------------------
# reading datasets
# ---------------------------------------------------------------------------


def read_dataset(path) -> tuple:
    """Return (header, rows as list of dicts) for a sweep CSV or a plain (L, q) CSV.

    A ``# schema:`` line, when present, must name a supported schema and the
    header must match what that schema prescribes.
    """
    lines = Path(path).read_text().splitlines()
    schema = None
    body = []
    for line in lines:
        if line.startswith("#"):
            if line.startswith("# schema:"):
                schema = line.split(":", 1)[1].strip()
            continue
        if line.strip():
            body.append(line)
    if not body:
        raise SchemaError(f"{path}: no header row")
    reader = csv.reader(body)
    header = next(reader)
    if schema is not None:
        if schema != SWEEP_SCHEMA:
            raise SchemaError(f"{path}: unsupported schema {schema!r}, expected {SWEEP_SCHEMA!r}")
        fixed_tail = ["method"]
        if header[:2] != ["model", "L"] or header[-3:] != ["q", "gap", "fidelity_used"] \
                or fixed_tail[0] not in header:
            raise SchemaError(f"{path}: header does not match {SWEEP_SCHEMA}")
    rows = [dict(zip(header, r)) for r in reader]
    return header, rows


def grouped_series(path, value: str | None = None):
    """Map group label -> (parameter value or None, [(L, value)]) for fitting."""
    header, rows = read_dataset(path)
    if "L" not in header:
        raise SchemaError(f"{path}: missing column 'L'")
    if value is None:
        value = "q" if "q" in header else ("Q" if "Q" in header else None)
    if value is None or value not in header:
        raise SchemaError(f"{path}: missing value column (q or Q)")
    group_col = None
    if "method" in header and header.index("method") > 2:
        group_col = header[2]
    elif "lambda" in header:
        group_col = "lambda"
    groups = {}
    for r in rows:
        key = r[group_col] if group_col else ""
        groups.setdefault(key, []).append((float(r["L"]), float(r[value])))
    out = {}
    for key in sorted(groups, key=lambda k: float(k) if k else 0.0):
        out[key] = (float(key) if key else None, groups[key])
    return group_col, out
