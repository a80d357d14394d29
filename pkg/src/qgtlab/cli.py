"""Command-line front end: ``qgtlab {sweep,fit,exponents,berry,gap}``.

Exit codes: 0 success, 1 usage error, 2 partial failure (see the manifest).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .eigensolver import gap as spectral_gap
from .errors import QGTLabError
from .geometry import (
    DEFAULT_DELTA,
    berry_curvature_plaquette,
    berry_phase_loop,
    parameter_circle,
)
from .hamiltonian import ModelSpec, load_config, model_from_config
from .scaling import (
    FIT_MODELS,
    MASSIVE_MIN_L,
    QUASI_FREE_INPUT,
    K_of_lambda,
    ScalingInput,
    delta_Q,
    fit_fss,
    predicted_critical_fss,
    predicted_offcritical,
)
from .sweep import FIT_SCHEMA, SweepPlan, fmt, grouped_series, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2

DEFAULT_PARAMS = {
    "XXZ": "1.0",
    "TFIM": "1.0",
    "RotatedXY": "1.0,0.0",
    "QubitInField": f"{math.pi / 2!r},0.0",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_range(text: str, cast=float) -> list:
    """Expand "a,b,start:stop:step" into a sorted list; stop is inclusive."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = part.split(":")
            if len(bits) != 3:
                raise UsageError(f"range {part!r} must be start:stop:step")
            start, stop, step = (float(b) for b in bits)
            if step <= 0:
                raise UsageError(f"range {part!r} needs a positive step")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            out.extend(cast(start + i * step) if cast is int else cast(round(start + i * step, 12))
                       for i in range(n))
        else:
            out.append(cast(float(part)) if cast is int else cast(part))
    if not out:
        raise UsageError(f"empty value list {text!r}")
    return sorted(set(out))


def parse_mesh_axis(text: str) -> np.ndarray:
    """"start:stop:n" -> n evenly spaced nodes including both ends."""
    bits = text.split(":")
    if len(bits) != 3:
        raise UsageError(f"mesh axis {text!r} must be start:stop:n")
    return np.linspace(float(bits[0]), float(bits[1]), int(bits[2]))


def _model_args(p):
    p.add_argument("--config", help="key = value model file (kind, L, boundary, J, params, ...)")
    p.add_argument("--model", help="XXZ | TFIM | RotatedXY | QubitInField")
    p.add_argument("--boundary", choices=["periodic", "open"])
    p.add_argument("--J", type=float)
    p.add_argument("--params", help="full parameter vector, comma separated")
    p.add_argument("--anisotropy", type=float)
    p.add_argument("--sz", help="XXZ sector Sz value, or 'none' for the full space")


def resolve_model(args, L=None) -> ModelSpec:
    cfg = load_config(args.config) if args.config else {}
    if args.model:
        cfg["kind"] = args.model
    for key in ("boundary", "J", "anisotropy", "params", "sz"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = str(val)
    if "kind" not in cfg:
        raise UsageError("a model is required (--model or --config)")
    cfg.setdefault("params", DEFAULT_PARAMS.get(cfg["kind"], ""))
    if L is not None:
        cfg["L"] = str(L)
    return model_from_config(cfg)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    sizes = parse_range(args.L, int)
    spec = resolve_model(args, L=sizes[0])
    grid = parse_range(args.lam) if args.lam else [spec.params[0]]
    plan = SweepPlan(spec, sizes, grid, method=args.method, delta=args.dlambda, out=args.out,
                     workers=args.workers, seed=args.seed, solver=args.solver)
    text, manifest = run_sweep(plan)
    if not args.out:
        sys.stdout.write(text)
    for p in manifest["points"]:
        if p["status"] != "done":
            print(f"failed L={p['L']} params={p['params']}: {p['error']}", file=sys.stderr)
    return EXIT_PARTIAL if manifest["n_failed"] else EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

FIT_HEADER = ["model", "lambda", "A1", "A2", "A3", "delta_v2", "xi", "min_L", "RSS", "R2", "condition"]


def _gnuplot_expr(fit) -> str:
    a = [fmt(c) for c in fit.coefficients]
    if fit.model == "gapless":
        return f"{a[0]} + {a[1]}/x"
    if fit.model == "gapless-with-irrelevant":
        return f"{a[0]} + {a[1]}/x + {a[2]}*x**({fmt(3 - 2 * fit.fixed['delta_v2'])})"
    if fit.model == "logarithmic":
        return f"{a[0]} + {a[1]}/x + {a[2]}/(x*log(x))"
    return f"{a[0]} + {a[1]}*exp(-x/{fmt(fit.fixed['xi'])})/sqrt(x)"


def write_plot_script(fits, stem: Path):
    """Gnuplot data file and script drawing points and fitted curves, g/L against L."""
    dat = stem.with_suffix(".dat")
    gp = stem.with_suffix(".gp")
    blocks = []
    for fit in fits:
        lines = [f"# lambda = {fmt(fit.lam) if fit.lam is not None else 'n/a'}"]
        lines += [f"{fmt(L)} {fmt(v)}" for L, v in zip(fit.L, fit.values)]
        blocks.append("\n".join(lines))
    dat.write_text("\n\n\n".join(blocks) + "\n")
    cmds = [
        "set xlabel 'L'",
        "set ylabel 'g/L'",
        "set key outside",
    ]
    plots = []
    for i, fit in enumerate(fits):
        cmds.append(f"f{i}(x) = {_gnuplot_expr(fit)}")
        label = f"lambda={fit.lam:g}" if fit.lam is not None else "data"
        plots.append(f"'{dat.name}' index {i} using 1:2 with points pt 7 title '{label}'")
        plots.append(f"f{i}(x) with lines title '{fit.model} fit'")
    cmds.append("plot " + ", \\\n     ".join(plots))
    gp.write_text("\n".join(cmds) + "\n")
    return dat, gp


def cmd_fit(args) -> int:
    group_col, groups = grouped_series(args.dataset, args.column)
    fits, failures = [], []
    for key, (lam, series) in groups.items():
        fixed = {}
        if args.model == "gapless-with-irrelevant":
            if args.delta_v2 is not None:
                fixed["delta_v2"] = args.delta_v2
            elif lam is not None:
                fixed["delta_v2"] = 4 * K_of_lambda(lam)
        if args.model == "massive":
            fixed["xi"] = args.xi
        min_L = args.min_L
        if min_L is None and args.model == "massive":
            min_L = MASSIVE_MIN_L
        try:
            fit = fit_fss(series, args.model, fixed, min_L=min_L, lam=lam)
        except (QGTLabError, ValueError) as exc:
            failures.append((key, exc))
            continue
        fit.extra["min_L"] = min_L
        fits.append(fit)
    out = Path(args.out) if args.out else None
    rows = []
    for fit in fits:
        rows.append([fit.model, fmt(fit.lam) if fit.lam is not None else "",
                     fmt(fit.coefficient("A1")), fmt(fit.coefficient("A2")), fmt(fit.coefficient("A3")),
                     fmt(fit.fixed.get("delta_v2", math.nan)), fmt(fit.fixed.get("xi", math.nan)),
                     "" if fit.extra.get("min_L") is None else str(fit.extra["min_L"]),
                     fmt(fit.rss), fmt(fit.r2), fmt(fit.condition)])
    handle = open(out, "w", newline="") if out else sys.stdout
    try:
        handle.write(f"# schema: {FIT_SCHEMA}\n")
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(FIT_HEADER)
        w.writerows(rows)
    finally:
        if out:
            handle.close()
    if out and fits:
        dat, gp = write_plot_script(fits, out.with_suffix(""))
        print(f"plot script: {gp} (data {dat})", file=sys.stderr)
    for key, exc in failures:
        print(f"fit failed for {group_col}={key}: {type(exc).__name__}: {exc}", file=sys.stderr)
    if failures:
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# exponents
# ---------------------------------------------------------------------------


def exponent_report(inp: ScalingInput, xxz_lambda: float | None = None) -> list:
    lines = []
    if xxz_lambda is not None:
        four_k = 4 * K_of_lambda(xxz_lambda)
        lines.append(f"lambda = {xxz_lambda:g}")
        lines.append(f"K = {four_k / 4:g}")
        lines.append(f"Delta_V = {inp.delta_mu:g} (marginal (d_x Phi)^2 term)")
        kind = "marginal" if abs(four_k - 2) < 1e-12 else ("irrelevant" if four_k > 2 else "relevant")
        lines.append(f"4K = {four_k:g} (cosine term, {kind})")
    else:
        lines.append(f"Delta_V = {inp.delta_mu:g}" if inp.delta_mu == inp.delta_nu
                     else f"Delta_mu = {inp.delta_mu:g}, Delta_nu = {inp.delta_nu:g}")
    lines.append(f"d = {inp.d:g}, zeta = {inp.zeta:g}")
    dq = delta_Q(inp)
    crit = predicted_critical_fss(inp)
    lines.append(f"Delta_Q = {dq:g}")
    lines.append(f"classification = {crit.classification}")
    lines.append(f"critical q_sing ~ L^{crit.q_exponent:g}, Q_sing ~ L^{crit.Q_exponent:g}")
    lines.append(f"super-extensive condition d + 2 zeta - 2 Delta_V > 0: {crit.superextensive_condition}")
    if inp.delta_lambda:
        off = predicted_offcritical(inp)
        lines.append(f"off-critical exponent = {off.exponent:g} ({'divergent' if off.divergent else 'non-divergent'})")
    if crit.classification == "sub-extensive" and abs(crit.q_exponent + 1) < 1e-12:
        lines.append("suggested form: q = A1 + A2/L")
    return lines


def cmd_exponents(args) -> int:
    if args.preset == "quasi-free":
        inp = QUASI_FREE_INPUT
        lam = None
    elif args.xxz_lambda is not None:
        lam = args.xxz_lambda
        inp = ScalingInput(delta_mu=2.0, zeta=1.0, d=1, delta_lambda=args.delta_lambda)
    else:
        if args.delta_v is None and args.delta_mu is None:
            raise UsageError("exponents needs --xxz-lambda, --preset or --delta-v/--delta-mu")
        mu = args.delta_mu if args.delta_mu is not None else args.delta_v
        nu = args.delta_nu if args.delta_nu is not None else mu
        inp = ScalingInput(delta_mu=mu, delta_nu=nu, zeta=args.zeta, d=args.d,
                           delta_lambda=args.delta_lambda)
        lam = None
    print("\n".join(exponent_report(inp, lam)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# berry
# ---------------------------------------------------------------------------


def ellipse_loop(spec: ModelSpec, centre, radii, n: int) -> np.ndarray:
    """Closed ellipse in the first two parameters, the rest held at ``spec``."""
    t = 2 * math.pi * np.arange(n + 1) / n
    pts = np.repeat(np.asarray(spec.params, dtype=float)[None, :], n + 1, axis=0)
    pts[:, 0] = centre[0] + radii[0] * np.cos(t)
    pts[:, 1] = centre[1] + radii[1] * np.sin(t)
    pts[-1] = pts[0]
    return pts


def cmd_berry(args) -> int:
    spec = resolve_model(args, L=args.L)
    if spec.m < 2:
        raise UsageError("berry needs a model with at least two parameters")
    if args.mesh:
        axes = [parse_mesh_axis(t) for t in args.mesh.split(",")]
        if len(axes) != 2:
            raise UsageError("--mesh takes two axes: start:stop:n,start:stop:n")
        field = berry_curvature_plaquette(spec, spec.L, axes, axes=(0, 1))
        c0, c1 = field.centers
        names = spec.param_names
        handle = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            w = csv.writer(handle, lineterminator="\n")
            w.writerow([names[0], names[1], f"F_{names[0]}{names[1]}"])
            for i, x in enumerate(c0):
                for j, y in enumerate(c1):
                    w.writerow([fmt(x), fmt(y), fmt(field.F[i, j])])
        finally:
            if args.out:
                handle.close()
        return EXIT_OK
    n = args.loop_points
    if args.ellipse:
        vals = [float(v) for v in args.ellipse.split(",")]
        if len(vals) != 4:
            raise UsageError("--ellipse takes c0,c1,r0,r1")

        def make_loop(count):
            return ellipse_loop(spec, vals[:2], vals[2:], count)
    else:

        def make_loop(count):
            return parameter_circle(spec, args.loop_axis, count)

    coarse = berry_phase_loop(spec, spec.L, make_loop(n))
    fine = berry_phase_loop(spec, spec.L, make_loop(2 * n))
    change = abs((fine - coarse + math.pi) % (2 * math.pi) - math.pi)
    print(f"phase = {fmt(fine + 0.0)}")  # no negative zero
    print(f"points = {2 * n}, refinement change = {fmt(change)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gap
# ---------------------------------------------------------------------------


def cmd_gap(args) -> int:
    sizes = parse_range(args.L, int)
    spec = resolve_model(args, L=sizes[0])
    grid = parse_range(args.lam) if args.lam else [spec.params[0]]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["model", "L", spec.param_names[0], "gap"])
    for L in sizes:
        for x in grid:
            params = (x, *spec.params[1:])
            w.writerow([spec.kind, L, fmt(x), fmt(spectral_gap(spec, L, params, seed=args.seed))])
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qgtlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="QGT over a grid of sizes and parameter values")
    _model_args(p)
    p.add_argument("--L", required=True, help='sizes, e.g. "8:20:2" or "8,10"')
    p.add_argument("--lambda", dest="lam", help="values of the first parameter")
    p.add_argument("--method", default="fd", choices=["fd", "spectral", "corr"])
    p.add_argument("--dlambda", type=float, default=DEFAULT_DELTA)
    p.add_argument("--solver", default="auto", choices=["auto", "dense", "lanczos"])
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="finite-size fits of a sweep dataset")
    p.add_argument("dataset")
    p.add_argument("--fit-model", dest="model", default="gapless", choices=FIT_MODELS)
    p.add_argument("--column", help="value column (default q, else Q)")
    p.add_argument("--delta-v2", type=float, help="dimension of the irrelevant operator (default 4K)")
    p.add_argument("--xi", type=float, default=None)
    p.add_argument("--min-L", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("exponents", help="scaling predictions")
    p.add_argument("--xxz-lambda", type=float)
    p.add_argument("--preset", choices=["quasi-free"])
    p.add_argument("--delta-v", type=float)
    p.add_argument("--delta-mu", type=float)
    p.add_argument("--delta-nu", type=float)
    p.add_argument("--zeta", type=float, default=1.0)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--delta-lambda", type=float)
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("berry", help="plaquette curvature field or loop Berry phase")
    _model_args(p)
    p.add_argument("--L", type=int)
    p.add_argument("--mesh", help="start:stop:n,start:stop:n over the first two parameters")
    p.add_argument("--loop-axis", type=int, default=1, help="parameter swept over [0, 2 pi]")
    p.add_argument("--loop-points", type=int, default=400)
    p.add_argument("--ellipse", help="loop c0,c1,r0,r1 in the first two parameters instead of a circle")
    p.add_argument("--out")
    p.set_defaults(func=cmd_berry)

    p = sub.add_parser("gap", help="lowest excitation energy")
    _model_args(p)
    p.add_argument("--L", required=True)
    p.add_argument("--lambda", dest="lam")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_gap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) == "fit" and args.model == "massive" and args.xi is None:
            parser.error("the massive fit model needs --xi")
    except SystemExit as exc:  # usage errors exit 1, --help exits 0
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qgtlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QGTLabError, ValueError, OSError) as exc:
        print(f"qgtlab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
