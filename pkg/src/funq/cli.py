"""Command-line front end: ``funq {build,measure,compare,table,export}``."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from typing import Dict, List, Optional

from . import __version__
from . import distortion_mc as mc
from . import product_quantizer as pqm
from .allocation import DEFAULT_THETA, plan
from .asymptotics import dimension_profile, entropy_rate, quantization_rate
from .process_models import ModelSpecError, NoBasisError, parse_model
from .scalar_quantizer import optimal_codebook
from .vector_quantizer import QUALITY, capacity_constants

log = logging.getLogger("funq")

TABLES = ("scalar-errors", "capacity", "rates", "dimension", "allocation")
DEFAULT_N_GRID = "10,100,1000,10000,100000"


def _header(args, extra: Optional[Dict[str, object]] = None) -> List[str]:
    """Comment lines describing the resolved run configuration."""
    cfg = {"funq_version": __version__, "command": args.command, "seed": args.seed}
    for k in ("model", "n", "theta", "l", "samples", "mode", "quality", "kind", "codebook"):
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg.update(extra or {})
    return [f"# {k} = {v}" for k, v in cfg.items()]


def _emit(args, lines: List[str]):
    text = "\n".join(lines) + "\n"
    if args.out and args.command != "build":
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(args, columns, rows, extra=None):
    lines = _header(args, extra)
    target = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        for ln in lines:
            target.write(ln + "\n")
        w = csv.writer(target, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
    finally:
        if args.out:
            target.close()


def _g(x: float) -> str:
    return f"{x:.17g}"


def _n_grid(text: str) -> List[int]:
    return [int(float(s)) for s in text.split(",") if s.strip()]


# -- commands ------------------------------------------------------------------

def cmd_build(args) -> int:
    model = parse_model(args.model)
    if args.n is None:
        raise SystemExit("build: --n is required")
    pq = pqm.build(model, int(args.n), theta=args.theta, l_override=args.l,
                   quality=args.quality, seed=args.seed, allocator=args.allocator)
    if args.out:
        pqm.save(pq, args.out)
    a = pq.alloc
    lines = _header(args) + [
        f"total_size = {pq.total_size}",
        f"l = {a.l}", f"m = {a.m}", f"sizes = {' '.join(map(str, a.sizes))}",
        f"analytic_distortion = {_g(pq.analytic_distortion)}",
    ]
    if pq.exact_decomposition is not None:
        lines.append(f"exact_decomposition = {_g(pq.exact_decomposition)}")
    if args.out:
        lines.append(f"codebook = {args.out}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_measure(args) -> int:
    pq = pqm.load(args.codebook)
    est = mc.estimate(pq, samples=args.samples, seed=args.seed, mode=args.mode)
    lines = _header(args, {"model_record": pq.model.to_record()}) + est.report().splitlines()
    lines.append(f"analytic_distortion = {_g(pq.analytic_distortion)}")
    status = 0
    if pq.l == 1 and est.mode == "product":
        z = (est.mean - pq.analytic_distortion) / est.stderr if est.stderr > 0 else 0.0
        ok = abs(z) <= 3.0
        lines.append(f"self_check_z = {z:.6f}")
        lines.append(f"self_check = {'pass' if ok else 'FAIL'}")
        status = 0 if ok else 1
    _emit(args, lines)
    return status


def cmd_compare(args) -> int:
    pq = pqm.load(args.codebook)
    est = mc.estimate(pq, samples=args.samples, seed=args.seed, mode=args.mode)
    cmp = mc.compare_to_theory(pq, est)
    if args.csv:
        _write_csv(args, mc.CSV_COLUMNS, [mc.csv_row(pq, est, cmp)])
    else:
        _emit(args, _header(args) + est.report().splitlines() + cmp.report().splitlines())
    return 0


def _table_scalar(args):
    kmax = int(args.n or 200)
    rows = []
    for k in range(1, kmax + 1):
        d = optimal_codebook(k).distortion
        rows.append([k, _g(math.sqrt(d)), _g(d), _g(k * k * d)])
    return ("k", "e_k", "e_k_sq", "k2_e_k_sq"), rows, {"k_max": kmax}


def _table_capacity(args):
    ls = [int(s) for s in args.ls.split(",")]
    k_max = int(args.n or 32)
    rows = []
    for l in ls:
        est = capacity_constants(l, k_max, quality=args.quality, seed=args.seed)
        for k, v in zip(est.ks, est.values):
            rows.append([l, k, _g(v), _g(est.C), _g(est.Q), int(est.exact)])
    return ("l", "k", "k_pow_2_over_l_e_k_sq", "C", "Q", "exact"), rows, {"ls": args.ls, "k_max": k_max}


def _table_rates(args):
    model = parse_model(args.model)
    rows = []
    for n in _n_grid(args.grid):
        q = quantization_rate(model, n).value
        e = entropy_rate(model, n).value
        rows.append([n, _g(q), _g(e), _g(q / e)])
    return ("n", "quantization", "entropy", "ratio"), rows, {"grid": args.grid,
                                                           "caveat": "asymptotic prediction"}


def _table_dimension(args):
    model = parse_model(args.model)
    rows = []
    for n in _n_grid(args.grid):
        p = dimension_profile(model, n)
        rows.append([n, p.c_n, _g(p.lower_bound), _g(p.ratio)])
    return ("n", "c_n", "lower_bound", "ratio"), rows, {"grid": args.grid}


def _table_allocation(args):
    model = parse_model(args.model)
    rows = []
    for n in _n_grid(args.grid):
        a = plan(model, n, args.theta, args.l)
        rows.append([n, _g(a.theta), a.l, a.m, " ".join(map(str, a.sizes)), a.product])
    return ("n", "theta", "l", "m", "sizes", "product"), rows, {"grid": args.grid}


def cmd_table(args) -> int:
    fn = {"scalar-errors": _table_scalar, "capacity": _table_capacity, "rates": _table_rates,
          "dimension": _table_dimension, "allocation": _table_allocation}[args.kind]
    cols, rows, extra = fn(args)
    _write_csv(args, cols, rows, extra)
    return 0


def cmd_export(args) -> int:
    pq = pqm.load(args.codebook)
    if not args.out:
        raise SystemExit("export: --out is required")
    pqm.write_paths_csv(pq, args.out, grid_points=args.grid_points, limit=args.limit)
    sys.stdout.write("\n".join(_header(args) + [f"paths = {pq.total_size}"]) + "\n")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="funq", description=__doc__)
    p.add_argument("--version", action="version", version=f"funq {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", default="brownian",
                            help='process spec: "brownian", "rl:0.75", "ibm:1", "rl32", "explicit:1,0.5;tail=2"')
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)
        sp.add_argument("--quality", choices=sorted(QUALITY), default="fast")

    b = sub.add_parser("build", help="plan an allocation and write a codebook file")
    common(b)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--theta", type=float, default=DEFAULT_THETA)
    b.add_argument("--l", type=int, default=None, help="override the block length")
    b.add_argument("--allocator", choices=("formula", "brute"), default="formula")
    b.set_defaults(func=cmd_build)

    for name, func, hlp in (("measure", cmd_measure, "Monte-Carlo distortion of a codebook file"),
                            ("compare", cmd_compare, "ratio of measured error to the asymptotic rate")):
        s = sub.add_parser(name, help=hlp)
        common(s, model=False)
        s.add_argument("codebook")
        s.add_argument("--samples", type=int, default=100_000)
        s.add_argument("--mode", choices=mc.MODES, default="product")
        if name == "compare":
            s.add_argument("--csv", action="store_true", help="emit one appendable CSV row")
        s.set_defaults(func=func)

    t = sub.add_parser("table", help="CSV tables of constants and asymptotic formulas")
    common(t)
    t.add_argument("kind", choices=TABLES)
    t.add_argument("--n", type=int, default=None, help="k_max for scalar-errors and capacity")
    t.add_argument("--grid", default=DEFAULT_N_GRID, help="comma-separated n values")
    t.add_argument("--theta", type=float, default=DEFAULT_THETA)
    t.add_argument("--l", type=int, default=None)
    t.add_argument("--ls", default="1,2,3", help="block lengths for the capacity table")
    t.set_defaults(func=cmd_table)

    e = sub.add_parser("export", help="write every codeword path on a time grid as CSV")
    common(e, model=False)
    e.add_argument("codebook")
    e.add_argument("--grid-points", type=int, default=257)
    e.add_argument("--limit", type=int, default=10_000)
    e.set_defaults(func=cmd_export)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ModelSpecError as exc:
        pointer = " " * (exc.position + 2) + "^" if exc.position is not None else ""
        print(f"funq: model spec error: {exc}\n  {exc.text}\n{pointer}", file=sys.stderr)
        return 2
    except (NoBasisError, pqm.EnumerationLimitError, ValueError, OSError) as exc:
        print(f"funq: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
