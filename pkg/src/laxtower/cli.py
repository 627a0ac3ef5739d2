"""Command line entry point: ``laxtower {verify,evolve,reduce,operators}``.

Reports are CSV (or aligned text) with columns
``check_id, anchor, params, defect, tol, pass``; ``evolve`` writes a time
series of field grid samples and invariants, with its check report beside
it (``<name>-checks.csv``, or stderr when the series goes to stdout).  Exit status is 0 when every check passes, 1 when a check fails and
2 for configuration errors.  Without ``--out`` the report goes to stdout, or
to ``$LAXTOWER_OUT/<command>.csv`` when that variable is set; a JSON manifest
of the run configuration is written next to any report file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from pathlib import Path

import numpy as np
import sympy as sp

from . import checks as C
from . import hierarchies as hz
from .errors import LaxTowerError
from .laurent import FourierField

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
OUT_ENV = "LAXTOWER_OUT"
COLUMNS = ["check_id", "anchor", "params", "defect", "tol", "pass"]

SUITES = {
    "rmatrix": lambda a: C.suite_rmatrix(a.seed, a.probes or 50, _names(a)),
    "jacobi": lambda a: C.suite_jacobi(a.seed, a.probes or 20, _names(a)),
    "compat": lambda a: C.suite_compat(a.seed, a.probes or 20, _names(a)),
    "virasoro": lambda a: C.suite_virasoro(a.seed, a.probes or 20, _names(a, ("benny", "dtoda"))),
    "involution": lambda a: C.suite_involution(a.seed, a.probes or 20, _names(a)),
    "mult": lambda a: C.suite_mult(a.seed, a.probes or 20, _names(a)),
    "inversion": lambda a: C.suite_inversion(a.seed, a.probes or 20, _names(a, ("benny", "dtoda"))),
    "flows": lambda a: C.suite_flows(a.seed, a.probes or 5, _names(a)),
    "pde": lambda a: C.suite_pde(a.seed, a.probes or 10),
    "classify": lambda a: C.suite_classification(a.seed),
}


def _names(args, default=C.RMATRIX_NAMES):
    return (args.rmatrix,) if args.rmatrix else default


def _positive(kind):
    def parse(s):
        v = kind(s)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {s}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="laxtower", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, help="report path (default stdout or $%s)" % OUT_ENV)
        sp.add_argument("--format", choices=("csv", "text"), default="csv")

    v = sub.add_parser("verify", help="run a structural verification suite")
    v.add_argument("--suite", choices=sorted(SUITES) + ["all"], required=True)
    v.add_argument("--rmatrix", choices=C.RMATRIX_NAMES)
    v.add_argument("--probes", type=_positive(int))
    common(v)

    e = sub.add_parser("evolve", help="integrate a Lax flow and track invariants")
    e.add_argument("--hierarchy", choices=("benny", "dtoda"), required=True)
    e.add_argument("--flow", type=_positive(int), help="flow index m (default: displayed system)")
    e.add_argument("--T", type=_positive(float), default=0.5)
    e.add_argument("--dt", type=_positive(float), default=1e-3)
    e.add_argument("--modes", type=_positive(int), default=32)
    e.add_argument("--kmax", type=_positive(int), default=5)
    e.add_argument("--tol", type=_positive(float), default=1e-8)
    e.add_argument("--init", help='initial fields, e.g. "u0=0.1*sin;um1=1" (bare sin/cos: one period)')
    e.add_argument("--grid", type=int, default=8, help="grid samples per field in the time series")
    common(e)

    r = sub.add_parser("reduce", help="Dirac reduction of a generated extended operator")
    r.add_argument("--family", choices=("benny", "dtoda"), required=True)
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--modes", type=_positive(int), default=16)
    r.add_argument("--probes", type=_positive(int), default=10)
    common(r)

    o = sub.add_parser("operators", help="checks on the closed-form Hamiltonian operators")
    o.add_argument("--family", choices=("benny", "dtoda"), required=True)
    o.add_argument("--check", choices=("structure", "recursion", "metric", "all"), default="all")
    o.add_argument("--modes", type=_positive(int), default=16)
    common(o)
    return p


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_verify(args) -> list:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    rows = []
    for name in names:
        rows += SUITES[name](args)
    return rows


_BARE = re.compile(r"\b(sin|cos)\b(?!\s*\()")


def parse_init(family: str, text: str | None, modes: int) -> tuple:
    """Fields from ``"name=expr;..."`` in ``x`` on [0, 1); a bare ``sin``/``cos`` means ``sin(2 pi x)``.

    Unlisted fields keep the default example data.
    """
    h = hz.hierarchy(family)
    fields = list(C.example_state(family))
    if not text:
        return tuple(fields)
    x = sp.Symbol("x")
    n = 4 * modes + 4
    grid = np.arange(n) / n
    for item in filter(None, (t.strip() for t in text.split(";"))):
        name, sep, expr = item.partition("=")
        name = name.strip()
        if not sep or name not in h.field_names:
            raise ValueError(f"--init entry {item!r}: expected one of {h.field_names} = expression")
        try:
            e = sp.sympify(_BARE.sub(r"\1(2*pi*x)", expr))
        except (sp.SympifyError, SyntaxError) as exc:
            raise ValueError(f"--init entry {item!r}: {exc}") from None
        if e.free_symbols - {x}:
            raise ValueError(f"--init entry {item!r}: only x may appear")
        with np.errstate(all="ignore"):
            vals = np.asarray(sp.lambdify(x, e, "numpy")(grid), dtype=complex)
        vals = np.broadcast_to(vals, grid.shape)
        if np.any(np.abs(vals.imag) > 0):
            raise ValueError(f"--init entry {item!r} is not real on [0, 1)")
        vals = vals.real
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"--init entry {item!r} is not finite on [0, 1)")
        fields[h.field_names.index(name)] = FourierField.from_grid(vals, modes)
    return tuple(fields)


def cmd_evolve(args):
    """Returns ``(series_rows, series_columns, checks)``."""
    h = hz.hierarchy(args.hierarchy)
    m = args.flow or hz.DISPLAYED_FLOW_SCALE[args.hierarchy][0]
    if args.grid < 0:
        raise ValueError("--grid must be nonnegative")
    st = hz.FieldState(parse_init(args.hierarchy, args.init, args.modes))
    traj = hz.evolve(h, st, m, args.dt, args.T, modes=args.modes, kmax=args.kmax)
    ks = range(1, args.kmax + 1)
    ncas = traj.casimirs.shape[1]
    samples = [f"{f}@{j}" for f in h.field_names for j in range(args.grid)]
    cols = (["time"] + samples + [f"trace{k}" for k in ks] + [f"drift{k}" for k in ks]
            + [f"casimir{j + 1}" for j in range(ncas)] + [f"casimir_drift{j + 1}" for j in range(ncas)])
    series = []
    d, cd = traj.drift_series(), np.abs(traj.casimirs - traj.casimirs[0])
    for i, t in enumerate(traj.times):
        grid = [v for f in traj.states[i].fields for v in (f.grid(args.grid) if args.grid else [])]
        vals = [t, *grid, *traj.conserved[i], *d[i], *traj.casimirs[i], *cd[i]]
        series.append({c: f"{v:.16e}" for c, v in zip(cols, vals)})
    p = f"hierarchy={args.hierarchy};m={m};dt={args.dt};T={args.T};modes={args.modes}"
    checks = [C.CheckResult("conserved_drift", "trace invariants conserved", p,
                            float(np.max(traj.drift())), args.tol),
              C.CheckResult("casimir_drift", "Casimirs conserved", p,
                            float(np.max(traj.casimir_drift(), initial=0.0)), args.tol)]
    return series, cols, checks


def cmd_reduce(args) -> list:
    if (args.family, args.n) not in C.REDUCTIONS:
        raise LaxTowerError(
            f"no closed-form reduction for {args.family} n={args.n}; "
            f"available: {sorted(C.REDUCTIONS)}")
    state = C.default_state(args.family)
    return C.reduction_checks(args.family, args.n, state, args.modes, args.probes, args.seed)


def cmd_operators(args) -> list:
    fam = args.family
    rows = []
    if args.check in ("structure", "all"):
        rows += C.operator_checks(fam, C.default_state(fam), args.seed, args.modes)
    if args.check in ("recursion", "all"):
        rows += C.recursion_checks(fam, C.default_state(fam), max(args.modes, 24))
    if args.check in ("metric", "all"):
        rng = np.random.default_rng(args.seed)
        states = {f: [C.default_state(f), C.random_family_state(f, rng)] for f in ("benny", "dtoda")}
        rows += [r for r in C.metric_checks(states) if r.params.startswith(f"operator={fam}")]
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _render(rows: list, cols: list, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    widths = [max(len(c), *(len(r[c]) for r in rows)) if rows else len(c) for c in cols]
    lines = ["  ".join(c.ljust(n) for c, n in zip(cols, widths))]
    lines += ["  ".join(r[c].ljust(n) for c, n in zip(cols, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def _destination(args, suffix: str = "") -> Path | None:
    if args.out is not None:
        return args.out if not suffix else args.out.with_name(args.out.stem + suffix + args.out.suffix)
    base = os.environ.get(OUT_ENV)
    if base:
        ext = "csv" if args.format == "csv" else "txt"
        return Path(base) / f"{args.command}{suffix}.{ext}"
    return None


def _emit(text: str, dest: Path | None, args) -> None:
    if dest is None:
        sys.stdout.write(text)
        return
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(text)
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    dest.with_name(dest.name + ".manifest.json").write_text(json.dumps(config, indent=2, sort_keys=True))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "evolve":
            series, cols, rows = cmd_evolve(args)
            _emit(_render(series, cols, args.format), _destination(args), args)
            report = _render([r.row() for r in rows], COLUMNS, args.format)
            if _destination(args) is None:
                sys.stderr.write(report)  # keep stdout a single table
            else:
                _emit(report, _destination(args, "-checks"), args)
        else:
            rows = {"verify": cmd_verify, "reduce": cmd_reduce, "operators": cmd_operators}[args.command](args)
            _emit(_render([r.row() for r in rows], COLUMNS, args.format), _destination(args), args)
    except (LaxTowerError, ValueError) as exc:
        print(f"laxtower: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    failed = [r for r in rows if not r.passed]
    for r in failed:
        print(f"FAIL {r.check_id} {r.params} defect={r.defect:.3e} tol={r.tol:.0e}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
