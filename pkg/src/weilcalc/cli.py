"""Command-line front end: ``weilcalc validate | suite | ym``.

Exit codes: 0 success, 1 a check failed, 2 usage, I/O or parse error.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import catalog, faults, suites
from .algebroid import AlgebroidError, validate
from .formats import FormatError, catalog_dir, load_json, parse_algebroid, parse_presentation, parse_scenario
from .funcring import ParseError
from .imconn import IMError, PrimitiveData
from .yangmills import (
    FoliatedSplitting, YangMillsData, YMError, adaptedness_check, foliated_action, foliated_curvature,
    foliated_ym_check, self_dual_check, tangent_residuals, ym_action, ym_first_check, ym_second_check,
)
from .geometry import format_form

REPORT_SCHEMA = "weilcalc.suite-report"
REPORT_VERSION = 1
YM_CHECKS = ("first", "second", "adapted", "action", "tangent", "foliated", "self-dual")


class UsageError(Exception):
    pass


def locate(path, err):
    """Best-effort 'line L, column C' for a FormatError raised while reading ``path``."""
    if err.line is not None:
        return err.line, err.column
    if err.text is None:
        return None
    try:
        raw = Path(path).read_text()
    except OSError:
        return None
    idx = raw.find(json.dumps(err.text))
    if idx < 0:
        return None
    line = raw.count("\n", 0, idx) + 1
    col = idx - (raw.rfind("\n", 0, idx) + 1) + 2
    if err.column is not None:
        col += err.column - 1
    return line, col


def _parse_error(path, err, out):
    pos = locate(path, err)
    prefix = f"{path}:{pos[0]}:{pos[1]}" if pos else f"{path}"
    print(f"{prefix}: error: {err}", file=out)
    return 2


# -- validate ------------------------------------------------------------------------

def presentation_problems(data):
    """(entry or None, issues) for a parsed JSON presentation document."""
    alg = parse_algebroid(data)
    issues = validate(alg)
    if issues:
        return None, issues
    try:
        entry = parse_presentation(data, check=False)
    except (AlgebroidError, IMError, YMError) as exc:
        return None, [str(exc)]
    for i, ideal in enumerate(entry.ideals):
        issues += [f"ideal {i + 1}: {msg}" for msg in ideal.problems()]
    for name, rep in entry.reps:
        issues += [f"representation {name}: {msg}" for msg in rep.problems()]
    for i, ce in enumerate(entry.conns):
        issues += [f"IM connection {i + 1}: {msg}" for msg in ce.conn.problems()]
        if ce.curving is not None and not issues:
            pd = PrimitiveData(ce.conn, ce.curving)
            issues += [f"IM connection {i + 1} curving: {msg}" for msg in pd.problems()]
    for s in entry.splittings:
        try:
            FoliatedSplitting(entry.alg, entry.ideals[s.ideal], s.leaf, s.sigma)
        except YMError as exc:
            issues.append(f"splitting {s.name}: {exc}")
    for g in entry.gauge_maps:
        ideal = entry.conns[g.conn].conn.ideal if entry.conns else None
        issues += [f"gauge map {g.name}: {msg}" for msg in g.phi.problems(ideal, g.kappa)]
    return entry, issues


def cmd_validate(args, out=sys.stdout, err=sys.stderr):
    path = args.file
    try:
        data = load_json(path)
        entry, issues = presentation_problems(data)
    except (FormatError, ParseError) as exc:
        if not isinstance(exc, FormatError):
            exc = FormatError(str(exc))
        return _parse_error(path, exc, err)
    except (AlgebroidError, ValueError) as exc:
        print(f"{path}: error: {exc}", file=err)
        return 2
    name = data.get("name") or Path(path).stem
    if issues:
        print(f"FAIL {name}", file=out)
        for msg in issues:
            print(f"  {msg}", file=out)
        return 1
    print(f"PASS {name}: rank {entry.alg.rank} over {entry.alg.model.dim} coordinates, "
          f"{len(entry.ideals)} ideal(s), {len(entry.reps)} representation(s), "
          f"{len(entry.conns)} IM connection(s)", file=out)
    return 0


# -- suite ---------------------------------------------------------------------------

def suite_report(result, seed, timing=False):
    doc = {"schema": REPORT_SCHEMA, "version": REPORT_VERSION, "seed": seed}
    doc.update(result.to_json(timing))
    return doc


def fault_result(seed, directory):
    checks = []
    for fault, suite, failing in suites.fault_sweep(seed, directory):
        checks.append(suites.Check(f"faults/{fault}", f"corruption is detected by the {suite} suite",
                                   failing > 0, False, {"failing": str(failing)}))
    return suites.SuiteResult("faults", checks)


def format_text(result, timing=False):
    lines = []
    for c in sorted(result.checks, key=lambda c: c.id):
        tag = " (control)" if c.control else ""
        lines.append(f"{c.status.upper():4} {c.id}{tag}: {c.anchor}")
        if not c.ok and c.detail:
            lines.append("     " + ", ".join(f"{k}={v}" for k, v in sorted(c.detail.items())))
    summary = f"{result.name}: {len(result.checks) - len(result.failed)} passed, {len(result.failed)} failed"
    if timing:
        summary += f" in {result.seconds:.2f}s"
    lines.append(summary)
    return "\n".join(lines)


def cmd_suite(args, out=sys.stdout, err=sys.stderr):
    known = suites.SUITES + ("faults",)
    if args.name == "all":
        names = list(suites.SUITES)
    elif args.name in known:
        names = [args.name]
    else:
        print(f"error: unknown suite {args.name!r}; choose from all, {', '.join(known)}", file=err)
        return 2
    directory = catalog_dir()
    if not directory.is_dir():
        print(f"error: catalog directory {directory} does not exist", file=err)
        return 2
    unknown = [f for f in args.inject if f not in faults.KNOWN]
    if unknown:
        print(f"error: unknown corruption {unknown[0]!r}; choose from {', '.join(faults.KNOWN)}", file=err)
        return 2
    with warnings.catch_warnings(), faults.inject(*args.inject):
        warnings.simplefilter("ignore")
        plain = [n for n in names if n != "faults"]
        results = suites.run_suites(plain, args.seed, directory, args.samples, args.jobs)
        if "faults" in names:
            results.append(fault_result(args.seed, directory))
    if args.report == "json":
        docs = [suite_report(r, args.seed, args.timing) for r in results]
        print(json.dumps(docs, indent=2, sort_keys=True), file=out)
    else:
        print("\n\n".join(format_text(r, args.timing) for r in results), file=out)
    return 0 if all(r.ok for r in results) else 1


# -- ym ------------------------------------------------------------------------------

def load_scenario(path):
    data = load_json(path)
    return parse_scenario(data, lambda name: catalog.load_entry(name))


def _residual_line(label, tagged):
    return f"{label} = {tagged}"


def run_ym(sc, which):
    """(lines, ok) for one scenario check."""
    ymd = YangMillsData(sc.kappa, sc.metric, sc.mu)
    if which == "foliated":
        if sc.splitting is None:
            raise YMError("scenario has no splitting")
        s = sc.splitting
        sigma = FoliatedSplitting(sc.entry.alg, sc.entry.ideals[s.ideal], s.leaf, s.sigma)
        res = foliated_ym_check(sigma, ymd)
        return [f"F = {format_form(foliated_curvature(sigma))}", _residual_line("residual", res),
                f"S = {foliated_action(sigma, ymd)}"], res.is_zero()
    if sc.curving is None:
        raise YMError("scenario has no curving")
    pd = PrimitiveData(sc.conn, sc.curving)
    issues = pd.problems()
    if issues:
        raise IMError("; ".join(issues))
    if which == "first":
        res = ym_first_check(pd, ymd)
        return [_residual_line("first", res)], res.is_zero()
    if which == "second":
        res = ym_second_check(pd, ymd)
        return [_residual_line("second", res)], res.is_zero()
    if which == "adapted":
        ok = adaptedness_check(pd, ymd)
        return [f"adapted = {'yes' if ok else 'no'}"], ok
    if which == "action":
        return [f"S = {ym_action(pd, ymd)}"], True
    if which == "tangent":
        if sc.gamma is None:
            raise YMError("scenario has no tangent vector")
        first, second = tangent_residuals(pd, ymd, sc.gamma, sc.beta)
        text = [f"tangent first = {format_form(first) if not first.is_zero() else 0}",
                f"tangent second = {format_form(second) if not second.is_zero() else 0}"]
        return text, first.is_zero() and second.is_zero()
    if which == "self-dual":
        rep = self_dual_check(pd, ymd)
        lines = [f"ratio = {rep.ratio}", f"constant = {'ok' if rep.constant_ok else 'mismatch'}"]
        lines += [f"{k}: {'ok' if v else 'fails'}" for k, v in rep.identities.items()]
        return lines, rep.ok
    raise UsageError(f"unknown check {which!r}")


def cmd_ym(args, out=sys.stdout, err=sys.stderr):
    try:
        sc = load_scenario(args.file)
    except (FormatError, ParseError) as exc:
        if not isinstance(exc, FormatError):
            exc = FormatError(str(exc))
        return _parse_error(args.file, exc, err)
    except (AlgebroidError, IMError, ValueError) as exc:
        print(f"{args.file}: error: {exc}", file=err)
        return 2
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            lines, ok = run_ym(sc, args.check)
        for w in caught:
            print(f"warning: {w.message}", file=err)
    except (YMError, IMError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    print("\n".join(lines), file=out)
    return 0 if ok else 1


# -- entry point ---------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="weilcalc", description="Exact checks for Weil cochains, IM connections and Yang-Mills data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="validate a presentation file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("suite", help="run identity suites over the catalog")
    p.add_argument("name", help="suite name, 'all' or 'faults'")
    p.add_argument("--report", choices=("text", "json"), default="text")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=suites.PER_SHAPE, help="random cochains per degree pair")
    p.add_argument("--jobs", type=int, default=1, help="run suites in parallel processes")
    p.add_argument("--timing", action="store_true", help="include wall-clock timing (not deterministic)")
    p.add_argument("--inject", action="append", default=[], metavar="CORRUPTION",
                   help="run with a named single-term corruption active (negative-control demonstrations)")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("ym", help="Yang-Mills checks on a scenario file")
    p.add_argument("file")
    p.add_argument("--check", choices=YM_CHECKS, required=True)
    p.set_defaults(func=cmd_ym)
    return parser


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return args.func(args, out, err)


if __name__ == "__main__":
    sys.exit(main())
