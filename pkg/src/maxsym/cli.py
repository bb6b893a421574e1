"""Command-line interface.

    maxsym generate --order 3 --var q --format text
    maxsym verify --suite all --max-order 8
    maxsym basis --order 4 --u cos --interval 0,1 --check
    maxsym residual --order 3 --u cos --y poly:1,0,-1 --interval 0,1
    maxsym transform --order 4 --u exp --k 2 --x 0.5

Exit codes: 0 success, 1 check failure, 2 usage error, 3 resource abort.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

from maxsym import itergen, solbasis, xform
from maxsym.diffalg import DiffPoly, parse_text
from maxsym.numeval import (
    NumevalError,
    const_fn,
    exp_fn,
    interior_points,
    parse_fnspec,
    poly_fn,
    residual,
    scaled,
    sin_fn,
    cos_fn,
    source_q_fn,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3
ORDER_CAP = 30


class UsageError(Exception):
    pass


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


@dataclass
class ReportDocument:
    title: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passed else EXIT_FAIL

    def run(self, name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except MemoryError:
            raise
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        res = CheckResult(name, bool(ok), detail, time.perf_counter() - t0)
        self.checks.append(res)
        return res

    def to_text(self, timing: bool = True) -> str:
        width = max([len(c.name) for c in self.checks] + [5])
        lines = [self.title, "-" * len(self.title)]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            line = f"{c.name:<{width}}  {status}"
            if timing:
                line += f"  {c.seconds:8.3f}s"
            if c.detail:
                line += f"  {c.detail}"
            lines.append(line)
        n_ok = sum(c.passed for c in self.checks)
        lines.append(f"{n_ok}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"

    def to_json_obj(self, timing: bool = True) -> dict:
        checks = []
        for c in self.checks:
            item = {"name": c.name, "status": "pass" if c.passed else "fail", "detail": c.detail}
            if timing:
                item["seconds"] = round(c.seconds, 6)
            checks.append(item)
        return {"title": self.title, "passed": self.passed, "checks": checks}


# ---------------------------------------------------------------------------
# generate

def run_generate(order: int, var: str = "q", fmt: str = "text", force: bool = False) -> str:
    if order < 2:
        raise UsageError("order must be at least 2")
    if order > ORDER_CAP and not force:
        raise UsageError(f"order {order} exceeds the cap of {ORDER_CAP}; pass --force")
    if var == "q":
        form = itergen.generate_maxsym(order)
    elif var == "r":
        form = itergen.phi_n(order)
    else:
        raise UsageError(f"--var must be q or r, not {var!r}")
    if fmt == "text":
        return form.to_text() + "\n"
    if fmt == "latex":
        return form.to_latex() + "\n"
    if fmt == "json":
        return form.to_json() + "\n"
    raise UsageError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# A15 ground truth

def load_a15_truth() -> tuple[str, str]:
    """Return the bundled transcription text and its recorded checksum."""
    data = resources.files("maxsym") / "data"
    text = (data / "a15_15.txt").read_text()
    recorded = (data / "a15_15.sha256").read_text().split()[0]
    return text, recorded


def _diff_terms(got: DiffPoly, want: DiffPoly, limit: int = 10) -> str:
    diff = got - want
    terms = [f"{c}*{'*'.join(f'{i}^{e}' if e != 1 else str(i) for i, e in f.items())}"
             for c, f in diff.iter_terms()]
    more = f" (+{len(terms) - limit} more)" if len(terms) > limit else ""
    return f"{len(terms)} differing term(s): " + "; ".join(terms[:limit]) + more


def run_a15_check(truth_text: Optional[str] = None) -> ReportDocument:
    report = ReportDocument("A_15^15 ground truth")
    recorded = None
    if truth_text is None:
        truth_text, recorded = load_a15_truth()

    if recorded is not None:
        def checksum():
            digest = hashlib.sha256(truth_text.encode()).hexdigest()
            return digest == recorded, digest[:16]
        report.run("a15-checksum", checksum)

    def compare():
        want = parse_text(truth_text)
        got = itergen.theta_n_u(15).coeffs[-1]
        if got == want:
            return True, f"{len(got)} terms identical"
        return False, _diff_terms(got, want)
    report.run("a15-coefficient", compare)
    return report


# ---------------------------------------------------------------------------
# verification suites

def _suite_recurrence(report: ReportDocument, max_order: int):
    for n in range(1, max_order + 1):
        def check(n=n):
            ext = itergen.extract_K(n)
            rec = itergen.k_recurrence(n)
            summ = itergen.k_summation(n)
            if ext != rec:
                return False, "extract_K != recurrence"
            if ext != summ:
                return False, "extract_K != summation"
            if n >= 2 and list(itergen.closed_form_K12(n)) != ext[1:3]:
                return False, "closed forms for K^1, K^2 disagree"
            return True, ""
        report.run(f"recurrence n={n}", check)


def _suite_operators(report: ReportDocument, max_order: int):
    for n in range(2, max_order + 1):
        def check(n=n):
            theta = itergen.theta_n_u(n)
            if theta != itergen.phi_n_r(n):
                return False, "phi_n_r != theta_n_u"
            if theta.coefficient(2) != itergen.a_n2(n):
                return False, f"A_n^2 = {theta.coefficient(2)}"
            if not theta.is_normal():
                return False, "not in normal form"
            return True, ""
        report.run(f"operators n={n}", check)


def _suite_transform(report: ReportDocument, max_order: int):
    report.run("schwarzian source identity",
               lambda: (xform.verify_schwarzian_source_identity().is_zero(), ""))
    for n in range(2, max_order + 1):
        def check(n=n):
            d = xform.verify_canonical_identity(n, cap=max(max_order, 8))
            return d.is_zero(), "" if d.is_zero() else f"{len(d)} residual terms"
        report.run(f"canonical identity n={n}", check)


_SOURCE_PAIRS = {
    # name: (u, v, exact q)
    "1": (lambda: const_fn(1.0), lambda: poly_fn([0.0, 1.0]), 0.0),
    "cos": (lambda: cos_fn(), lambda: sin_fn(), 1.0),
    "exp": (lambda: exp_fn(), lambda: scaled(exp_fn(-1.0), -0.5), -1.0),
}


def _suite_solutions(report: ReportDocument, max_order: int):
    for n in range(2, max_order + 1):
        def check(n=n):
            bad = [k for k in range(n) if not solbasis.verify_basis_symbolic(n, k, cap=max(8, n)).is_zero()]
            return not bad, f"nonzero for k={bad}" if bad else ""
        report.run(f"symbolic basis n={n}", check)
    for name, (mk_u, mk_v, qv) in _SOURCE_PAIRS.items():
        for n in range(2, min(max_order, 6) + 1):
            def check(n=n, mk_u=mk_u, mk_v=mk_v, qv=qv):
                q = const_fn(qv)
                want = solbasis.superfactorial(n)
                worst = 0.0
                for b in (solbasis.basis_from_u(mk_u(), n, q=q),
                          solbasis.basis_from_uv(mk_u(), mk_v(), n, q=q)):
                    res = solbasis.max_residual(b)
                    wr = b.wronskians()
                    wr_err = max(abs(w - want) / want for w in wr)
                    worst = max(worst, res)
                    if res > 1e-8 or wr_err > 1e-8:
                        return False, f"{b.provenance}: residual {res:.2e}, wronskian error {wr_err:.2e}"
                return True, f"max residual {worst:.1e}"
            report.run(f"numeric basis u={name} n={n}", check)


SUITES = {
    "recurrence": _suite_recurrence,
    "operators": _suite_operators,
    "transform": _suite_transform,
    "solutions": _suite_solutions,
}


def run_verify(suite: str, max_order: int) -> ReportDocument:
    if max_order < 2:
        raise UsageError("--max-order must be at least 2")
    if suite != "a15" and suite != "all" and suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}")
    report = ReportDocument(f"verify {suite} (max order {max_order})")
    names = list(SUITES) if suite == "all" else ([] if suite == "a15" else [suite])
    for name in names:
        SUITES[name](report, max_order)
    if suite in ("a15", "all"):
        report.checks.extend(run_a15_check().checks)
    return report


# ---------------------------------------------------------------------------
# numeric commands

def _interval(text: str) -> tuple[float, float]:
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"--interval expects a,b; got {text!r}") from None
    if not a < b:
        raise UsageError("--interval needs a < b")
    return a, b


def _fn(spec: str, interval):
    try:
        return parse_fnspec(spec, interval)
    except NumevalError as exc:
        raise UsageError(str(exc)) from None


def run_basis(order: int, u_spec: str, interval, x0: Optional[float] = None,
              v_spec: Optional[str] = None, check: bool = False) -> tuple[dict, int]:
    if order < 2:
        raise UsageError("order must be at least 2")
    u = _fn(u_spec, interval)
    x0 = interval[0] if x0 is None else x0
    if v_spec:
        basis = solbasis.basis_from_uv(u, _fn(v_spec, interval), order)
    else:
        basis = solbasis.basis_from_u(u, order, x0=x0)
    samples = interior_points(interval, 5)
    wr_pts = interior_points(interval, 3)
    wr = [solbasis.wronskian_numeric(basis, x) for x in wr_pts]
    res = basis.residuals()
    doc = {
        "order": order,
        "u": u.label,
        "v": v_spec,
        "x0": x0,
        "interval": list(interval),
        "provenance": basis.provenance,
        "entries": [
            {"label": e.label, "samples": [[x, e(x)] for x in samples]} for e in basis.entries
        ],
        "wronskian": [{"x": x, "value": w} for x, w in zip(wr_pts, wr)],
        "expected_wronskian": solbasis.superfactorial(order) if not v_spec else None,
        "residuals": res,
    }
    status = EXIT_OK
    if check:
        ok_res = max(res) <= 1e-8
        w0 = wr[0]
        ok_const = w0 != 0 and max(abs(w - w0) for w in wr) <= 1e-8 * abs(w0)
        ok_val = True
        if not v_spec:
            want = solbasis.superfactorial(order)
            ok_val = max(abs(w - want) for w in wr) <= 1e-8 * want
        doc["checks"] = {"residual": ok_res, "wronskian_constant": ok_const,
                         "wronskian_value": ok_val}
        if not (ok_res and ok_const and ok_val):
            status = EXIT_FAIL
    return doc, status


def run_residual(order: int, u_spec: str, y_spec: str, interval, points: int = 20) -> dict:
    if order < 2:
        raise UsageError("order must be at least 2")
    u = _fn(u_spec, interval)
    y = _fn(y_spec, interval)
    form = itergen.generate_maxsym(order)
    pts = interior_points(interval, points)
    value = residual(form, source_q_fn(u), y, pts)
    return {"order": order, "u": u.label, "y": y.label, "points": points, "residual": value}


def run_transform(order: int, u_spec: str, k: int, x: float, interval,
                  lam: float = 1.0, x0: Optional[float] = None) -> dict:
    u = _fn(u_spec, interval)
    emap = xform.EquivalenceMap(order, u, lam, x0)
    value = xform.map_canonical_solution(emap, k, x)
    basis = solbasis.basis_from_u(u, order, x0=emap.x0)
    return {
        "order": order, "u": u.label, "lambda": lam, "x0": emap.x0, "k": k, "x": x,
        "z": emap.z(x), "y": value, "basis_entry": basis.entries[k](x) / lam,
    }


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="maxsym", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--json-out", metavar="PATH", help="also write JSON output here")
        return sp

    g = common(sub.add_parser("generate", help="print the order-N equation"))
    g.add_argument("--order", "-n", type=int, required=True)
    g.add_argument("--var", choices=("q", "r"), default="q")
    g.add_argument("--format", choices=("text", "latex", "json"), default="text")
    g.add_argument("--force", action="store_true", help=f"allow orders above {ORDER_CAP}")

    v = common(sub.add_parser("verify", help="run identity suites"))
    v.add_argument("--suite", choices=("recurrence", "operators", "transform", "solutions",
                                       "a15", "all"), default="all")
    v.add_argument("--max-order", type=int, default=8)
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.add_argument("--no-timing", action="store_true", help="omit wall times")

    b = common(sub.add_parser("basis", help="build and check a solution basis"))
    b.add_argument("--order", "-n", type=int, required=True)
    b.add_argument("--u", default="exp", help="source solution, e.g. exp, cos, poly:1,0,1, pow2")
    b.add_argument("--v", default=None, help="second source solution (uses u^(n-1-k) v^k)")
    b.add_argument("--x0", type=float, default=None)
    b.add_argument("--interval", default="0,1")
    b.add_argument("--check", action="store_true")

    r = common(sub.add_parser("residual", help="residual of y against the order-N equation"))
    r.add_argument("--order", "-n", type=int, required=True)
    r.add_argument("--u", required=True, help="source solution fixing q = -u''/u")
    r.add_argument("--y", required=True)
    r.add_argument("--interval", default="0,1")
    r.add_argument("--points", type=int, default=20)

    t = common(sub.add_parser("transform", help="image of w = z^k under the canonical map"))
    t.add_argument("--order", "-n", type=int, required=True)
    t.add_argument("--u", default="exp")
    t.add_argument("--k", type=int, default=0)
    t.add_argument("--x", type=float, required=True)
    t.add_argument("--lambda", dest="lam", type=float, default=1.0)
    t.add_argument("--x0", type=float, default=None)
    t.add_argument("--interval", default="0,1")
    return p


def _emit(text: str, json_obj, path: Optional[str]):
    sys.stdout.write(text)
    if path:
        with open(path, "w") as fh:
            json.dump(json_obj, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            out = run_generate(args.order, args.var, args.format, args.force)
            obj = json.loads(out) if args.format == "json" else {"output": out.rstrip("\n")}
            _emit(out, obj, args.json_out)
            return EXIT_OK
        if args.command == "verify":
            report = run_verify(args.suite, args.max_order)
            timing = not args.no_timing
            obj = report.to_json_obj(timing)
            text = _dump(obj) if args.format == "json" else report.to_text(timing)
            _emit(text, obj, args.json_out)
            return report.exit_code
        if args.command == "basis":
            doc, status = run_basis(args.order, args.u, _interval(args.interval), args.x0,
                                    args.v, args.check)
            _emit(_dump(doc), doc, args.json_out)
            return status
        if args.command == "residual":
            doc = run_residual(args.order, args.u, args.y, _interval(args.interval), args.points)
            _emit(_dump(doc), doc, args.json_out)
            return EXIT_OK
        if args.command == "transform":
            doc = run_transform(args.order, args.u, args.k, args.x, _interval(args.interval),
                                args.lam, args.x0)
            _emit(_dump(doc), doc, args.json_out)
            return EXIT_OK
    except UsageError as exc:
        print(f"maxsym: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MemoryError:
        print("maxsym: aborted: out of memory", file=sys.stderr)
        return EXIT_RESOURCE
    except (NumevalError, solbasis.BasisError, ValueError) as exc:
        print(f"maxsym: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
