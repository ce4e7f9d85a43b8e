"""``hankel-lab`` command-line front end.

Exit codes: 0 ok, 1 verification failures, 2 usage or spec error,
3 numerical failure.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import galerkin, spectral, transform, verify
from .errors import (ConvergenceFailure, DegenerateFit, HankelLabError, Inconclusive,
                     NonConvergent, SingularityError)
from .kernelfn import FromMeasure, Kernel, kernel_from_spec
from .measure import (BlaschkeRule, bergszwarc_moments, blaschke_check, carleson_check,
                      laplace, measure_from_spec, moments)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (NonConvergent, SingularityError, ConvergenceFailure, DegenerateFit, Inconclusive)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(x):
    return f"{float(x):.17g}"


def _float_list(text):
    text = text.strip()
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from exc


def _int_list(text):
    vals = _float_list(text)
    if any(v != int(v) for v in vals):
        raise UsageError(f"expected integers: {text!r}")
    return [int(v) for v in vals]


def _grid(text):
    """``lo,hi,n[,log]`` -> array."""
    parts = text.split(",")
    if len(parts) not in (3, 4):
        raise UsageError("grid is lo,hi,points[,log]")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if len(parts) == 4 and parts[3] == "log":
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _emit(text, out):
    """Write to stdout or atomically to ``out`` (temp file in the same directory, then rename)."""
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".hankel-lab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _kernel_or_moments(args):
    if bool(args.kernel) == bool(args.moments):
        raise UsageError("give exactly one of --kernel or --moments")
    if args.kernel:
        return kernel_from_spec(_read_json(args.kernel))
    seq = _read_json(args.moments)
    if isinstance(seq, dict):
        seq = seq.get("moments")
    if not isinstance(seq, list):
        raise UsageError("--moments file must hold a list or {\"moments\": [...]}")
    return np.asarray(seq, dtype=float)


# ---------------------------------------------------------------------------
# subcommands; each returns (text, exit code)


def cmd_laplace(args):
    mu = measure_from_spec(_read_json(args.measure))
    ts = _float_list(args.t)
    vals = laplace(mu, np.asarray(ts)) if ts else []
    if args.format == "json":
        return _json_text({"schema": "hankel-lab-laplace/1", "t": ts, "h": [float(v) for v in vals]}), EXIT_OK
    return _csv_text(["t", "h"], [[_num(a), _num(v)] for a, v in zip(ts, vals)]), EXIT_OK


def cmd_carleson(args):
    rep = carleson_check(measure_from_spec(_read_json(args.measure)))
    return _json_text(rep.to_json()), EXIT_OK


def cmd_blaschke(args):
    if bool(args.atoms) == bool(args.rule):
        raise UsageError("give exactly one of --atoms or --rule")
    if args.atoms:
        target = _float_list(args.atoms)
    else:
        spec = _read_json(args.rule)
        try:
            target = BlaschkeRule(**spec)
        except TypeError as exc:
            raise UsageError(f"bad rule: {exc}") from exc
    ok, total = blaschke_check(target)
    return _json_text({"schema": "hankel-lab-blaschke/1", "converges": ok,
                       "sum": total if math.isfinite(total) else "inf"}), EXIT_OK


def cmd_moments(args):
    mu = measure_from_spec(_read_json(args.measure))
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    vals = bergszwarc_moments(mu, args.n) if args.derived else moments(mu, args.n)
    if args.format == "json":
        return _json_text({"schema": "hankel-lab-moments/1", "moments": [float(v) for v in vals]}), EXIT_OK
    return _csv_text(["j", "moment"], [[j, _num(v)] for j, v in enumerate(vals)]), EXIT_OK


def cmd_galerkin(args):
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    src = _kernel_or_moments(args)
    G = galerkin.laguerre_section(src, args.n) if isinstance(src, Kernel) else \
        galerkin.moment_section(src, args.n, source=os.path.basename(args.moments))
    if args.out:
        _emit(galerkin.section_to_json(G) + "\n", args.out + ".json")
    return G.to_csv(), EXIT_OK


def cmd_norms(args):
    orders = _int_list(args.orders)
    if not orders or min(orders) < 1:
        raise UsageError("--orders needs positive integers")
    table = spectral.norm_convergence(_kernel_or_moments(args), orders)
    return _csv_text(["N", "lambda_max"], [[n, _num(v)] for n, v in table]), EXIT_OK


def _grid_arg(args):
    if bool(args.t) == bool(args.grid):
        raise UsageError("give exactly one of --t or --grid")
    return np.asarray(_float_list(args.t)) if args.t else _grid(args.grid)


def cmd_apply(args):
    h = kernel_from_spec(_read_json(args.kernel))
    f = transform.testfn_from_spec(_read_json(args.testfn))
    t = _grid_arg(args)
    if t.size == 0:
        return _csv_text(["t", "value"], []), EXIT_OK
    F = transform.apply_hankel(h, f, t)
    return F.to_csv(), EXIT_OK


def cmd_qform(args):
    mu = measure_from_spec(_read_json(args.measure))
    f = transform.testfn_from_spec(_read_json(args.testfn))
    out = {"schema": "hankel-lab-qform/1"}
    if args.route in ("laplace", "both"):
        out["laplace"] = transform.qform_laplace(mu, f)
    if args.route in ("double", "both"):
        q = transform.qform_double(FromMeasure(mu), f)
        out["double"] = [q.real, q.imag] if isinstance(q, complex) else float(q)
    if args.route == "both":
        q1, q2 = out["laplace"], out["double"]
        out["residual"] = abs(q1 - (q2 if not isinstance(q2, list) else complex(*q2))) / (1.0 + abs(q1))
    return _json_text(out), EXIT_OK


def cmd_verify(args):
    corpus = verify.default_corpus() if args.corpus in (None, "default") else _read_json(args.corpus)
    report = verify.run_all(corpus)
    return verify.report_json(report), (EXIT_OK if report["summary"]["failed"] == 0
                                        else verify.exit_status(report))


def cmd_tail(args):
    h = kernel_from_spec(_read_json(args.kernel))
    f = transform.testfn_from_spec(_read_json(args.testfn))
    F = transform.apply_hankel(h, f, _grid(args.grid))
    c_hat, a_hat, err = spectral.tail_fit(F)
    return _json_text({"schema": "hankel-lab-tail/1", "c_hat": c_hat, "alpha_hat": a_hat,
                       "stderr": err}), EXIT_OK


def build_parser():
    p = _Parser(prog="hankel-lab", description="Integral Hankel operators from positive measures.")
    sub = p.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    def add(name, fn, helptext):
        sp = sub.add_parser(name, help=helptext, description=helptext)
        sp.set_defaults(func=fn)
        sp.add_argument("--out", help="output path (written atomically); default stdout")
        return sp

    sp = add("laplace", cmd_laplace, "Laplace transform h_mu(t) of a measure")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--t", required=True, help="comma-separated t values")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = add("carleson", cmd_carleson, "Carleson-condition probe of a measure")
    sp.add_argument("--measure", required=True)

    sp = add("blaschke", cmd_blaschke, "Blaschke-sum convergence of atom locations")
    sp.add_argument("--atoms", help="comma-separated atom locations")
    sp.add_argument("--rule", help="JSON generator rule {kind, scale, ratio|power, start}")

    sp = add("moments", cmd_moments, "Power moments of a measure on [-1, 1]")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--derived", action="store_true", help="moments of (1 - t^2) dmu")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    for name, fn, text in (("galerkin", cmd_galerkin, "Finite section (CSV; JSON sidecar at OUT.json)"),
                           ("norms", cmd_norms, "Top eigenvalue of finite sections per order")):
        sp = add(name, fn, text)
        sp.add_argument("--kernel")
        sp.add_argument("--moments", help="JSON list of moments h_0, h_1, ...")
        if name == "galerkin":
            sp.add_argument("--n", type=int, required=True)
        else:
            sp.add_argument("--orders", required=True)

    sp = add("apply", cmd_apply, "Apply Gamma_h to a test function on a grid")
    sp.add_argument("--kernel", required=True)
    sp.add_argument("--testfn", required=True)
    sp.add_argument("--t", help="comma-separated output points")
    sp.add_argument("--grid", help="lo,hi,points[,log]")

    sp = add("qform", cmd_qform, "Quadratic form by the Laplace route, the double integral, or both")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--testfn", required=True)
    sp.add_argument("--route", choices=("laplace", "double", "both"), default="both")

    sp = add("verify", cmd_verify, "Run the property suite over a corpus")
    sp.add_argument("--corpus", help="corpus JSON path, or 'default' for the bundled corpus")

    sp = add("tail", cmd_tail, "Fit c t^-alpha to the tail of Gamma_h f")
    sp.add_argument("--kernel", required=True)
    sp.add_argument("--testfn", required=True)
    sp.add_argument("--grid", required=True, help="lo,hi,points[,log]")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        text, code = args.func(args)
        # galerkin writes its sidecar itself; the main artifact goes to --out
        _emit(text, args.out)
        return code
    except UsageError as exc:
        print(f"hankel-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"hankel-lab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HankelLabError as exc:
        print(f"hankel-lab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
