"""Property suite over a declared corpus.

Every check returns records ``{check_id, anchor, inputs, value, tolerance,
pass}``; exceptions raised inside a check become failed records carrying
the error, so one failure never stops the run.
"""

import hashlib
import json
import math
from importlib import resources

import numpy as np

from . import galerkin, spectral, transform
from .errors import HankelLabError, SpecError, UnknownCheck
from .kernelfn import FromMeasure, c_over_t_bound, kernel_from_spec, nu_decay_certificate
from .measure import (BlaschkeRule, Measure, bergszwarc_moments, blaschke_check, carleson_check,
                      measure_from_spec, moments)

SCHEMA = "hankel-lab-report/1"

# Short identifiers of the identity each check exercises.
ANCHORS = {
    "fubini": "z4",
    "commutation": "z15",
    "ibp": "z17",
    "decay": "z16",
    "carleson-dichotomy": "A.1",
    "adjoint": "2.3(iii)",
    "dictionary": "§2.8",
    "bergszwarc": "z12",
    "rank": "Thm 2.5",
    "tail": "§2.5",
    "norm-monotone": "A.1",
}

DEFAULT_TOLERANCES = {
    "fubini": 1e-8,                 # relative to 1 + |Q|
    "commutation": 1e-7,
    "ibp": 1e-7,
    "decay": 1e-8,
    "carleson-dichotomy": 0.0,
    "adjoint": 1e-7,
    "dictionary": 1e-6,
    "bergszwarc": 1e-9,
    "rank": 0.0,
    "tail": 0.02,
    "tail-next-order": 0.05,
    "norm-monotone": 1e-9,
}

GROWTH_MIN = 1.05


def default_corpus():
    text = resources.files("hankel_lab").joinpath("data/default_corpus.json").read_text()
    return json.loads(text)


def corpus_hash(corpus):
    return hashlib.sha256(_canonical(corpus).encode()).hexdigest()


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _grid(spec, default):
    spec = spec or default
    lo, hi, n = float(spec["lo"]), float(spec["hi"]), int(spec["points"])
    return np.geomspace(lo, hi, n) if spec.get("spacing", "linear") == "log" else np.linspace(lo, hi, n)


class Corpus:
    """Parsed corpus; raises :class:`SpecError` on any malformed entry."""

    def __init__(self, raw):
        if not isinstance(raw, dict):
            raise SpecError("corpus must be a JSON object")
        self.raw = raw
        try:
            self.measures = [(s, measure_from_spec(s)) for s in raw.get("measures", [])]
            self.kernels = [(s, kernel_from_spec(s)) for s in raw.get("kernels", [])]
            self.testfns = [(s, transform.testfn_from_spec(s)) for s in raw.get("testfns", [])]
            self.complex_kernels = [(s, kernel_from_spec(s)) for s in raw.get("complex_kernels", [])]
            self.bump_pairs = [tuple((s, transform.testfn_from_spec(s)) for s in pair)
                               for pair in raw.get("bump_pairs", [])]
            self.dictionary_measures = [(s, measure_from_spec(s)) for s in raw.get("dictionary_measures", [])]
            self.discrete_measures = [(s, measure_from_spec(s)) for s in raw.get("discrete_measures", [])]
            self.ibp_measures = [(s, measure_from_spec(s)) for s in raw.get("ibp_measures", [])]
            self.ibp_bump = raw.get("ibp_bump")
            self.shifts = [float(t) for t in raw.get("shifts", [])]
            self.orders = [int(n) for n in raw.get("orders", [])]
            self.atom_sets = [[(float(a), float(m)) for a, m in s] for s in raw.get("atom_sets", [])]
            self.blaschke = raw.get("blaschke", [])
            self.tail = raw.get("tail", {})
            self.grid = _grid(raw.get("grid"), {"lo": 0.5, "hi": 20.0, "points": 32})
            self.tolerances = dict(DEFAULT_TOLERANCES)
            self.tolerances.update({k: float(v) for k, v in raw.get("tolerances", {}).items()})
        except HankelLabError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"bad corpus entry: {exc}") from exc
        unknown = set(raw.get("tolerances", {})) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise SpecError(f"tolerances for unknown checks: {sorted(unknown)}")


def _record(check_id, inputs, value, tol, error=None):
    value = float(value) if value is not None else None
    ok = error is None and value is not None and math.isfinite(value) and value <= tol
    rec = {"check_id": check_id, "anchor": ANCHORS[check_id], "inputs": inputs,
           "value": value if value is None or math.isfinite(value) else str(value),
           "tolerance": tol, "pass": bool(ok)}
    if error is not None:
        rec["error"] = f"{type(error).__name__}: {error}"
    return rec


def _guard(check_id, inputs, tol, fn):
    """Run ``fn() -> value`` and turn any package or numpy error into a record."""
    try:
        return _record(check_id, inputs, fn(), tol)
    except (HankelLabError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return _record(check_id, inputs, None, tol, error=exc)


# ---------------------------------------------------------------------------
# individual checks; each yields records


def check_fubini(c):
    tol = c.tolerances["fubini"]
    for ms, mu in c.measures:
        for fs, f in c.testfns:
            def run(mu=mu, f=f):
                q1 = transform.qform_laplace(mu, f)
                q2 = transform.qform_double(FromMeasure(mu), f)
                return abs(q1 - q2) / (1.0 + abs(q1))
            yield _guard("fubini", {"measure": ms, "testfn": fs}, tol, run)


def check_commutation(c):
    tol = c.tolerances["commutation"]
    for ks, h in c.kernels:
        for fs, f in c.testfns:
            for tau in c.shifts:
                yield _guard("commutation", {"kernel": ks, "testfn": fs, "tau": tau}, tol,
                             lambda h=h, f=f, tau=tau: transform.commutation_residual(h, f, tau, c.grid))


def check_ibp(c):
    tol = c.tolerances["ibp"]
    if not c.ibp_bump:
        return
    g = transform.testfn_from_spec(c.ibp_bump)
    for ms, mu in c.ibp_measures:
        yield _guard("ibp", {"measure": ms, "bump": c.ibp_bump}, tol,
                     lambda mu=mu: transform.ibp_residual(mu, g, c.grid))


def check_decay(c):
    tol = c.tolerances["decay"]
    for ms, mu in c.measures + c.ibp_measures:
        yield _guard("decay", {"measure": ms}, tol, lambda mu=mu: nu_decay_certificate(mu)[1])


def check_carleson_dichotomy(c):
    """Bounded side: ``lambda_max <= pi C`` at every order; unbounded side: growth per doubling."""
    tol = c.tolerances["carleson-dichotomy"]
    for ms, mu in c.measures:
        def run(mu=mu):
            rep = carleson_check(mu)
            if c_over_t_bound(FromMeasure(mu)).bounded != rep.is_carleson:
                return math.inf
            table = spectral.norm_convergence(FromMeasure(mu), c.orders)
            if rep.is_carleson:
                return max(0.0, max(lam for _, lam in table) - math.pi * rep.constant)
            return max(0.0, GROWTH_MIN - min(spectral.growth_ratios(table), default=math.inf))
        yield _guard("carleson-dichotomy", {"measure": ms, "orders": c.orders}, tol, run)


def check_adjoint(c):
    tol = c.tolerances["adjoint"]
    for ks, h in c.complex_kernels:
        for (fs, f), (gs, g) in c.bump_pairs:
            yield _guard("adjoint", {"kernel": {"variant": ks["variant"], "label": ks.get("label")},
                                     "f": fs, "g": gs}, tol,
                         lambda h=h, f=f, g=g: transform.adjoint_residual(h, f, g))


def check_dictionary(c):
    tol = c.tolerances["dictionary"]
    for ms, mu in c.dictionary_measures:
        for n in c.orders:
            yield _guard("dictionary", {"measure": ms, "N": n}, tol,
                         lambda mu=mu, n=n: galerkin.dictionary_residual(mu, n))


def check_bergszwarc(c):
    tol = c.tolerances["bergszwarc"]
    for ms, mu in c.discrete_measures:
        for n in c.orders:
            def run(mu=mu, n=n):
                h = moments(mu, 2 * n + 1)
                direct = np.max(np.abs(bergszwarc_moments(mu, 2 * n - 1) - (h[:-2] - h[2:])))
                return max(float(direct), galerkin.backward_shift_identity(mu, n))
            yield _guard("bergszwarc", {"measure": ms, "N": n}, tol, run)


def check_rank(c):
    tol = c.tolerances["rank"]
    for atoms in c.atom_sets:
        k = len(atoms)
        n = 2 * k + 4
        yield _guard("rank", {"atoms": atoms, "N": n}, tol,
                     lambda atoms=atoms, k=k, n=n: abs(spectral.rank_probe(Measure(atoms=tuple(atoms)), n) - k))
    for entry in c.blaschke:
        def run(entry=entry):
            rule = entry["rule"]
            target = BlaschkeRule(**rule) if isinstance(rule, dict) else [float(a) for a in rule]
            return 0.0 if blaschke_check(target)[0] == bool(entry["expect"]) else 1.0
        yield _guard("rank", {"blaschke": entry}, tol, run)


def check_tail(c):
    spec = c.tail
    if not spec:
        return
    grid = _grid(spec.get("grid"), {"lo": 1e3, "hi": 1e6, "points": 61, "spacing": "log"})
    bump = transform.testfn_from_spec(spec["bump"])
    for alpha in spec.get("alphas", []):
        h = kernel_from_spec({"variant": "power", "alpha": alpha})

        def leading(h=h, alpha=alpha):
            c_hat, a_hat, _ = spectral.tail_fit(transform.apply_hankel(h, bump, grid))
            return max(abs(a_hat - alpha), abs(c_hat / complex(bump.integral()).real - 1.0))

        def next_order(h=h, alpha=alpha):
            _, a_hat, _ = spectral.tail_fit(transform.apply_hankel(h, bump.derivative(), grid))
            return abs(a_hat - alpha - 1.0)

        yield _guard("tail", {"alpha": alpha, "testfn": spec["bump"], "term": "leading"},
                     c.tolerances["tail"], leading)
        yield _guard("tail", {"alpha": alpha, "testfn": spec["bump"], "term": "next-order"},
                     c.tolerances["tail-next-order"], next_order)


def check_norm_monotone(c):
    tol = c.tolerances["norm-monotone"]
    sources = [(ks, h) for ks, h in c.kernels]
    sources += [({"moments-of": ms}, moments(mu, 2 * max(c.orders, default=1) - 1))
                for ms, mu in c.discrete_measures]
    for ss, src in sources:
        def run(src=src):
            lams = [lam for _, lam in spectral.norm_convergence(src, c.orders)]
            return max([0.0] + [a - b for a, b in zip(lams, lams[1:])])
        yield _guard("norm-monotone", {"source": ss, "orders": c.orders}, tol, run)


REGISTRY = {
    "fubini": check_fubini,
    "commutation": check_commutation,
    "ibp": check_ibp,
    "decay": check_decay,
    "carleson-dichotomy": check_carleson_dichotomy,
    "adjoint": check_adjoint,
    "dictionary": check_dictionary,
    "bergszwarc": check_bergszwarc,
    "rank": check_rank,
    "tail": check_tail,
    "norm-monotone": check_norm_monotone,
}


def check(check_id, corpus):
    """Run one registered check against a (possibly partial) corpus dictionary."""
    if check_id not in REGISTRY:
        raise UnknownCheck(check_id)
    c = corpus if isinstance(corpus, Corpus) else Corpus(corpus)
    return sorted(REGISTRY[check_id](c), key=_order_key)


def _order_key(rec):
    return rec["check_id"], hashlib.sha256(_canonical(rec["inputs"]).encode()).hexdigest()


def run_all(corpus):
    """Execute every registered check; the report is ordered by check id and input hash."""
    c = corpus if isinstance(corpus, Corpus) else Corpus(corpus)
    records = []
    for check_id in sorted(REGISTRY):
        records.extend(REGISTRY[check_id](c))
    records.sort(key=_order_key)
    failed = sum(not r["pass"] for r in records)
    return {
        "schema": SCHEMA,
        "corpus_sha256": corpus_hash(c.raw),
        "summary": {"total": len(records), "passed": len(records) - failed, "failed": failed},
        "anchors": sorted({r["anchor"] for r in records}),
        "records": records,
    }


def exit_status(report):
    return min(report["summary"]["failed"], 125)


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
