"""Test functions, their Laplace transforms, and the Hankel operator on them.

``apply_hankel`` evaluates ``(Gamma_h f)(t) = int h(t+s) f(s) ds`` point by
point. The quadratic form is available two ways that share no quadrature:
``qform_double`` integrates ``h(t+s) f(s) conj(f(t))`` over the square,
``qform_laplace`` integrates ``|Lf(x)|**2`` against the measure.
"""

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline

from . import quadrature as quad
from .errors import DomainError, ExtrapolationError, NonConvergent, SpecError
from .kernelfn import FromMeasure, sq_integrable_at_infinity
from .measure import integrate, multiply_by_x


def _bump_profile(u):
    inside = np.abs(u) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        val = np.exp(-1.0 / np.where(inside, 1.0 - u * u, 1.0))
    return np.where(inside, val, 0.0)


def _bump_profile_norm():
    # int_{-1}^{1} exp(-1/(1-u^2)) du; the profile is flat at both ends
    return float(quad.adaptive_panels(_bump_profile, np.linspace(-1.0, 1.0, 9), rtol=1e-15))


BUMP_NORM = _bump_profile_norm()


# ---------------------------------------------------------------------------
# test functions


class TestFunction:
    """Common interface: ``f(t)``, ``support()``, ``edges()``, ``shift(tau)``."""

    __test__ = False          # keep pytest from collecting the class
    compact = True

    def edges(self):
        a, b = self.support()
        return quad.graded_edges(a, b)


@dataclass(frozen=True)
class Bump(TestFunction):
    """Smooth bump ``mass/(w Z) exp(-1/(1-u^2))``, ``u = (t-center)/w``; integral ``mass``."""

    center: float
    halfwidth: float
    mass: complex = 1.0

    def __post_init__(self):
        if not (self.halfwidth > 0 and self.center - self.halfwidth > 0):
            raise DomainError("bump support must be separated from the origin")

    def __call__(self, t):
        u = (np.asarray(t, dtype=float) - self.center) / self.halfwidth
        return self.mass / (self.halfwidth * BUMP_NORM) * _bump_profile(u)

    def support(self):
        return self.center - self.halfwidth, self.center + self.halfwidth

    def edges(self):
        a, b = self.support()
        e = quad.graded_edges(a, b)
        return quad.bisect_edges(quad.bisect_edges(e)) if len(e) < 5 else e

    def integral(self):
        return self.mass

    def derivative(self):
        return ZeroAvgBump(self.center, self.halfwidth, self.mass)

    def shift(self, tau):
        return replace(self, center=self.center + tau)


@dataclass(frozen=True)
class ZeroAvgBump(Bump):
    """Derivative of ``Bump(center, halfwidth, mass)``: integral exactly zero."""

    def __call__(self, t):
        w = self.halfwidth
        u = (np.asarray(t, dtype=float) - self.center) / w
        inside = np.abs(u) < 1.0
        d = np.where(inside, 1.0 - u * u, 1.0)
        return np.where(inside, self.mass / (w * w * BUMP_NORM) * _bump_profile(u) * (-2.0 * u / d ** 2), 0.0)

    def integral(self):
        return 0.0

    def antiderivative(self):
        return Bump(self.center, self.halfwidth, self.mass)

    def derivative(self):
        raise NotImplementedError("only first derivatives of bumps are provided")


@dataclass(frozen=True)
class ExpPoly(TestFunction):
    """``sum_n p_n(t - start) exp(-rate_n (t - start))`` for ``t >= start``, 0 below.

    ``terms`` is a tuple of ``(coeffs, rate)`` with increasing-order
    polynomial coefficients; rates may be complex with positive real part.
    """

    terms: tuple
    start: float = 0.0
    compact = False

    def __post_init__(self):
        terms = tuple((tuple(c), complex(r) if np.iscomplexobj(r) or isinstance(r, complex) else float(r))
                      for c, r in self.terms)
        if any(np.real(r) <= 0 for _, r in terms):
            raise DomainError("ExpPoly rates need positive real part")
        object.__setattr__(self, "terms", terms)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = t - self.start
        out = np.zeros(t.shape, dtype=complex if self.is_complex else float)
        for coeffs, rate in self.terms:
            out = out + np.polynomial.polynomial.polyval(s, coeffs) * np.exp(-rate * np.maximum(s, 0.0))
        return np.where(s >= 0, out, 0.0)

    @property
    def is_complex(self):
        return any(isinstance(r, complex) or np.iscomplexobj(c) for c, r in self.terms)

    def support(self):
        return self.start, math.inf

    def min_rate(self):
        return min(float(np.real(r)) for _, r in self.terms)

    def integral(self):
        return laplace_fn(self, 0.0)

    def shift(self, tau):
        return replace(self, start=self.start + tau)


@dataclass(frozen=True)
class PiecewiseConst(TestFunction):
    """``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.breakpoints)
        v = tuple(self.values)
        if len(b) != len(v) + 1 or len(v) < 1:
            raise SpecError("need len(breakpoints) == len(values) + 1")
        if b[0] <= 0 or any(y <= x for x, y in zip(b, b[1:])):
            raise DomainError("breakpoints must increase inside (0, inf)")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        b = np.asarray(self.breakpoints)
        idx = np.searchsorted(b, t, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.values))
        vals = np.asarray(self.values)
        return np.where(inside, vals[np.clip(idx, 0, len(vals) - 1)], 0.0)

    def support(self):
        return self.breakpoints[0], self.breakpoints[-1]

    def edges(self):
        parts = [quad.graded_edges(a, b) for a, b in zip(self.breakpoints, self.breakpoints[1:])]
        return np.unique(np.concatenate(parts))

    def integral(self):
        b = np.asarray(self.breakpoints)
        return complex(np.sum(np.asarray(self.values) * np.diff(b))) if np.iscomplexobj(self.values) \
            else float(np.sum(np.asarray(self.values) * np.diff(b)))

    def shift(self, tau):
        return replace(self, breakpoints=tuple(x + tau for x in self.breakpoints))


def scaled(f, c):
    """``c * f`` for bumps and piecewise constants."""
    if isinstance(f, Bump):
        return replace(f, mass=f.mass * c)
    if isinstance(f, PiecewiseConst):
        return replace(f, values=tuple(v * c for v in f.values))
    if isinstance(f, ExpPoly):
        return replace(f, terms=tuple((tuple(np.asarray(co) * c), r) for co, r in f.terms))
    raise TypeError(f"cannot scale {type(f).__name__}")


# ---------------------------------------------------------------------------
# grid functions


@dataclass(frozen=True)
class GridFunction:
    """Samples ``values`` on a strictly increasing grid in (0, inf)."""

    t: np.ndarray
    values: np.ndarray
    order: int = 3

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values)
        if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise SpecError("grid must be non-empty and strictly increasing in (0, inf)")
        if v.shape != t.shape or not np.all(np.isfinite(v)):
            raise SpecError("grid values must be finite and match the grid")
        if self.order not in (1, 3):
            raise SpecError("interpolation order must be 1 or 3")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.t[0], self.t[-1]
        if np.any((s < lo - 1e-12 * abs(lo)) | (s > hi + 1e-12 * abs(hi))):
            raise ExtrapolationError(f"grid function evaluated outside [{lo:g}, {hi:g}]")
        s = np.clip(s, lo, hi)
        if self.order == 3 and self.t.size >= 4:
            return CubicSpline(self.t, self.values)(s)
        if np.iscomplexobj(self.values):
            return np.interp(s, self.t, self.values.real) + 1j * np.interp(s, self.t, self.values.imag)
        return np.interp(s, self.t, self.values)

    def shift(self, tau):
        """``S_tau``: the samples move right by ``tau``."""
        return GridFunction(self.t + tau, self.values, self.order)

    def shift_adjoint(self, tau):
        """``S_tau^*``: ``F(t + tau)``, resampled on the grid points still positive."""
        if tau == 0:
            return self
        keep = self.t - tau > 0
        if keep.sum() < 2:
            raise ExtrapolationError("shift leaves fewer than two grid points")
        return GridFunction(self.t[keep] - tau, self.values[keep], self.order)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if np.iscomplexobj(self.values):
            w.writerow(["t", "re", "im"])
            for t, v in zip(self.t, self.values):
                w.writerow([f"{t:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
        else:
            w.writerow(["t", "value"])
            for t, v in zip(self.t, self.values):
                w.writerow([f"{t:.17g}", f"{v:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, order=3):
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        data = np.array([[float(x) for x in r] for r in body])
        if header == ["t", "value"]:
            return cls(data[:, 0], data[:, 1], order)
        if header == ["t", "re", "im"]:
            return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], order)
        raise SpecError(f"unrecognised grid-function header {header}")


# ---------------------------------------------------------------------------
# Laplace transform of test functions


def laplace_fn(f, x):
    """``int_0^inf exp(-t x) f(t) dt`` (closed forms where available)."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(f, ExpPoly):
        if np.any(x <= -f.min_rate()):
            raise DomainError("ExpPoly Laplace transform diverges for x <= -Re(rate)")
        out = np.zeros(x.shape, dtype=complex)
        for coeffs, rate in f.terms:
            z = rate + x
            for k, ck in enumerate(coeffs):
                out += ck * math.factorial(k) / z ** (k + 1)
        out *= np.exp(-x * f.start)
        if not f.is_complex:
            out = out.real
    else:
        if np.any(x < 0):
            raise DomainError("Laplace transform evaluated at x < 0")
        if isinstance(f, PiecewiseConst):
            out = _pwc_laplace(f, x)
        else:
            out = quad.adaptive_panels(lambda t: np.exp(-np.outer(t, x)) * f(t)[:, None],
                                       f.edges(), rtol=1e-13, where="Laplace transform of f")
    return out[0] if scalar else out


def _pwc_laplace(f, x):
    b = np.asarray(f.breakpoints)
    v = np.asarray(f.values)
    out = np.zeros(x.shape, dtype=v.dtype if np.iscomplexobj(v) else float)
    for lo, hi, val in zip(b[:-1], b[1:], v):
        # exp(-x lo) (1 - exp(-x (hi-lo))) / x, stable as x -> 0
        width = hi - lo
        with np.errstate(divide="ignore", invalid="ignore"):
            seg = np.where(x > 0, -np.expm1(-x * width) / np.where(x > 0, x, 1.0), width)
        out = out + val * np.exp(-x * lo) * seg
    return out


def shift(f, tau):
    """Right shift ``(S_tau f)(t) = f(t - tau)`` (zero below ``tau``)."""
    if tau < 0:
        raise DomainError("shift needs tau >= 0")
    if tau == 0:
        return f
    return f.shift(tau)


# ---------------------------------------------------------------------------
# Hankel operator on test functions


def _require_compact(f):
    if not f.compact:
        raise DomainError("apply_hankel needs a compactly supported test function")


def apply_hankel(h, f, out_grid, rtol=1e-10, order=3):
    """``F(t) = int h(t+s) f(s) ds`` on ``out_grid``; one independent integral per point."""
    _require_compact(f)
    t = np.asarray(out_grid, dtype=float)
    if np.any(t <= 0):
        raise DomainError("output grid must lie in (0, inf)")

    def integrand(s):
        return h(t[None, :] + s[:, None]) * f(s)[:, None]

    try:
        vals = quad.adaptive_panels(integrand, f.edges(), rtol=rtol, where="apply_hankel")
    except NonConvergent as err:
        bad = t[err.where] if err.where is not None and len(err.where) else t
        raise NonConvergent(f"apply_hankel did not converge at t = {bad.tolist()}", where=bad) from err
    return GridFunction(t, np.asarray(vals), order)


def qform_double(h, f, rtol=1e-12):
    """``int int h(t+s) f(s) conj(f(t)) ds dt`` by tensor Gauss-Legendre."""
    _require_compact(f)
    edges = f.edges()
    prev = None
    for _ in range(8):
        x, w = quad.panel_rule(edges)
        fx = f(x) * w
        hm = h(x[:, None] + x[None, :])
        cur = np.conj(fx) @ hm @ fx
        if prev is not None and abs(cur - prev) <= rtol * abs(cur) + 1e-15 * (np.abs(fx) @ np.abs(hm) @ np.abs(fx)):
            return float(cur.real) if abs(cur.imag) <= 1e-12 * (abs(cur.real) + 1e-300) or not np.iscomplexobj(cur) else cur
        prev = cur
        edges = quad.bisect_edges(edges)
    raise NonConvergent("qform_double did not converge")


def qform_laplace(mu, f, digits=16, rtol=1e-12):
    """``int |Lf(x)|**2 dmu(x)``.

    For compactly supported ``f`` with ``supp f`` in ``[a, inf)`` the
    integrand is below ``C exp(-2 a x)``, so the absolutely continuous part
    is truncated at ``digits * ln 10 / (2a)``.
    """
    if f.compact:
        a = f.support()[0]
        upper = digits * math.log(10.0) / (2.0 * a)
    else:
        upper = None
    g = lambda x: np.abs(laplace_fn(f, x)) ** 2
    return float(integrate(mu, g, upper=upper, rtol=rtol))


# ---------------------------------------------------------------------------
# identities as residuals


def _carrier_grid(grid, tau, per_unit_log=600):
    lo, hi = float(np.min(grid)), float(np.max(grid)) + tau
    n = max(16, int(per_unit_log * math.log(hi / lo)) + 1)
    return np.union1d(np.asarray(grid, dtype=float), np.geomspace(lo, hi, n))


def commutation_residual(h, f, tau, grid):
    """``max |(S_tau^* Gamma_h f)(t) - (Gamma_h S_tau f)(t)|`` over ``grid``.

    The left side resamples ``Gamma_h f`` (computed on a dense carrier grid)
    at ``t + tau`` by cubic interpolation; the right side integrates against
    the shifted test function.
    """
    grid = np.asarray(grid, dtype=float)
    carrier = apply_hankel(h, f, _carrier_grid(grid, tau))
    lhs = carrier.shift_adjoint(tau)(grid)
    rhs = apply_hankel(h, shift(f, tau), grid).values
    return float(np.max(np.abs(lhs - rhs)))


def ibp_residual(mu, g, grid):
    """``max |Gamma_mu g' - Gamma_nu g|`` over ``grid`` with ``nu = x dmu``."""
    if type(g) is not Bump:
        raise TypeError("ibp_residual needs a Bump (its derivative is the zero-average test function)")
    lhs = apply_hankel(FromMeasure(mu), g.derivative(), grid).values
    rhs = apply_hankel(FromMeasure(multiply_by_x(mu)), g, grid).values
    return float(np.max(np.abs(lhs - rhs)))


def inner_with_hankel(h, f, g, rtol=1e-12):
    """``<Gamma_h f, g> = int (Gamma_h f)(t) conj(g(t)) dt`` over ``supp g``."""
    edges = g.edges()
    prev = None
    for _ in range(6):
        x, w = quad.panel_rule(edges, 16)
        F = apply_hankel(h, f, x, rtol=1e-12).values
        cur = np.sum(w * F * np.conj(g(x)))
        if prev is not None and abs(cur - prev) <= rtol * abs(cur) + 1e-15 * np.sum(w * np.abs(F * g(x))):
            return cur
        prev = cur
        edges = quad.bisect_edges(edges)
    raise NonConvergent("inner product did not converge")


def adjoint_residual(h, f, g):
    """``|<Gamma_h f, g> - <f, Gamma_conj(h) g>|``."""
    left = inner_with_hankel(h, f, g)
    right = np.conj(inner_with_hankel(h.conj(), g, f))
    return float(abs(left - right))


def l1_norm(f):
    return float(quad.adaptive_panels(lambda t: np.abs(f(t)), f.edges(), rtol=1e-12))


def young_check(h, f, tau, grid):
    """Return ``(grid_norm, bound)`` for ``||Gamma_h S_tau f|| <= ||S_tau^* h|| ||f||_1``.

    ``grid_norm`` is a right-endpoint Riemann sum of ``|Gamma_h S_tau f|**2``
    over ``grid`` (square-rooted); ``bound`` uses the exact tail
    ``int_tau^inf |h|**2``.
    """
    grid = np.asarray(grid, dtype=float)
    F = apply_hankel(h, shift(f, tau), grid).values
    grid_norm = math.sqrt(float(np.sum(np.abs(F[1:]) ** 2 * np.diff(grid))))
    ok, tail = sq_integrable_at_infinity(h, tau)
    bound = math.sqrt(tail) * l1_norm(f) if ok else math.inf
    return grid_norm, bound


# ---------------------------------------------------------------------------
# JSON


def _num(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(v[0], v[1])
    return float(v)


def testfn_from_spec(spec):
    try:
        variant = spec["variant"]
        if variant == "bump":
            return Bump(float(spec["center"]), float(spec["halfwidth"]), _num(spec.get("mass", 1.0)))
        if variant == "zeroavg":
            return ZeroAvgBump(float(spec["center"]), float(spec["halfwidth"]), _num(spec.get("mass", 1.0)))
        if variant == "exppoly":
            terms = tuple((tuple(_num(c) for c in t["coeffs"]), _num(t["rate"])) for t in spec["terms"])
            return ExpPoly(terms, float(spec.get("start", 0.0)))
        if variant == "pwc":
            return PiecewiseConst(tuple(spec["breakpoints"]), tuple(_num(v) for v in spec["values"]))
    except (KeyError, TypeError) as exc:
        raise SpecError(f"bad test-function spec: {exc}") from exc
    raise SpecError(f"unknown test-function variant {spec.get('variant')!r}")


def _enc(v):
    return [v.real, v.imag] if isinstance(v, complex) else v


def testfn_to_spec(f):
    if isinstance(f, ZeroAvgBump):
        return {"variant": "zeroavg", "center": f.center, "halfwidth": f.halfwidth, "mass": _enc(f.mass)}
    if isinstance(f, Bump):
        return {"variant": "bump", "center": f.center, "halfwidth": f.halfwidth, "mass": _enc(f.mass)}
    if isinstance(f, ExpPoly):
        return {"variant": "exppoly", "start": f.start,
                "terms": [{"coeffs": [_enc(c) for c in co], "rate": _enc(r)} for co, r in f.terms]}
    return {"variant": "pwc", "breakpoints": list(f.breakpoints), "values": [_enc(v) for v in f.values]}
