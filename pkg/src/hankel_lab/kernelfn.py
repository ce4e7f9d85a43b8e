"""Kernel functions ``h(t)`` of integral Hankel operators.

Tagged closed forms (Carleman ``1/t``, power law ``t**-alpha``, point mass
``m exp(-a t)``) carry the measure whose Laplace transform they are, so
the Galerkin and quadratic-form code can always take the measure route.
``FromMeasure`` evaluates a Laplace transform by quadrature, ``Table``
and ``ComplexTable`` interpolate samples.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import linregress

from . import quadrature as quad
from .errors import DomainError, ExtrapolationError, Inconclusive, SpecError
from .measure import (CARLESON_GRID, CARLESON_GRID_WIDE, Measure, laplace, lebesgue,
                      measure_from_spec, measure_to_spec, multiply_by_x, point_mass,
                      quasi_carleman, sup_with_stability)

FIT_STDERR_MAX = 0.05


def _positive(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("kernel functions are evaluated at t > 0 only")
    return t


class Kernel:
    """Base class: ``h(t)`` and ``h.derivative(t)`` accept scalars or arrays."""

    label = "kernel"
    is_complex = False
    measure = None

    def __call__(self, t):
        t = _positive(t)
        out = self._eval(t)
        return out[()] if np.ndim(out) == 0 else out

    def derivative(self, t):
        t = _positive(t)
        out = self._deriv(t)
        return out[()] if np.ndim(out) == 0 else out

    def conj(self):
        return self

    def domain(self):
        return 0.0, math.inf


class Carleman(Kernel):
    label = "carleman"

    def __init__(self):
        self.measure = lebesgue()

    def _eval(self, t):
        return 1.0 / t

    def _deriv(self, t):
        return -1.0 / t ** 2


class PowerLaw(Kernel):
    def __init__(self, alpha):
        if not alpha > 0:
            raise SpecError("power-law exponent must be positive")
        self.alpha = float(alpha)
        self.label = f"power({alpha:g})"
        self.measure = quasi_carleman(self.alpha)

    def _eval(self, t):
        return t ** (-self.alpha)

    def _deriv(self, t):
        return -self.alpha * t ** (-self.alpha - 1.0)


class PointMass(Kernel):
    def __init__(self, a, m=1.0):
        if not (a > 0 and m > 0):
            raise SpecError("point mass needs a > 0 and m > 0")
        self.a, self.m = float(a), float(m)
        self.label = f"pointmass({a:g},{m:g})"
        self.measure = point_mass(self.a, self.m)

    def _eval(self, t):
        return self.m * np.exp(-self.a * t)

    def _deriv(self, t):
        return -self.a * self.m * np.exp(-self.a * t)


class FromMeasure(Kernel):
    """Laplace transform of a measure, evaluated by quadrature."""

    def __init__(self, mu):
        self.measure = mu
        self.nu = multiply_by_x(mu)
        self.label = mu.label or "measure"

    def _eval(self, t):
        return np.asarray(laplace(self.measure, t))

    def _deriv(self, t):
        return -np.asarray(laplace(self.nu, t))


class Table(Kernel):
    """Kernel sampled on a strictly increasing grid (order 1 or 3)."""

    def __init__(self, t, values, order=3, label="table"):
        t = np.asarray(t, dtype=float)
        values = np.asarray(values)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise SpecError("table grid must be strictly increasing in (0, inf)")
        if values.shape != t.shape or not np.all(np.isfinite(values)):
            raise SpecError("table values must be finite and match the grid")
        if order not in (1, 3):
            raise SpecError("table order must be 1 or 3")
        self.t, self.values, self.order, self.label = t, values, order, label
        if order == 3:
            self._spline = CubicSpline(t, values)
            self._dspline = self._spline.derivative()
        else:
            slopes = np.diff(values) / np.diff(t)
            self._slopes = slopes

    @classmethod
    def from_function(cls, fn, t, order=3, label="table"):
        t = np.asarray(t, dtype=float)
        return cls(t, fn(t), order, label)

    def domain(self):
        return float(self.t[0]), float(self.t[-1])

    def _inside(self, t):
        lo, hi = self.t[0], self.t[-1]
        if np.any((t < lo * (1 - 1e-14)) | (t > hi * (1 + 1e-14))):
            raise ExtrapolationError(f"table kernel evaluated outside [{lo:g}, {hi:g}]")
        return np.clip(t, lo, hi)

    def _eval(self, t):
        t = self._inside(t)
        if self.order == 3:
            return self._spline(t)
        if self.is_complex:
            return np.interp(t, self.t, self.values.real) + 1j * np.interp(t, self.t, self.values.imag)
        return np.interp(t, self.t, self.values)

    def _deriv(self, t):
        t = self._inside(t)
        if self.order == 3:
            return self._dspline(t)
        idx = np.clip(np.searchsorted(self.t, t) - 1, 0, len(self._slopes) - 1)
        return self._slopes[idx]


class ComplexTable(Table):
    """Complex-valued tabulated kernel (non-self-adjoint Hankel operators)."""

    is_complex = True

    def __init__(self, t, values, order=3, label="complex-table"):
        super().__init__(t, np.asarray(values, dtype=complex), order, label)

    def conj(self):
        return ComplexTable(self.t, np.conj(self.values), self.order, f"conj({self.label})")


def evaluate(h, t):
    return h(t)


# ---------------------------------------------------------------------------
# admissibility diagnostics


@dataclass(frozen=True)
class TailReport:
    square_integrable: bool
    tail_value: float
    slope: float = None

    def __iter__(self):
        return iter((self.square_integrable, self.tail_value))

    def __getitem__(self, i):
        return (self.square_integrable, self.tail_value)[i]


def _log_integral_sq(h, t0, t1):
    """int_{t0}^{t1} |h|^2 ds in the variable u = log s (panels per decade)."""
    u0, u1 = math.log(t0), math.log(t1)
    edges = np.linspace(u0, u1, max(2, int(math.ceil((u1 - u0) / math.log(10.0))) + 1))

    def f(u):
        s = np.exp(u)
        return np.abs(h(s)) ** 2 * s

    return float(quad.adaptive_panels(f, edges, rtol=1e-10, order=16,
                                      where="square-integrability tail"))


def sq_integrable_at_infinity(h, t0):
    """Decide ``int_{t0}^inf |h(s)|^2 ds < inf`` and return the tail integral.

    Tagged kernels are decided analytically. Other kernels are classified
    by a log-log fit of ``|h|`` on the last decade of the probe grid; the
    tail beyond the grid is added from the fitted power law.
    """
    if not t0 > 0:
        raise DomainError("t0 must be positive")
    if isinstance(h, Carleman):
        return TailReport(True, 1.0 / t0, -1.0)
    if isinstance(h, PowerLaw):
        a = h.alpha
        if a <= 0.5:
            return TailReport(False, math.inf, -a)
        return TailReport(True, t0 ** (1 - 2 * a) / (2 * a - 1), -a)
    if isinstance(h, PointMass):
        return TailReport(True, h.m ** 2 * math.exp(-2 * h.a * t0) / (2 * h.a), -math.inf)

    lo, hi = h.domain()
    if t0 < lo:
        raise ExtrapolationError("t0 below the kernel's grid")
    t_end = min(hi, float(CARLESON_GRID[-1]))
    if t_end <= t0 * 10:
        raise Inconclusive("probe range shorter than one decade")
    window = np.logspace(math.log10(t_end) - 1.0, math.log10(t_end), 21)
    vals = np.abs(h(window))
    if np.any(vals == 0.0):
        slope = -math.inf                    # faster than any power
    else:
        fit = linregress(np.log(window), np.log(vals))
        if not fit.stderr <= FIT_STDERR_MAX:
            raise Inconclusive(f"tail exponent unstable (stderr {fit.stderr:.3g})")
        slope = fit.slope
        if abs(slope + 0.5) <= 3 * fit.stderr + 1e-3:
            raise Inconclusive(f"tail exponent {slope:.4f} too close to -1/2")
    if slope >= -0.5:
        return TailReport(False, math.inf, slope)
    body = _log_integral_sq(h, t0, t_end)
    tail = 0.0 if math.isinf(slope) else vals[-1] ** 2 * t_end / (-2 * slope - 1)
    return TailReport(True, body + tail, slope)


@dataclass(frozen=True)
class BoundReport:
    bounded: bool
    constant: float
    divergence_end: str = None

    def __iter__(self):
        return iter((self.bounded, self.constant))

    def __getitem__(self, i):
        return (self.bounded, self.constant)[i]


def c_over_t_bound(h):
    """Probe ``sup_t t*|h(t)|`` on the log grid used for Carleson checks."""
    lo, hi = h.domain()
    base = CARLESON_GRID[(CARLESON_GRID >= lo) & (CARLESON_GRID <= hi)]
    wide = CARLESON_GRID_WIDE[(CARLESON_GRID_WIDE >= lo) & (CARLESON_GRID_WIDE <= hi)]
    with np.errstate(over="ignore"):
        vb = base * np.abs(h(base))
        vw = wide * np.abs(h(wide))
    ok, const, end = sup_with_stability(vb, vw, wide)
    return BoundReport(ok, const, end)


def nu_decay_certificate(mu, t_max=1e6, points=241):
    """Check ``t * h_nu(t) <= C`` on [1, t_max] with ``C = 2/e * laplace(mu, 1/2)``.

    ``nu = x dmu``. Returns ``(C, max_violation)``; a nonpositive violation
    (up to quadrature error) certifies the bound on the grid.
    """
    c = 2.0 / math.e * laplace(mu, 0.5)
    ts = np.logspace(0.0, math.log10(t_max), points)
    vals = ts * laplace(multiply_by_x(mu), ts)
    return c, float(np.max(vals - c))


# ---------------------------------------------------------------------------
# JSON


def kernel_from_spec(spec):
    """Build a kernel from ``{"variant": ..., params}``."""
    try:
        variant = spec["variant"]
        if variant == "carleman":
            return Carleman()
        if variant == "power":
            return PowerLaw(float(spec["alpha"]))
        if variant == "pointmass":
            return PointMass(float(spec["a"]), float(spec.get("m", 1.0)))
        if variant == "measure":
            return FromMeasure(measure_from_spec(spec["measure"]))
        if variant == "table":
            label = spec.get("label", "table")
            order = int(spec.get("order", 3))
            if "sample" in spec:
                return _sampled_table(spec["sample"], spec["grid"], order, label)
            if "imag" in spec:
                vals = np.asarray(spec["values"], float) + 1j * np.asarray(spec["imag"], float)
                return ComplexTable(spec["t"], vals, order, label)
            return Table(spec["t"], spec["values"], order, label)
    except (KeyError, TypeError) as exc:
        raise SpecError(f"bad kernel spec: {exc}") from exc
    raise SpecError(f"unknown kernel variant {spec.get('variant')!r}")


def _sampled_table(sample, grid, order, label):
    """Table of ``amp * exp(-(rate - i freq) t)`` on a declared grid."""
    lo, hi, n = float(grid["lo"]), float(grid["hi"]), int(grid["points"])
    t = np.geomspace(lo, hi, n) if grid.get("spacing", "log") == "log" else np.linspace(lo, hi, n)
    if sample.get("kind") != "damped-cis":
        raise SpecError(f"unknown sample kind {sample.get('kind')!r}")
    amp = float(sample.get("amp", 1.0))
    vals = amp * np.exp(-(float(sample["rate"]) - 1j * float(sample.get("freq", 0.0))) * t)
    if np.all(vals.imag == 0):
        return Table(t, vals.real, order, label)
    return ComplexTable(t, vals, order, label)


def kernel_to_spec(h):
    if isinstance(h, Carleman):
        return {"variant": "carleman"}
    if isinstance(h, PowerLaw):
        return {"variant": "power", "alpha": h.alpha}
    if isinstance(h, PointMass):
        return {"variant": "pointmass", "a": h.a, "m": h.m}
    if isinstance(h, FromMeasure):
        return {"variant": "measure", "measure": measure_to_spec(h.measure)}
    spec = {"variant": "table", "t": h.t.tolist(), "values": np.real(h.values).tolist(),
            "order": h.order, "label": h.label}
    if h.is_complex:
        spec["imag"] = np.imag(h.values).tolist()
    return spec


ZERO = FromMeasure(Measure(label="zero"))
