"""Positive measures on the half line (and on [-1, 1] for Hankel matrices).

A :class:`Measure` is a finite list of atoms plus absolutely continuous
pieces of two kinds:

* :class:`PowerDensity` -- ``c * x**(alpha - 1)`` on ``(lower, cutoff)``;
  Lebesgue measure is ``PowerDensity(1, 1)``.
* :class:`TableDensity` -- a density sampled on a uniform grid and
  interpolated (linear or cubic), optionally multiplied by a polynomial.
  The polynomial factor is what keeps ``x dmu`` and ``(1 - x**2) dmu``
  exact for tabulated densities.

Laplace transforms are computed by quadrature adapted to each piece:
double-exponential rules absorb the ``x**(alpha - 1)`` endpoint
singularity and the half-line tail, and tabulated pieces are integrated
interval by interval against their piecewise-polynomial interpolant.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import mpmath
import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline, PPoly, make_interp_spline
from scipy.special import roots_jacobi

from . import quadrature as quad
from .errors import DomainError, NonConvergent, SpecError, SupportError, UnclassifiableRule

INF = math.inf

CARLESON_GRID = np.logspace(-8.0, 8.0, 129)
# same log spacing, twice the log-range: the "doubled" probe grid
CARLESON_GRID_WIDE = np.logspace(-16.0, 16.0, 257)
STABILITY_RATIO = 1.1

_CHUNK = 4096


# ---------------------------------------------------------------------------
# pieces


@dataclass(frozen=True)
class PowerDensity:
    """Density ``c * x**(alpha - 1)`` on ``(lower, cutoff)``."""

    c: float
    alpha: float
    cutoff: float = INF
    lower: float = 0.0

    def __post_init__(self):
        if not (self.c > 0 and self.alpha > 0):
            raise SpecError(f"PowerDensity needs c > 0 and alpha > 0, got {self}")
        if not (0.0 <= self.lower < self.cutoff):
            raise SpecError(f"PowerDensity needs 0 <= lower < cutoff, got {self}")

    @property
    def support(self):
        return self.lower, self.cutoff

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > self.lower) & (x < self.cutoff)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.c * np.power(x, self.alpha - 1.0)
        return np.where(inside, val, 0.0)

    def mass_below(self, a):
        """mu((lower, min(a, cutoff))) in closed form (vectorised in ``a``)."""
        a = np.minimum(np.asarray(a, dtype=float), self.cutoff)
        a = np.maximum(a, self.lower)
        return self.c * (a ** self.alpha - self.lower ** self.alpha) / self.alpha

    def times_x(self):
        return PowerDensity(self.c, self.alpha + 1.0, self.cutoff, self.lower)

    def clip(self, lo, hi):
        lo, hi = max(lo, self.lower), min(hi, self.cutoff)
        if lo >= hi:
            return None
        return PowerDensity(self.c, self.alpha, hi, lo)


@dataclass(frozen=True)
class TableDensity:
    """Density sampled at ``len(values)`` equispaced points on [lo, hi].

    ``order`` is 1 (piecewise linear) or 3 (not-a-knot cubic spline);
    ``poly`` holds increasing-order coefficients of a polynomial factor
    applied on top of the interpolant. ``clip`` restricts the support to a
    sub-interval without resampling.
    """

    lo: float
    hi: float
    values: tuple
    order: int = 1
    poly: tuple = (1.0,)
    clip_lo: float = None
    clip_hi: float = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "poly", tuple(float(v) for v in self.poly))
        if not self.hi > self.lo:
            raise SpecError("TableDensity needs hi > lo")
        if self.order not in (1, 3):
            raise SpecError("TableDensity order must be 1 or 3")
        if len(self.values) < (2 if self.order == 1 else 4):
            raise SpecError("too few samples for the interpolation order")
        if not all(math.isfinite(v) for v in self.values):
            raise SpecError("TableDensity samples must be finite")

    @property
    def support(self):
        lo = self.lo if self.clip_lo is None else max(self.lo, self.clip_lo)
        hi = self.hi if self.clip_hi is None else min(self.hi, self.clip_hi)
        return lo, hi

    @cached_property
    def ppoly(self):
        """The density as a scipy PPoly on its (clipped) support."""
        x = np.linspace(self.lo, self.hi, len(self.values))
        y = np.asarray(self.values)
        if self.order == 1:
            pp = PPoly.from_spline(make_interp_spline(x, y, k=1))
            # from_spline pads with zero-width end intervals; drop them
            keep = np.diff(pp.x) > 0
            pp = PPoly(pp.c[:, keep], np.append(pp.x[:-1][keep], pp.x[-1]))
        else:
            pp = CubicSpline(x, y)
            pp = PPoly(pp.c, pp.x)
        pp = _ppoly_times(pp, self.poly)
        lo, hi = self.support
        return _ppoly_restrict(pp, lo, hi)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        return np.where(inside, self.ppoly(np.clip(x, lo, hi)), 0.0)

    def mass_below(self, a):
        lo, hi = self.support
        a = np.clip(np.asarray(a, dtype=float), lo, hi)
        anti = self.ppoly.antiderivative()
        return anti(a) - anti(lo)

    def times_poly(self, coeffs):
        prod = (Polynomial(self.poly) * Polynomial(coeffs)).coef
        return TableDensity(self.lo, self.hi, self.values, self.order, tuple(prod),
                            self.clip_lo, self.clip_hi)

    def times_x(self):
        return self.times_poly((0.0, 1.0))

    def clip(self, lo, hi):
        slo, shi = self.support
        lo, hi = max(lo, slo), min(hi, shi)
        if lo >= hi:
            return None
        return TableDensity(self.lo, self.hi, self.values, self.order, self.poly, lo, hi)


def _ppoly_times(pp, coeffs):
    """Multiply a PPoly by the global polynomial with increasing ``coeffs``."""
    q = Polynomial(coeffs)
    if q.degree() == 0 and q.coef[0] == 1.0:
        return pp
    qdeg = q.degree()
    k = pp.c.shape[0] - 1
    out = np.zeros((k + qdeg + 1, pp.c.shape[1]))
    for i in range(pp.c.shape[1]):
        xi = pp.x[i]
        # Taylor coefficients of q about xi, increasing in s = x - xi
        qs = [q.deriv(j)(xi) / math.factorial(j) if j else q(xi) for j in range(qdeg + 1)]
        out[:, i] = np.convolve(pp.c[::-1, i], qs)[::-1]
    return PPoly(out, pp.x)


def _ppoly_restrict(pp, lo, hi):
    """Restrict a PPoly to [lo, hi], re-expanding the cut end intervals."""
    xs = pp.x
    if lo <= xs[0] and hi >= xs[-1]:
        return pp
    bps = np.concatenate([[lo], xs[(xs > lo) & (xs < hi)], [hi]])
    k = pp.c.shape[0]
    coefs = np.empty((k, len(bps) - 1))
    for j in range(len(bps) - 1):
        idx = min(max(np.searchsorted(xs, 0.5 * (bps[j] + bps[j + 1])) - 1, 0), len(xs) - 2)
        local = Polynomial(pp.c[::-1, idx])
        s0 = bps[j] - xs[idx]
        coefs[:, j] = [local.deriv(d)(s0) / math.factorial(d) for d in range(k - 1, -1, -1)]
    return PPoly(coefs, bps)


# ---------------------------------------------------------------------------
# measure


@dataclass(frozen=True)
class Measure:
    """Positive measure: atoms ``(location, mass)`` plus AC pieces.

    Continuous-side measures (the default) live on ``(0, inf)`` and must
    have a finite Laplace transform. ``discrete_side=True`` marks a measure
    on [-1, 1] used for moment sequences and Hankel matrices.
    """

    atoms: tuple = ()
    power: tuple = ()
    table: tuple = ()
    label: str = ""
    discrete_side: bool = False

    def __post_init__(self):
        merged = {}
        for a, m in self.atoms:
            a, m = float(a), float(m)
            if not (m >= 0 and math.isfinite(m) and math.isfinite(a)):
                raise SpecError(f"atom ({a}, {m}) must have finite nonnegative mass")
            if m > 0:
                merged[a] = merged.get(a, 0.0) + m
        object.__setattr__(self, "atoms", tuple(sorted(merged.items())))
        object.__setattr__(self, "power", tuple(self.power))
        object.__setattr__(self, "table", tuple(self.table))
        if self.discrete_side:
            self._check_discrete()
        else:
            self._check_class_m()

    def _check_class_m(self):
        if any(a <= 0 for a, _ in self.atoms):
            raise SupportError("continuous-side atoms must sit in (0, inf)")
        if any(p.lo <= 0 for p in self.table):
            raise SupportError("tabulated densities must live in (0, inf)")
        probes = laplace(self, np.array([1e-3, 1.0, 1e3]))
        if not np.all(np.isfinite(probes)):
            raise DomainError("Laplace transform is not finite at the probe points")

    def _check_discrete(self):
        if any(abs(a) > 1 for a, _ in self.atoms):
            raise SupportError("discrete-side atoms must lie in [-1, 1]")
        if any(p.cutoff > 1 for p in self.power):
            raise SupportError("discrete-side power densities need cutoff <= 1")
        if any(p.support[0] < -1 or p.support[1] > 1 for p in self.table):
            raise SupportError("discrete-side tables must lie in [-1, 1]")

    @property
    def is_empty(self):
        return not (self.atoms or self.power or self.table)

    def support_bounds(self):
        los, his = [], []
        for a, _ in self.atoms:
            los.append(a)
            his.append(a)
        for p in self.power + self.table:
            lo, hi = p.support
            los.append(lo)
            his.append(hi)
        if not los:
            return None
        return min(los), max(his)


def lebesgue(cutoff=INF, label="lebesgue"):
    return Measure(power=(PowerDensity(1.0, 1.0, cutoff),), label=label)


def point_mass(a, m=1.0, label=None):
    return Measure(atoms=((a, m),), label=label or f"atom({a:g},{m:g})")


def quasi_carleman(alpha, label=None):
    """The measure ``x**(alpha-1) dx / Gamma(alpha)`` whose transform is ``t**-alpha``."""
    return Measure(power=(PowerDensity(1.0 / math.gamma(alpha), alpha),),
                   label=label or f"power({alpha:g})")


# ---------------------------------------------------------------------------
# incomplete-gamma type integrals by quadrature


def _lower_quad(alpha, z):
    """int_0^z y**(alpha-1) e**-y dy for an array of finite z > 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    flat, res = z.ravel(), out.ravel()
    for s in range(0, flat.size, _CHUNK):
        zc = flat[s:s + _CHUNK]

        # y = z * sigma; the singular factor goes through sigma (= dist_a)
        def estimate(x, w, dist, zc=zc):
            sig = dist[:, None]
            vals = np.exp((alpha - 1.0) * np.log(sig) - zc[None, :] * sig)
            return w @ vals

        part = quad.de_refine(estimate, lambda lv: quad.tanh_sinh_rule(0.0, 1.0, lv),
                              rtol=1e-14, where="lower incomplete gamma")
        res[s:s + _CHUNK] = part * zc ** alpha
    return out


def _upper_quad(alpha, z):
    """int_z^inf y**(alpha-1) e**-y dy for an array of z > 0 (may be inf)."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    flat, res = z.ravel(), out.ravel()
    fin = np.isfinite(flat)
    idx = np.flatnonzero(fin)
    for s in range(0, idx.size, _CHUNK):
        ii = idx[s:s + _CHUNK]
        zc = flat[ii]

        # y = z + u, factor e**-z z**(alpha-1) out: integrand (1 + u/z)**(alpha-1) e**-u
        def estimate(u, w, zc=zc):
            vals = np.exp((alpha - 1.0) * np.log1p(u[:, None] / zc[None, :]) - u[:, None])
            return w @ vals

        part = quad.de_refine(estimate, lambda lv: quad.exp_sinh_rule(lv),
                              rtol=1e-14, where="upper incomplete gamma")
        res[ii] = part * np.exp((alpha - 1.0) * np.log(zc) - zc)
    return out


@lru_cache(maxsize=256)
def _unit_split(alpha):
    """(int_0^1, int_1^inf) of y**(alpha-1) e**-y."""
    return float(_lower_quad(alpha, np.array([1.0]))[0]), float(_upper_quad(alpha, np.array([1.0]))[0])


def _gamma_window(alpha, z0, z1):
    """int_{z0}^{z1} y**(alpha-1) e**-y dy, vectorised; z0 may be 0, z1 may be inf.

    Below y = 1 the integral is taken from the origin, above it from
    infinity, so neither side subtracts nearly equal numbers.
    """
    z0, z1 = np.broadcast_arrays(np.asarray(z0, float), np.asarray(z1, float))
    low1, up1 = _unit_split(alpha)

    def lower(z):
        res = np.zeros(z.shape)
        pos = z > 0
        res[pos] = _lower_quad(alpha, z[pos])
        return res

    out = np.empty(z0.shape)
    left = z1 <= 1.0
    right = z0 >= 1.0
    mid = ~(left | right)
    if np.any(left):
        out[left] = lower(z1[left]) - lower(z0[left])
    if np.any(right):
        out[right] = _upper_quad(alpha, z0[right]) - _upper_quad(alpha, z1[right])
    if np.any(mid):
        out[mid] = (low1 - lower(z0[mid])) + (up1 - _upper_quad(alpha, z1[mid]))
    return out


# ---------------------------------------------------------------------------
# Laplace transform


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("Laplace transform needs t > 0")
    return t


def _power_laplace(p, t):
    # c t**-alpha int_{t L}^{t B} y**(alpha-1) e**-y dy
    z0 = t * p.lower
    z1 = t * p.cutoff if math.isfinite(p.cutoff) else np.full(t.shape, INF)
    window = _gamma_window(p.alpha, z0, z1)
    return p.c * t ** (-p.alpha) * window


def _table_laplace(p, t):
    """Interval-by-interval transform of a piecewise polynomial density."""
    pp = p.ppoly
    k = pp.c.shape[0]
    xg, wg = quad.gauss_legendre(24)
    out = np.zeros(t.shape)
    for i in range(pp.c.shape[1]):
        x0, width = pp.x[i], pp.x[i + 1] - pp.x[i]
        coef = pp.c[:, i]                    # highest degree first, in s = x - x0
        tw = t * width
        small = tw <= 2.0
        val = np.empty(t.shape)
        if np.any(small):
            s = 0.5 * width * (1.0 + xg)
            ps = np.polyval(coef, s)
            ts = t[small]
            val[small] = (np.exp(-np.outer(ts, s)) * (ps * 0.5 * width * wg)).sum(axis=1)
        if np.any(~small):
            ts = t[~small]
            # repeated integration by parts: sum_j P^(j)(s)/t^(j+1)
            at0 = np.zeros(ts.shape)
            atw = np.zeros(ts.shape)
            deriv = np.poly1d(coef)
            for j in range(k):
                at0 += deriv(0.0) / ts ** (j + 1)
                atw += deriv(width) / ts ** (j + 1)
                deriv = deriv.deriv()
            val[~small] = at0 - np.exp(-ts * width) * atw
        out += np.exp(-t * x0) * val
    return out


def laplace(mu, t):
    """Laplace transform ``int exp(-t x) dmu(x)``; ``t`` scalar or array, t > 0."""
    scalar = np.ndim(t) == 0
    t = _check_t(t)
    t = np.atleast_1d(t)
    out = np.zeros(t.shape)
    for a, m in mu.atoms:
        out += m * np.exp(-a * t)
    for p in mu.power:
        out += _power_laplace(p, t)
    for p in mu.table:
        out += _table_laplace(p, t)
    if not np.all(np.isfinite(out)):
        raise NonConvergent("Laplace transform produced a non-finite value")
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# integration of functions against mu


def _piece_rules(p, upper=None):
    """(rule(level), min_level) for integrating against an AC piece.

    ``rule(level)`` returns nodes and weights that already include the
    density, so ``int g dmu_piece ~ sum w * g(x)``.
    """
    lo, hi = p.support
    if upper is not None:
        hi = min(hi, upper)
    if lo >= hi:
        return None
    if isinstance(p, PowerDensity):
        alpha, c = p.alpha, p.c
        if math.isinf(hi):
            def rule(level):
                if lo == 0.0:
                    x, w = quad.exp_sinh_rule(level)
                else:
                    u, w = quad.exp_sinh_rule(level, scale=max(lo, 1.0))
                    x = lo + u
                with np.errstate(over="ignore"):
                    wd = np.exp(np.log(w) + (alpha - 1.0) * np.log(x)) * c
                # an unrepresentable weight sits where any integrable g is below 1e-308
                keep = np.isfinite(wd)
                return x[keep], wd[keep]
        else:
            def rule(level):
                x, w, dist = quad.tanh_sinh_rule(lo, hi, level)
                xs = dist if lo == 0.0 else x
                return x, w * c * np.exp((alpha - 1.0) * np.log(xs))
        return rule, 3
    pp = p.ppoly
    edges = pp.x[(pp.x >= lo) & (pp.x <= hi)]
    edges = np.unique(np.concatenate([[lo], edges, [hi]]))

    def rule(level):
        e = edges
        for _ in range(level):
            e = quad.bisect_edges(e)
        x, w = quad.panel_rule(e, 16)
        return x, w * pp(x)
    return rule, 0


def integrate(mu, g, upper=None, rtol=1e-12, atol=0.0):
    """``int g(x) dmu(x)`` for vectorised ``g`` (result may be array-valued).

    ``upper`` truncates the absolutely continuous pieces at ``x = upper``;
    atoms are always summed in full.
    """
    return integrate_with(mu, lambda x, w: np.tensordot(w, g(x), axes=(0, 0)),
                          upper=upper, rtol=rtol, atol=atol)


def integrate_with(mu, estimate, upper=None, rtol=1e-12, atol=0.0):
    """Sum over the pieces of ``mu`` of a node/weight functional.

    ``estimate(x, w)`` must be linear in ``w`` (e.g. ``A.T @ (w * A)`` for a
    Gram matrix); each AC piece is refined until the functional settles.
    """
    total = None
    if mu.atoms:
        a = np.array([a for a, _ in mu.atoms])
        m = np.array([m for _, m in mu.atoms])
        total = estimate(a, m)
    for p in mu.power + mu.table:
        spec = _piece_rules(p, upper)
        if spec is None:
            continue
        rule, lv0 = spec
        part = quad.de_refine(estimate, rule, rtol=rtol, atol=atol, min_level=lv0,
                              max_level=lv0 + 9, where=f"integrate over {type(p).__name__}")
        total = part if total is None else total + part
    if total is None:
        total = estimate(np.zeros(0), np.zeros(0))
    return total


# ---------------------------------------------------------------------------
# derived measures


def multiply_by_x(mu):
    """The measure ``x dmu(x)`` (its transform is ``-d/dt laplace(mu, t)``)."""
    return Measure(
        atoms=tuple((a, a * m) for a, m in mu.atoms),
        power=tuple(p.times_x() for p in mu.power),
        table=tuple(p.times_x() for p in mu.table),
        label=f"x*{mu.label}" if mu.label else "x*mu",
        discrete_side=mu.discrete_side,
    )


def split_at_one(mu):
    """Split ``mu`` into parts on (0, 1] and [1, inf); an atom at 1 goes right."""
    left = Measure(
        atoms=tuple((a, m) for a, m in mu.atoms if a < 1.0),
        power=tuple(q for q in (p.clip(0.0, 1.0) for p in mu.power) if q is not None),
        table=tuple(q for q in (p.clip(-INF, 1.0) for p in mu.table) if q is not None),
        label=f"{mu.label}|(0,1]", discrete_side=mu.discrete_side,
    )
    right = Measure(
        atoms=tuple((a, m) for a, m in mu.atoms if a >= 1.0),
        power=tuple(q for q in (p.clip(1.0, INF) for p in mu.power) if q is not None),
        table=tuple(q for q in (p.clip(1.0, INF) for p in mu.table) if q is not None),
        label=f"{mu.label}|[1,inf)", discrete_side=mu.discrete_side,
    )
    return left, right


# ---------------------------------------------------------------------------
# Carleson condition


def mass_below(mu, a, closed=False):
    """``mu((0, a))`` (or ``mu((0, a])`` with ``closed``); scalar in, scalar out."""
    scalar = np.ndim(a) == 0
    a = np.atleast_1d(np.asarray(a, dtype=float))
    out = np.zeros(a.shape)
    for loc, m in mu.atoms:
        out += m * ((loc <= a) if closed else (loc < a))
    for p in mu.power + mu.table:
        out += p.mass_below(a)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class CarlesonReport:
    is_carleson: bool
    constant: float
    probe_grid: tuple = field(repr=False)
    divergence_end: str = None

    def to_json(self):
        return {
            "schema": "hankel-lab-carleson/1",
            "is_carleson": self.is_carleson,
            "constant": self.constant if math.isfinite(self.constant) else "inf",
            "divergence_end": self.divergence_end,
            "probe_grid": [float(a) for a in self.probe_grid],
        }


def sup_with_stability(values_base, values_wide, grid_wide):
    """Shared sup/divergence logic for Carleson-type probes.

    Returns ``(bounded, sup_on_base_grid, end)``; the sup is declared stable
    when doubling the log-range moves it by less than 10%.
    """
    base = float(np.max(values_base, initial=0.0))
    wide = float(np.max(values_wide, initial=0.0))
    if math.isfinite(base) and wide <= STABILITY_RATIO * base + 1e-300:
        return True, base, None
    k = int(np.argmax(values_wide))
    end = "at_zero" if grid_wide[k] < 1.0 else "at_infinity"
    return False, INF, end


def _carleson_ratios(mu, grid):
    ratios = mass_below(mu, grid) / grid
    if mu.atoms:
        locs = np.array([a for a, _ in mu.atoms])
        # sup of mu((0,a))/a over a just above an atom
        ratios = np.concatenate([ratios, mass_below(mu, locs, closed=True) / locs])
    return ratios


def carleson_check(mu):
    """Probe ``sup_a mu((0, a)) / a`` on a log grid (plus atom locations)."""
    base = _carleson_ratios(mu, CARLESON_GRID)
    wide = _carleson_ratios(mu, CARLESON_GRID_WIDE)
    wide_grid = np.concatenate([CARLESON_GRID_WIDE, [a for a, _ in mu.atoms]])
    ok, const, end = sup_with_stability(base, wide, wide_grid)
    return CarlesonReport(ok, const, tuple(CARLESON_GRID), end)


# ---------------------------------------------------------------------------
# Blaschke condition


@dataclass(frozen=True)
class BlaschkeRule:
    """Generator for atom locations.

    * ``geometric``: ``a_k = scale * ratio**k``
    * ``polynomial``: ``a_k = scale * k**power``
    * ``explicit``: the finite list ``points``

    with ``k`` running from ``start`` to infinity.
    """

    kind: str
    scale: float = 1.0
    ratio: float = None
    power: float = None
    start: int = 0
    points: tuple = ()

    def term(self, k):
        a = self.location(k)
        return a / (a * a + 1)

    def location(self, k):
        if self.kind == "geometric":
            return self.scale * mpmath.mpf(self.ratio) ** k
        return self.scale * mpmath.mpf(k) ** self.power


def blaschke_check(atoms):
    """Decide ``sum a_k / (a_k**2 + 1) < inf``.

    ``atoms`` is a finite list of locations or a :class:`BlaschkeRule`.
    Returns ``(converges, sum)``; the sum is ``inf`` when divergent.
    """
    if not isinstance(atoms, BlaschkeRule):
        pts = [float(a) for a in atoms]
        if not pts:
            raise ValueError("blaschke_check needs a nonempty list")
        if any(a <= 0 for a in pts):
            raise DomainError("atom locations must be positive")
        return True, float(sum(a / (a * a + 1) for a in pts))
    rule = atoms
    if rule.kind == "explicit":
        return blaschke_check(rule.points)
    if not rule.scale > 0:
        raise UnclassifiableRule("generator scale must be positive")
    if rule.kind == "geometric":
        if rule.ratio is None or not rule.ratio > 0:
            raise UnclassifiableRule("geometric rule needs ratio > 0")
        # terms ~ a_k (ratio < 1) or ~ 1/a_k (ratio > 1): geometric either way
        converges = rule.ratio != 1.0
    elif rule.kind == "polynomial":
        if rule.power is None:
            raise UnclassifiableRule("polynomial rule needs a power")
        if rule.start < 1:
            raise UnclassifiableRule("polynomial rule needs start >= 1")
        # terms ~ k**-|power| : compare with the p-series
        converges = abs(rule.power) > 1.0
    else:
        raise UnclassifiableRule(f"unsupported generator kind {rule.kind!r}")
    if not converges:
        return False, INF
    with mpmath.workdps(30):
        total = mpmath.nsum(rule.term, [rule.start, mpmath.inf])
    return True, float(total)


# ---------------------------------------------------------------------------
# moments (discrete side)


def _check_support_unit(mu):
    bounds = mu.support_bounds()
    if bounds is not None and (bounds[0] < -1.0 or bounds[1] > 1.0):
        raise SupportError("moments need support inside [-1, 1]")


def _table_moments(p, n):
    pp = p.ppoly
    deg = pp.c.shape[0] - 1
    npts = (n + deg) // 2 + 2
    xg, wg = np.polynomial.legendre.leggauss(npts)
    out = np.zeros(n)
    for i in range(pp.c.shape[1]):
        lo, hi = pp.x[i], pp.x[i + 1]
        s = 0.5 * (hi - lo) * (1.0 + xg)
        x = lo + s
        w = 0.5 * (hi - lo) * wg * np.polyval(pp.c[:, i], s)
        out += np.vander(x, n, increasing=True).T @ w
    return out


def moments(mu, n):
    """``h_j = int x**j dmu`` for ``j < n`` (closed forms, exact Gauss rules)."""
    _check_support_unit(mu)
    j = np.arange(n, dtype=float)
    out = np.zeros(n)
    for a, m in mu.atoms:
        out += m * a ** j
    for p in mu.power:
        e = j + p.alpha
        out += p.c * (p.cutoff ** e - p.lower ** e) / e
    for p in mu.table:
        out += _table_moments(p, n)
    return out


def _power_weighted_moments(p, n, factor):
    """``int x**j factor(x) c x**(alpha-1) dx`` over the piece by Gauss-Jacobi.

    ``factor`` is a numpy polynomial; the rule is exact for the integrand.
    """
    lo, hi = p.support
    npts = (n + factor.degree()) // 2 + 2
    if lo == 0.0:
        # x = hi (1+u)/2 ; x**(alpha-1) dx = (hi/2)**alpha (1+u)**(alpha-1) du
        u, w = roots_jacobi(npts, 0.0, p.alpha - 1.0)
        x = 0.5 * hi * (1.0 + u)
        w = w * (0.5 * hi) ** p.alpha
    else:
        u, w = np.polynomial.legendre.leggauss(npts + 40)
        x = lo + 0.5 * (hi - lo) * (1.0 + u)
        w = w * 0.5 * (hi - lo) * x ** (p.alpha - 1.0)
    w = p.c * w * factor(x)
    return np.vander(x, n, increasing=True).T @ w


def one_minus_t2(mu):
    """Atoms and tables of ``(1 - t**2) dmu``; power pieces are handled separately."""
    return Measure(
        atoms=tuple((a, m * (1.0 - a * a)) for a, m in mu.atoms),
        table=tuple(p.times_poly((1.0, 0.0, -1.0)) for p in mu.table),
        label=f"(1-t^2)*{mu.label}", discrete_side=True,
    )


def bergszwarc_moments(mu, n):
    """Moments of ``(1 - t**2) dmu(t)``, computed on the derived measure.

    The result must match ``h_k - h_{k+2}`` of :func:`moments`; the two
    routes share no arithmetic beyond atom locations.
    """
    _check_support_unit(mu)
    out = moments(one_minus_t2(mu), n)
    factor = Polynomial([1.0, 0.0, -1.0])
    for p in mu.power:
        out = out + _power_weighted_moments(p, n, factor)
    return out


# ---------------------------------------------------------------------------
# JSON


def measure_from_spec(spec):
    """Build a :class:`Measure` from its JSON dictionary."""
    try:
        power = []
        for p in spec.get("power", []):
            cut = p.get("cutoff", "inf")
            cut = INF if cut in ("inf", None) else float(cut)
            power.append(PowerDensity(float(p["c"]), float(p["alpha"]), cut,
                                      float(p.get("lower", 0.0))))
        table = [TableDensity(float(p["lo"]), float(p["hi"]), tuple(p["values"]),
                              int(p.get("order", 1))) for p in spec.get("table", [])]
        atoms = [(float(a["a"]), float(a["m"])) for a in spec.get("atoms", [])]
        return Measure(atoms=tuple(atoms), power=tuple(power), table=tuple(table),
                       label=str(spec.get("label", "")),
                       discrete_side=bool(spec.get("discrete_side", False)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (SupportError, DomainError)):
            raise
        raise SpecError(f"bad measure spec: {exc}") from exc


def measure_to_spec(mu):
    spec = {"label": mu.label, "atoms": [{"a": a, "m": m} for a, m in mu.atoms],
            "power": [], "table": [], "discrete_side": mu.discrete_side}
    for p in mu.power:
        d = {"c": p.c, "alpha": p.alpha, "cutoff": "inf" if math.isinf(p.cutoff) else p.cutoff}
        if p.lower:
            d["lower"] = p.lower
        spec["power"].append(d)
    for p in mu.table:
        if p.poly != (1.0,) or p.clip_lo is not None or p.clip_hi is not None:
            raise SpecError("derived tabulated densities have no JSON form")
        spec["table"].append({"lo": p.lo, "hi": p.hi, "values": list(p.values), "order": p.order})
    return spec
