"""Quadrature rules used throughout the package.

Two families are provided:

* composite Gauss-Legendre panels (smooth integrands on finite intervals,
  adaptive by uniform panel bisection), and
* double-exponential rules: tanh-sinh on a finite interval and exp-sinh on
  the half line. These absorb algebraic endpoint singularities such as
  ``x**(alpha - 1)`` at the origin and algebraic decay at infinity.

All drivers accept vector-valued integrands: ``f(x)`` may return an array
whose leading axis runs over the nodes.
"""

from functools import lru_cache

import numpy as np
from scipy.special import expit

from .errors import NonConvergent

GL_ORDER = 32

# |pi/2 sinh(u)| <= ~350 keeps both endpoint distances representable.
_TANH_SINH_UMAX = 6.1
# exp(+-pi/2 sinh(u)) stays inside the double range.
_EXP_SINH_UMAX = 6.7


@lru_cache(maxsize=None)
def gauss_legendre(order=GL_ORDER):
    """Gauss-Legendre nodes and weights on [-1, 1] (cached, read-only)."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(edges, order=GL_ORDER):
    """Composite Gauss-Legendre rule on consecutive panels ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x0, w0 = gauss_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (1.0 + x0)).ravel()
    weights = (half * w0).ravel()
    return nodes, weights


def graded_edges(a, b, ratio=2.0):
    """Panel edges on [a, b], geometrically graded toward ``a``.

    Used when ``a > 0`` is small compared with ``b - a``: integrands such as
    ``h(t + s)`` with ``h`` singular at 0 vary on the scale of the distance
    to the origin.
    """
    if not b > a:
        raise ValueError("need b > a")
    if a <= 0 or b / a <= 4.0:
        return np.array([a, b], dtype=float)
    edges = [a]
    width = a
    while edges[-1] + width < b:
        edges.append(edges[-1] + width)
        width *= ratio
    if b - edges[-1] < 0.25 * width / ratio and len(edges) > 1:
        edges[-1] = b
    else:
        edges.append(b)
    return np.asarray(edges, dtype=float)


def bisect_edges(edges):
    edges = np.asarray(edges, dtype=float)
    mid = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(2 * len(edges) - 1)
    out[0::2] = edges
    out[1::2] = mid
    return out


def adaptive_panels(f, edges, rtol=1e-12, atol=0.0, floor=1e-15, order=GL_ORDER,
                    max_bisections=10, where=None):
    """Integrate ``f`` over the panels ``edges`` with uniform bisection.

    Each output component is frozen at the first refinement level where it
    agrees with the previous level, so a component's value does not depend on
    which other components were requested alongside it.

    The acceptance band is ``rtol*|I| + atol + floor*int|f|``; the last term
    lets cancelling integrals stop at the rounding floor.

    On failure the raised :class:`NonConvergent` carries the flat indices of
    the unconverged components in ``where``.
    """
    edges = np.asarray(edges, dtype=float)
    x, w = panel_rule(edges, order)
    prev = np.tensordot(w, f(x), axes=(0, 0))
    result = np.array(prev, copy=True)
    done = np.zeros(np.shape(prev), dtype=bool)
    for _ in range(max_bisections):
        edges = bisect_edges(edges)
        x, w = panel_rule(edges, order)
        vals = f(x)
        cur = np.tensordot(w, vals, axes=(0, 0))
        band = rtol * np.abs(cur) + atol + floor * np.tensordot(np.abs(w), np.abs(vals), axes=(0, 0))
        ok = (np.abs(cur - prev) <= band) & ~done
        result = np.where(ok, cur, result)
        done = done | ok
        if np.all(done):
            return result[()] if np.ndim(result) == 0 else result
        prev = cur
    bad = np.flatnonzero(~np.atleast_1d(done))
    raise NonConvergent(f"composite Gauss-Legendre did not converge ({where or 'integral'})",
                        where=bad)


# ---------------------------------------------------------------------------
# double-exponential rules


@lru_cache(maxsize=64)
def _tanh_sinh_ref(level):
    h = 2.0 ** (-level)
    k = np.arange(-int(_TANH_SINH_UMAX / h), int(_TANH_SINH_UMAX / h) + 1)
    u = k * h
    v = 0.5 * np.pi * np.sinh(u)
    left = expit(2.0 * v)        # (x - a) / (b - a), accurate near a
    right = expit(-2.0 * v)      # (b - x) / (b - a), accurate near b
    dw = 2.0 * left * right * 0.5 * np.pi * np.cosh(u) * h
    keep = dw > 0.0
    return left[keep], right[keep], dw[keep]


def tanh_sinh_rule(a, b, level):
    """Tanh-sinh nodes/weights on [a, b].

    Returns ``(x, w, dist_a)`` where ``dist_a = x - a`` is computed without
    cancellation (needed for integrands singular at ``a``).
    """
    left, right, dw = _tanh_sinh_ref(level)
    width = b - a
    dist_a = width * left
    x = np.where(left <= 0.5, a + dist_a, b - width * right)
    return x, width * dw, dist_a


@lru_cache(maxsize=64)
def _exp_sinh_ref(level):
    h = 2.0 ** (-level)
    k = np.arange(-int(_EXP_SINH_UMAX / h), int(_EXP_SINH_UMAX / h) + 1)
    u = k * h
    x = np.exp(0.5 * np.pi * np.sinh(u))
    w = x * 0.5 * np.pi * np.cosh(u) * h
    return x, w


def exp_sinh_rule(level, scale=1.0):
    """Exp-sinh nodes/weights on (0, inf); ``scale`` centres the rule."""
    x, w = _exp_sinh_ref(level)
    return scale * x, scale * w


def de_refine(estimate, rule, rtol=1e-12, atol=0.0, min_level=3, max_level=10, where=None):
    """Drive a double-exponential rule by halving its step.

    ``rule(level)`` returns the node data passed to ``estimate``; the
    estimate at consecutive levels must agree (max-norm, relative to the
    largest entry) before it is accepted.
    """
    prev = None
    for level in range(min_level, max_level + 1):
        cur = np.asarray(estimate(*rule(level)))
        if prev is not None:
            ref = max(float(np.max(np.abs(cur))) if cur.size else 0.0, 0.0)
            if float(np.max(np.abs(cur - prev), initial=0.0)) <= rtol * ref + atol:
                return cur[()] if cur.ndim == 0 else cur
        prev = cur
    raise NonConvergent("double-exponential quadrature did not converge", where=where)


def tanh_sinh(f, a, b, rtol=1e-12, atol=0.0, singular_at_a=False, **kw):
    """Integrate ``f`` over [a, b]; with ``singular_at_a`` f receives ``x - a``."""

    def estimate(x, w, dist_a):
        vals = f(dist_a) if singular_at_a else f(x)
        return np.tensordot(w, vals, axes=(0, 0))

    return de_refine(estimate, lambda lv: tanh_sinh_rule(a, b, lv), rtol, atol, **kw)


def exp_sinh(f, scale=1.0, rtol=1e-12, atol=0.0, **kw):
    """Integrate ``f`` over (0, inf)."""

    def estimate(x, w):
        return np.tensordot(w, f(x), axes=(0, 0))

    return de_refine(estimate, lambda lv: exp_sinh_rule(lv, scale), rtol, atol, **kw)
