"""Finite sections in the Laguerre basis and in the moment basis.

Kernels that carry a measure are assembled through
``G_mn = int Lphi_m(x) Lphi_n(x) dmu(x)`` with
``Lphi_n(x) = y**n / (x + 1/2)``, ``y = (x - 1/2)/(x + 1/2)``.
Tabulated kernels use the rotated coordinate ``u = t + s``.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from . import quadrature as quad
from .errors import DimensionError, LengthError, SingularityError, SpecError
from .kernelfn import PowerLaw, Table
from .measure import _piece_rules, bergszwarc_moments, integrate_with, moments


def laguerre_eval(n, t, weighted=True):
    """``L_n(t) e^{-t/2}`` (or bare ``L_n(t)``) by the three-term recurrence."""
    if n < 0:
        raise SpecError("Laguerre index must be >= 0")
    t = np.asarray(t, dtype=float)
    out = laguerre_table(n, t, weighted)[n]
    return out[()] if out.ndim == 0 else out


def laguerre_table(n_max, t, weighted=True):
    """Rows ``0..n_max`` of the recurrence at ``t`` (shape ``(n_max+1,) + t.shape``)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((n_max + 1,) + t.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 - t
    for k in range(1, n_max):
        out[k + 1] = ((2 * k + 1 - t) * out[k] - k * out[k - 1]) / (k + 1)
    if weighted:
        out *= np.exp(-0.5 * t)
    return out


def laplace_basis(x, n):
    """Matrix ``A[i, k] = Lphi_k(x_i)`` for ``k < n``."""
    x = np.asarray(x, dtype=float)
    inv = 1.0 / (x + 0.5)
    y = (x - 0.5) * inv
    return np.power(y[:, None], np.arange(n)[None, :]) * inv[:, None]


# ---------------------------------------------------------------------------
# the section object


@dataclass(frozen=True)
class HankelSection:
    matrix: np.ndarray
    basis: str
    source: str = ""
    hankel_profile: np.ndarray = field(init=False)
    hankel_defect: float = field(init=False)
    symmetry_defect: float = field(init=False)

    def __post_init__(self):
        g = np.array(self.matrix, copy=True)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
            raise DimensionError("a section is a non-empty square matrix")
        if self.basis not in ("laguerre", "moment"):
            raise SpecError(f"unknown basis {self.basis!r}")
        g.setflags(write=False)
        n = g.shape[0]
        idx = np.add.outer(np.arange(n), np.arange(n))
        sums = np.bincount(idx.ravel(), weights=g.real.ravel(), minlength=2 * n - 1)
        if np.iscomplexobj(g):
            sums = sums + 1j * np.bincount(idx.ravel(), weights=g.imag.ravel(), minlength=2 * n - 1)
        counts = np.bincount(idx.ravel(), minlength=2 * n - 1)
        profile = sums / counts
        profile.setflags(write=False)
        object.__setattr__(self, "matrix", g)
        object.__setattr__(self, "hankel_profile", profile)
        object.__setattr__(self, "hankel_defect", float(np.max(np.abs(g - profile[idx]))))
        object.__setattr__(self, "symmetry_defect", float(np.max(np.abs(g - g.T))))

    @property
    def N(self):
        return self.matrix.shape[0]

    def header(self):
        return f"# hankel-lab section basis={self.basis} N={self.N} source={self.source}"

    def to_csv(self):
        rows = [self.header()]
        for row in self.matrix:
            rows.append(",".join(_fmt(v) for v in row))
        return "\n".join(rows) + "\n"

    def sidecar(self):
        return {"schema": "hankel-lab-section/1", "basis": self.basis, "N": self.N,
                "source": self.source, "hankel_defect": self.hankel_defect,
                "symmetry_defect": self.symmetry_defect,
                "hankel_profile": [_json_num(v) for v in self.hankel_profile]}

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# hankel-lab section"):
            raise SpecError("missing section header")
        meta = dict(tok.split("=", 1) for tok in lines[0][len("# hankel-lab section"):].split() if "=" in tok)
        rows = [[_parse(v) for v in ln.split(",")] for ln in lines[1:]]
        mat = np.array(rows)
        if mat.shape != (int(meta["N"]),) * 2:
            raise DimensionError("section CSV does not match its header")
        return cls(mat, meta["basis"], meta.get("source", ""))


def _fmt(v):
    if isinstance(v, complex) or np.iscomplexobj(v):
        return f"{v.real:.17g}{v.imag:+.17g}j"
    return f"{float(v):.17g}"


def _parse(s):
    return complex(s) if s.endswith("j") else float(s)


def _json_num(v):
    return [float(v.real), float(v.imag)] if np.iscomplexobj(v) else float(v)


# ---------------------------------------------------------------------------
# Laguerre sections


def _reject_singular(mu):
    # phi_0 is in the form domain iff int (x + 1/2)^-2 dmu < inf
    for p in mu.power:
        if math.isinf(p.cutoff) and p.alpha >= 2.0:
            raise SingularityError(
                f"Lphi_0 is not square integrable against density x^{p.alpha - 1:g}")
    if mu.discrete_side:
        raise SpecError("Laguerre sections need a measure on (0, inf)")


def laguerre_section(h, N, rtol=1e-13):
    """Order-``N`` Laguerre-Galerkin matrix of ``Gamma_h``."""
    if int(N) != N or N < 1:
        raise SpecError("section order must be a positive integer")
    N = int(N)
    if isinstance(h, PowerLaw) and h.alpha >= 1.0:
        raise SingularityError(f"t^-{h.alpha:g} is not integrable at 0")
    if isinstance(h, Table):
        return laguerre_section_rotated(h, N)
    mu = h.measure
    if mu is None:
        raise SpecError(f"no assembly route for {type(h).__name__}")
    _reject_singular(mu)

    def gram(x, w):
        a = laplace_basis(x, N)
        return a.T @ (w[:, None] * a)

    g = integrate_with(mu, gram, rtol=rtol)
    return HankelSection(g, "laguerre", h.label)


def cross_correlation(k_max, u):
    """``K[m, n](u) = int_0^u phi_m(t) phi_n(u - t) dt`` for ``m, n <= k_max``.

    The integrand is ``e^{-u/2}`` times a polynomial of degree ``m + n`` in
    ``t``, so a Gauss-Legendre rule with ``k_max + 1`` nodes is exact.
    """
    u = np.asarray(u, dtype=float)
    z, wz = quad.gauss_legendre(k_max + 1)
    t = 0.5 * u[:, None] * (1.0 + z[None, :])          # (U, q)
    lt = laguerre_table(k_max, t, weighted=False)       # (k, U, q)
    ls = laguerre_table(k_max, u[:, None] - t, weighted=False)
    wt = 0.5 * u[:, None] * wz[None, :] * np.exp(-0.5 * u)[:, None]
    return np.einsum("muq,nuq,uq->umn", lt, ls, wt)


def laguerre_section_rotated(h, N, rtol=1e-11):
    """Assemble ``G_mn = int h(u) K_mn(u) du`` over the kernel's domain.

    For tabulated kernels ``h`` is taken as zero outside its grid.
    """
    lo, hi = h.domain()
    if math.isinf(hi):
        # e^{-u/2} u^{2N} has decayed below 1e-17 of its peak here
        hi = 4.0 * N + 90.0 + 8.0 * math.sqrt(N)
    if lo == 0.0:
        edges = np.concatenate(([0.0], np.geomspace(1e-12, 1.0, 25), np.arange(2.0, math.ceil(hi) + 1.0)))
        edges = edges[edges <= hi]
    elif isinstance(h, Table):
        edges = h.t if h.t.size <= 400 else np.unique(np.concatenate((h.t[::max(1, h.t.size // 400)], [hi])))
    else:
        edges = np.linspace(lo, hi, 17)

    def integrand(u):
        k = cross_correlation(N - 1, u)
        return np.asarray(h(np.maximum(u, 1e-300)))[:, None, None] * k

    g = quad.adaptive_panels(integrand, edges, rtol=rtol, order=16, floor=1e-15,
                             where="rotated Laguerre assembly")
    return HankelSection(g, "laguerre", getattr(h, "label", "kernel"))


def tensor_entry(h, m, n, t_max=None, order=16):
    """``int int h(t+s) phi_m(t) phi_n(s) dt ds`` on a tensor Gauss-Legendre grid.

    Independent of both assembly routes; used as an oracle for a few entries.
    The panels are graded geometrically toward the origin, where ``h`` may
    be singular.
    """
    t_max = t_max or 4.0 * max(m, n) + 120.0
    edges = np.concatenate(([0.0], np.geomspace(1e-12, 1.0, 41), np.arange(1.5, t_max + 0.25, 0.5)))
    x, w = quad.panel_rule(edges, order)
    pm = laguerre_eval(m, x) * w
    pn = laguerre_eval(n, x) * w
    out = 0.0
    for start in range(0, x.size, 2048):   # row blocks bound peak memory
        sl = slice(start, start + 2048)
        out += pm[sl] @ h(x[sl, None] + x[None, :]) @ pn
    return float(out)


# ---------------------------------------------------------------------------
# moment sections and the dictionary


def moment_section(moments_seq, N, source="moments"):
    """``G_jk = h_{j+k}``; needs at least ``2N - 1`` moments."""
    if int(N) != N or N < 1:
        raise SpecError("section order must be a positive integer")
    N = int(N)
    h = np.asarray(moments_seq)
    if h.ndim != 1 or h.size < 2 * N - 1:
        raise LengthError(f"order {N} needs {2 * N - 1} moments, got {h.size}")
    idx = np.add.outer(np.arange(N), np.arange(N))
    return HankelSection(h[idx], "moment", source)


def _jacobi_piece(p, n):
    """``int y^k (x+1/2)^{-2} c x^(alpha-1) dx`` over the whole half line, ``k < n``.

    In ``y`` the weight is ``c 2^(1-alpha) (1-y)^(1-alpha) (1+y)^(alpha-1)``,
    so Gauss-Jacobi with ``n`` nodes is exact for every ``y^k``.
    """
    y, w = roots_jacobi(max(n, 2), 1.0 - p.alpha, p.alpha - 1.0)
    scale = p.c * 2.0 ** (1.0 - p.alpha)
    return scale * (np.power(y[None, :], np.arange(n)[:, None]) @ w)


def pushforward_moments(mu, n, rtol=1e-13):
    """Moments ``rho_k``, ``k < n``, of ``drho = (x+1/2)^{-2} dmu`` pushed to ``y``."""
    _reject_singular(mu)
    k = np.arange(n)
    out = np.zeros(n)
    for a, m in mu.atoms:
        inv = 1.0 / (a + 0.5)
        out += m * inv * inv * np.power((a - 0.5) * inv, k)

    def estimate(x, w):
        a = laplace_basis(x, n)
        return (w * (1.0 / (x + 0.5))) @ a

    for p in mu.power:
        if p.lower == 0.0 and math.isinf(p.cutoff) and 0.0 < p.alpha < 2.0:
            out += _jacobi_piece(p, n)
        else:
            rule, lv0 = _piece_rules(p, None)
            out += quad.de_refine(estimate, rule, rtol=rtol, min_level=lv0, max_level=lv0 + 9)
    for p in mu.table:
        rule, lv0 = _piece_rules(p, None)
        out += quad.de_refine(estimate, rule, rtol=rtol, min_level=lv0, max_level=lv0 + 9)
    return out


def dictionary_residual(mu, N):
    """``max |laguerre_section(mu) - moment_section(pushforward moments)|``."""
    from .kernelfn import FromMeasure
    lag = laguerre_section(FromMeasure(mu), N)
    mom = moment_section(pushforward_moments(mu, 2 * N - 1), N)
    return float(np.max(np.abs(lag.matrix - mom.matrix)))


def backward_shift_identity(mu, N):
    """``max_{k,n<N} |(g_mu)_{k,n} - (g_mu)_{k,n+2} - (g_nu)_{k,n}|``, ``dnu = (1-t^2) dmu``."""
    if not mu.discrete_side:
        raise SpecError("backward-shift identity needs a measure on [-1, 1]")
    big = moment_section(moments(mu, 2 * N + 3), N + 2).matrix
    small = moment_section(bergszwarc_moments(mu, 2 * N - 1), N).matrix
    return float(np.max(np.abs(big[:N, :N] - big[:N, 2:N + 2] - small)))


def apply_section(G, coeffs):
    v = np.asarray(coeffs)
    if v.ndim != 1 or v.size != G.N:
        raise DimensionError(f"vector length {v.size} does not match section order {G.N}")
    return G.matrix @ v


def section_to_json(G):
    return json.dumps(G.sidecar(), indent=2, sort_keys=True)
