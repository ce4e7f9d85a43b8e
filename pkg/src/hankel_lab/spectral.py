"""Eigenvalue and singular-value analysis of finite sections."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .errors import ConvergenceFailure, DegenerateFit, DomainError, SpecError
from .galerkin import laguerre_section, moment_section
from .kernelfn import FromMeasure, Kernel
from .measure import mass_below
from .transform import ExpPoly, qform_laplace

RANK_TOL = 1e-8
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class SpectralReport:
    N: int
    eigenvalues: tuple          # descending; singular values for general sections
    norm: float
    rank: int
    tol: float
    min_eigenvalue: float
    source: str
    kind: str = "eigen"

    @property
    def lambda_max(self):
        return self.eigenvalues[0] if self.eigenvalues else 0.0

    def to_json(self):
        return {"schema": "hankel-lab-spectral/1", "N": self.N, "eigenvalues": list(self.eigenvalues),
                "norm": self.norm, "rank": self.rank, "tol": self.tol,
                "min_eigenvalue": self.min_eigenvalue, "source": self.source, "kind": self.kind}


def _rank(values, tol):
    top = max((abs(v) for v in values), default=0.0)
    return int(sum(abs(v) > tol * top for v in values)) if top > 0 else 0


def eig(G, tol=RANK_TOL):
    """Full spectrum of a section; non-symmetric or complex sections get singular values."""
    a = G.matrix
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    symmetric = not np.iscomplexobj(a) and G.symmetry_defect <= 1e-8 * scale
    if symmetric:
        sym = 0.5 * (a + a.T)
        try:
            lam, vec = np.linalg.eigh(sym)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
        gnorm = float(np.linalg.norm(sym, 2)) if scale else 0.0
        resid = np.linalg.norm(sym @ vec - vec * lam, axis=0)
        if np.any(resid > RESIDUAL_TOL * max(gnorm, 1e-300)) and gnorm > 0:
            raise ConvergenceFailure(f"eigenpair residual {float(np.max(resid)):.3g} exceeds tolerance")
        lam = lam[::-1]
        values = tuple(float(v) for v in lam)
        return SpectralReport(G.N, values, float(np.max(np.abs(lam))), _rank(values, tol), tol,
                              float(lam[-1]), G.source, "eigen")
    try:
        sv = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    values = tuple(float(v) for v in sv)
    return SpectralReport(G.N, values, values[0], _rank(values, tol), tol, values[-1], G.source, "singular")


def section_for(source, N):
    """Kernel -> Laguerre section; moment sequence -> moment section."""
    if isinstance(source, Kernel):
        return laguerre_section(source, N)
    return moment_section(source, N)


def norm_convergence(source, orders):
    """Rows ``(N, lambda_max(N))`` for increasing ``orders``."""
    orders = [int(n) for n in orders]
    if any(b <= a for a, b in zip(orders, orders[1:])):
        raise SpecError("orders must be strictly increasing")
    return [(n, eig(section_for(source, n)).lambda_max) for n in orders]


def rank_probe(mu, N, tol=RANK_TOL):
    """Numerical rank of the order-``N`` Laguerre section of ``Gamma_mu``."""
    return eig(laguerre_section(FromMeasure(mu), N), tol).rank


def tail_fit(F, decades_required=3.0):
    """Fit ``|F| = c t^-alpha`` on the top decade of ``F.t``.

    Returns ``(c_hat, alpha_hat, stderr)``; ``stderr`` is the slope's.
    """
    t = np.asarray(F.t)
    if math.log10(t[-1] / t[0]) < decades_required - 1e-9:
        raise DomainError(f"tail fit needs a grid spanning {decades_required:g} decades")
    window = t >= t[-1] / 10.0
    vals = np.abs(np.asarray(F.values)[window])
    if window.sum() < 3 or np.any(vals == 0.0) or not np.all(np.isfinite(vals)):
        raise DegenerateFit("F vanishes or is undefined on the fit window")
    fit = linregress(np.log(t[window]), np.log(vals))
    return float(math.exp(fit.intercept)), float(-fit.slope), float(fit.stderr)


def appendix_witness(mu, a):
    """Rayleigh quotient of ``f = e^{-a t}`` and its Carleson lower bound.

    ``||f||^2 = 1/(2a)``, so the quotient is ``2a * Q[f]``; since
    ``|Lf(x)|^2 = (x+a)^-2 >= (2a)^-2`` on ``(0, a)`` it is at least
    ``mu((0,a)) / (2a)``. Returns ``(quotient, lower_bound)``.
    """
    if not a > 0:
        raise DomainError("witness rate must be positive")
    f = ExpPoly((((1.0,), a),))
    quotient = 2.0 * a * float(np.real(qform_laplace(mu, f)))
    return quotient, mass_below(mu, a) / (2.0 * a)


def growth_ratios(table):
    """``lambda(N_{i+1}) / lambda(N_i)`` for a norm-convergence table."""
    return [b[1] / a[1] if a[1] > 0 else math.inf for a, b in zip(table, table[1:])]


def tail_limit(F, alpha):
    """Least-squares fit ``t^alpha F(t) = L + c/t`` over the whole grid; returns ``(L, c)``."""
    t = np.asarray(F.t, dtype=float)
    y = t ** alpha * np.real(np.asarray(F.values))
    design = np.column_stack((np.ones_like(t), 1.0 / t))
    (lim, corr), *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(lim), float(corr)
