"""Integral Hankel operators built from positive measures on the half line."""

from .errors import *  # noqa: F401,F403
from .galerkin import (HankelSection, apply_section, backward_shift_identity, dictionary_residual,
                       laguerre_eval, laguerre_section, moment_section, pushforward_moments)
from .kernelfn import (Carleman, ComplexTable, FromMeasure, PointMass, PowerLaw, Table,
                       c_over_t_bound, nu_decay_certificate, sq_integrable_at_infinity)
from .measure import (BlaschkeRule, Measure, PowerDensity, TableDensity, bergszwarc_moments,
                      blaschke_check, carleson_check, integrate, laplace, lebesgue, mass_below,
                      moments, multiply_by_x, point_mass, quasi_carleman, split_at_one)
from .spectral import SpectralReport, eig, norm_convergence, rank_probe, tail_fit
from .transform import (Bump, ExpPoly, GridFunction, PiecewiseConst, ZeroAvgBump, adjoint_residual,
                        apply_hankel, commutation_residual, ibp_residual, laplace_fn, qform_double,
                        qform_laplace, shift)

__version__ = "0.1.0"
