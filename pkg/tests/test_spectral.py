import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hankel_lab.errors import DegenerateFit, DomainError, SpecError
from hankel_lab.galerkin import HankelSection, laguerre_section, moment_section
from hankel_lab.kernelfn import ZERO, Carleman, FromMeasure, PointMass
from hankel_lab.measure import Measure, TableDensity, carleson_check, lebesgue, point_mass, quasi_carleman
from hankel_lab.spectral import (appendix_witness, eig, growth_ratios, norm_convergence, rank_probe,
                                 tail_fit, tail_limit)
from hankel_lab.transform import GridFunction

HILBERT = 1.0 / (1.0 + np.arange(600))


def test_eig_hilbert_examples():
    assert eig(moment_section(HILBERT, 1)).eigenvalues == (1.0,)
    lam = eig(moment_section(HILBERT, 2)).lambda_max
    assert lam == pytest.approx(2 / 3 + math.sqrt(13) / 6, rel=1e-14)


def test_eig_pointmass_rank_one():
    rep = eig(laguerre_section(PointMass(1.0, 1.0), 8))
    assert rep.eigenvalues[1] / rep.eigenvalues[0] <= 1e-10
    assert rep.rank == 1


def test_eig_complex_section_uses_singular_values():
    G = HankelSection(np.array([[1.0, 1j], [1j, -1.0]]), "laguerre")
    rep = eig(G)
    assert rep.kind == "singular" and all(v >= 0 for v in rep.eigenvalues)


def test_report_json():
    rep = eig(moment_section(HILBERT, 4))
    data = json.loads(json.dumps(rep.to_json()))
    assert {"N", "eigenvalues", "norm", "rank", "tol", "source"} <= set(data)
    assert data["eigenvalues"] == sorted(data["eigenvalues"], reverse=True)
    assert rep.rank <= rep.N


def test_norm_convergence_hilbert():
    table = norm_convergence(HILBERT, [1, 2])
    assert table[0] == (1, 1.0)
    assert table[1][1] == pytest.approx(2 / 3 + math.sqrt(13) / 6, rel=1e-14)


def test_norm_convergence_carleman_below_pi():
    lams = [lam for _, lam in norm_convergence(Carleman(), [8, 16, 32, 64])]
    assert all(b > a for a, b in zip(lams, lams[1:]))
    assert all(lam < math.pi for lam in lams)


def test_norm_convergence_zero():
    assert [lam for _, lam in norm_convergence(ZERO, [1, 4])] == [0.0, 0.0]


def test_norm_convergence_orders_increasing():
    with pytest.raises(SpecError):
        norm_convergence(HILBERT, [4, 2])


SOURCES = [Carleman(), PointMass(1.0, 1.0), FromMeasure(quasi_carleman(0.5)), HILBERT,
           FromMeasure(Measure(table=(TableDensity(0.5, 3.0, (0, 1, 2, 1.5, 0.5, 0), 3),)))]


@pytest.mark.parametrize("src", SOURCES, ids=["carleman", "pointmass", "qc", "hilbert", "table"])
def test_monotone_sections(src):
    lams = [lam for _, lam in norm_convergence(src, [2, 5, 9, 17, 33])]
    assert all(b >= a - 1e-9 for a, b in zip(lams, lams[1:]))


CARLESON = [lebesgue(), point_mass(1.0, 1.0), Measure(table=(TableDensity(0.5, 3.0, (0, 1, 2, 1.5, 0.5, 0), 3),))]


@pytest.mark.parametrize("mu", CARLESON, ids=["lebesgue", "atom", "table"])
def test_dichotomy_bounded_side(mu):
    rep = carleson_check(mu)
    assert rep.is_carleson
    assert all(lam <= math.pi * rep.constant for _, lam in norm_convergence(FromMeasure(mu), [8, 16, 32, 64]))


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_dichotomy_unbounded_side(alpha):
    mu = quasi_carleman(alpha)
    assert not carleson_check(mu).is_carleson
    ratios = growth_ratios(norm_convergence(FromMeasure(mu), [8, 16, 32, 64]))
    assert min(ratios) >= 1.05


def test_rank_examples():
    assert rank_probe(point_mass(1.0, 1.0), 16) == 1
    atoms = (0.5, 1.0, 2.0)
    gram = 1.0 / np.add.outer(atoms, atoms)        # Gram matrix of e^{-a t} in L^2
    assert np.linalg.det(gram) > 0
    assert rank_probe(Measure(atoms=tuple((a, 1.0) for a in atoms)), 16) == 3


def test_rank_carleman_full_at_16():
    # stated as an example; the order-16 section's eigenvalues fall below 1e-8 * lambda_max from the 14th on
    assert rank_probe(lebesgue(), 16) == 16


def random_atoms(rng, k, lo=0.1, hi=10.0, sep=0.05):
    while True:
        a = np.sort(rng.uniform(lo, hi, k))
        if k == 1 or np.min(np.diff(a)) >= sep:
            return a


@pytest.mark.parametrize("k", range(1, 9))
def test_rank_random_placements(k):
    rng = np.random.default_rng(20261016 + k)
    ranks = []
    for _ in range(10):
        mu = Measure(atoms=tuple((float(a), 1.0) for a in random_atoms(rng, k)))
        ranks.append(rank_probe(mu, 2 * k + 4))
    assert ranks == [k] * 10


def test_tail_fit_exact_power():
    t = np.geomspace(1.0, 1e4, 41)
    c, a, err = tail_fit(GridFunction(t, t ** -0.25))
    assert abs(c - 1) <= 1e-10 and abs(a - 0.25) <= 1e-10 and err <= 1e-10


def test_tail_fit_errors():
    t = np.geomspace(1.0, 1e4, 41)
    with pytest.raises(DegenerateFit):
        tail_fit(GridFunction(t, np.zeros_like(t)))
    with pytest.raises(DomainError):
        tail_fit(GridFunction(np.geomspace(1.0, 100.0, 20), np.ones(20)))


@given(c=st.floats(0.1, 10.0), alpha=st.floats(0.1, 3.0), corr=st.floats(-1.0, 1.0))
def test_tail_limit_recovers_model(c, alpha, corr):
    t = np.geomspace(1e3, 1e6, 31)
    L, k = tail_limit(GridFunction(t, t ** -alpha * (c + corr / t)), alpha)
    assert L == pytest.approx(c, rel=1e-9) and k == pytest.approx(corr, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("a", [0.1, 1.0, 10.0])
def test_appendix_witness(a):
    q, lower = appendix_witness(lebesgue(), a)
    assert q >= 2 * a * (2 * a) ** -2 * a * (1 - 1e-6)
    assert lower == pytest.approx(0.5)
    assert lower <= q <= math.pi
    assert q == pytest.approx(2.0, rel=1e-12)      # 2a * int (x+a)^-2 dx = 2


def test_appendix_witness_rejects_nonpositive():
    with pytest.raises(DomainError):
        appendix_witness(lebesgue(), 0.0)
