import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nearcrit.degree_model import DegreeSequence, OffspringDistribution, poisson_law, power_law_sequence, size_biased, stats
from nearcrit.errors import NumericalInstabilityError
from nearcrit.gw_survival import solve_rho
from nearcrit.theory import (
    chi,
    chi_forms,
    chi_td3_closed_form,
    g_hat,
    h,
    h_hat,
    predict_giant,
    predict_third_moment_forms,
    regime_report,
)

LAW = OffspringDistribution.from_pmf({1: 0.7, 3: 0.3})


def test_predict_giant_two_atom():
    g = predict_giant(LAW, 2 / 9, n=10**6)
    assert g.v1 == pytest.approx(1.6 * (2 / 9) * 1e6)
    assert g.e1 == g.v1
    exact = (1 - 0.7 * (7 / 9) - 0.3 * (7 / 9) ** 3) * 1e6
    assert g.giant_fraction_exact == pytest.approx(exact, rel=1e-12)
    assert g.giant_fraction_exact == pytest.approx(314_400, rel=1e-4)
    assert g.degree_profile[3] == pytest.approx(200_000)
    assert sum(g.degree_profile.values()) == pytest.approx(g.v1)


def test_predict_giant_no_giant():
    g = predict_giant(LAW, 0.0, n=100)
    assert g.no_giant and g.v1 == 0.0


def test_predict_giant_requires_law():
    with pytest.raises(TypeError):
        predict_giant(stats(LAW), 0.1, n=10)


def test_third_moment_forms():
    f = predict_third_moment_forms(stats(LAW), n=10**6)
    assert f.td3_value == pytest.approx(2 * 1.6 * 0.125 * 1e6 / 1.125)
    assert f.td3_value == pytest.approx(predict_giant(LAW, 2 / 9, n=10**6).v1)
    flat = predict_third_moment_forms(stats({1: 0.75, 3: 0.25}), n=100)
    assert flat.td3_value == 0 and "no-giant" in flat.flags


def test_third_moment_forms_power_law_validity_flag():
    seq = power_law_sequence(2.5, 10**6)
    s = stats(seq)
    sol = solve_rho(size_biased(seq))
    f = predict_third_moment_forms(s, alpha=sol.alpha)
    assert f.reda_rho_scale == pytest.approx(s.eps / s.R)
    assert f.reda_valid == (sol.alpha * s.delta <= 1)


def test_regime_report_examples():
    crit = DegreeSequence.from_counts({1: 750_000, 3: 250_000})
    r = regime_report(stats(crit))
    assert r.margin == 0 and r.regime == "critical-window"
    assert r.critical_scale == pytest.approx(1e4 / 7.5 ** (1 / 3), rel=1e-12)
    assert r.critical_scale == pytest.approx(5109, abs=1)
    p3 = 1.05 / 3.9
    law = OffspringDistribution.from_pmf({1: 1 - p3, 3: p3})
    s = stats(law)
    at_million = regime_report(s.__class__(**{**s.__dict__, "n": 10**6}))
    assert 1.2 < at_million.margin < 1.3
    assert at_million.regime == "critical-window"
    at_billion = regime_report(s.__class__(**{**s.__dict__, "n": 10**9}))
    assert at_billion.margin == pytest.approx(10 * at_million.margin)
    assert at_billion.regime == "barely-supercritical"


def test_growth_functions():
    t = np.linspace(0, 3, 7)
    assert np.allclose(h_hat(t, 1.6), 2 * g_hat(t, 1.6))


def test_h_values():
    assert h(0.0) == 0.0
    assert 0.99 <= h(0.01) / (0.01**3 / 12) <= 1.0
    assert h(0.502629) == pytest.approx(8.28e-3, rel=1e-3)
    x = np.array([5e-4, 9.99e-4, 1.001e-3])
    direct = (1 + x / 2) * np.exp(-x) - 1 + x / 2
    assert np.allclose(h(x), direct, rtol=1e-6)


def test_chi_two_atom():
    c = chi_forms(LAW, 2 / 9)
    assert c.value == pytest.approx(1.65e-3, rel=0.01)
    assert c.value == pytest.approx(c.naive, rel=1e-4)
    closed = chi_td3_closed_form(stats(LAW), 2 / 9)
    assert closed.from_rho == pytest.approx(0.15 * (2 / 9) ** 3)
    assert closed.from_rho == pytest.approx(chi(LAW, 2 / 9), rel=1e-4)
    assert chi(LAW, 0.0) == 0.0
    assert chi_td3_closed_form(stats({1: 0.75, 3: 0.25}), 0.1).from_rho == 0.0


def test_chi_small_rho_order():
    ratios = []
    for eps in (0.1, 0.03, 0.01, 0.003):
        p3 = (1 + eps) / (4 - 2 * eps)
        law = OffspringDistribution.from_pmf({1: 1 - p3, 3: p3})
        rho = solve_rho(size_biased(law)).rho
        alpha = -math.log1p(-rho)
        ratios.append(chi(law, rho) / (alpha**2 * eps))
    assert max(ratios) < 1 and min(ratios) > 0.1


def test_poisson_closed_forms_approach_each_other():
    ratios = []
    for eps in (0.1, 0.05, 0.02):
        law = poisson_law(1 + eps)
        cf = chi_td3_closed_form(stats(law), solve_rho(size_biased(law)).rho)
        ratios.append(cf.from_rho / cf.from_eps)
    assert all(abs(b - 1) < abs(a - 1) for a, b in zip(ratios, ratios[1:]))


def test_poisson_complexity_limit():
    # (2 mu / 3 kappa^2) eps^3 / ((2/3) eps^3) -> 1 as eps -> 0
    vals = []
    for eps in (0.1, 0.01, 0.001):
        law = poisson_law(1 + eps)
        cf = chi_td3_closed_form(stats(law), solve_rho(size_biased(law)).rho)
        vals.append(cf.from_eps / (2 / 3 * eps**3))
    assert vals == sorted(vals)
    assert vals[-1] == pytest.approx(1, abs=5e-3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chi_forms_agree_on_random_laws(seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(6))
    law = OffspringDistribution(np.arange(1, 7), p)
    sol = solve_rho(size_biased(law))
    if sol.rho <= 0:
        return
    try:
        c = chi(law, sol.rho)
    except NumericalInstabilityError:
        pytest.fail("chi forms disagree")
    assert c >= 0


def test_full_survival_boundary():
    law = OffspringDistribution.from_pmf({2: 0.5, 3: 0.5})
    assert solve_rho(size_biased(law)).rho == 1.0
    assert chi(law, 1.0) == pytest.approx(2.5 / 2 - 1)
    assert predict_giant(law, 1.0, n=10).giant_fraction_exact == pytest.approx(10)
