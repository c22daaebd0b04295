import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nearcrit.degree_model import OffspringDistribution, e3_offspring, poisson_law, truncated_family
from nearcrit.errors import DegenerateOffspringError, InsufficientDataError
from nearcrit.gw_survival import (
    balance_ratio,
    classify_regime,
    fixed_point_gap,
    lower_bound,
    mc_extinction,
    phi,
    power_law_exponent_check,
    solve_rho,
)

REMARK_LAW = {0: 0.05, 1: 0.85, 2: 0.1}
BINARY = {0: 0.25, 2: 0.75}
BINARY_2_9 = {0: 0.4375, 2: 0.5625}


def law(pmf):
    return OffspringDistribution.from_pmf(pmf)


@pytest.mark.parametrize("pmf, rho", [(REMARK_LAW, 0.5), (BINARY, 2 / 3), (BINARY_2_9, 2 / 9)])
def test_solve_rho_closed_forms(pmf, rho):
    sol = solve_rho(law(pmf))
    assert sol.rho == pytest.approx(rho, abs=1e-12)
    assert abs(sol.residual) < 1e-10
    assert sol.alpha == pytest.approx(-math.log1p(-rho), rel=1e-12)


def test_solve_rho_subcritical_and_degenerate():
    assert solve_rho(law({0: 0.2, 1: 0.7, 2: 0.1})).rho == 0.0
    assert solve_rho(law({0: 0.5, 2: 0.5})).rho == 0.0
    with pytest.raises(DegenerateOffspringError):
        solve_rho(law({1: 1.0}))


def test_phi_values():
    assert phi(0.0) == 0.0
    assert phi(1.0) == pytest.approx(math.exp(-1), rel=1e-12)
    assert 0.9999 <= phi(1e-4) / (1e-8 / 2) <= 1.0


def test_lower_bound_examples():
    assert lower_bound(law(REMARK_LAW)) == pytest.approx(0.5)
    assert lower_bound(law(BINARY_2_9)) == pytest.approx(2 / 9)
    po = truncated_family(poisson_law(1.0), 0.01, 60)
    assert lower_bound(po) <= solve_rho(po).rho


def test_balance_ratio_examples():
    assert balance_ratio(law(BINARY_2_9), 2 / 9) == pytest.approx(0.25)
    for n in (10**3, 10**4, 10**5, 10**6):
        d = e3_offspring(n, 1 / n, 1 / n**2)
        assert 0.1 <= balance_ratio(d, solve_rho(d).rho) <= 10


def random_law(seed, support=8):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(support))
    return OffspringDistribution(np.arange(support), p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solver_invariants_random_laws(seed):
    d = random_law(seed)
    sol = solve_rho(d)
    if d.eps <= 0:
        assert sol.rho == 0.0
        return
    assert abs(sol.residual) < 1e-10
    assert lower_bound(d) <= sol.rho + 1e-12
    assert sol.alpha >= sol.rho
    if sol.rho <= 0.5:
        assert 0 <= sol.alpha - sol.rho <= sol.rho**2
    # exactly one sign change of E q^X - q on (0, 1)
    qs = np.linspace(1e-6, 1 - 1e-6, 2001)
    gaps = np.array([fixed_point_gap(d, q) for q in qs])
    signs = np.sign(gaps[np.abs(gaps) > 1e-13])
    assert np.count_nonzero(np.diff(signs)) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 0.2))
def test_moving_mass_from_zero_to_two_raises_rho(seed, shift):
    d = random_law(seed)
    pmf = d.pmf
    move = min(shift, pmf.get(0, 0.0))
    pmf[0] -= move
    pmf[2] = pmf.get(2, 0.0) + move
    assert solve_rho(law(pmf)).rho >= solve_rho(d).rho - 1e-14


def test_lower_bound_equality_only_on_binary_support():
    d = law({0: 0.3, 1: 0.2, 2: 0.5})
    assert lower_bound(d) == pytest.approx(solve_rho(d).rho, abs=1e-12)
    d = law({0: 0.3, 1: 0.3, 3: 0.4})
    assert lower_bound(d) < solve_rho(d).rho - 1e-6


def test_mc_extinction_binary():
    est = mc_extinction(law(BINARY), 20_000, rng=np.random.default_rng(3))
    assert abs(est.estimate - 2 / 3) < 3 * est.stderr
    assert est.trials == 20_000


def test_mc_extinction_subcritical():
    est = mc_extinction(law({0: 0.2, 1: 0.7, 2: 0.1}), 5_000, rng=np.random.default_rng(4))
    assert abs(est.estimate) <= 3 * est.stderr
    assert est.estimate == 0.0


def test_mc_extinction_is_seeded():
    a = mc_extinction(law(REMARK_LAW), 2_000, rng=np.random.default_rng(9))
    b = mc_extinction(law(REMARK_LAW), 2_000, rng=np.random.default_rng(9))
    assert a == b


def test_e3_families_classified():
    ns = (10**3, 10**4, 10**5, 10**6)
    e3c = {n: e3_offspring(n, 1 / n, 1 / n**2) for n in ns}
    rho = [solve_rho(d).rho * n for n, d in e3c.items()]
    assert all(a > b for a, b in zip(rho, rho[1:]))
    e3b = {n: e3_offspring(n, 1 / n, n**-1.5) for n in ns}
    ratios = [solve_rho(d).rho * n for n, d in e3b.items()]
    assert ratios[0] / ratios[-1] > 3
    pred = classify_regime(e3b)
    assert pred.regime == "bounded-max"
    lo, hi = pred.predicted_rho
    assert lo <= solve_rho(e3b[10**6]).rho <= hi


def test_classify_envelopes_contain_solution():
    ns = (10**3, 10**4, 10**5, 10**6)
    families = {
        "e3a": {n: e3_offspring(n, n**-0.25, n**-1.5) for n in ns},
        "e3c": {n: e3_offspring(n, 1 / n, 1 / n**2) for n in ns},
    }
    for fam in families.values():
        pred = classify_regime(fam)
        rho = solve_rho(fam[10**6]).rho
        assert pred.lower_bound <= rho <= pred.upper
    assert "conflict" in classify_regime(families["e3a"]).flags


def test_classify_subcritical():
    fam = {n: law({0: 0.3, 1: 0.5, 2: 0.2}) for n in (10, 100, 1000)}
    assert classify_regime(fam).regime == "subcritical"


def test_classify_convergent_family():
    fam = {n: truncated_family({0: 0.5, 2: 0.5}, n**-0.5, 2) for n in (10**2, 10**4, 10**6)}
    pred = classify_regime(fam)
    assert pred.regime == "convergent-second-moment"
    rho = solve_rho(fam[10**6]).rho
    assert pred.predicted_rho == pytest.approx(rho, rel=0.05)
    assert pred.lower_bound <= rho + 1e-15


def test_power_law_exponent_check():
    fit = power_law_exponent_check(2.5, [1e-2, 1e-3, 1e-4, 1e-5])
    assert fit.slope == pytest.approx(2.0, rel=0.1)
    fit = power_law_exponent_check(3.5, [1e-2, 1e-3, 1e-4, 1e-5])
    assert fit.slope == pytest.approx(1.0, rel=0.1)
    with pytest.raises(InsufficientDataError):
        power_law_exponent_check(2.5, [1e-2])
