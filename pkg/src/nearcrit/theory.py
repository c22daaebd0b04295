"""Closed-form predictions for component sizes and complexity.

Functions here take a degree sequence (or a degree law) together with the
survival probability ``rho`` of its forward-degree branching process, and
return the predicted size of the largest component, its degree profile, the
critical-window scales and the predicted complexity ``k(C_1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .degree_model import DegreeStats, as_distribution, stats
from .errors import DegenerateSequenceError, NumericalInstabilityError

DEFAULT_REGIME_CUT = 10.0


def _law_and_stats(seq):
    if isinstance(seq, DegreeStats):
        raise TypeError("pass the degree sequence or degree law, not its stats")
    law = as_distribution(seq)
    st = stats(seq)
    return law, st


def _alpha(rho):
    return -math.log1p(-rho)


# growth functions of the exploration at time scale alpha*t
def g_hat(t, mu):
    """Predicted vertex count of the giant per ``n alpha`` at rescaled time ``t``."""
    return mu * t


def h_hat(t, mu):
    """Predicted half-edge count of the giant per ``n alpha``; always ``2 g_hat``."""
    return 2 * mu * t


@dataclass(frozen=True)
class GiantPrediction:
    v1: float
    e1: float
    v2_order: float
    degree_profile: dict
    giant_fraction_exact: float
    no_giant: bool = False


def predict_giant(seq, rho: float, n: int | None = None) -> GiantPrediction:
    """Largest-component predictions ``v1 = e1 = mu rho n``.

    ``giant_fraction_exact`` is ``E(1 - (1-rho)^D) n``, the survival
    probability of the branching process whose root has the degree law and
    later generations the forward-degree law.  It is the sharper finite-n
    proxy; the two agree to first order as ``rho -> 0``.
    """
    law, st = _law_and_stats(seq)
    n = st.n if n is None else n
    if n is None:
        raise ValueError("n is required for a degree law")
    if rho <= 0:
        return GiantPrediction(0.0, 0.0, 0.0, {}, 0.0, no_giant=True)
    v1 = st.mu * rho * n
    k = law.support.astype(float)
    prof = k * law.probs / st.mu * v1  # mu rho P(D*=k) n
    profile = {int(kk): float(v) for kk, v in zip(law.support, prof) if kk > 0}
    if rho >= 1:
        exact = law.expect(lambda x: (x > 0).astype(float)) * n
    else:
        exact = -law.expect(lambda x: np.expm1(x * math.log1p(-rho))) * n
    return GiantPrediction(v1, v1, rho * n, profile, exact)


@dataclass(frozen=True)
class ThirdMomentForms:
    td3_value: float
    tdx_lower: float
    win_scale: float
    reda_rho_scale: float
    reda_valid: bool | None
    flags: tuple = ()


def predict_third_moment_forms(st: DegreeStats, n: int | None = None, alpha: float | None = None) -> ThirdMomentForms:
    """Giant-size forms written through ``eps``, ``kappa_n`` and ``R = E D^3``.

    ``reda_valid`` reports whether ``alpha * Delta <= 1``; it is ``None`` when
    no ``alpha`` is given.
    """
    n = st.n if n is None else n
    if st.eps <= 0:
        return ThirdMomentForms(0.0, 0.0, 0.0, 0.0, None, ("no-giant",))
    if st.kappa_n <= 0:
        raise DegenerateSequenceError("kappa_n = 0")
    td3 = 2 * st.mu * st.eps * n / st.kappa_n
    valid = None if alpha is None else bool(alpha * st.delta <= 1)
    return ThirdMomentForms(td3, td3, st.eps * n / st.R, st.eps / st.R, valid)


@dataclass(frozen=True)
class RegimeReport:
    threshold: float
    margin: float
    critical_scale: float
    t1: float
    regime: str
    delta_condition: float
    cut: float = DEFAULT_REGIME_CUT


def regime_report(st: DegreeStats, cut: float = DEFAULT_REGIME_CUT) -> RegimeReport:
    """Place a sequence relative to the critical window ``eps ~ n^{-1/3} R^{2/3}``.

    The ``cut`` on the margin is a convention: above it the sequence is
    reported as barely supercritical.
    """
    n, R = st.n, st.R
    threshold = n ** (-1 / 3) * R ** (2 / 3)
    margin = st.eps / threshold
    t1 = (n * R) ** (-1 / 3)
    if margin > cut:
        regime = "barely-supercritical"
    elif st.eps >= -cut * threshold:
        regime = "critical-window"
    else:
        regime = "subcritical"
    return RegimeReport(threshold, margin, n * t1, t1, regime, st.delta / (n * R) ** (1 / 3), cut)


def h(x):
    """``(1 + x/2) e^{-x} - 1 + x/2``, by its power series below 1e-3."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    xs = np.where(small, x, 0.0)
    series = xs**3 * (1 / 12 - xs * (1 / 24 - xs * (1 / 80 - xs / 360)))
    with np.errstate(over="ignore"):
        direct = (1 + x / 2) * np.exp(-x) - 1 + x / 2
    out = np.where(small, series, direct)
    return out.item() if out.ndim == 0 else out


@dataclass(frozen=True)
class ChiValue:
    value: float
    naive: float


def chi_forms(seq, rho: float) -> ChiValue:
    """Both forms of ``chi``: the stable ``h`` form and the direct difference."""
    if rho <= 0:
        return ChiValue(0.0, 0.0)
    law, st = _law_and_stats(seq)
    if rho >= 1:
        # alpha = infinity: every half-edge is in the giant, chi = E[D]/2 - P(D > 0)
        v = 0.5 * st.mu - law.expect(lambda k: (k > 0).astype(float))
        return ChiValue(v, v)
    a = _alpha(rho)
    naive = 0.5 * st.mu * -math.expm1(-2 * a) + law.expect(lambda k: np.expm1(-a * k))
    stable = law.expect(lambda k: h(a * k)) - 0.5 * st.mu * h(2 * a)
    return ChiValue(stable, naive)


def chi(seq, rho: float) -> float:
    """Predicted complexity density: ``k(C_1) ≈ n chi``.

    Computed as ``E h(alpha D) - E[D] h(2 alpha) / 2``.  The direct
    difference of the edge and vertex terms is evaluated as a check and must
    agree within ``max(1e-12, 1e-6 |chi|)``.
    """
    c = chi_forms(seq, rho)
    if abs(c.value - c.naive) > max(1e-12, 1e-6 * abs(c.value)):
        raise NumericalInstabilityError(f"chi forms disagree: {c.value!r} vs {c.naive!r}")
    return c.value


@dataclass(frozen=True)
class ChiClosedForm:
    from_rho: float
    from_eps: float


def chi_td3_closed_form(st: DegreeStats, rho: float) -> ChiClosedForm:
    """Finite-third-moment forms ``(kappa mu / 12) rho^3`` and ``(2 mu / 3 kappa^2) eps^3``."""
    if st.eps <= 0 or rho <= 0:
        return ChiClosedForm(0.0, 0.0)
    kappa = st.kappa_n
    return ChiClosedForm(kappa * st.mu / 12 * rho**3, 2 * st.mu / (3 * kappa**2) * st.eps**3)
