import json
from math import pi, sqrt

import numpy as np
import pytest

from sloc.bodies import BodySpec
from sloc.constants import (
    AnisotropicInput,
    SampleBudgetTooSmall,
    constants_report,
    fact61_check,
    k_stat,
    k_stat_grid,
    lemma16_diagnostic,
    q_stat,
    thin_shell_stat,
    third_moment_tensor,
)
from sloc.measures import (
    isotropic_battery,
    product_exponential,
    standard_gaussian,
    uniform_body,
)


def test_thin_shell_gaussian_1d():
    # E(|X| - 1)^2 = 2 - 2 sqrt(2/pi) for a standard normal
    s, _ = thin_shell_stat(standard_gaussian(1))
    assert s == pytest.approx(sqrt(2.0 - 2.0 * sqrt(2.0 / pi)), abs=1e-6)


def test_thin_shell_uniform_1d():
    # isotropic interval [-sqrt(3), sqrt(3)]: E|X| = sqrt(3)/2, s^2 = 2 - sqrt(3)
    f = uniform_body(BodySpec("cube", 1, {"side": 2.0 * sqrt(3.0)}))
    s, _ = thin_shell_stat(f)
    assert s == pytest.approx(sqrt(2.0 - sqrt(3.0)), abs=1e-8)


def test_thin_shell_ladder():
    s, ladder = thin_shell_stat(standard_gaussian(3), k_ladder=[1, 3])
    assert ladder[3] == pytest.approx(s)
    # the 1d projection of a standard gaussian is again standard normal
    assert ladder[1] == pytest.approx(sqrt(2.0 - 2.0 * sqrt(2.0 / pi)), abs=1e-6)
    with pytest.raises(ValueError):
        thin_shell_stat(standard_gaussian(2), k_ladder=[5])


def test_third_moment_tensor_symmetric():
    t = third_moment_tensor(product_exponential(2)).T
    for perm in [(0, 2, 1), (1, 0, 2), (2, 1, 0)]:
        assert np.allclose(t, np.transpose(t, perm), atol=1e-10)


def test_k_stat_vanishes_for_symmetric():
    for name in ("gaussian", "cube", "ball"):
        f = isotropic_battery(2)[name]
        kappa, _, _ = k_stat(f)
        assert kappa < 1e-8, name


def test_k_stat_exponential_near_two():
    kappa, theta, _ = k_stat(product_exponential(1))
    assert kappa == pytest.approx(2.0, rel=0.02)
    assert abs(theta[0]) == pytest.approx(1.0)


def test_k_stat_grid_agrees_with_eigensolve():
    kappa, _, tensor = k_stat(product_exponential(2))
    grid = k_stat_grid(tensor)
    assert grid <= kappa * (1.0 + 1e-9)
    assert grid == pytest.approx(kappa, rel=1e-4)


def test_k_stat_monte_carlo_high_dimension():
    kappa, _, tensor = k_stat(product_exponential(4), n_samples=400_000)
    assert tensor.source == "monte-carlo"
    assert kappa == pytest.approx(2.0, rel=0.05)


def test_q_stat_gaussian_is_one():
    q, _, _ = q_stat(standard_gaussian(2))
    assert q == pytest.approx(1.0, abs=1e-6)


def test_q_stat_exponential():
    # the quadratic family attains roughly sqrt(2) on the exponential
    q, m_opt, _ = q_stat(product_exponential(1))
    assert q == pytest.approx(sqrt(2.0), rel=0.02)
    assert m_opt.shape == (1, 1)


def test_q_stat_at_least_one_on_battery():
    for name, f in isotropic_battery(2).items():
        q, _, _ = q_stat(f)
        assert q >= 1.0 - 1e-9, name


def test_sqrt2_inequality_battery():
    for n in (1, 2):
        for name, f in isotropic_battery(n).items():
            rep = fact61_check(f)
            assert rep["pass"], (name, n, rep)
            assert rep["ratio"] <= 1.0 + 0.02


def test_sqrt2_inequality_near_tight_on_exponential():
    rep = fact61_check(product_exponential(2))
    assert rep["ratio"] >= 0.9


def test_anisotropic_input_rejected():
    f = uniform_body(BodySpec("cube", 2, {"side": 1.0}))  # variance 1/12
    with pytest.raises(AnisotropicInput):
        thin_shell_stat(f)
    with pytest.raises(AnisotropicInput):
        k_stat(f)
    with pytest.raises(AnisotropicInput):
        q_stat(f)


def test_sample_budget_guard():
    with pytest.raises(SampleBudgetTooSmall):
        thin_shell_stat(product_exponential(4), n_samples=2000, ci_tol=1e-4)


def test_lemma16_style_ladder_report():
    rep = lemma16_diagnostic(product_exponential(2))
    assert rep["ladder_aggregate"] > 0
    assert np.isfinite(rep["ratio"])


def test_constants_report_serializable():
    rep = constants_report(product_exponential(2), k_ladder=[1, 2])
    d = rep.as_dict()
    json.dumps(d)  # must be plain JSON types
    assert d["k_stat"] == pytest.approx(2.0, rel=0.03)
    assert d["detail"]["sqrt2_pass"] == 1.0
