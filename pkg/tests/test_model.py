import numpy as np
import pytest

from src.model import (
    CouplingMode,
    MarkFunction,
    ModelSpec,
    build_model,
    check_assumptions,
    compose_generator,
    coupling_scalar,
    estimate_lipschitz,
    fit_growth_class,
    generator_lipschitz_in_zeta,
    max_stable_dt,
)
from src.model.generator import l2_norm
from src.utils.errors import ConfigError, UnknownName


def test_closed_form_meets_terminal_condition(linear_uniform):
    x = np.linspace(-2, 2, 7)[:, None]
    u_T = linear_uniform.closed_form(linear_uniform.T, x)
    np.testing.assert_allclose(u_T, linear_uniform.terminal(x))
    np.testing.assert_allclose(linear_uniform.closed_form(0.0, x)[:, 0], x[:, 0] + 0.1)


def test_zoo_models_satisfy_assumptions(stable, uniform):
    for name, measure in (("linear_additive", stable), ("coupled_sine", uniform),
                          ("norm_coupling_demo", stable)):
        report = check_assumptions(build_model(name, measure), n=500)
        assert report.passed, [c.name for c in report.failures()]
        assert report.h_lipschitz >= 0.0


def test_coupled_sine_lipschitz_in_y(uniform):
    report = check_assumptions(build_model("coupled_sine", uniform), n=1000)
    # |∂_y h| ≤ a_y = 0.5 for both components
    assert 0.3 < report.h_lipschitz_y <= 0.5 + 1e-9
    dt = max_stable_dt(build_model("coupled_sine", uniform), report)
    assert dt == pytest.approx(1.0 / report.h_lipschitz_y)


def test_lipschitz_estimate_of_a_line():
    est = estimate_lipschitz(lambda p: 3.0 * p[:, 0] - p[:, 1], ([-1, -1], [1, 1]), directions=[0], samples=400)
    assert est.constant == pytest.approx(3.0, rel=1e-9)


def test_lipschitz_estimate_of_a_fast_sine():
    est = estimate_lipschitz(lambda p: np.sin(5.0 * p[:, 0]), ([-1.0], [1.0]), samples=10_000)
    # max |5 cos(5y)| = 5 on [-1, 1]; sampled pairs give a lower bound
    assert 4.9 <= est.constant <= 5.0 + 1e-9


def test_growth_fit_of_a_quadratic():
    fit = fit_growth_class(lambda x: x[..., 0] ** 2, [-8.0], [8.0], 4000, seed=1)
    assert 0.5 <= fit.p <= 1.5
    assert fit.C > 0


def test_generator_with_constant_driver(stable):
    spec = build_model("linear_additive", stable, c=0.7)
    f = compose_generator(spec, 0)
    value = f(0.3, np.array([0.5]), np.array([1.0]), np.array([0.2]))
    assert float(value) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        compose_generator(spec, 1)


def test_norm_coupling_reads_the_l2_norm(uniform):
    spec = build_model("norm_coupling_demo", uniform)
    assert spec.coupling_mode is CouplingMode.NORM_COUPLING
    zeta = MarkFunction(lambda e: np.minimum(1.0, np.abs(e[..., 0])), 0)
    # density 2 on each side of 0.5 ≤ |e| ≤ 1: ∫ e² dλ = 4 · 7/24
    assert l2_norm(spec, zeta) == pytest.approx(np.sqrt(7.0 / 6.0), rel=1e-8)
    assert coupling_scalar(spec, 0, 0.0, np.zeros(1), zeta) == pytest.approx(np.sqrt(7.0 / 6.0), rel=1e-8)


def test_gamma_coupling_integrates_gamma_times_zeta(uniform):
    spec = build_model("linear_additive", uniform)
    one = MarkFunction(lambda e: np.ones(np.shape(e)[:-1]), 0)
    # γ = 1∧|e| = |e| on the support: ∫ |e| dλ = 4 · 3/8
    assert float(coupling_scalar(spec, 0, 0.0, np.zeros(1), one)) == pytest.approx(1.5, rel=1e-8)


def test_zeta_lipschitz_stays_below_bound(uniform):
    spec = build_model("norm_coupling_demo", uniform)
    out = generator_lipschitz_in_zeta(spec, 0, h_lipschitz_q=0.5, n_pairs=16)
    # h is affine in q with slope q_weight, and |‖a‖ - ‖b‖| ≤ ‖a - b‖
    assert out["estimate"] <= out["bound"] + 1e-9


def test_unknown_model_and_parameter(stable):
    with pytest.raises(UnknownName):
        build_model("nosuch", stable)
    with pytest.raises(ConfigError) as err:
        build_model("linear_additive", stable, drift=1.0)
    assert err.value.key == "model.params.drift"
    with pytest.raises(ConfigError) as err:
        build_model("norm_coupling_demo", stable, mode="bogus")
    assert err.value.key == "model.params.mode"


def test_spec_rejects_missing_components(linear_uniform):
    with pytest.raises(ValueError):
        ModelSpec(**{**linear_uniform.__dict__, "g": ()})
