import numpy as np
import pytest

from src.levy import quadrature, validate
from src.model import build_model
from src.operators import (
    FunctionField,
    NonlocalOperator,
    ValueField,
    check_derivatives,
    eval_B,
    eval_B_norm,
    eval_K,
    linear_combination,
    tabulate,
    taylor_radius,
)
from src.utils.errors import IllConditionedDerivative


def _identity():
    return FunctionField(lambda t, x: x[..., :1], m=1, k=1)


def test_affine_field_interpolates_exactly():
    axes = [np.linspace(-2, 2, 41)]
    u = ValueField.from_function(lambda t, x: 2.0 * x + 1.0 + t, [0.0, 1.0], axes)
    pts = np.array([[-1.33], [0.0], [1.71]])
    np.testing.assert_allclose(u(0.5, pts)[:, 0], 2.0 * pts[:, 0] + 1.5, atol=1e-12)
    np.testing.assert_allclose(u.gradient(0.5, pts)[:, 0, 0], 2.0, atol=1e-10)
    np.testing.assert_allclose(u.hessian(0.5, pts)[:, 0, 0, 0], 0.0, atol=1e-8)
    assert u.envelope_holds()


def test_extrapolation_adds_the_growth_term_to_the_boundary_value():
    axes = [np.linspace(-4, 4, 81)]
    u = ValueField.from_function(lambda t, x: x ** 3, [0.0], axes)
    env = u.envelopes[0]
    assert env.p > 0
    growth = env.C * (50.0 ** env.p - 4.0 ** env.p)
    far = u(0.0, np.array([[50.0], [-50.0], [3.5]]))[:, 0]
    np.testing.assert_allclose(far[:2], [64.0 + growth, -64.0 - growth], rtol=1e-12)
    assert far[2] == pytest.approx(3.5 ** 3, rel=1e-2)
    flat = ValueField.from_function(lambda t, x: np.full_like(x, 2.0), [0.0], axes)
    assert flat(0.0, np.array([[9.0]]))[0, 0] == pytest.approx(2.0)


def test_linear_combination_of_fields():
    axes = [np.linspace(-1, 1, 11)]
    a = ValueField.from_function(lambda t, x: x, [0.0], axes)
    b = ValueField.from_function(lambda t, x: np.ones_like(x), [0.0], axes)
    c = linear_combination([a, b], [2.0, -1.0])
    np.testing.assert_allclose(c(0.0, np.array([[0.3]]))[:, 0], [-0.4], atol=1e-12)


def test_K_vanishes_on_affine_fields(stable):
    spec = build_model("linear_additive", stable)
    assert eval_K(_identity(), spec, 0.0, np.array([0.4])) == pytest.approx(0.0, abs=1e-8)


def test_B_on_the_identity(stable):
    spec = build_model("linear_additive", stable)
    weight = validate(stable).value
    # γ = 1∧|e| and β = 0.3(1∧|e|): B x = 0.3 ∫ (1∧|e|)² dλ
    assert eval_B(_identity(), 0, spec, 0.0, np.array([0.0])) == pytest.approx(0.3 * weight, rel=1e-5)
    batch = eval_B(_identity(), 0, spec, 0.0, np.array([[0.0], [1.0]]))
    np.testing.assert_allclose(batch, 0.3 * weight, rtol=1e-5)


def test_B_norm_on_the_identity(stable):
    spec = build_model("norm_coupling_demo", stable)
    weight = validate(stable).value
    assert eval_B_norm(_identity(), 0, spec, 0.0, np.array([0.2])) == pytest.approx(0.3 * np.sqrt(weight),
                                                                                     rel=1e-5)
    with pytest.raises(ValueError):
        eval_B(_identity(), 0, spec, 0.0, np.array([0.2]))


def test_truncated_operator_uses_only_large_marks(uniform):
    spec = build_model("linear_additive", uniform)
    full = NonlocalOperator(spec, _identity()).B(0, 0.0, np.zeros((1, 1)))
    # the uniform measure has no mass below 1/2, so truncating at 1/4 changes nothing
    cut = NonlocalOperator(spec, _identity(), r_min=0.25).B(0, 0.0, np.zeros((1, 1)))
    np.testing.assert_allclose(full, cut, rtol=1e-10)


def test_zero_measure_gives_zero_operators(no_jumps):
    spec = build_model("linear_additive", no_jumps)
    op = NonlocalOperator(spec, _identity())
    X = np.linspace(-1, 1, 5)[:, None]
    np.testing.assert_array_equal(op.B(0, 0.0, X), 0.0)
    np.testing.assert_array_equal(op.K(0, 0.0, X), 0.0)


def test_rough_field_fails_the_stencil_check():
    axes = [np.linspace(-1, 1, 21)]
    u = ValueField.from_function(lambda t, x: np.sin(20.0 * x), [0.0], axes)
    with pytest.raises(IllConditionedDerivative):
        check_derivatives(u, 0.0, np.array([[0.0]]))


def test_tabulation_matches_direct_evaluation():
    points = np.random.default_rng(0).uniform(-2, 2, (5000, 1))
    direct = np.sin(points[:, 0])
    tabulated = tabulate(lambda p: np.sin(p[:, 0]), points, n_nodes=257)
    np.testing.assert_allclose(tabulated, direct, atol=1e-4)


def _cubic_K_exact(measure, x):
    # u = y³: u(x+β) - u(x) - βu'(x) = 3xβ² + β³ with β = 0.3(1∧|e|)
    def phi(e):
        beta = 0.3 * np.minimum(1.0, np.abs(e[:, 0]))
        return 3.0 * x * beta ** 2 + beta ** 3
    return quadrature.integrate(measure, phi, 2)


def test_curved_field_shrinks_the_taylor_shell(stable):
    spec = build_model("linear_additive", stable)
    cubic = ValueField.from_function(lambda t, x: x ** 3, [0.0], [np.linspace(-3, 3, 61)])
    X = np.array([[0.5]])
    op = NonlocalOperator(spec, cubic, check=False)
    value = op.K(0, 0.0, X)[0]
    assert op.shell_radius < taylor_radius(spec, cubic, 0.0, X)
    # ‖Ĥ‖ = 6x = 3 at a lattice node
    shell = quadrature.integrate(stable, lambda e: (0.3 * np.minimum(1.0, np.abs(e[:, 0]))) ** 2, 2,
                                 0.0, op.shell_radius)
    assert 0.5 * 3.0 * shell <= 1e-8 * abs(value) * (1 + 1e-6) + 1e-14

    affine = NonlocalOperator(spec, ValueField.from_function(lambda t, x: 2.0 * x, [0.0], [np.linspace(-3, 3, 61)]),
                              check=False)
    affine.K(0, 0.0, X)
    assert affine.shell_radius == taylor_radius(spec, cubic, 0.0, X)


def test_K_on_a_cubic_agrees_across_lattices(stable):
    spec = build_model("linear_additive", stable)
    X = np.array([[0.5]])
    exact = _cubic_K_exact(stable, 0.5)
    errors = []
    for n in (201, 401):
        u = ValueField.from_function(lambda t, x: x ** 3, [0.0], [np.linspace(-2, 2, n)])
        errors.append(abs(NonlocalOperator(spec, u, check=False).K(0, 0.0, X)[0] - exact))
    assert errors[1] < errors[0] < 1e-2
    smooth = FunctionField(lambda t, x: x[..., :1] ** 3, m=1, k=1)
    assert eval_K(smooth, spec, 0.0, np.array([0.5])) == pytest.approx(exact, abs=1e-3)
