import numpy as np
import pytest

from src.levy import truncate
from src.model import build_model
from src.operators import ValueField
from src.sde_sim import simulate
from src.utils.errors import ConfigError, EstimatorUnavailable
from src.verify import (
    CheckReport,
    contraction_ratio,
    digest_of,
    feynman_kac_probe,
    jump_representation_error,
    norm_coupling_consistency_check,
    simulate_and_solve,
    u_class_check,
    uniqueness_fixed_point,
    uniqueness_from_starts,
)
from src.verify.checks import fit_power


def test_digest_ignores_key_order():
    a = digest_of({"seed": 1, "params": {"b": 0.1, "sigma": np.float64(0.2)}, "x": np.array([0.0])})
    b = digest_of({"x": [0.0], "params": {"sigma": 0.2, "b": 0.1}, "seed": 1})
    assert a == b
    assert a != digest_of({"seed": 2, "params": {"b": 0.1, "sigma": 0.2}, "x": [0.0]})


def test_report_serialises_numpy_values():
    report = CheckReport(name="demo", inputs={"seed": 3, "n_paths": 10}, statistic={"gap": np.float64(0.5)},
                         threshold={"gap": 1.0}, passed=True)
    out = report.to_dict()
    assert out["statistic"]["gap"] == 0.5 and isinstance(out["statistic"]["gap"], float)
    assert report.seed == 3 and report.sample_size == 10


def test_contraction_ratio():
    assert contraction_ratio([1.0, 0.5, 0.25]) == pytest.approx(0.5)
    assert contraction_ratio([1.0, 1e-16]) == 0.0


def test_power_fit():
    xs = np.array([0.0, 1.0, 3.0])
    fit = fit_power(xs, 2.0 * (1.0 + xs) ** 1.5)
    assert fit["C"] == pytest.approx(2.0)
    assert fit["rho"] == pytest.approx(1.5)
    assert fit["max_log_residual"] == pytest.approx(0.0, abs=1e-10)
    assert fit_power(xs, np.zeros(3))["C"] == 0.0


def test_affine_field_is_in_the_growth_class():
    axes = [np.linspace(-4, 4, 81)]
    u = ValueField.from_function(lambda t, x: 2.0 * x - 1.0, [0.0, 1.0], axes)
    report = u_class_check(u, u.box, n_pairs=500)
    assert report.passed
    # rate 2 everywhere with p = 0 gives C = 2/3
    assert report.statistic["C"] == pytest.approx(2.0 / 3.0, rel=1e-6)
    assert set(report.tables["fits"]["t"]) == {0.0, 1.0}
    assert (report.seed, report.sample_size_key, report.sample_size) == (0, "n_pairs", 500)


def test_fixed_point_check_needs_gamma_coupling(stable, small):
    with pytest.raises(ConfigError) as err:
        uniqueness_fixed_point(build_model("norm_coupling_demo", stable), None, st=small)
    assert err.value.key == "checks.uniqueness_fixed_point"


def test_jump_representation_needs_martingale_mode(linear_uniform, small):
    bundle, sol = simulate_and_solve(linear_uniform, 0.0, [0.0], small.with_changes(n_paths=300))
    with pytest.raises(EstimatorUnavailable):
        jump_representation_error(linear_uniform, sol, bundle)


def test_feynman_kac_probe_against_a_reference_run(linear_free, small):
    report = feynman_kac_probe(linear_free, [(0.0, [0.0]), (0.5, [0.0])], small, reference_x=[0.0],
                               oracle=False)
    assert report.passed, report.statistic
    table = report.tables["probe"]
    assert list(table["t"]) == [0.0, 0.5]
    assert "oracle_gap" not in table


def test_modes_agree_without_the_q_channel(uniform, small):
    report = norm_coupling_consistency_check(uniform, [0.0], small.with_changes(n_paths=500))
    assert report.passed
    assert report.statistic["max_abs_y_gap"] == 0.0


def test_reports_with_equal_inputs_share_a_digest(linear_uniform, small):
    st = small.with_changes(n_paths=300)
    tm = truncate(linear_uniform.measure, st.truncation_k)
    a = simulate(linear_uniform, tm, 0.0, [0.0], st.grid(linear_uniform, 0.0), st.n_paths, st.seed)
    b = simulate(linear_uniform, tm, 0.0, [0.0], st.grid(linear_uniform, 0.0), st.n_paths, st.seed)
    np.testing.assert_array_equal(a.states, b.states)
    first = norm_coupling_consistency_check(linear_uniform.measure, [0.0], st)
    second = norm_coupling_consistency_check(linear_uniform.measure, [0.0], st)
    assert first.digest == second.digest


def test_q_free_generator_settles_after_one_outer_iteration(linear_uniform, small):
    st = small.with_changes(n_paths=500)
    bumpy = ValueField.from_function(lambda t, x: np.sin(3.0 * x), [0.0, 1.0], [np.linspace(-3, 3, 61)])
    for u0 in (None, bumpy):
        report = uniqueness_fixed_point(linear_uniform, u0, max_outer=5, st=st)
        assert report.passed, report.statistic
        assert report.statistic["outer_iterations"] == 1
        assert report.statistic["last_distance"] == 0.0


def test_coupled_system_reaches_one_limit_from_two_starts(small):
    from src.levy import finite_uniform

    spec = build_model("coupled_sine", finite_uniform(mass=1.0, radius=1.0))
    report = uniqueness_from_starts(spec, small.with_changes(n_paths=500, n_steps=5), max_outer=10)
    assert report.passed, report.statistic
    assert report.statistic["limit_gap"] <= report.threshold["limit_gap"]
    assert report.sample_size == 500
