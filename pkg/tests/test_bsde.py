import numpy as np
import pytest

from src.bsde import (
    BasisFamily,
    QEstimator,
    RegressionBasis,
    picard_subinterval,
    regress,
    solve_lsmc,
    truncation_study,
    window_bounds,
)
from src.levy import truncate
from src.sde_sim import TimeGrid, simulate
from src.utils.errors import InadmissibleBasis


def _bundle(spec, n_paths=2000, n_steps=10, k=4, seed=7, x=0.0):
    return simulate(spec, truncate(spec.measure, k), 0.0, [x], TimeGrid(0.0, spec.T, n_steps), n_paths, seed)


def test_basis_sizes_and_admissibility():
    assert RegressionBasis(degree=3).size(1) == 4
    assert RegressionBasis(degree=2).size(2) == 6
    assert RegressionBasis(BasisFamily.LOCAL, cells=8).size(1) == 16
    with pytest.raises(InadmissibleBasis) as err:
        RegressionBasis(degree=3).check_admissible(1, n_paths=1)
    assert err.value.key == "solver.basis"


def test_regression_recovers_a_polynomial():
    X = np.linspace(-1, 1, 50)[:, None]
    fitted = RegressionBasis(degree=2).fit(X)
    targets = (1.0 + 2.0 * X[:, 0] - 0.5 * X[:, 0] ** 2)[:, None]
    fit = regress(fitted.design(X), targets, step=0)
    np.testing.assert_allclose(fit.fitted, targets, atol=1e-10)


def test_degenerate_states_use_a_constant_basis():
    X = np.zeros((20, 1))
    assert RegressionBasis(degree=3).fit(X).size == 1


def test_lsmc_without_jumps(linear_free):
    sol = solve_lsmc(linear_free, _bundle(linear_free), RegressionBasis(degree=2))
    assert sol.y0[0] == pytest.approx(0.1, abs=3 * sol.y0_standard_error[0] + 1e-3)
    assert sol.y.shape == (1, 2000, 11)
    assert sol.z.shape == (1, 2000, 10, 1)


def test_lsmc_matches_the_closed_form(linear_uniform):
    bundle = _bundle(linear_uniform, x=0.5)
    sol = solve_lsmc(linear_uniform, bundle, RegressionBasis(degree=2))
    exact = linear_uniform.closed_form(0.0, np.array([[0.5]]))[0, 0]
    assert sol.y0[0] == pytest.approx(exact, abs=3 * sol.y0_standard_error[0] + 1e-3)
    assert sol.terminal_gap(linear_uniform.terminal(bundle.states[:, -1])) == pytest.approx(0.0, abs=1e-12)
    assert len(sol.diagnostics) == 10


def test_martingale_estimator_runs_on_the_same_bundle(linear_uniform):
    bundle = _bundle(linear_uniform)
    rep = solve_lsmc(linear_uniform, bundle, RegressionBasis(degree=2), QEstimator.REPRESENTATION)
    mart = solve_lsmc(linear_uniform, bundle, RegressionBasis(degree=2), QEstimator.MARTINGALE)
    band = 3 * np.hypot(rep.y0_standard_error, mart.y0_standard_error) + 1e-3
    assert np.all(np.abs(rep.y0 - mart.y0) <= band)
    assert mart.estimator is QEstimator.MARTINGALE


def test_frozen_estimator_is_not_an_lsmc_option(linear_uniform):
    with pytest.raises(ValueError):
        solve_lsmc(linear_uniform, _bundle(linear_uniform, n_paths=200), u_estimator=QEstimator.FROZEN)


def test_windows_cover_the_grid():
    bounds = window_bounds(10, 0.1, 0.25)
    assert bounds[0][1] == 10 and bounds[-1][0] == 0
    for later, earlier in zip(bounds, bounds[1:]):
        assert earlier[1] == later[0]
    assert window_bounds(10, 0.1, 5.0) == [[0, 10]]


def test_picard_on_short_windows(linear_uniform):
    sol = picard_subinterval(linear_uniform, _bundle(linear_uniform), RegressionBasis(degree=2), delta=0.25)
    assert len(sol.windows) == len(sol.picard_iterations_used) == 5
    assert all(n >= 1 for n in sol.picard_iterations_used)
    assert sol.y0[0] == pytest.approx(0.1, abs=3 * sol.y0_standard_error[0] + 1e-3)


def test_truncation_study_uses_the_last_level_as_reference(stable):
    from src.model import build_model

    spec = build_model("linear_additive", stable)
    table = truncation_study(spec, 0.0, [0.0], TimeGrid(0.0, 1.0, 5), [2, 4, 8], n_paths=500, seed=3,
                             basis=RegressionBasis(degree=2))
    frame = table.to_frame()
    assert list(frame["k"]) == [2, 4, 8]
    assert frame["e_X"].iloc[-1] == 0.0
    assert np.all(np.diff(frame["tail_mass"]) < 0)
    assert table.nonincreasing("e_Y")
    assert np.isfinite(table.fitted_C) and table.fitted_C > 0
    assert np.all(frame["e_X"].iloc[:-1] <= frame["bound"].iloc[:-1] * (1 + 1e-12))
    with pytest.raises(ValueError):
        truncation_study(spec, 0.0, [0.0], TimeGrid(0.0, 1.0, 5), [4, 2], n_paths=10, seed=0)


def test_y0_standard_error_matches_the_spread_across_seeds(linear_free):
    # y0 = mean(X_T) + bT here, so its spread over seeds is σ√T/√N
    sols = [solve_lsmc(linear_free, _bundle(linear_free, n_paths=400, n_steps=20, seed=s), RegressionBasis(degree=1))
            for s in range(12)]
    spread = np.std([s.y0[0] for s in sols], ddof=1)
    reported = np.mean([s.y0_standard_error[0] for s in sols])
    assert reported == pytest.approx(0.2 / np.sqrt(400), rel=0.15)
    assert 0.4 < spread / reported < 2.5


def test_picard_deltas_contract_on_a_coupled_system(uniform):
    from src.model import build_model
    from src.verify import contraction_ratio

    spec = build_model("coupled_sine", uniform)
    sol = picard_subinterval(spec, _bundle(spec, n_paths=1000, n_steps=8), RegressionBasis(degree=2), delta=0.25)
    assert len(sol.picard_deltas) == 4
    assert any(len(ds) >= 2 for ds in sol.picard_deltas)
    for ds in sol.picard_deltas:
        assert ds[-1] < 1e-6
        if len(ds) >= 2:
            assert ds[-1] < ds[0]
            assert contraction_ratio(ds) < 1.0
