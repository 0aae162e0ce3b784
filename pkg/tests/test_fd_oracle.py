import numpy as np
import pytest

from src.fd_oracle import FdProblem, ViscosityDefinition, residual, solve_fd
from src.model import build_model
from src.operators import ValueField
from src.utils.errors import CflViolation, ConfigError

PROBE = np.linspace(-1, 1, 9)[:, None]


def test_oracle_without_jumps_is_exact_on_affine_data(linear_free):
    u = solve_fd(FdProblem(linear_free, nx=201, nt=100))
    for t in (0.0, 0.5):
        np.testing.assert_allclose(u(t, PROBE), linear_free.closed_form(t, PROBE), atol=1e-3)


def test_oracle_with_stable_jumps(stable):
    spec = build_model("linear_additive", stable)
    u = solve_fd(FdProblem(spec, nx=201, nt=400))
    np.testing.assert_allclose(u(0.0, PROBE), spec.closed_form(0.0, PROBE), atol=5e-3)


def test_too_few_time_steps_violate_cfl(stable):
    spec = build_model("linear_additive", stable)
    with pytest.raises(CflViolation) as err:
        solve_fd(FdProblem(spec, nx=201, nt=1))
    assert err.value.to_dict()["context"]["cfl"] >= 1.0


def test_problem_rejects_bad_grids(linear_uniform, uniform):
    with pytest.raises(ConfigError):
        FdProblem(linear_uniform, nx=3)
    with pytest.raises(ConfigError):
        FdProblem(linear_uniform, t0=2.0)
    with pytest.raises(ConfigError) as err:
        FdProblem(build_model("linear_additive", uniform, T=1.0), L=-1.0)
    assert err.value.key == "oracle"


def test_closed_form_has_zero_residual(linear_uniform):
    axes = [np.linspace(-3, 3, 61)]
    times = np.linspace(0.0, 1.0, 11)
    u = ValueField.from_function(lambda t, x: linear_uniform.closed_form(t, x), times, axes)
    for definition in ViscosityDefinition:
        r = residual(u, linear_uniform, 0.4, [0.2], definition=definition)
        assert r == pytest.approx(0.0, abs=1e-6)


def test_halving_the_grid_shrinks_the_error(no_jumps):
    # the affine model is reproduced exactly, so refine on a curved one against a 4x finer run
    spec = build_model("coupled_sine", no_jumps)
    reference = solve_fd(FdProblem(spec, nx=161, nt=80))(0.0, PROBE)
    coarse, fine = (np.max(np.abs(solve_fd(FdProblem(spec, nx=nx, nt=nt))(0.0, PROBE) - reference))
                    for nx, nt in ((41, 20), (81, 40)))
    assert coarse > 1e-8
    assert coarse / fine >= 1.8
