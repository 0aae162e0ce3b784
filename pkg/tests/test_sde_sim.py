import numpy as np
import pytest

from src.levy import truncate
from src.sde_sim import Stream, TimeGrid, moment_check, path_stream, sample_noise, simulate
from src.utils import settings
from src.utils.errors import GridMismatch


def test_grid_nodes_and_steps():
    grid = TimeGrid(0.0, 1.0, 4)
    np.testing.assert_allclose(grid.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid.dt == 0.25
    np.testing.assert_array_equal(grid.step_of(np.array([0.0, 0.3, 0.74, 0.99])), [0, 1, 2, 3])
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 4)


def test_streams_are_keyed_by_path_and_purpose():
    a = path_stream(1, 5, Stream.BROWNIAN).random(3)
    np.testing.assert_array_equal(a, path_stream(1, 5, Stream.BROWNIAN).random(3))
    assert not np.allclose(a, path_stream(1, 6, Stream.BROWNIAN).random(3))
    assert not np.allclose(a, path_stream(1, 5, Stream.JUMPS).random(3))


def test_diffusion_law_without_jumps(linear_free):
    grid = TimeGrid(0.0, 1.0, 20)
    n = 4000
    bundle = simulate(linear_free, truncate(linear_free.measure, 4), 0.0, [0.5], grid, n, seed=1)
    x_T = bundle.states[:, -1, 0]
    se = 0.2 / np.sqrt(n)
    assert abs(x_T.mean() - 0.6) < 3 * se
    assert abs(x_T.var() - 0.04) < 3 * 0.04 * np.sqrt(2.0 / n)
    assert bundle.jump_time.size == 0


def test_jumps_are_compensated(linear_uniform):
    grid = TimeGrid(0.0, 1.0, 10)
    n = 4000
    bundle = simulate(linear_uniform, truncate(linear_uniform.measure, 4), 0.0, [0.0], grid, n, seed=2)
    x_T = bundle.states[:, -1, 0]
    assert abs(x_T.mean() - 0.1) < 3 * x_T.std() / np.sqrt(n)
    # β = 0.3·(1∧|e|) at each recorded jump
    np.testing.assert_allclose(bundle.jump_post - bundle.jump_pre,
                               0.3 * np.minimum(1.0, np.abs(bundle.jump_mark)), atol=1e-12)


def test_left_limits_differ_only_where_jumps_land(linear_uniform):
    grid = TimeGrid(0.0, 1.0, 5)
    bundle = simulate(linear_uniform, truncate(linear_uniform.measure, 4), 0.0, [0.0], grid, 500, seed=3)
    np.testing.assert_array_equal(bundle.states[:, 0], bundle.left_limits[:, 0])
    np.testing.assert_array_equal(bundle.states[:, -1], bundle.left_limits[:, -1])


def test_noise_does_not_depend_on_chunking(linear_uniform, monkeypatch):
    grid = TimeGrid(0.0, 1.0, 8)
    tm = truncate(linear_uniform.measure, 4)
    whole = simulate(linear_uniform, tm, 0.0, [0.0], grid, 300, seed=4)
    monkeypatch.setattr(settings, "path_chunk", 7)
    chunked = simulate(linear_uniform, tm, 0.0, [0.0], grid, 300, seed=4)
    np.testing.assert_array_equal(whole.states, chunked.states)
    np.testing.assert_array_equal(whole.jump_mark, chunked.jump_mark)


def test_thinning_keeps_brownian_path(stable):
    grid = TimeGrid(0.0, 1.0, 6)
    fine = sample_noise(truncate(stable, 8), grid, 200, 1, seed=5)
    coarse = fine.thin(2)
    np.testing.assert_array_equal(fine.dB, coarse.dB)
    assert np.all(np.abs(coarse.jump_mark) >= 0.5)
    assert coarse.n_jumps == int(np.sum(np.abs(fine.jump_mark) >= 0.5))
    with pytest.raises(ValueError):
        coarse.thin(8)


def test_simulation_start_must_match_grid(linear_free):
    with pytest.raises(GridMismatch):
        simulate(linear_free, truncate(linear_free.measure, 2), 0.5, [0.0], TimeGrid(0.0, 1.0, 4), 10, seed=0)


def test_additive_paths_shift_with_the_start(linear_uniform):
    grid = TimeGrid(0.0, 1.0, 10)
    tm = truncate(linear_uniform.measure, 4)
    a = simulate(linear_uniform, tm, 0.0, [0.0], grid, 1000, seed=6)
    b = simulate(linear_uniform, tm, 0.0, [1.0], grid, 1000, seed=6)
    report = moment_check(a, b, p=2)
    assert report.coupled.M == pytest.approx(0.0, abs=1e-20)
    assert report.start.M > 0
    assert report.start.monotone
