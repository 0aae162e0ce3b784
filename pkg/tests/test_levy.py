import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import stats

from src.levy import LevyMeasure, build_measure, integrate, sample_jumps, sample_marks, truncate, validate
from src.utils.errors import ConfigError, DivergentIntegral, InfiniteMass, SlowDecay, UnknownName


def _stable_weight(alpha, r_hi=np.inf):
    """2∫ (1∧r²) r^(-1-alpha) e^(-r) dr on (0, r_hi), both signs of the mark."""
    inner = sp_integrate.quad(lambda r: r ** (1 - alpha) * np.exp(-r), 0, min(1.0, r_hi))[0]
    outer = sp_integrate.quad(lambda r: r ** (-1 - alpha) * np.exp(-r), 1.0, r_hi)[0] if r_hi > 1 else 0.0
    return 2 * (inner + outer)


def test_stable_weight_matches_scipy(stable):
    report = validate(stable)
    assert report.passed
    assert report.infinite_activity
    assert report.value == pytest.approx(_stable_weight(0.5), rel=1e-5)


def test_tail_mass_shrinks_with_k(stable):
    tails = [stable.tail_mass(k) for k in (1, 2, 4, 8, 16)]
    assert all(a > b for a, b in zip(tails, tails[1:]))
    assert tails[2] == pytest.approx(_stable_weight(0.5, r_hi=0.25), rel=1e-5)


def test_truncated_mass_of_uniform(uniform):
    # all mass sits on 0.5 ≤ |e| ≤ 1
    assert truncate(uniform, 4).total_mass == pytest.approx(2.0, rel=1e-10)
    assert not uniform.is_infinite_activity
    assert uniform.mass(0.0) == pytest.approx(2.0, rel=1e-10)


def test_infinite_activity_has_no_total_mass(stable):
    with pytest.raises(InfiniteMass):
        stable.mass(0.0)
    assert np.isfinite(truncate(stable, 8).total_mass)


def test_constant_integrand_diverges_at_origin(stable):
    with pytest.raises(SlowDecay):
        integrate(stable, lambda e: np.ones(len(e)), 0)


def test_nonintegrable_density_is_rejected():
    steep = LevyMeasure(dim=1, density=lambda e: np.abs(e[..., 0]) ** -3.5, support_radius=1.0,
                        singularity_exponent=1.5, name="steep")
    with pytest.raises(DivergentIntegral):
        validate(steep)


def test_zero_measure_integrates_to_zero(no_jumps):
    assert validate(no_jumps).value == 0.0
    assert truncate(no_jumps, 16).total_mass == 0.0
    assert integrate(no_jumps, lambda e: np.ones(len(e)), 0) == 0.0
    assert not no_jumps.is_infinite_activity


def test_registry_names_and_keys():
    with pytest.raises(UnknownName) as err:
        build_measure("nosuch")
    assert err.value.key == "measure.name"
    with pytest.raises(ConfigError) as err:
        build_measure("tempered_stable", alpha_=0.5)
    assert err.value.key == "measure.params.alpha_"
    with pytest.raises(ConfigError) as err:
        build_measure("tempered_stable", alpha=2.5)
    assert err.value.key == "measure.params.alpha"


def test_uniform_marks_follow_the_law(uniform):
    rng = np.random.default_rng(11)
    marks = sample_marks(truncate(uniform, 4), 4000, rng)[:, 0]
    radii = np.abs(marks)
    assert radii.min() >= 0.5 - 1e-9 and radii.max() <= 1.0 + 1e-9
    assert stats.kstest(radii, stats.uniform(loc=0.5, scale=0.5).cdf).pvalue > 1e-3
    # symmetric density: sign frequency within 3 standard errors of 1/2
    assert abs(np.mean(marks > 0) - 0.5) < 3 * 0.5 / np.sqrt(len(marks))


def test_stable_marks_respect_truncation(stable):
    rng = np.random.default_rng(3)
    marks = sample_marks(truncate(stable, 8), 2000, rng)
    assert np.all(np.abs(marks) >= 1.0 / 8 - 1e-12)


def test_jump_counts_are_poisson(uniform):
    tm = truncate(uniform, 4)
    rng = np.random.default_rng(5)
    counts = np.array([len(sample_jumps(tm, 0.0, 1.0, rng)) for _ in range(2000)])
    assert abs(counts.mean() - 2.0) < 3 * np.sqrt(2.0 / len(counts))
    jumps = sample_jumps(tm, 0.2, 0.7, np.random.default_rng(9))
    times = [t for t, _ in jumps]
    assert times == sorted(times)
    assert all(0.2 <= t <= 0.7 for t in times)
