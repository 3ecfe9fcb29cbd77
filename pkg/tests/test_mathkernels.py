"""Special functions, softmax and samplers"""
import math

import numpy as np
import pytest

from truthnet.errors import DomainError
from truthnet.inference.mathkernels import (
    POSITIVITY_FLOOR,
    RngStream,
    SpdMatrix,
    apply_floor,
    digamma,
    log_gamma,
    log_normalize,
    sample_beta,
    sample_categorical,
    sample_categorical_rows,
    sample_dirichlet,
    sample_row_log_normal,
    trigamma,
)

GRID = np.linspace(0.05, 50.0, 200)


@pytest.mark.parametrize("x,expected", [
    (1.0, -0.5772156649015329),
    (2.0, 0.4227843350984671),
    (0.5, -1.9635100260214235),
])
def test_digamma_reference_values(x, expected):
    """Digamma matches closed-form values"""
    assert digamma(x) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("x,expected", [(1.0, 0.0), (2.0, 0.0), (0.5, 0.5723649429247001)])
def test_log_gamma_reference_values(x, expected):
    """ln Gamma matches closed-form values"""
    assert log_gamma(x) == pytest.approx(expected, abs=1e-12)


def test_special_functions_against_mpmath():
    """Digamma and ln Gamma agree with arbitrary precision on a 200-point grid"""
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 30
    for x in GRID:
        assert abs(digamma(float(x)) - float(mpmath.digamma(x))) < 1e-10
        assert abs(log_gamma(float(x)) - float(mpmath.loggamma(x))) < 1e-10


def test_recurrences_hold():
    """Psi(x+1) = Psi(x) + 1/x and lnG(x+1) = lnG(x) + ln x"""
    assert np.allclose(digamma(GRID + 1), digamma(GRID) + 1 / GRID, atol=1e-10)
    assert np.allclose(log_gamma(GRID + 1), log_gamma(GRID) + np.log(GRID), atol=1e-10)


def test_trigamma_of_one():
    """psi'(1) = pi^2 / 6"""
    assert trigamma(1.0) == pytest.approx(math.pi**2 / 6, rel=1e-12)


@pytest.mark.parametrize("func", [digamma, log_gamma, trigamma])
@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_special_functions_reject_non_positive(func, bad):
    """Domain errors outside (0, inf)"""
    with pytest.raises(DomainError):
        func(bad)


def test_log_normalize_examples():
    """Softmax examples, including shift invariance"""
    assert np.allclose(log_normalize([0.0, 0.0]), [0.5, 0.5])
    assert np.allclose(log_normalize([7.0, 7.0, 7.0]), [1 / 3] * 3)
    assert np.allclose(log_normalize([math.log(1), math.log(3)]), [0.25, 0.75])
    assert np.allclose(log_normalize([1000.0, 0.0]), [1.0, 0.0])


def test_log_normalize_rejects_empty_and_infinite():
    """Empty or non-finite logits are domain errors"""
    with pytest.raises(DomainError):
        log_normalize([])
    with pytest.raises(DomainError):
        log_normalize([0.0, float("inf")])


def test_dirichlet_moments(rng):
    """Empirical mean of Dir(1,1,1) and variance of Dir(2,2)"""
    draws = sample_dirichlet([1.0, 1.0, 1.0], rng, size=100_000)
    assert np.allclose(draws.mean(axis=0), 1 / 3, atol=5e-3)
    pair = sample_dirichlet([2.0, 2.0], rng.substream(1), size=100_000)
    assert pair[:, 0].var() == pytest.approx(0.05, abs=2e-3)


def test_dirichlet_extreme_concentration(rng):
    """Extreme parameters concentrate on one vertex and stay on the simplex"""
    draw = sample_dirichlet([1e9, 1e-9], rng)
    assert draw[0] == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.isfinite(draw))
    assert draw.sum() == pytest.approx(1.0)


def test_dirichlet_rejects_non_positive(rng):
    """Zero concentration is outside the domain"""
    with pytest.raises(DomainError):
        sample_dirichlet([1.0, 0.0], rng)


def test_row_log_normal_mean(rng):
    """Log-normal mean exp(M + V/2) with the default priors"""
    draws = sample_row_log_normal(np.full(3, 2.0), SpdMatrix.isotropic(3, 0.7), rng, size=100_000)
    assert draws.shape == (100_000, 3)
    assert np.allclose(draws.mean(axis=0), math.exp(2.35), rtol=2e-2)


def test_row_log_normal_degenerate_limit(rng):
    """A vanishing covariance collapses every entry to exp(M)"""
    draw = sample_row_log_normal(np.full(2, 2.0), SpdMatrix.isotropic(2, 1e-14), rng)
    assert np.allclose(draw, math.exp(2.0), rtol=1e-5)


def test_categorical_samplers(rng):
    """Point masses always come back; row sampler respects each row"""
    assert sample_categorical([0.0, 1.0, 0.0], rng) == 1
    rows = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    assert sample_categorical_rows(rows, rng).tolist() == [0, 1, 1]
    with pytest.raises(DomainError):
        sample_categorical([0.5, 0.6], rng)


def test_sample_beta_in_unit_interval(rng):
    """Beta draws stay in (0, 1)"""
    assert 0.0 < sample_beta(2.0, 3.0, rng) < 1.0


def test_substreams_are_reproducible():
    """Substreams depend only on (seed, keys)"""
    a = RngStream(5).substream(2, 3).generator.random(4)
    b = RngStream(5).substream(2).substream(3).generator.random(4)
    c = RngStream(5).substream(3, 2).generator.random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_rejects_negative_seed():
    """Seeds are unsigned"""
    with pytest.raises(DomainError):
        RngStream(-1)


def test_spd_matrix_validation():
    """Non-symmetric and indefinite matrices are rejected"""
    with pytest.raises(DomainError):
        SpdMatrix([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(DomainError):
        SpdMatrix([[1.0, 2.0], [2.0, 1.0]])
    spd = SpdMatrix([[2.0, 0.5], [0.5, 1.0]])
    assert spd.log_det == pytest.approx(math.log(1.75))
    assert np.allclose(spd.solve(np.array([2.0, 0.5])), [1.0, 0.0])


def test_apply_floor_in_place():
    """Values below the floor are lifted in place"""
    values = np.array([0.0, -1.0, 2.0])
    apply_floor(values)
    assert values.tolist() == [POSITIVITY_FLOOR, POSITIVITY_FLOOR, 2.0]
