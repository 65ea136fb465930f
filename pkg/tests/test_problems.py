"""Benchmark-problem tests: hand-computed values, estimator identities,
finite-difference checks, and the scalar/batch agreement contract."""
import math

import numpy as np
import pytest

from tusla.diagnostics import estimate_k_mean, estimate_x_rho_mean
from tusla.problems import (
    ConstantDataSource,
    OneNeuronProblem,
    QuadraticProblem,
    UniformDataSource,
    UsProblem,
    g_s_sample,
    g_s_unbiased,
    one_neuron_gradient,
    one_neuron_parameters,
    one_neuron_value,
    u_s_derivative,
    u_s_value,
    u_s_value_batch,
)

EPS = np.finfo(np.float64).eps
CENTER = 0.1


# ---------------------------------------------------------------------------
# u_s values


def test_u_s_hand_values():
    assert u_s_value(1.1, 2) == 1.0454545454545454
    assert u_s_value(2.1, 2) == 16.136363636363637


def test_u_s_minimum_at_center():
    # s = 0 degenerates to a constant unit penalty: the minimum shifts to 1
    for s in (0, 1, 2, 26):
        floor = 1.0 if s == 0 else 0.0
        assert u_s_value(CENTER, s) == floor
        grid = CENTER + np.concatenate([np.linspace(-4.0, -0.01, 300), np.linspace(0.01, 4.0, 300)])
        vals = u_s_value_batch(grid, s)
        assert np.all(vals > floor)


def test_u_s_branch_forms_coincide_at_boundary():
    # the two closed forms agree bitwise at |d| = 1 because the constants do
    assert 1.0 / 22.0 == 0.5 / 11.0
    for s in (0, 1, 2, 26):
        d = 1.0
        inner = d * d / 22.0 + d ** (2 * s)
        outer = (abs(d) - 0.5) / 11.0 + d ** (2 * s)
        assert inner == outer
        # value is continuous through the switch point theta = 1.1
        lo = u_s_value(math.nextafter(1.1, 0.0), s)
        hi = u_s_value(math.nextafter(1.1, 2.0), s)
        at = u_s_value(1.1, s)
        width = max(abs(at), 1.0)
        assert abs(lo - at) <= 64 * EPS * width
        assert abs(hi - at) <= 64 * EPS * width


def test_u_s_derivative_continuous_at_boundary():
    for s in (0, 1, 2, 5):
        at = u_s_derivative(1.1, s)
        below = u_s_derivative(math.nextafter(1.1, 0.0), s)
        above = u_s_derivative(math.nextafter(1.1, 2.0), s)
        width = max(abs(at), 1.0)
        assert abs(below - at) <= 64 * EPS * width
        assert abs(above - at) <= 64 * EPS * width


def test_u_s_derivative_matches_finite_difference():
    offsets = [-2.5, -1.5, -0.7, -0.3, -0.05, 0.05, 0.3, 0.7, 1.5, 2.5]
    for s in (0, 1, 2, 5):
        for off in offsets:
            theta = CENTER + off
            h = 1e-6 * max(1.0, abs(theta))
            fd = (u_s_value(theta + h, s) - u_s_value(theta - h, s)) / (2.0 * h)
            want = u_s_derivative(theta, s)
            assert math.isclose(fd, want, rel_tol=1e-6, abs_tol=1e-9)


def test_u_s_value_batch_matches_scalar():
    rng = np.random.default_rng(7)
    for s in (0, 1, 2, 26):
        thetas = np.concatenate(
            [rng.uniform(-8.0, 8.0, 500), [CENTER, 1.1, -0.9, math.nextafter(1.1, 2.0)]]
        )
        batch = u_s_value_batch(thetas, s)
        for t, b in zip(thetas, batch):
            want = u_s_value(float(t), s)
            # numpy's vectorized pow may round differently from libm pow
            assert abs(b - want) <= 4 * np.spacing(abs(want)) + 5e-324


def test_u_s_overflow_saturates_to_inf():
    # (1e7)^52 and (1e7)^51 both exceed the float64 range; the python-float
    # pow path must saturate with the right sign instead of raising
    assert u_s_value(1e7, 26) == math.inf
    assert u_s_value(-1e7, 26) == math.inf
    assert u_s_derivative(1e7, 26) == math.inf
    assert u_s_derivative(-1e7, 26) == -math.inf


# ---------------------------------------------------------------------------
# gradient estimators


def test_g_s_hand_values():
    assert g_s_sample(1.1, 0.5, 2) == 55.0
    assert g_s_sample(1.1, 5.0, 2) == -5.0


def test_estimators_vanish_at_minimizer():
    for s in (0, 1, 2, 26):
        for x in (0.0, 0.5, 1.0, 4.2, 11.0):
            assert g_s_sample(CENTER, x, s) == 0.0
            assert g_s_unbiased(CENTER, x, s) == 0.0


def test_unbiased_estimator_mean_is_exact_derivative():
    # E[multiplier] = 1/11, so the closed-form mean is lin/11 + pen
    for s in (0, 1, 2, 5):
        for theta in (-1.9, -0.4, 0.3, 0.9, 1.7, 3.2):
            d = theta - CENTER
            pen = 0.0 if s == 0 else 2.0 * s * d ** (2 * s - 1)
            lin = d if abs(d) <= 1.0 else math.copysign(1.0, d)
            mean = (1.0 / 11.0) * lin + pen
            want = u_s_derivative(theta, s)
            assert math.isclose(mean, want, rel_tol=1e-14, abs_tol=1e-300)


def test_unbiased_estimator_monte_carlo_mean():
    rng = np.random.default_rng(11)
    xs = rng.uniform(0.0, 11.0, 400_000)
    theta, s = 1.7, 2
    samples = np.array([g_s_unbiased(theta, float(x), s) for x in xs[:50_000]])
    sem = samples.std(ddof=1) / math.sqrt(samples.size)
    assert abs(samples.mean() - u_s_derivative(theta, s)) <= 4.0 * sem


def test_printed_estimator_is_biased():
    # mean is bracket/11, far from u_s' once the wall term dominates
    rng = np.random.default_rng(13)
    xs = rng.uniform(0.0, 11.0, 50_000)
    theta, s = 1.7, 2
    samples = np.array([g_s_sample(theta, float(x), s) for x in xs])
    sem = samples.std(ddof=1) / math.sqrt(samples.size)
    d = theta - CENTER
    bracket = (abs(d) - 0.5) + 2.0 * s * d ** (2 * s - 1)
    assert abs(samples.mean() - bracket / 11.0) <= 4.0 * sem
    assert abs(bracket / 11.0 - u_s_derivative(theta, s)) > 1.0


def test_printed_estimator_jumps_at_branch_switch():
    lo = g_s_sample(math.nextafter(1.1, 0.0), 0.5, 0)
    hi = g_s_sample(math.nextafter(1.1, 2.0), 0.5, 0)
    assert abs(lo - hi) > 5.0  # bracket steps from d^2 = 1 to |d| - 0.5 = 1/2


def test_evaluate_batch_matches_scalar():
    rng = np.random.default_rng(5)
    for s in (0, 1, 2, 26):
        thetas = np.concatenate([rng.uniform(-3.0, 3.0, 800), rng.uniform(-8.0, 8.0, 800)])
        xs = rng.uniform(0.0, 11.0, thetas.size)
        d = np.abs(thetas - CENTER)
        with np.errstate(over="ignore"):
            pen = np.zeros_like(d) if s == 0 else 2.0 * s * d ** (2 * s - 1)
        # error measured before the final cancellation, through the 11x
        # multiplier; vectorized pow is not bitwise against libm pow
        scale = 11.0 * (d * d + d + 1.0 + pen)
        for unbiased in (False, True):
            prob = UsProblem(s=s, unbiased=unbiased)
            batch = prob.evaluate_batch(thetas, xs)
            scalar = np.array(
                [prob.evaluate_scalar(float(t), float(x)) for t, x in zip(thetas, xs)]
            )
            finite = np.isfinite(scalar)
            assert np.array_equal(batch[~finite], scalar[~finite])
            gap = np.abs(batch[finite] - scalar[finite])
            assert np.all(gap <= 4.0 * np.spacing(scale[finite]))


def test_evaluate_wraps_scalar():
    prob = UsProblem(s=2)
    out = prob.evaluate(np.array([1.7]), 0.3)
    assert out.shape == (1,)
    assert out[0] == g_s_sample(1.7, 0.3, 2)


# ---------------------------------------------------------------------------
# data sources and oracle metadata


def test_uniform_source_statistics():
    src = UniformDataSource()
    rng = np.random.default_rng(2)
    xs = src.sample_batch(rng, 1_000_000)
    assert xs.min() >= 0.0 and xs.max() <= 11.0
    assert abs(xs.mean() - 5.5) < 0.02
    frac = np.mean((xs >= 0.0) & (xs <= 1.0))
    assert abs(frac - 1.0 / 11.0) < 0.002


def test_uniform_source_validation():
    with pytest.raises(ValueError):
        UniformDataSource(lo=2.0, hi=2.0)
    with pytest.raises(ValueError):
        UniformDataSource(lo=0.0, hi=math.inf)


def test_constant_source():
    src = ConstantDataSource(value=(1.0, -2.0))
    rng = np.random.default_rng(0)
    assert src.sample(rng) == (1.0, -2.0)
    batch = src.sample_batch(rng, 3)
    assert batch.shape == (3, 2)
    assert np.all(batch == np.array([1.0, -2.0]))


def test_us_meta_and_validation():
    assert UsProblem(s=0).meta().q == 1.0
    assert UsProblem(s=2).meta().q == 4.0
    assert UsProblem(s=26).meta().q == 52.0
    assert UsProblem(s=2).meta().rho == 1.0
    assert UsProblem(s=2).meta().L1 > 0.0
    assert UsProblem(s=2).theta_star == CENTER
    assert UsProblem(s=2).dim() == 1
    with pytest.raises(ValueError):
        UsProblem(s=-1)
    with pytest.raises(ValueError):
        UsProblem(s=2.0)  # type: ignore[arg-type]


def test_us_g0_norm_matches_evaluate():
    for unbiased in (False, True):
        prob = UsProblem(s=2, unbiased=unbiased)
        for x in (0.0, 0.7, 3.3, 11.0):
            assert prob.g0_norm(x) == abs(prob.evaluate(np.zeros(1), x)[0])


def test_us_k_mean_exact_vs_monte_carlo():
    for unbiased in (False, True):
        prob = UsProblem(s=2, unbiased=unbiased)
        est, sem = estimate_k_mean(prob, UniformDataSource(), 20_000, seed=0)
        assert abs(est - prob.k_mean_exact()) <= 5.0 * sem


def test_us_x_rho_mean_exact_vs_monte_carlo():
    prob = UsProblem(s=2)
    assert prob.x_rho_mean_exact() == 6.5
    est, sem = estimate_x_rho_mean(prob, UniformDataSource(), 20_000, seed=0)
    assert abs(est - 6.5) <= 5.0 * sem


def test_quadratic_problem():
    prob = QuadraticProblem(d=3)
    assert prob.dim() == 3
    assert prob.theta_star == 0.0
    m = prob.meta()
    assert (m.q, m.rho, m.L1) == (1.0, 1.0, 1.0)
    theta = np.array([3.0, 0.0, -4.0])
    g = prob.evaluate(theta, None)
    assert np.array_equal(g, theta)
    g[0] = 99.0  # returned array is a copy
    assert theta[0] == 3.0
    assert prob.value(theta) == 12.5
    assert prob.g0_norm(None) == 0.0
    batch = prob.evaluate_batch(np.array([1.0, -2.0]), None)
    assert np.array_equal(batch, np.array([1.0, -2.0]))


# ---------------------------------------------------------------------------
# one-neuron example


def test_one_neuron_parameters_solve_the_offset_equation():
    for eta in (0.0, 0.01, 0.5):
        w1s, s_off = one_neuron_parameters(eta)
        assert w1s * 1.0 + s_off == -1.0
        assert w1s == (5.0 + eta) * (1.0 + math.pi ** 2 / 16.0)


def test_one_neuron_gradient_matches_finite_difference():
    rng = np.random.default_rng(21)
    for eta in (0.01, 0.3):
        for _ in range(50):
            w1, w2 = rng.uniform(-3.0, 3.0, 2)
            x, y = rng.uniform(-2.0, 2.0, 2)
            g = one_neuron_gradient(w1, w2, x, y, eta)
            h = 1e-6

            def val(a, b):
                return one_neuron_value(a, b, x, y, eta)

            fd = np.array(
                [
                    (val(w1 + h, w2) - val(w1 - h, w2)) / (2.0 * h),
                    (val(w1, w2 + h) - val(w1, w2 - h)) / (2.0 * h),
                ]
            )
            assert np.allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_one_neuron_structural_zero():
    # with w2 = 0 and no penalty the first component is exactly zero
    g = one_neuron_gradient(1.3, 0.0, 0.7, 2.0, 0.0)
    assert g[0] == 0.0


def test_one_neuron_escapes_quadratic_dissipativity():
    # along w = (w1_star, t) with sample (x, y) = (1, 0) the inner product
    # <grad, w> stays below -2 t^2 + 2 eta w1_star^2, so it outruns every
    # A |w|^2 - B envelope in the t -> infinity direction
    for eta in (0.01, 0.1, 0.5):
        prob = OneNeuronProblem(eta=eta)
        for t in (1.0, 10.0, 100.0, 1000.0):
            w = np.array([prob.w1_star, t])
            g = prob.evaluate(w, (1.0, 0.0))
            inner = float(g @ w)
            assert inner <= -2.0 * t * t + 2.0 * eta * prob.w1_star ** 2 + 1e-9


def test_one_neuron_g0_norm_matches_evaluate():
    prob = OneNeuronProblem()
    for sample in ((1.0, 0.0), (0.5, -2.0), (2.0, 3.5)):
        g = prob.evaluate(np.zeros(2), sample)
        assert g[0] == 0.0
        assert prob.g0_norm(sample) == abs(g[1])


def test_one_neuron_meta_and_validation():
    prob = OneNeuronProblem()
    m = prob.meta()
    assert (m.q, m.rho, m.L1) == (3.0, 2.0, 12.0)
    assert prob.dim() == 2
    with pytest.raises(ValueError):
        OneNeuronProblem(eta=1.0)
    with pytest.raises(ValueError):
        OneNeuronProblem(eta=-0.1)
