import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speed_diffusion.errors import InvalidParameterError, StepIndexError, UnderflowError
from speed_diffusion.schedule import ScheduleSpec, build_schedule, forward_sample, table_from_betas


def log_space_alpha_bar(betas, t):
    """Extended-precision oracle: exp(sum ln(1 - beta_s)) for s <= t."""
    with mpmath.workdps(50):
        total = mpmath.fsum(mpmath.log(1 - mpmath.mpf(float(b))) for b in betas[:t])
        return float(mpmath.exp(total))


def test_ddpm_linear_endpoints(ddpm_table):
    assert ddpm_table.beta[0] == pytest.approx(1e-4, rel=1e-15)
    assert ddpm_table.beta[-1] == pytest.approx(0.02, rel=1e-15)
    assert ddpm_table.delta_beta == pytest.approx(0.0199, rel=1e-12)
    assert ddpm_table.beta0 == pytest.approx(8.01e-5, rel=1e-12)


def test_linear_is_arithmetic_series(ddpm_table):
    steps = np.diff(ddpm_table.beta)
    np.testing.assert_allclose(steps, 0.0199 / 999, rtol=1e-9)


def test_linear_envelope_parameterization(ddpm_table):
    # beta_t = beta0 + delta_beta t / T holds at t=1; later steps exceed it by
    # delta_beta (t - 1) / (T (T - 1)) because the endpoints are pinned
    t = ddpm_table.steps
    envelope = ddpm_table.beta0 + ddpm_table.delta_beta * t / ddpm_table.T
    gap = ddpm_table.beta - envelope
    assert gap[0] == pytest.approx(0.0, abs=1e-18)
    assert np.all(gap >= -1e-18)
    np.testing.assert_allclose(gap, ddpm_table.delta_beta * (t - 1) / (1000 * 999), atol=1e-16)


def test_two_step_product():
    table = build_schedule(ScheduleSpec("linear", 2, 0.1, 0.3))
    assert table.alpha_bar[1] == pytest.approx((1 - 0.1) * (1 - 0.3), rel=1e-14)


def test_alpha_bar_matches_log_space_oracle(ddpm_table):
    expected = log_space_alpha_bar(ddpm_table.beta, 1000)
    assert expected == pytest.approx(4.0358297653756833e-05, rel=1e-14)
    assert ddpm_table.alpha_bar[-1] == pytest.approx(expected, rel=1e-12)
    for t in (1, 10, 220, 478, 999):
        assert ddpm_table.alpha_bar[t - 1] == pytest.approx(
            log_space_alpha_bar(ddpm_table.beta, t), rel=1e-12
        )


@pytest.mark.parametrize("kind", ["linear", "quadratic", "cosine"])
def test_table_invariants(kind):
    table = build_schedule(ScheduleSpec(kind, 1000))
    assert np.all((table.beta > 0) & (table.beta < 1))
    np.testing.assert_array_equal(table.alpha, 1 - table.beta)
    np.testing.assert_allclose(table.alpha_bar[1:], table.alpha_bar[:-1] * table.alpha[1:], rtol=1e-12)
    assert table.alpha_bar[0] == pytest.approx(table.alpha[0], rel=1e-15)
    assert np.all(np.diff(table.alpha_bar) < 0)
    assert table.delta_beta == pytest.approx(table.beta.max() - table.beta.min())
    assert table.beta0 == pytest.approx(table.beta[0] - table.delta_beta / table.T)


def test_quadratic_is_linear_in_sqrt_beta():
    table = build_schedule(ScheduleSpec("quadratic", 100, 1e-4, 0.02))
    root = np.sqrt(table.beta)
    np.testing.assert_allclose(np.diff(root), (math.sqrt(0.02) - math.sqrt(1e-4)) / 99, rtol=1e-9)


def test_cosine_follows_squared_cosine():
    T, s = 1000, 0.008
    table = build_schedule(ScheduleSpec("cosine", T, s_off=s))
    f = lambda t: math.cos((t / T + s) / (1 + s) * math.pi / 2) ** 2
    for t in (1, 100, 500, 900):
        assert table.alpha_bar[t - 1] == pytest.approx(f(t) / f(0), rel=1e-9)
    assert table.beta.max() <= 0.999


def test_envelope_upper_bound_on_alpha_bar(ddpm_table):
    t = ddpm_table.steps
    bound = np.exp(-(ddpm_table.beta0 * t + ddpm_table.delta_beta * t**2 / (2 * ddpm_table.T)))
    assert np.all(ddpm_table.alpha_bar <= bound + 1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(T=1),
        dict(beta_start=0.0),
        dict(beta_start=0.02, beta_end=0.01),
        dict(beta_end=1.0),
        dict(kind="sigmoid"),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidParameterError):
        ScheduleSpec(**kwargs)


def test_underflow_detected():
    with pytest.raises(UnderflowError):
        build_schedule(ScheduleSpec("linear", 200000, 0.5, 0.9))


def test_table_from_betas_rejects_out_of_range():
    with pytest.raises(InvalidParameterError):
        table_from_betas([0.1, 1.0])


def test_forward_sample_at_last_step(ddpm_table):
    ab = log_space_alpha_bar(ddpm_table.beta, 1000)
    out = forward_sample(ddpm_table, [1.0, 0.0], 1000, [0.0, 1.0])
    np.testing.assert_allclose(out, [math.sqrt(ab), math.sqrt(1 - ab)], rtol=1e-12)


def test_forward_sample_zero_noise_limit():
    # alpha_bar_1 = 1 - 1e-12 is the closest realizable table to the noiseless limit
    table = table_from_betas([1e-12, 0.5])
    x0 = np.array([0.3, -1.2])
    np.testing.assert_allclose(forward_sample(table, x0, 1, [5.0, 5.0]), x0, atol=1e-5)


def test_forward_sample_zero_data_is_scaled_noise(ddpm_table):
    eps = np.array([0.7, -0.2])
    for t in (1, 300, 1000):
        np.testing.assert_allclose(
            forward_sample(ddpm_table, [0.0, 0.0], t, eps),
            math.sqrt(1 - ddpm_table.alpha_bar[t - 1]) * eps,
            rtol=1e-15,
        )


def test_forward_sample_batched_steps(ddpm_table, rng):
    x0 = rng.standard_normal((5, 2))
    eps = rng.standard_normal((5, 2))
    t = np.array([1, 10, 100, 500, 1000])
    batched = forward_sample(ddpm_table, x0, t, eps)
    for i in range(5):
        np.testing.assert_array_equal(batched[i], forward_sample(ddpm_table, x0[i], t[i], eps[i]))


@pytest.mark.parametrize("t", [0, 1001, -3])
def test_forward_sample_out_of_range(ddpm_table, t):
    with pytest.raises(StepIndexError):
        forward_sample(ddpm_table, [0.0, 0.0], t, [0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(
    t=st.integers(1, 1000),
    x0=st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    eps=st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    a=st.floats(-3, 3),
)
def test_forward_sample_is_affine(ddpm_table, t, x0, eps, a):
    x0, eps = np.array(x0), np.array(eps)
    ab = ddpm_table.alpha_bar[t - 1]
    assert math.sqrt(ab) ** 2 + math.sqrt(1 - ab) ** 2 == pytest.approx(1.0, abs=1e-14)
    lhs = forward_sample(ddpm_table, a * x0, t, a * eps)
    np.testing.assert_allclose(lhs, a * forward_sample(ddpm_table, x0, t, eps), atol=1e-12)


def test_table_is_read_only(ddpm_table):
    with pytest.raises(ValueError):
        ddpm_table.beta[0] = 0.5
