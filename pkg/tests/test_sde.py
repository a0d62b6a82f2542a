import numpy as np
import pytest

from speed_diffusion import sde
from speed_diffusion.errors import InvalidParameterError, NumericError
from speed_diffusion.increments import ACCELERATION, CONVERGENCE, DECELERATION
from speed_diffusion.sde import (
    area_decomposition_general,
    central_difference,
    custom_schedule,
    increment_moments_general,
    increment_rates_general,
    preset_schedule,
    vp_from_table,
)


def contiguous_bands(labels):
    bands = [labels[0]]
    for a in labels[1:]:
        if a != bands[-1]:
            bands.append(a)
    return bands


def test_vp_at_origin():
    vp = preset_schedule("VP")
    assert vp.s(0.0) == 1.0
    assert vp.sigma2(0.0) == 0.0


def test_ve_and_edm_values():
    ve, edm = preset_schedule("ve"), preset_schedule("edm")
    assert ve.sigma2(4.0) == 4.0 and ve.s(4.0) == 1.0
    assert edm.sigma2(3.0) == 9.0
    # coincident endpoints: Sigma = 2 s^2 sigma^2
    assert increment_moments_general(edm, 3.0, 1e-300).Sigma == pytest.approx(18.0, rel=1e-12)


def test_ve_edm_increment_examples():
    ve = increment_moments_general(preset_schedule("VE"), 1.0, 1.0)
    assert ve.Delta == 0.0 and ve.Sigma == 3.0
    edm = increment_moments_general(preset_schedule("EDM"), 1.0, 1.0)
    assert edm.Delta == 0.0 and edm.Sigma == 5.0


def test_vp_vanishing_step():
    g = increment_moments_general(preset_schedule("VP"), 0.0, 1e-9)
    assert abs(g.Delta) < 1e-9 and abs(g.Sigma) < 1e-9


def test_ve_sigma_rate_is_two():
    t = np.linspace(0, 50, 101)
    r = increment_rates_general(preset_schedule("VE"), t, 0.5)
    np.testing.assert_array_equal(r.Sigma_dot, 2.0)
    np.testing.assert_array_equal(r.Delta_dot, 0.0)


def test_edm_sigma_rate():
    t = np.linspace(0, 80, 161)
    r = increment_rates_general(preset_schedule("EDM"), t, 0.25)
    np.testing.assert_allclose(r.Sigma_dot, 2 * (t + 0.25) + 2 * t, rtol=1e-15)
    m = increment_moments_general(preset_schedule("EDM"), t, 0.25)
    np.testing.assert_array_equal(m.Delta, 0.0)


@pytest.mark.parametrize("kind,t_max", [("VP", 1.0), ("VE", 50.0), ("EDM", 80.0)])
def test_rates_match_finite_differences(kind, t_max):
    sched = preset_schedule(kind)
    dt = t_max / 999
    t = np.linspace(0.01 * t_max, 0.99 * t_max, 200)
    rates = increment_rates_general(sched, t, dt)
    h = 1e-4 * t_max
    fd_delta = central_difference(lambda u: increment_moments_general(sched, u, dt).Delta, t, h)
    fd_sigma = central_difference(lambda u: increment_moments_general(sched, u, dt).Sigma, t, h)
    np.testing.assert_allclose(rates.Sigma_dot, fd_sigma, rtol=1e-3)
    np.testing.assert_allclose(rates.Delta_dot, fd_delta, rtol=1e-3, atol=1e-12)
    assert np.all(np.isfinite(rates.Sigma_dot))


def test_vp_sigma_rate_positive_near_zero():
    r = increment_rates_general(preset_schedule("VP"), np.array([0.0, 1e-3, 1e-2]), 1e-3)
    assert np.all(r.Sigma_dot > 0)


def test_vp_identity():
    vp = preset_schedule("VP")
    t = np.linspace(0, 1, 1000)
    np.testing.assert_allclose(vp.s(t) ** 2 * (1 + vp.sigma2(t)), 1.0, rtol=1e-10)


def test_vp_sdot_matches_table_form():
    # table form: s_dot = -sigma sigma_dot / (1 + sigma^2)^(3/2)
    vp = preset_schedule("VP")
    t = np.linspace(0.01, 1, 50)
    sigma = np.sqrt(vp.sigma2(t))
    sigma_dot = (1 + sigma**2) * (19.9 * t + 0.0801) / (2 * sigma)
    np.testing.assert_allclose(vp.s_dot(t), -sigma * sigma_dot / (1 + sigma**2) ** 1.5, rtol=1e-12)
    np.testing.assert_allclose(vp.sigma2_dot(t), 2 * sigma * sigma_dot, rtol=1e-12)


def test_vp_matches_discrete_envelope(ddpm_table):
    vp = vp_from_table(ddpm_table)
    steps = np.linspace(1, 1000, 100)
    envelope = np.exp(-(ddpm_table.beta0 * steps + ddpm_table.delta_beta * steps**2 / (2 * ddpm_table.T)))
    np.testing.assert_allclose(vp.s(steps / ddpm_table.T) ** 2, envelope, rtol=1e-6)


def test_vp_three_bands():
    vp = preset_schedule("VP")
    gp = area_decomposition_general(vp, np.linspace(0, 1, 1000), r=10.0)
    assert contiguous_bands(gp.area) == [ACCELERATION, DECELERATION, CONVERGENCE]
    # independent scan of the rate and the variance
    assert gp.i_ad == int(np.argmax(gp.Sigma_dot))
    assert np.all(gp.Sigma[gp.i_dc :] >= 0.9 * gp.Sigma.max())
    assert gp.Sigma[gp.i_dc - 1] < 0.9 * gp.Sigma.max()
    # peak of the rate sits at the same forward ratio as the discrete t_ad
    assert gp.t[gp.i_ad] == pytest.approx(0.22, abs=0.002)


def test_ve_has_no_acceleration_band():
    gp = area_decomposition_general(preset_schedule("VE"), np.linspace(0, 100, 500))
    assert contiguous_bands(gp.area) == [DECELERATION, CONVERGENCE]


def test_edm_has_no_deceleration_band():
    gp = area_decomposition_general(preset_schedule("EDM"), np.linspace(0, 80, 500))
    assert np.all(np.diff(gp.Sigma_dot) > 0)
    assert contiguous_bands(gp.area) == [ACCELERATION, CONVERGENCE]


def test_degenerate_grid():
    with pytest.raises(InvalidParameterError):
        area_decomposition_general(preset_schedule("VE"), [0.0, 1.0])
    with pytest.raises(InvalidParameterError):
        area_decomposition_general(preset_schedule("VE"), [0.0, 2.0, 1.0])


def test_domain_errors():
    with pytest.raises(InvalidParameterError):
        increment_moments_general(preset_schedule("VE"), -1.0, 0.1)
    with pytest.raises(InvalidParameterError):
        increment_moments_general(preset_schedule("VE"), 1.0, 0.0)
    undefined = custom_schedule(
        lambda t: np.ones_like(t),
        lambda t: np.log(np.asarray(t) - 1.0),
        lambda t: np.zeros_like(t),
        lambda t: 1.0 / (np.asarray(t) - 1.0),
        check_points=[2.0, 3.0],
    )
    with pytest.raises(NumericError):
        increment_moments_general(undefined, 0.5, 0.1)


def test_preset_parameter_validation():
    with pytest.raises(InvalidParameterError):
        preset_schedule("VP", {"gamma": 1.0})
    with pytest.raises(InvalidParameterError):
        preset_schedule("VE", {"delta_beta": 1.0})
    with pytest.raises(InvalidParameterError):
        preset_schedule("subVP")


def test_custom_schedule_checks_rates():
    ok = custom_schedule(
        lambda t: np.exp(-np.asarray(t)),
        lambda t: np.asarray(t) ** 3,
        lambda t: -np.exp(-np.asarray(t)),
        lambda t: 3 * np.asarray(t) ** 2,
        check_points=np.linspace(0.1, 2, 20),
    )
    assert ok.kind == "custom"
    with pytest.raises(InvalidParameterError):
        custom_schedule(
            lambda t: np.exp(-np.asarray(t)),
            lambda t: np.asarray(t) ** 3,
            lambda t: np.exp(-np.asarray(t)),
            lambda t: 3 * np.asarray(t) ** 2,
            check_points=np.linspace(0.1, 2, 20),
        )


def test_sigma_nonnegative_and_monotone_presets():
    for kind in ("VP", "VE", "EDM"):
        sched = preset_schedule(kind)
        t = sde.default_grid(sched, 200)
        v = sched.sigma2(t)
        assert np.all(v >= 0) and np.all(np.diff(v) >= 0)
        assert np.all(sched.s(t) > 0)
