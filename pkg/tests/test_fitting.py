import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from rydmirror.fitting import (FitError, fit, fit_damped_beating_rabi, fit_lifetime, fit_linear_loss,
                               fit_lorentzian, fit_rydberg_eit_spectrum, fit_sqrt_noise, lorentzian,
                               rydberg_eit_model)
from rydmirror.fitting.lm import numeric_jacobian
from rydmirror.fitting.models import beating_rabi_model, lifetime_model
from rydmirror.rng import stream
from rydmirror.units import TWO_PI, TransitionParams

MHZ = TWO_PI * 1e6


def _lor_data(seed, sd=0.01):
    x = np.linspace(-10, 10, 81)
    y = lorentzian(x, 1.0, -0.65, 0.4, 3.75) + sd * stream(seed).standard_normal(x.size)
    return x, y


def test_forward_jacobian_matches_central_and_analytic():
    x = np.linspace(-3, 3, 25)
    p = np.array([0.2, 1.3, 0.1, 1.7])

    def f(q):
        return lorentzian(x, *q)

    fwd = numeric_jacobian(f, p)
    cen = numeric_jacobian(f, p, method="central")
    hw = 0.5 * p[3]
    den = (x - p[2]) ** 2 + hw**2
    exact = np.c_[np.ones_like(x), hw**2 / den, p[1] * hw**2 * 2 * (x - p[2]) / den**2,
                  p[1] * (hw * den - hw**3) / den**2]
    assert np.allclose(cen, exact, rtol=1e-7, atol=1e-9)
    assert np.allclose(fwd, exact, rtol=1e-4, atol=1e-6)


def test_lorentzian_fit_matches_scipy():
    x, y = _lor_data(1)
    res = fit_lorentzian(x, y)
    ref = optimize.least_squares(lambda p: lorentzian(x, *p) - y, res.values + 0.05, xtol=1e-14, ftol=1e-14)
    assert res.converged
    assert np.allclose(res.values, ref.x, rtol=1e-6, atol=1e-8)
    j = ref.jac
    cov = np.linalg.inv(j.T @ j) * (2 * ref.cost / (x.size - 4))
    assert np.allclose(res.covariance, cov, rtol=1e-3)


def test_fit_bounds_fixed_and_report():
    x, y = _lor_data(2)
    res = fit(lorentzian, x, y, 0.01, dict(offset=1.0, amplitude=-0.5, center=0.0, width=3.0),
              bounds={"center": (-0.1, 0.1)}, fixed=("offset",))
    assert res["offset"] == 1.0 and res.sd("offset") == 0.0
    assert -0.1 <= res["center"] <= 0.1
    text = res.report()
    for name in ("offset", "amplitude", "center", "width", "correlation"):
        assert name in text
    c = res.correlation()
    free = [i for i, n in enumerate(res.names) if n != "offset"]
    assert np.allclose(np.diag(c)[free], 1.0)


@pytest.mark.parametrize("kw", [
    dict(init=None),
    dict(init=dict(a=1.0), bounds={"b": (0, 1)}),
    dict(init=dict(a=5.0), bounds={"a": (0, 1)}),
    dict(init=dict(a=1.0), fixed=("a",)),
    dict(init=dict(a=1.0), sigma=-1.0),
])
def test_fit_errors(kw):
    with pytest.raises(FitError):
        fit(lambda x, a: a * x, np.arange(5.0), np.arange(5.0), **kw)


def test_non_finite_data_rejected():
    with pytest.raises(FitError):
        fit(lambda x, a: a * x, np.arange(3.0), np.array([0, np.nan, 1]), init=dict(a=1.0))


@settings(max_examples=8, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-2.0, 2.0))
def test_affine_rescaling_equivariance(k, b):
    x, y = _lor_data(3)
    r0 = fit_lorentzian(x, y)
    r1 = fit_lorentzian(x, k * y + b)
    assert r1["center"] == pytest.approx(r0["center"], rel=1e-5, abs=1e-7)
    assert r1["width"] == pytest.approx(r0["width"], rel=1e-5)
    assert r1["amplitude"] == pytest.approx(k * r0["amplitude"], rel=1e-5)
    assert r1["offset"] == pytest.approx(k * r0["offset"] + b, rel=1e-5, abs=1e-7)


def test_rydberg_eit_fit_recovers():
    tr = TransitionParams()
    d = np.linspace(-12, 12, 121) * MHZ
    ge = tr.gamma_e.value
    y = rydberg_eit_model(d, 1.0, 0.0, 0.16, 0.5 * ge, 6.7 * MHZ, 0.0, tr.gamma_r.value)
    res = fit_rydberg_eit_spectrum(d, y + 0.005 * stream(4).standard_normal(d.size), 0.005, tr)
    assert res["p_s"] == pytest.approx(0.16, abs=3 * res.sd("p_s"))
    assert res["omega_c"] / MHZ == pytest.approx(6.7, rel=0.02)


def test_rabi_fit_recovers_and_reports_w1():
    t = np.linspace(0, 4e-6, 121)
    om = 1.22 * MHZ
    y = beating_rabi_model(t, om, 6e-6, 0.0, 0.28, 1.0, 0.0) + 0.01 * stream(5).standard_normal(t.size)
    res = fit_damped_beating_rabi(t, y, 0.01)
    assert res["omega_uv"] == pytest.approx(om, rel=0.01)
    assert res["w1"] == pytest.approx(1 - res["w2"])
    assert res.sd("w1") == pytest.approx(res.sd("w2"))


def test_lifetime_flat_data_is_flagged():
    delay = np.linspace(0, 60e-6, 13)
    y = np.full(delay.size, 0.35) + 0.005 * stream(6).standard_normal(delay.size)
    res = fit_lifetime(delay, y, (0.35, 0.9), 20e-6, sigma=0.005)
    assert res.flags["tau_identifiable"] is False
    assert res.flags["tau_lower_bound"] > 60e-6


def test_lifetime_fit_recovers():
    delay = np.linspace(0, 60e-6, 13)
    y = lifetime_model(delay, 0.85, 27e-6, 0.0, 0.35, 0.9, 20e-6)
    res = fit_lifetime(delay, y + 0.005 * stream(7).standard_normal(delay.size), (0.35, 0.9), 20e-6, 0.005)
    assert res.flags["tau_identifiable"]
    assert res["tau"] == pytest.approx(27e-6, abs=3 * res.sd("tau"))
    with pytest.raises(FitError):
        fit_lifetime(delay[:3], y[:3], (0.35, 0.9), 20e-6)


def test_linear_loss_matches_polyfit():
    x = np.linspace(0, 10, 20)
    y = 1 - 0.055 * x + 0.01 * stream(8).standard_normal(x.size)
    res = fit_linear_loss(x, y)
    slope, icpt = np.polyfit(x, y, 1)
    assert res["rate"] == pytest.approx(slope) and res["intercept"] == pytest.approx(icpt)
    with pytest.raises(FitError):
        fit_linear_loss(np.ones(4), y[:4])


def test_sqrt_noise_exact():
    m = np.linspace(10, 100, 10)
    res = fit_sqrt_noise(m, 2.5 * np.sqrt(m))
    assert res["slope"] == pytest.approx(2.5)
    with pytest.raises(FitError):
        fit_sqrt_noise(np.array([1.0, -1.0]), np.array([1.0, 1.0]))
