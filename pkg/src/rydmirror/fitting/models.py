"""Model functions and fit wrappers for spectra, Rabi flopping, lifetimes and loss."""
from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from ..dynamics import p_state_fraction
from ..susceptibility import chi_two_level, eit_response
from ..units import TransitionParams
from .lm import FitError, FitResult, fit, fit_best_of


def lorentzian(x, offset, amplitude, center, width):
    """``offset + amplitude * L(x)`` with unit-height L of full width ``width``."""
    hw2 = (0.5 * width) ** 2
    return offset + amplitude * hw2 / ((x - center) ** 2 + hw2)


def fit_lorentzian(x, y, sigma=None, init=None) -> FitResult:
    """Single Lorentzian peak or dip; ``width`` is the FWHM in units of ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if init is None:
        base = float(np.median(np.r_[y[:3], y[-3:]]))
        i = int(np.argmax(np.abs(y - base)))
        amp = float(y[i] - base)
        above = np.abs(y - base) >= 0.5 * abs(amp)
        span = float(x.max() - x.min())
        width = max(float(np.ptp(x[above])), span / len(x))
        init = dict(offset=base, amplitude=amp, center=float(x[i]), width=width)
    bounds = {"width": (0.0, np.inf)}
    return fit(lorentzian, x, y, sigma, init, bounds=bounds)


def rydberg_eit_model(delta_p, amplitude, offset, p_s, gamma_eit, omega_c, u_int, gamma_r=0.0):
    """``offset + amplitude * Im chi`` of the two-level/EIT mixture.

    ``gamma_eit`` is the probe half width so the full width is ``2 * gamma_eit``;
    the control field is on resonance.
    """
    g = 2.0 * abs(gamma_eit)
    ta = chi_two_level(delta_p, g)
    eit = eit_response(delta_p, 0.0, abs(omega_c), g, gamma_r, u_int)
    return offset + amplitude * np.imag(p_s * ta + (1 - p_s) * eit)


def fit_rydberg_eit_spectrum(delta_p, y, sigma=None, transition: TransitionParams = TransitionParams(),
                             init=None) -> FitResult:
    """Fit amplitude, offset, P_S, Gamma_EIT, Omega_c and U_int (angular units)."""
    delta_p = np.asarray(delta_p, dtype=float)
    y = np.asarray(y, dtype=float)
    gr = transition.gamma_r.value

    def model(x, amplitude, offset, p_s, gamma_eit, omega_c, u_int):
        return rydberg_eit_model(x, amplitude, offset, p_s, gamma_eit, omega_c, u_int, gr)

    if init is None:
        ge = transition.gamma_e.value
        base = float(np.median(np.r_[y[:3], y[-3:]]))
        amp = float(y.max() - base)
        pos = delta_p > 0
        split = float(delta_p[pos][np.argmax(y[pos])] - delta_p[~pos][np.argmax(y[~pos])]) if pos.any() and (~pos).any() else ge
        starts = []
        for ps in (0.05, 0.3):
            starts.append(dict(amplitude=amp, offset=base, p_s=ps, gamma_eit=0.5 * ge,
                               omega_c=max(abs(split), 0.1 * ge), u_int=0.0))
    else:
        starts = [init]
    bounds = {"p_s": (0.0, 1.0), "gamma_eit": (0.0, np.inf), "omega_c": (0.0, np.inf)}
    return fit_best_of(model, delta_p, y, sigma, starts, bounds=bounds)


def beating_rabi_model(t, omega_uv, tau_decay, w0, w2, amplitude, offset):
    w1 = 1.0 - w0 - w2
    damp = np.exp(-t / tau_decay)
    pop = w0 + w1 * 0.5 * (1 + damp * np.cos(omega_uv * t)) \
        + w2 * 0.5 * (1 + damp * np.cos(np.sqrt(2.0) * omega_uv * t))
    return offset + amplitude * pop


def _dominant_angular_frequency(t, y) -> float:
    t = np.asarray(t, dtype=float)
    grid = np.linspace(t.min(), t.max(), max(len(t), 256) * 4)
    yi = np.interp(grid, t, y - np.mean(y))
    spec = np.abs(np.fft.rfft(yi * np.hanning(len(yi)), n=8 * len(yi)))
    f = np.fft.rfftfreq(8 * len(yi), d=grid[1] - grid[0])
    spec[0] = 0
    return 2 * np.pi * float(f[np.argmax(spec)])


def _with_derived(res: FitResult, name: str, value: float, grad: np.ndarray, at: int) -> FitResult:
    """Insert a parameter that is a linear function of the fitted ones."""
    cov = res.covariance
    var = float(grad @ cov @ grad)
    cross = cov @ grad
    n = len(res.names)
    new = np.zeros((n + 1, n + 1))
    idx = [i for i in range(n + 1) if i != at]
    new[np.ix_(idx, idx)] = cov
    new[at, idx] = cross
    new[idx, at] = cross
    new[at, at] = var
    names = res.names[:at] + (name,) + res.names[at:]
    values = np.insert(res.values, at, value)
    return FitResult(names, values, new, res.residuals, res.chi_sq, res.dof, res.converged,
                     res.n_iter, res.message, res.singular, res.fixed, dict(res.flags))


def fit_damped_beating_rabi(t, y, sigma=None, init=None) -> FitResult:
    """Damped flopping at ``Omega`` and ``sqrt(2) Omega``.

    The zero-atom weight ``w0`` is held at 0: a constant fraction is
    indistinguishable from the offset/amplitude pair. ``w1 = 1 - w0 - w2``
    is reported as a derived parameter.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    span = float(t.max() - t.min())
    if init is None:
        om = _dominant_angular_frequency(t, y)
        amp = float(y.max() - y.min()) or 1.0
        starts = [dict(omega_uv=om, tau_decay=tau, w0=0.0, w2=w2, amplitude=amp,
                       offset=float(y.min()))
                  for tau in (0.5 * span, 2 * span) for w2 in (0.1, 0.4)]
    else:
        starts = [dict(init, w0=init.get("w0", 0.0))]
    bounds = {"omega_uv": (0.0, np.inf), "tau_decay": (1e-3 * span, 1e4 * span),
              "w2": (0.0, 1.0)}
    res = fit_best_of(beating_rabi_model, t, y, sigma, starts, bounds=bounds, fixed=("w0",))
    i0, i2 = res.names.index("w0"), res.names.index("w2")
    grad = np.zeros(len(res.names))
    grad[i0] = grad[i2] = -1.0
    w1 = 1.0 - res.values[i0] - res.values[i2]
    return _with_derived(res, "w1", w1, grad, i2)


def lifetime_model(delay, eta_init, tau, offset, t_mirror, t_eit, probe_duration):
    return offset + t_eit + (t_mirror - t_eit) * p_state_fraction(eta_init, tau, probe_duration, delay)


def fit_lifetime(delay, y, bounds: Tuple[float, float], probe_duration: float, sigma=None,
                 init=None, tau_max: float = 1.0) -> FitResult:
    """Fit ``eta_init``, ``tau`` and ``offset`` of the delayed-probe transmittance.

    ``bounds = (T_mirror, T_EIT)`` pins the two extremes between which the
    P-state fraction interpolates. When the data do not constrain ``tau``
    the result is flagged and a one-sigma profile lower bound is attached.
    """
    delay = np.asarray(delay, dtype=float)
    y = np.asarray(y, dtype=float)
    if delay.size < 4:
        raise FitError("need at least four delay points")
    t_mirror, t_eit = map(float, bounds)
    if t_mirror == t_eit:
        raise FitError("mirror and EIT transmittances must differ")

    def model(x, eta_init, tau, offset):
        return lifetime_model(x, eta_init, tau, offset, t_mirror, t_eit, probe_duration)

    span = float(np.ptp(delay)) or probe_duration
    if init is None:
        starts = [dict(eta_init=eta, tau=tau, offset=0.0)
                  for eta in (0.5, 0.9) for tau in (0.5 * span, 3 * span)]
    else:
        starts = [init]
    pb = {"eta_init": (0.0, 1.0), "tau": (1e-3 * span, tau_max)}
    res = fit_best_of(model, delay, y, sigma, starts, bounds=pb)
    tau, sd = res["tau"], res.sd("tau")
    identifiable = not (res.singular or tau >= 0.99 * tau_max or not np.isfinite(sd) or sd > tau)
    res.flags["tau_identifiable"] = identifiable
    if not identifiable:
        res.flags["tau_lower_bound"] = _profile_lower_bound(model, delay, y, sigma, res, pb)
    return res


def _profile_lower_bound(model, x, y, sigma, res: FitResult, pb) -> float:
    """Smallest tau whose chi-square stays within one unit of the best.

    ``eta_init`` is re-optimised at each tau while ``offset`` stays at its
    best value; a free offset would absorb any level change and leave the
    short-tau side unbounded.
    """
    scale = 1.0 if sigma is not None else max(res.reduced_chi_sq, 1e-300)
    best = res.chi_sq
    lo = pb["tau"][0]
    taus = np.geomspace(res["tau"], lo, 60)
    bound = taus[0]
    for tau in taus[1:]:
        sub = fit(model, x, y, sigma, dict(eta_init=res["eta_init"], tau=tau, offset=res["offset"]),
                  bounds=pb, fixed=("tau", "offset"))
        if (sub.chi_sq - best) / scale > 1.0:
            break
        bound = tau
    return float(bound)


def fit_linear_loss(x, y, sigma=None) -> FitResult:
    """Ordinary (or weighted) least-squares line ``y = intercept + rate * x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.size != y.size:
        raise FitError("need at least two (x, y) points of equal length")
    if np.ptp(x) == 0:
        raise FitError("all x values are equal; slope undefined")
    w = np.ones_like(y) if sigma is None else 1.0 / np.broadcast_to(np.asarray(sigma, float), y.shape)
    a = np.c_[np.ones_like(x), x] * w[:, None]
    coef, *_ = np.linalg.lstsq(a, y * w, rcond=None)
    r = a @ coef - y * w
    chi_sq = float(r @ r)
    dof = x.size - 2
    cov = np.linalg.inv(a.T @ a)
    if sigma is None:
        cov = cov * (chi_sq / dof if dof > 0 else np.nan)
    return FitResult(("intercept", "rate"), coef, cov, (r / w), chi_sq, dof, True, 0, "closed form")


def fit_sqrt_noise(mean, sd, sigma=None) -> FitResult:
    """``sd = slope * sqrt(mean)`` through the origin (closed form)."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if mean.size < 2:
        raise FitError("need at least two (mean, sd) pairs")
    if np.any(mean <= 0):
        raise FitError("means must be positive")
    if np.ptp(mean) == 0:
        raise FitError("all means are equal; the square-root law is not constrained")
    w = np.ones_like(sd) if sigma is None else 1.0 / np.broadcast_to(np.asarray(sigma, float), sd.shape)
    u = np.sqrt(mean) * w
    slope = float(u @ (sd * w) / (u @ u))
    r = u * slope - sd * w
    chi_sq = float(r @ r)
    dof = mean.size - 1
    var = 1.0 / float(u @ u)
    if sigma is None:
        var *= chi_sq / dof
    return FitResult(("slope",), np.array([slope]), np.array([[var]]), r / w, chi_sq, dof, True, 0,
                     "closed form")


def lorentzian_width(x, y, sigma=None) -> Tuple[float, float, Optional[FitResult]]:
    """FWHM and centre of the dominant Lorentzian feature in ``y(x)``."""
    res = fit_lorentzian(x, y, sigma)
    return res["width"], res["center"], res
