"""Least-squares engine and the model fits built on it."""
from .lm import FitError, FitResult, fit, fit_best_of, numeric_jacobian
from .models import (
    beating_rabi_model,
    fit_damped_beating_rabi,
    fit_linear_loss,
    fit_lifetime,
    fit_lorentzian,
    fit_rydberg_eit_spectrum,
    fit_sqrt_noise,
    lifetime_model,
    lorentzian,
    rydberg_eit_model,
)

__all__ = [
    "FitError", "FitResult", "fit", "fit_best_of", "numeric_jacobian",
    "beating_rabi_model", "fit_damped_beating_rabi", "fit_linear_loss", "fit_lifetime",
    "fit_lorentzian", "fit_rydberg_eit_spectrum", "fit_sqrt_noise", "lifetime_model",
    "lorentzian", "rydberg_eit_model",
]
