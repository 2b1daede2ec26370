"""Closed-form probe susceptibilities and blockade estimates.

Susceptibilities are returned as plain complex numbers (or arrays) already
normalised to ``chi0``. The sign convention makes ``Im(chi) >= 0`` mean
absorption.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .units import Frequency, LaserDrive, TransitionParams, angular


def _rabi(x):
    if isinstance(x, LaserDrive):
        return x.rabi.value
    return angular(x)


@dataclass(frozen=True)
class EitConditions:
    probe: LaserDrive
    control: LaserDrive
    transition: TransitionParams = TransitionParams()
    u_int: Frequency = Frequency(0.0)

    def __post_init__(self):
        if not isinstance(self.u_int, Frequency):
            object.__setattr__(self, "u_int", Frequency(self.u_int))

    @property
    def two_photon_detuning(self) -> Frequency:
        return Frequency(self.probe.detuning.value + self.control.detuning.value)


def chi_two_level(delta_p, gamma_e):
    """i G / (G - 2 i delta_p): resonant value is ``1j``."""
    g = angular(gamma_e)
    if not g > 0:
        raise ValueError("gamma_e must be positive")
    d = np.asarray(angular(delta_p), dtype=float)
    out = 1j * g / (g - 2j * d)
    return out if out.ndim else complex(out)


def eit_response(delta_p, delta_c, omega_c, gamma_e, gamma_r, u_int=0.0):
    """Vectorised ladder-EIT susceptibility with an additive interaction shift.

    The interaction shift enters the two-photon detuning as
    ``delta_p + delta_c + u_int``. Exact two-photon resonance with a lossless
    Rydberg level gives perfect transparency (zero), not a division error.
    """
    g = angular(gamma_e)
    if not g > 0:
        raise ValueError("gamma_e must be positive")
    oc = float(_rabi(omega_c))
    gr = float(angular(gamma_r))
    d = np.asarray(angular(delta_p), dtype=float)
    two_photon = d + float(angular(delta_c)) + np.asarray(angular(u_int), dtype=float)
    inner = gr - 2j * two_photon
    base = g - 2j * d
    if oc == 0.0:
        out = 1j * g / base + 0 * inner
    else:
        dark = inner == 0
        safe = np.where(dark, 1.0, inner)
        out = np.where(dark, 0j, 1j * g / (base + oc**2 / safe))
    return out if np.ndim(out) else complex(out)


def chi_eit(cond: EitConditions):
    t = cond.transition
    return eit_response(
        cond.probe.detuning, cond.control.detuning, cond.control.rabi,
        t.gamma_e, t.gamma_r, cond.u_int,
    )


def chi_eit_sweep(delta_p, cond: EitConditions):
    """``chi_eit`` over a grid of probe detunings at fixed control detuning."""
    t = cond.transition
    return eit_response(delta_p, cond.control.detuning, cond.control.rabi,
                        t.gamma_e, t.gamma_r, cond.u_int)


def chi_rydberg_eit(cond: EitConditions, p_s: float, delta_p=None):
    """Two-level / EIT mixture weighted by the S-state fraction ``p_s``.

    ``delta_p`` optionally overrides the probe detuning with a grid.
    """
    if not 0.0 <= p_s <= 1.0:
        raise ValueError("p_s must lie in [0, 1]")
    if delta_p is None:
        delta_p = cond.probe.detuning
    ta = chi_two_level(delta_p, cond.transition.gamma_e)
    eit = chi_eit_sweep(delta_p, cond)
    return p_s * ta + (1.0 - p_s) * eit


def rydberg_fraction(omega_p, omega_c, delta_p, delta_2, gamma_e_half, n_sa):
    """Collectively enhanced S-state fraction of the array atoms.

    ``omega_p``/``omega_c`` may be LaserDrives or Rabi frequencies.
    Vectorised over ``delta_p`` and ``delta_2``.
    """
    if n_sa < 1:
        raise ValueError("n_sa must be >= 1")
    op = _rabi(omega_p)
    oc = _rabi(omega_c)
    g = angular(gamma_e_half)
    dp = np.asarray(angular(delta_p), dtype=float)
    d2 = np.asarray(angular(delta_2), dtype=float)
    num = n_sa * op**2 * oc**2
    den = num + (oc**2 - 4 * dp * d2) ** 2 + 16 * d2**2 * g**2
    out = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out if out.ndim else float(out)


def blockade_radius(c6, gamma_e, omega_c) -> float:
    """(2 C6 Gamma_e / Omega_c^2)^(1/6); ``c6`` in rad/s * m^6."""
    c6 = float(angular(c6))
    g = float(angular(gamma_e))
    oc = float(_rabi(omega_c))
    if not (c6 > 0 and g > 0 and oc > 0):
        raise ValueError("c6, gamma_e and omega_c must all be positive")
    return (2.0 * c6 * g / oc**2) ** (1.0 / 6.0)


def atoms_in_blockade(r_b: float, a_lat: float) -> float:
    if r_b < 0 or a_lat <= 0:
        raise ValueError("need r_b >= 0 and a_lat > 0")
    return math.pi * r_b**2 / a_lat**2


def isotropic_collection_fraction(na: float) -> float:
    """Fraction of isotropically scattered light entering a lens of given NA."""
    if not 0.0 <= na <= 1.0:
        raise ValueError("numerical aperture must lie in [0, 1]")
    return 0.5 * (1.0 - math.sqrt(1.0 - na * na))
