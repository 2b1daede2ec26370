"""Units, physical constants and the small value types shared by every module.

All internal arithmetic is done in angular frequency (rad/s) and SI lengths.
Cyclic values (``Omega/2pi`` in MHz, kHz, ...) only appear at I/O boundaries
through the ``Frequency`` constructors and accessors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import constants as _c

TWO_PI = 2.0 * math.pi

H_PLANCK = _c.h
HBAR = _c.hbar
ATOMIC_MASS = _c.physical_constants["atomic mass constant"][0]
MASS_RB87 = 86.909180520 * ATOMIC_MASS

UM = 1e-6
NM = 1e-9
US = 1e-6

# van der Waals coefficients are handled as angular-frequency * m^6
GHZ_UM6 = TWO_PI * 1e9 * UM**6
GHZ_UM3 = TWO_PI * 1e9 * UM**3


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True, order=True)
class Frequency:
    """Angular frequency in rad/s.

    Use the ``from_*`` constructors for cyclic inputs, e.g.
    ``Frequency.from_mhz(6.06)`` for ``Gamma_e / 2pi = 6.06 MHz``.
    """

    value: float

    def __post_init__(self):
        _check_finite("Frequency", self.value)
        object.__setattr__(self, "value", float(self.value))

    @classmethod
    def from_cyclic(cls, hz: float) -> "Frequency":
        return cls(TWO_PI * hz)

    @classmethod
    def from_mhz(cls, mhz: float) -> "Frequency":
        return cls(TWO_PI * mhz * 1e6)

    @classmethod
    def from_khz(cls, khz: float) -> "Frequency":
        return cls(TWO_PI * khz * 1e3)

    @property
    def cyclic(self) -> float:
        """Value divided by 2pi, in Hz."""
        return self.value / TWO_PI

    @property
    def mhz(self) -> float:
        return self.cyclic * 1e-6

    @property
    def khz(self) -> float:
        return self.cyclic * 1e-3

    def __float__(self):
        return self.value

    def __neg__(self):
        return Frequency(-self.value)

    def __add__(self, other):
        return Frequency(self.value + angular(other))

    def __sub__(self, other):
        return Frequency(self.value - angular(other))

    def __mul__(self, k):
        return Frequency(self.value * float(k))

    __rmul__ = __mul__


FreqLike = Union[Frequency, float]


def angular(x) -> float:
    """Return ``x`` in rad/s; plain numbers are taken to be rad/s already."""
    if isinstance(x, Frequency):
        return x.value
    return x


@dataclass(frozen=True)
class LaserDrive:
    """A coherent field with Rabi frequency ``rabi`` and signed ``detuning``."""

    rabi: Frequency
    detuning: Frequency = Frequency(0.0)

    def __post_init__(self):
        for name in ("rabi", "detuning"):
            v = getattr(self, name)
            if not isinstance(v, Frequency):
                object.__setattr__(self, name, Frequency(v))
        if self.rabi.value < 0:
            raise ValueError("Rabi frequency must be non-negative")

    @classmethod
    def from_mhz(cls, rabi_mhz: float, detuning_mhz: float = 0.0) -> "LaserDrive":
        return cls(Frequency.from_mhz(rabi_mhz), Frequency.from_mhz(detuning_mhz))


@dataclass(frozen=True)
class TransitionParams:
    """Linewidths and wavelengths of the g-e-S ladder.

    ``gamma_e`` is the full natural linewidth of ``|e>``. The half width
    that multiplies the probe coherence is ``gamma_e_half``.
    """

    gamma_e: Frequency = Frequency.from_mhz(6.06)
    gamma_r: Frequency = Frequency.from_khz(5.0)
    lambda_p: float = 780 * NM
    lambda_c: float = 480 * NM

    def __post_init__(self):
        for name in ("gamma_e", "gamma_r"):
            v = getattr(self, name)
            if not isinstance(v, Frequency):
                object.__setattr__(self, name, Frequency(v))
        if self.gamma_e.value <= 0:
            raise ValueError("gamma_e must be positive")
        if self.gamma_r.value < 0:
            raise ValueError("gamma_r must be non-negative")
        _check_finite("lambda_p", self.lambda_p)
        _check_finite("lambda_c", self.lambda_c)
        if self.lambda_p <= 0 or self.lambda_c <= 0:
            raise ValueError("wavelengths must be positive")

    @property
    def gamma_e_half(self) -> Frequency:
        return Frequency(0.5 * self.gamma_e.value)

    @property
    def k_p(self) -> float:
        return TWO_PI / self.lambda_p

    @property
    def sigma0(self) -> float:
        """Resonant free-space cross section 3 lambda^2 / 2pi (m^2)."""
        return 3.0 * self.lambda_p**2 / TWO_PI

    def chi0(self, areal_density: float) -> float:
        """Susceptibility scale sigma0 * n_a / k_p for areal density ``n_a``."""
        return self.sigma0 * areal_density / self.k_p


@dataclass(frozen=True)
class ArraySpec:
    """Square-lattice disc of atoms around an ancilla site.

    ``ancilla_site`` is an integer lattice coordinate relative to the array
    centre; ``lattice_depth`` is in units of the recoil energy.
    """

    lattice_const: float = 532 * NM
    radius: float = 4.7 * UM
    filling: float = 1.0
    ancilla_site: Tuple[int, int] = (0, 0)
    lattice_depth: float = 100.0

    def __post_init__(self):
        for name in ("lattice_const", "radius", "filling", "lattice_depth"):
            _check_finite(name, getattr(self, name))
        if self.lattice_const <= 0:
            raise ValueError("lattice constant must be positive")
        if self.radius <= 0:
            raise ValueError("array radius must be positive")
        if not 0.0 <= self.filling <= 1.0:
            raise ValueError("filling must lie in [0, 1]")
        ix, iy = self.ancilla_site
        if math.hypot(ix, iy) * self.lattice_const > self.radius:
            raise ValueError("ancilla site lies outside the array radius")

    def site_indices(self) -> np.ndarray:
        """Integer (i, j) of every lattice site within ``radius``."""
        m = int(self.radius / self.lattice_const) + 1
        i = np.arange(-m, m + 1)
        ii, jj = np.meshgrid(i, i, indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        keep = np.hypot(ii, jj) * self.lattice_const <= self.radius * (1 + 1e-12)
        return np.stack([ii[keep], jj[keep]], axis=1)

    def positions(self, rng=None) -> np.ndarray:
        """3D positions (z = 0) of occupied sites.

        With ``filling < 1`` a generator must be passed; the ancilla site is
        always removed since the ancilla is not part of the mirror.
        """
        idx = self.site_indices()
        idx = idx[~((idx[:, 0] == self.ancilla_site[0]) & (idx[:, 1] == self.ancilla_site[1]))]
        if self.filling < 1.0:
            if rng is None:
                raise ValueError("partial filling needs a random generator")
            idx = idx[rng.random(len(idx)) < self.filling]
        pos = np.zeros((len(idx), 3))
        pos[:, :2] = idx * self.lattice_const
        return pos

    @property
    def ancilla_position(self) -> np.ndarray:
        return np.array([self.ancilla_site[0], self.ancilla_site[1], 0.0]) * self.lattice_const

    def recoil_energy(self, mass: float = MASS_RB87) -> float:
        return recoil_energy(self.lattice_const, mass)


def recoil_energy(lattice_const: float, mass: float = MASS_RB87) -> float:
    """Lattice recoil energy h^2 / (8 m a^2) in joules."""
    _check_finite("lattice_const", lattice_const)
    _check_finite("mass", mass)
    if lattice_const <= 0 or mass <= 0:
        raise ValueError("lattice constant and mass must be positive")
    return H_PLANCK**2 / (8.0 * mass * lattice_const**2)
