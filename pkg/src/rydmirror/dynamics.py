"""Time-domain models: ancilla Rabi oscillations, Rydberg lifetime, spectral
mixtures, collective S-P exchange on radial shells and Bloch kinematics.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from .units import TWO_PI, Frequency, angular


@dataclass(frozen=True)
class RabiModel:
    """Damped Rabi flopping of 0, 1 or 2 ancilla atoms sharing one excitation.

    ``n_atom_weights`` are the probabilities of having N = 0, 1, 2 atoms;
    N atoms flop at ``sqrt(N) * omega_uv``.
    """

    omega_uv: Frequency
    decay_time: float
    n_atom_weights: Tuple[float, float, float] = (0.0, 1.0, 0.0)
    amplitude: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not isinstance(self.omega_uv, Frequency):
            object.__setattr__(self, "omega_uv", Frequency(self.omega_uv))
        w = np.asarray(self.n_atom_weights, dtype=float)
        if w.shape != (3,) or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
            raise ValueError("n_atom_weights must be three non-negative numbers summing to 1")
        if not self.decay_time > 0:
            raise ValueError("decay_time must be positive")
        object.__setattr__(self, "n_atom_weights", tuple(float(v) for v in w))


def rabi_population(model: RabiModel, t):
    """Probability that the mirror is left unswitched (ancilla in its ground state)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    w0, w1, w2 = model.n_atom_weights
    om = model.omega_uv.value
    damp = np.exp(-t / model.decay_time)
    out = w0 + sum(w * 0.5 * (1 + damp * np.cos(np.sqrt(n) * om * t))
                   for n, w in ((1, w1), (2, w2)))
    return out if out.ndim else float(out)


def rabi_signal(model: RabiModel, t):
    """``offset + amplitude * rabi_population``: the measured observable."""
    return model.offset + model.amplitude * rabi_population(model, t)


@dataclass(frozen=True)
class AncillaLifetime:
    eta_init: float
    tau: float
    probe_duration: float
    delay: float

    def __post_init__(self):
        if not 0 < self.eta_init <= 1:
            raise ValueError("eta_init must lie in (0, 1]")
        if not (self.tau > 0 and self.probe_duration > 0 and self.delay >= 0):
            raise ValueError("tau and probe_duration must be positive, delay non-negative")


def p_state_fraction(eta_init, tau, probe_duration, delay):
    """Vectorised ``eta (tau/t_p) exp(-dt/tau) (1 - exp(-t_p/tau))``."""
    eta = np.asarray(eta_init, dtype=float)
    tau = np.asarray(tau, dtype=float)
    dt = np.asarray(delay, dtype=float)
    x = probe_duration / tau
    # -expm1(-x)/x -> 1 as tau -> infinity
    window = np.where(x > 0, -np.expm1(-x) / np.where(x > 0, x, 1.0), 1.0)
    out = eta * window * np.exp(-dt / tau)
    return out if out.ndim else float(out)


def rydberg_fraction_vs_delay(lt: AncillaLifetime) -> float:
    """Mean P-state fraction over the probe window following a delay."""
    return p_state_fraction(lt.eta_init, lt.tau, lt.probe_duration, lt.delay)


@dataclass(frozen=True)
class Spectrum:
    detuning: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.detuning, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if d.shape != v.shape or d.ndim != 1:
            raise ValueError("detuning and values must be 1D arrays of equal length")
        object.__setattr__(self, "detuning", d)
        object.__setattr__(self, "values", v)


def mixture_spectrum(p_p: float, mirror: Spectrum, eit: Spectrum) -> Spectrum:
    """Statistical mixture ``p_p * mirror + (1 - p_p) * eit`` on a shared grid."""
    if not 0 <= p_p <= 1:
        raise ValueError("p_p must lie in [0, 1]")
    if mirror.detuning.shape != eit.detuning.shape or not np.allclose(
        mirror.detuning, eit.detuning, rtol=1e-12, atol=0
    ):
        raise ValueError("spectra are sampled on different detuning grids")
    return Spectrum(mirror.detuning, p_p * mirror.values + (1 - p_p) * eit.values)


def count_local_maxima(values, rel_prominence: float = 1e-3) -> int:
    """Number of strict interior local maxima standing out by ``rel_prominence``."""
    v = np.asarray(values, dtype=float)
    span = float(v.max() - v.min()) or 1.0
    peaks, _ = find_peaks(v, prominence=rel_prominence * span)
    return int(len(peaks))


# collective exchange ---------------------------------------------------------

@dataclass(frozen=True)
class ExchangeResult:
    """Shell-resolved excitation probabilities, shape (len(t), 1 + n_shells)."""

    t: np.ndarray
    shells: Tuple[Tuple[float, int], ...]
    populations: np.ndarray
    couplings: np.ndarray

    @property
    def center(self) -> np.ndarray:
        return self.populations[:, 0]

    @property
    def collective_rate(self) -> float:
        """Root-sum-square of the shell couplings, the short-time transfer rate."""
        return float(np.sqrt(np.sum(self.couplings ** 2)))

    def first_minimum_rate(self) -> float:
        """Rate J with the first minimum of P(center) at ``pi / (2 J)``."""
        p = self.center
        i = int(np.argmax((p[1:-1] <= p[:-2]) & (p[1:-1] < p[2:]))) + 1
        if not (p[i] <= p[i - 1] and p[i] < p[i + 1]):
            raise ValueError("no minimum of the center population inside t")
        # parabolic refinement on a uniform grid
        h = self.t[1] - self.t[0]
        den = p[i - 1] - 2 * p[i] + p[i + 1]
        shift = 0.5 * (p[i - 1] - p[i + 1]) / den if den > 0 else 0.0
        return float(np.pi / (2 * (self.t[i] + shift * h)))

    def time_average(self, t_max: float) -> np.ndarray:
        """Shell populations averaged over ``[0, t_max]``."""
        m = self.t <= t_max * (1 + 1e-12)
        if m.sum() < 2:
            raise ValueError("t grid does not resolve t_max")
        return trapezoid(self.populations[m], self.t[m], axis=0) / (self.t[m][-1] - self.t[m][0])


def shells_from_positions(pos, lattice_const: float, center=(0.0, 0.0, 0.0),
                          r_max: Optional[float] = None) -> List[Tuple[float, int]]:
    """Group ``pos`` into shells of equal distance from ``center``."""
    d = np.linalg.norm(np.asarray(pos, float) - np.asarray(center, float), axis=1)
    if r_max is not None:
        d = d[d <= r_max * (1 + 1e-12)]
    key = np.round(d / lattice_const, 9)
    vals, counts = np.unique(key, return_counts=True)
    return [(float(v * lattice_const), int(c)) for v, c in zip(vals, counts) if v > 0]


def lattice_shells(spec, rng=None, r_max: Optional[float] = None) -> List[Tuple[float, int]]:
    """Shells of the occupied sites of ``spec`` around its ancilla."""
    return shells_from_positions(spec.positions(rng), spec.lattice_const, spec.ancilla_position, r_max)


def collective_exchange_evolution(
    shells: Sequence[Tuple[float, int]],
    j_eff_curve: Callable,
    gamma_curve: Optional[Callable] = None,
    t_grid=None,
    seed=None,
) -> ExchangeResult:
    """Single-excitation star model: the ancilla couples to each shell's
    symmetric state with ``sqrt(count) * J_eff(r)``; ``gamma(r)`` removes
    population from a shell into an unobserved sink.

    ``seed`` is accepted for interface symmetry with the sampled shell
    builders; the evolution itself is deterministic.
    """
    shells = tuple((float(r), int(n)) for r, n in shells)
    if not shells:
        raise ValueError("at least one shell is required")
    if any(n < 1 for _, n in shells):
        raise ValueError("shell counts must be positive")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or np.any(t < 0):
        raise ValueError("t_grid must be a 1D array of non-negative times")
    radii = np.array([r for r, _ in shells])
    counts = np.array([n for _, n in shells], dtype=float)
    j = np.array([float(angular(j_eff_curve(r))) for r in radii])
    gam = np.zeros_like(j) if gamma_curve is None else np.array(
        [float(angular(gamma_curve(r))) for r in radii])
    if np.any(gam < 0):
        raise ValueError("gamma(r) must be non-negative")
    g = np.sqrt(counts) * j
    n = 1 + len(shells)
    h = np.zeros((n, n), dtype=complex)
    h[0, 1:] = g
    h[1:, 0] = g
    h[np.arange(1, n), np.arange(1, n)] = -0.5j * gam
    if np.all(gam == 0):
        w, v = linalg.eigh(h)
        amp = (v * np.exp(-1j * np.outer(t, w))[:, None, :]) @ v.conj()[0]
    else:
        w, v = linalg.eig(h)
        c = linalg.solve(v, np.eye(n)[:, 0])
        amp = (v[None, :, :] * (np.exp(-1j * np.outer(t, w)) * c)[:, None, :]).sum(axis=2)
    pops = np.abs(amp) ** 2
    return ExchangeResult(t, shells, pops, g)


# Bloch oscillations -----------------------------------------------------------

def bloch_kinematics(delta_z, tunneling, a_lat: float) -> Tuple[float, float]:
    """Bloch period ``h / Delta_z`` and maximal half width ``4 J a / Delta_z``.

    ``delta_z`` and ``tunneling`` are energies expressed as Frequency
    (``E / hbar``).
    """
    dz = float(angular(delta_z))
    jt = float(angular(tunneling))
    if not dz > 0:
        raise ValueError("delta_z must be positive")
    if jt < 0 or not a_lat > 0:
        raise ValueError("tunneling must be non-negative and a_lat positive")
    return TWO_PI / dz, 4.0 * jt * a_lat / dz


def tunneling_for_half_width(half_width: float, delta_z, a_lat: float) -> Frequency:
    """Inverse of ``bloch_kinematics`` for the tunnelling rate."""
    return Frequency(half_width * float(angular(delta_z)) / (4.0 * a_lat))



# radial switching profile ------------------------------------------------------

@dataclass(frozen=True)
class ExchangeSmoothing:
    """Spreads the switched disc over the exchange shells, weighted by the
    time-averaged shell populations over the probe window."""

    probe_duration: float
    j_eff_curve: Callable
    gamma_curve: Optional[Callable] = None
    n_t: int = 801
    shell_bin: float = 0.25e-6


@dataclass(frozen=True)
class RadialProfile:
    radius: np.ndarray
    transmittance: np.ndarray
    center_value: float
    slope_beyond_rb: float
    r_b: float
    center_weight: float = 1.0
    image: Optional[np.ndarray] = None
    pixel_pitch: float = 0.0


def _ring_average(img: np.ndarray, pitch: float, radius: float, n_phi: int = 24) -> np.ndarray:
    from scipy.ndimage import shift as nd_shift
    if radius < 0.5 * pitch:
        return img
    acc = np.zeros_like(img)
    for phi in np.arange(n_phi) * 2 * np.pi / n_phi:
        d = (radius * np.sin(phi) / pitch, radius * np.cos(phi) / pitch)
        acc += nd_shift(img, d, order=1, mode="nearest")
    return acc / n_phi


def _profile_metrics(r, t, r_b, center_radius):
    inner = r <= center_radius
    # area weighting: annulus area grows with r
    center = float(np.sum(t[inner] * r[inner]) / np.sum(r[inner])) if inner.any() else float(t[0])
    outer = r >= r_b
    if outer.sum() >= 2:
        slope = float(np.max(np.gradient(t[outer], r[outer])))
    else:
        slope = float("nan")
    return center, slope


@dataclass(frozen=True)
class SwitchedParts:
    """Switched and uniform-EIT transmittance images around the ancilla."""

    switched: np.ndarray
    uniform: np.ndarray
    pixel_pitch: float
    positions: np.ndarray
    lattice_const: float
    r_b: float


def switched_parts(array, eit, dataset, mode: str = "dipole", detuning=None, beam=None, rng=None,
                   npix: Optional[int] = None, mirror_transmittance: float = 0.35,
                   threads: Optional[int] = None) -> SwitchedParts:
    """Images for ``p_p = 1`` (switched) and ``p_p = 0`` (uniform EIT)."""
    from .dipoles import DipoleLattice, GaussianBeam, switched_image
    from .steadystate import blockade_crossing, build_eit_pair_system, solve_steady_state, weak_probe
    from .units import LaserDrive

    tr = eit.transition
    dp = eit.probe.detuning.value if detuning is None else float(angular(detuning))
    probe = weak_probe(tr.gamma_e, dp)
    control = LaserDrive(eit.control.rabi, Frequency(-dp))
    r_b = blockade_crossing(probe, control, dataset, tr)
    beam = beam or GaussianBeam()
    # the angular-spectrum image needs a margin around the array to converge
    fov = max(24e-6, 2 * (array.radius + 8e-6))
    npix = npix or int(round(fov / 0.2e-6))
    pitch = fov / npix
    lo, hi = dataset.valid_range
    pos = array.positions(rng) - array.ancilla_position

    if mode == "dipole":
        lat = DipoleLattice(pos, beam, tr)
        _, img_sw, img_eit = switched_image(lat, eit, dataset, (0.0, 0.0), 1.0, dp, fov, npix,
                                            return_parts=True)
        sw, base = img_sw.data, img_eit.data
    elif mode == "chi":
        c = (np.arange(npix) - npix // 2) * pitch
        xx, yy = np.meshgrid(c, c, indexing="xy")
        rr = np.hypot(xx, yy)
        keys = np.unique(np.round(np.clip(rr, lo, hi), 9))

        def im_chi(r):
            return solve_steady_state(build_eit_pair_system(probe, control, dataset, r, tr)).chi_norm.imag

        from .parallel import pmap
        table = np.array(pmap(im_chi, keys, threads))
        im = np.interp(np.clip(rr, lo, hi), keys, table)
        inside = rr <= array.radius + 0.5 * array.lattice_const
        sw = np.where(inside, 1 - (1 - mirror_transmittance) * im, 1.0)
        base = np.where(inside, 1 - (1 - mirror_transmittance) * im_chi(hi), 1.0)
    else:
        raise ValueError(f"unknown mode {mode!r}; use 'dipole' or 'chi'")
    return SwitchedParts(sw, base, pitch, pos, array.lattice_const, r_b)


def profile_from_parts(parts: SwitchedParts, p_p: float, roi: float,
                       exchange: Optional[ExchangeSmoothing] = None, bin_width: float = 0.25e-6,
                       center_radius: Optional[float] = None) -> RadialProfile:
    """Mix the parts with weight ``p_p`` and average radially out to ``roi``."""
    from .dipoles import TransmissionImage

    if not 0 <= p_p <= 1:
        raise ValueError("p_p must lie in [0, 1]")
    sw, base, pitch = parts.switched, parts.uniform, parts.pixel_pitch
    w_center = 1.0
    if exchange is not None:
        shells = shells_from_positions(parts.positions, parts.lattice_const)
        t = np.linspace(0, exchange.probe_duration, exchange.n_t)
        res = collective_exchange_evolution(shells, exchange.j_eff_curve, exchange.gamma_curve, t)
        avg = res.time_average(exchange.probe_duration)
        w_center = float(avg[0])
        smoothed = w_center * sw
        radii = np.array([r for r, _ in res.shells])
        bins = np.round(radii / exchange.shell_bin).astype(int)
        for b in np.unique(bins):
            m = bins == b
            w = float(avg[1:][m].sum())
            if w > 1e-6:
                rk = float(np.average(radii[m], weights=avg[1:][m] + 1e-300))
                smoothed = smoothed + w * _ring_average(sw, pitch, rk)
        # population lost to the sink no longer switches anything
        lost = max(0.0, 1.0 - float(avg.sum()))
        sw = smoothed + lost * base
    img = p_p * sw + (1 - p_p) * base
    r, tvals = TransmissionImage(img, pitch).radial_profile(bin_width=bin_width, r_max=roi)
    center_radius = 0.5 * parts.r_b if center_radius is None else center_radius
    center, slope = _profile_metrics(r, tvals, parts.r_b, center_radius)
    return RadialProfile(r, tvals, center, slope, parts.r_b, w_center, img, pitch)


def radial_transmission_profile(array, eit, dataset, p_p: float, roi: float, mode: str = "dipole",
                                detuning=None, beam=None, exchange: Optional[ExchangeSmoothing] = None,
                                rng=None, npix: Optional[int] = None, bin_width: float = 0.25e-6,
                                center_radius: Optional[float] = None,
                                mirror_transmittance: float = 0.35) -> RadialProfile:
    """Radially averaged transmittance around the ancilla.

    ``mode="dipole"`` images coupled-dipole solutions; ``mode="chi"`` maps the
    local susceptibility affinely between ``mirror_transmittance`` and 1.
    With ``exchange`` the switched image is spread over the exchange shells.
    """
    if not 0 <= p_p <= 1:
        raise ValueError("p_p must lie in [0, 1]")
    if not 0 < roi <= 2 * array.radius:
        raise ValueError("roi must be positive and no larger than the array diameter")
    parts = switched_parts(array, eit, dataset, mode, detuning, beam, rng, npix, mirror_transmittance)
    return profile_from_parts(parts, p_p, roi, exchange, bin_width, center_radius)
