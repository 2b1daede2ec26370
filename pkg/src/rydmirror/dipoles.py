"""Classical coupled-dipole model of a finite atomic array.

Dipoles are in units where a single atom has polarisability
``alpha = chi / chi0`` (``i`` on resonance) and the free-space Green's
function is normalised so that ``Im G(0) = 1``. Induced dipoles solve

    (1 - alpha G) x = alpha E_in

for a circularly polarised Gaussian probe travelling along +z.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from . import _kernels
from .parallel import pmap
from .rng import stream
from .susceptibility import chi_two_level
from .units import NM, UM, ArraySpec, Frequency, TransitionParams, angular

SIGMA_PLUS = np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)
SIGMA_MINUS = np.array([1.0, -1.0j, 0.0]) / np.sqrt(2.0)
DEFAULT_MAX_ATOMS = 2500


@dataclass(frozen=True)
class GaussianBeam:
    """Paraxial Gaussian beam focused at z = 0 and centred on the optical axis."""

    waist: float = 10 * UM
    wavelength: float = 780 * NM
    polarization: np.ndarray = field(default_factory=lambda: SIGMA_PLUS.copy())

    def __post_init__(self):
        if not (self.waist > 0 and self.wavelength > 0):
            raise ValueError("waist and wavelength must be positive")
        pol = np.asarray(self.polarization, dtype=complex)
        if pol.shape != (3,) or abs(pol[2]) > 0 or not np.isclose(np.linalg.norm(pol), 1.0):
            raise ValueError("polarization must be a unit transverse 3-vector")
        object.__setattr__(self, "polarization", pol)

    @property
    def k(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def rayleigh_range(self) -> float:
        return np.pi * self.waist**2 / self.wavelength

    @property
    def mode_area(self) -> float:
        """Integral of |u|^2 over a transverse plane, pi w0^2 / 2."""
        return 0.5 * np.pi * self.waist**2

    def envelope(self, pos) -> np.ndarray:
        """Scalar mode ``u`` with ``u = exp(-rho^2/w0^2)`` in the focal plane."""
        pos = np.asarray(pos, dtype=float)
        rho2 = pos[:, 0] ** 2 + pos[:, 1] ** 2
        z = pos[:, 2]
        zr = self.rayleigh_range
        q = z + 1j * zr
        return (1j * zr / q) * np.exp(1j * self.k * z - 1j * self.k * rho2 / (2 * q))

    def field(self, pos) -> np.ndarray:
        return self.envelope(pos)[:, None] * self.polarization[None, :]

    def translated(self, shift) -> "ShiftedBeam":
        return ShiftedBeam(self, np.asarray(shift, dtype=float))


@dataclass(frozen=True)
class ShiftedBeam:
    beam: GaussianBeam
    shift: np.ndarray

    def __getattr__(self, name):
        return getattr(self.beam, name)

    def envelope(self, pos):
        return self.beam.envelope(np.asarray(pos, dtype=float) - self.shift)

    def field(self, pos):
        return self.envelope(pos)[:, None] * self.beam.polarization[None, :]


@dataclass(frozen=True)
class DipoleLattice:
    positions: np.ndarray
    beam: GaussianBeam = GaussianBeam()
    transition: TransitionParams = TransitionParams()
    max_atoms: int = DEFAULT_MAX_ATOMS

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        if len(pos) == 0:
            raise ValueError("the lattice has no atoms")
        if len(pos) > self.max_atoms:
            raise ValueError(f"{len(pos)} atoms exceed max_atoms = {self.max_atoms}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if len(pos) > 1 and cKDTree(pos).query_pairs(1e-3 * NM):
            raise ValueError("coincident dipole positions make the system singular")
        object.__setattr__(self, "positions", pos)

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @classmethod
    def from_array_spec(cls, spec: ArraySpec, beam: GaussianBeam = GaussianBeam(), rng=None,
                        transition: TransitionParams = TransitionParams(), keep_ancilla_site=False,
                        **kw) -> "DipoleLattice":
        """Disc lattice from ``spec`` with the beam centred on the ancilla."""
        pos = _spec_positions(spec, rng, keep_ancilla_site)
        pos = pos - spec.ancilla_position
        return cls(pos, beam, transition, **kw)

    @classmethod
    def square(cls, n: int, lattice_const: float, beam: GaussianBeam = GaussianBeam(),
               transition: TransitionParams = TransitionParams(), **kw) -> "DipoleLattice":
        """Fully filled ``n x n`` square patch centred on the beam axis."""
        i = (np.arange(n) - (n - 1) / 2) * lattice_const
        xx, yy = np.meshgrid(i, i, indexing="ij")
        pos = np.c_[xx.ravel(), yy.ravel(), np.zeros(n * n)]
        return cls(pos, beam, transition, **kw)

    def displaced(self, dz) -> "DipoleLattice":
        pos = self.positions.copy()
        pos[:, 2] += dz
        return DipoleLattice(pos, self.beam, self.transition, self.max_atoms)


def _spec_positions(spec: ArraySpec, rng, keep_ancilla_site: bool) -> np.ndarray:
    if not keep_ancilla_site:
        return spec.positions(rng)
    idx = spec.site_indices()
    if spec.filling < 1.0:
        if rng is None:
            raise ValueError("partial filling needs a random generator")
        idx = idx[rng.random(len(idx)) < spec.filling]
    pos = np.zeros((len(idx), 3))
    pos[:, :2] = idx * spec.lattice_const
    return pos


@dataclass(frozen=True)
class DipolePoint:
    """Response at one detuning. ``dipoles`` has shape (N, 3)."""

    detuning: float
    transmittance: float
    reflectance: float
    extinction: float
    scattered: float
    dipoles: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def side_scattered(self) -> float:
        return max(0.0, 1.0 - self.transmittance - self.reflectance)


@dataclass(frozen=True)
class ArrayResponse:
    detuning: np.ndarray
    transmittance: np.ndarray
    reflectance: np.ndarray
    extinction: np.ndarray
    fitted_linewidth: Optional[Frequency] = None
    fitted_shift: Optional[Frequency] = None
    field_map: Optional[np.ndarray] = None


def polarizability(detuning, gamma_e):
    """Normalised single-atom polarisability, identical to ``chi_two_level``."""
    return chi_two_level(detuning, gamma_e)


def _site_alpha(lattice: DipoleLattice, detuning, site_chi) -> np.ndarray:
    if site_chi is None:
        return np.full(lattice.n_atoms, polarizability(angular(detuning), lattice.transition.gamma_e))
    a = np.asarray(site_chi, dtype=complex)
    if a.ndim == 0:
        a = np.full(lattice.n_atoms, complex(a))
    if a.shape != (lattice.n_atoms,):
        raise ValueError("site_chi must have one value per atom")
    return a


def induced_dipoles(lattice: DipoleLattice, alpha: np.ndarray) -> np.ndarray:
    k = lattice.beam.k
    m = _kernels.interaction_matrix(lattice.positions, k, alpha)
    rhs = (alpha[:, None] * lattice.beam.field(lattice.positions)).ravel()
    try:
        x = linalg.solve(m, rhs, overwrite_a=True, overwrite_b=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"coupled-dipole system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("coupled-dipole solve produced non-finite dipoles")
    return x.reshape(-1, 3)


def _mode_amplitudes(lattice: DipoleLattice, x: np.ndarray):
    beam = lattice.beam
    pos = lattice.positions
    c = 1j * 3 * beam.wavelength**2 / (4 * np.pi) / beam.mode_area
    u_fwd = np.conj(beam.envelope(pos))
    mirrored = pos * np.array([1.0, 1.0, -1.0])
    u_bwd = np.conj(beam.envelope(mirrored))
    t = [c * np.sum((np.conj(p)[None, :] * x).sum(axis=1) * u_fwd) for p in (SIGMA_PLUS, SIGMA_MINUS)]
    r = [c * np.sum((np.conj(p)[None, :] * x).sum(axis=1) * u_bwd) for p in (SIGMA_PLUS, SIGMA_MINUS)]
    # project the unscattered beam onto its own polarisation basis
    ein = beam.polarization
    t[0] += np.vdot(SIGMA_PLUS, ein)
    t[1] += np.vdot(SIGMA_MINUS, ein)
    return t, r


def solve_dipoles(lattice: DipoleLattice, detuning=0.0, site_chi=None, keep_dipoles: bool = True) -> DipolePoint:
    """T, R and extinction of the array for one probe detuning (rad/s).

    ``site_chi`` replaces the two-level polarisability per atom.
    """
    alpha = _site_alpha(lattice, detuning, site_chi)
    x = induced_dipoles(lattice, alpha)
    t, r = _mode_amplitudes(lattice, x)
    beam = lattice.beam
    pref = 3 * beam.wavelength**2 / (2 * np.pi * beam.mode_area)
    ein = beam.field(lattice.positions)
    ext = pref * float(np.sum(np.imag(np.conj(ein) * x)))
    sc = pref * scattered_power(lattice, x)
    return DipolePoint(
        float(angular(detuning)),
        float(sum(abs(v) ** 2 for v in t)),
        float(sum(abs(v) ** 2 for v in r)),
        ext, sc, x if keep_dipoles else None,
    )


def green_tensor(lattice: DipoleLattice, points) -> np.ndarray:
    """Normalised Green's tensors from every dipole to ``points``: (P, N, 3, 3)."""
    k = lattice.beam.k
    d = np.asarray(points, dtype=float)[:, None, :] - lattice.positions[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise ValueError("field point coincides with a dipole")
    kr = k * r
    a, b = _kernels._green_block_coeffs(kr)
    rh = d / r[..., None]
    return a[..., None, None] * np.eye(3) + b[..., None, None] * rh[..., :, None] * rh[..., None, :]


def scattered_field(lattice: DipoleLattice, x: np.ndarray, points) -> np.ndarray:
    """Field radiated by dipoles ``x`` at ``points`` (same units as the drive)."""
    return np.einsum("pnij,nj->pi", green_tensor(lattice, points), x)


def scattered_power(lattice: DipoleLattice, x: np.ndarray) -> float:
    """``x^H Im(G + 1) x``; equals ``|x|^2`` for one dipole."""
    k = lattice.beam.k
    pos = lattice.positions
    ones = np.ones(len(pos), dtype=complex)
    # -(M - 1) = G when alpha = 1
    g = -_kernels.interaction_matrix(pos, k, ones)
    g[np.diag_indices_from(g)] += 1.0
    g[np.diag_indices_from(g)] += 1j
    xf = x.ravel()
    herm_im = 0.5 * (g - g.conj().T) / 1j
    return float(np.real(np.vdot(xf, herm_im @ xf)))


def far_field_pattern(lattice: DipoleLattice, x: np.ndarray, directions) -> np.ndarray:
    """Radiated power per solid angle in units where one dipole totals ``|x|^2``."""
    n = np.asarray(directions, dtype=float)
    s = _kernels.structure_sum(lattice.beam.k * n, lattice.positions, x)
    s_perp = s - n * np.sum(n * s, axis=1)[:, None]
    return 3 / (8 * np.pi) * np.sum(np.abs(s_perp) ** 2, axis=1)


def cone_directions(na: float, backward: bool = True, n_theta: int = 48, n_phi: int = 96):
    """Gauss-Legendre nodes in cos(theta) and uniform phi over a detection cone."""
    if not 0 < na <= 1:
        raise ValueError("numerical aperture must lie in (0, 1]")
    cmin = np.sqrt(1 - na * na)
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    ct = cmin + (1 - cmin) * (u + 1) / 2
    wct = wu * (1 - cmin) / 2
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    ct_g, ph_g = np.meshgrid(ct, phi, indexing="ij")
    st = np.sqrt(1 - ct_g**2)
    sign = -1.0 if backward else 1.0
    dirs = np.stack([st * np.cos(ph_g), st * np.sin(ph_g), sign * ct_g], axis=-1).reshape(-1, 3)
    w = (wct[:, None] * np.full(n_phi, 2 * np.pi / n_phi)[None, :]).ravel()
    return dirs, w


def collected_fraction(lattice: DipoleLattice, x: np.ndarray, na: float = 0.68, backward: bool = True,
                       **quad) -> float:
    """Share of the scattered power falling inside the lens cone."""
    dirs, w = cone_directions(na, backward, **quad)
    p_cone = float(np.sum(w * far_field_pattern(lattice, x, dirs)))
    total = scattered_power(lattice, x)
    return p_cone / total if total > 0 else 0.0


def dipole_collection_fraction(na: float, dipole=None, **quad) -> float:
    """Cone-collected fraction for a single dipole; ``None`` averages over orientations."""
    one = DipoleLattice(np.zeros((1, 3)))
    if dipole is not None:
        return collected_fraction(one, np.asarray(dipole, complex)[None, :], na, **quad)
    return float(np.mean([collected_fraction(one, e[None, :].astype(complex), na, **quad)
                          for e in np.eye(3)]))


def spectrum(lattice: DipoleLattice, detunings: Sequence[float], site_chi_fn: Optional[Callable] = None,
             threads: Optional[int] = None, fit_width: bool = True) -> ArrayResponse:
    """Sweep the probe detuning and fit a Lorentzian to the transmission dip."""
    from .fitting.models import fit_lorentzian

    dets = np.asarray([angular(d) for d in detunings], dtype=float)

    def one(d):
        chi = None if site_chi_fn is None else site_chi_fn(d)
        return solve_dipoles(lattice, d, chi, keep_dipoles=False)

    pts = pmap(one, dets, threads)
    t = np.array([p.transmittance for p in pts])
    r = np.array([p.reflectance for p in pts])
    e = np.array([p.extinction for p in pts])
    width = shift = None
    if fit_width and len(dets) >= 5:
        res = fit_lorentzian(dets, t)
        width, shift = Frequency(abs(res["width"])), Frequency(res["center"])
    return ArrayResponse(dets, t, r, e, width, shift)


# imaging ---------------------------------------------------------------------

@dataclass(frozen=True)
class TransmissionImage:
    """Transmittance map on a square pixel grid centred on the optical axis."""

    data: np.ndarray
    pixel_pitch: float

    @property
    def coords(self) -> np.ndarray:
        n = self.data.shape[0]
        return (np.arange(n) - n // 2) * self.pixel_pitch

    def radial_profile(self, center=(0.0, 0.0), bin_width: Optional[float] = None,
                       r_max: Optional[float] = None):
        c = self.coords
        xx, yy = np.meshgrid(c, c, indexing="xy")
        r = np.hypot(xx - center[0], yy - center[1]).ravel()
        bw = bin_width or self.pixel_pitch
        r_max = r_max or float(c.max())
        edges = np.arange(0.0, r_max + bw, bw)
        idx = np.digitize(r, edges) - 1
        vals = self.data.ravel()
        out_r, out_v = [], []
        for i in range(len(edges) - 1):
            m = idx == i
            if m.any():
                out_r.append(0.5 * (edges[i] + edges[i + 1]))
                out_v.append(float(vals[m].mean()))
        return np.array(out_r), np.array(out_v)

    def value_at(self, x: float, y: float) -> float:
        c = self.coords
        from scipy.interpolate import RegularGridInterpolator
        f = RegularGridInterpolator((c, c), self.data.T)
        return float(f([[x, y]])[0])


def _pupil(fov: float, npix: int, k: float, na: float):
    q1 = np.fft.fftfreq(npix, d=fov / npix) * 2 * np.pi
    qx, qy = np.meshgrid(q1, q1, indexing="xy")
    mask = qx**2 + qy**2 < (k * na) ** 2
    return qx, qy, mask


def transmission_image(lattice: DipoleLattice, x: np.ndarray, fov: float = 24 * UM, npix: int = 120,
                       na: float = 0.68) -> TransmissionImage:
    """Forward image of beam plus scattered light through a lens of aperture ``na``.

    The scattered angular spectrum is summed plane wave by plane wave; the
    ratio of total to bare-beam intensity gives the local transmittance.
    """
    beam = lattice.beam
    k = beam.k
    qx, qy, mask = _pupil(fov, npix, k, na)
    qxm, qym = qx[mask], qy[mask]
    kz = np.sqrt(k**2 - qxm**2 - qym**2)
    kvec = np.c_[qxm, qym, kz]
    s = _kernels.structure_sum(kvec, lattice.positions, x)
    kh = kvec / k
    s -= kh * np.sum(kh * s, axis=1)[:, None]
    a_sc = 1j * 3 * np.pi / (k * kz)[:, None] * s
    e_in = (np.pi * beam.waist**2 * np.exp(-(qxm**2 + qym**2) * beam.waist**2 / 4))[:, None] \
        * beam.polarization[None, :]

    def to_image(spec):
        full = np.zeros((npix, npix, 3), dtype=complex)
        full[mask] = spec
        return np.fft.ifft2(full, axes=(0, 1))

    i_in = np.sum(np.abs(to_image(e_in)) ** 2, axis=-1)
    i_tot = np.sum(np.abs(to_image(e_in + a_sc)) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(i_in > 0, i_tot / i_in, 1.0)
    return TransmissionImage(np.fft.fftshift(t), fov / npix)


def site_chi_from_distance(lattice: DipoleLattice, ancilla, chi_of_r: Callable, r_lo: float,
                           r_hi: float) -> np.ndarray:
    """Per-site susceptibility from a distance law; distances are clipped into
    ``[r_lo, r_hi]`` and identical distances share one evaluation."""
    d = np.linalg.norm(lattice.positions[:, :2] - np.asarray(ancilla, float)[None, :2], axis=1)
    d = np.clip(d, r_lo, r_hi)
    keys, inv = np.unique(np.round(d, 12), return_inverse=True)
    vals = np.array([chi_of_r(r) for r in keys], dtype=complex)
    return vals[inv]


def switched_image(lattice: DipoleLattice, eit, dataset, ancilla=(0.0, 0.0), p_p: float = 0.52,
                   detuning=None, fov: float = 24 * UM, npix: int = 120, na: float = 0.68,
                   return_parts: bool = False):
    """Mixture ``p_p * T_switched + (1 - p_p) * T_EIT`` of transmittance images.

    ``eit`` fixes the control field; the probe is taken at ``detuning`` with
    the control retuned to keep two-photon resonance. Per-site responses in
    the switched image come from the pair-state steady state at each site's
    distance to the ancilla.
    """
    from .steadystate import build_eit_pair_system, solve_steady_state, weak_probe
    from .units import LaserDrive

    if not 0 <= p_p <= 1:
        raise ValueError("p_p must lie in [0, 1]")
    tr = lattice.transition
    dp = angular(eit.probe.detuning) if detuning is None else angular(detuning)
    probe = weak_probe(tr.gamma_e, dp)
    control = LaserDrive(eit.control.rabi, Frequency(-dp))
    lo, hi = dataset.valid_range

    def chi_of_r(r):
        return solve_steady_state(build_eit_pair_system(probe, control, dataset, r, tr)).chi_norm

    chi_sw = site_chi_from_distance(lattice, ancilla, chi_of_r, lo, hi)
    chi_eit = chi_of_r(hi)
    img_eit = transmission_image(lattice, induced_dipoles(lattice, np.full(lattice.n_atoms, chi_eit)),
                                 fov, npix, na)
    img_sw = transmission_image(lattice, induced_dipoles(lattice, chi_sw), fov, npix, na)
    mix = TransmissionImage(p_p * img_sw.data + (1 - p_p) * img_eit.data, img_sw.pixel_pitch)
    if return_parts:
        return mix, img_sw, img_eit
    return mix


# disorder --------------------------------------------------------------------

@dataclass(frozen=True)
class DisorderResult:
    spread: float
    samples: int
    transmittance: float
    reflectance: float
    collected_reflectance: float
    collected_reflectance_sem: float
    per_sample: np.ndarray = field(repr=False, compare=False, default=None)


def bloch_disordered_response(lattice: DipoleLattice, spread: float, samples: int, seed: int,
                              detuning=0.0, na: float = 0.68, threads: Optional[int] = None) -> DisorderResult:
    """Average over vertical displacements drawn uniformly within ``+/- spread``.

    ``collected_reflectance`` is the share of scattered power entering the
    backward lens cone, the quantity a reflection image normalises to.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if spread < 0:
        raise ValueError("spread must be non-negative")

    def one(i):
        if spread > 0:
            dz = stream(seed, i).uniform(-spread, spread, lattice.n_atoms)
            lat = lattice.displaced(dz)
        else:
            lat = lattice
        pt = solve_dipoles(lat, detuning)
        return pt.transmittance, pt.reflectance, collected_fraction(lat, pt.dipoles, na)

    rows = np.array(pmap(one, range(samples), threads))
    sem = float(rows[:, 2].std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return DisorderResult(float(spread), int(samples), float(rows[:, 0].mean()), float(rows[:, 1].mean()),
                          float(rows[:, 2].mean()), sem, rows)
