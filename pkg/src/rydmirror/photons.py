"""Monte-Carlo photon-number histograms with EMCCD excess noise, their
maximum-likelihood inversion, and the camera count-to-photon calibration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special, stats

from .fitting.models import fit_sqrt_noise
from .parallel import pmap
from .rng import stream

CHUNK = 4096
GROUND, RYDBERG = "ground", "rydberg"


@dataclass(frozen=True)
class DetectionModel:
    """Photon budget of one reflection measurement.

    Uncertain inputs (``prep_fidelity``, ``tau``) are resampled per shot from
    Gaussians with the given standard deviations, truncated to their valid
    ranges. Times are in seconds.
    """

    mu_background: float = 18.3
    mu_switched: float = 65.0
    prep_fidelity: float = 0.85
    prep_fidelity_sd: float = 0.10
    tau: float = 27e-6
    tau_sd: float = 6e-6
    delay: float = 4e-6
    probe_duration: float = 60e-6
    excess_noise_factor: float = 2.0
    alpha: float = 0.32  # photons per camera count

    def __post_init__(self):
        for name in ("mu_background", "mu_switched", "prep_fidelity_sd", "tau_sd", "delay"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative")
        if not 0 <= self.prep_fidelity <= 1:
            raise ValueError("prep_fidelity must lie in [0, 1]")
        if not (self.tau > 0 and self.probe_duration > 0 and self.alpha > 0):
            raise ValueError("tau, probe_duration and alpha must be positive")
        if not self.excess_noise_factor >= 1:
            raise ValueError("excess_noise_factor must be >= 1")

    def fidelity_dist(self):
        if self.prep_fidelity_sd == 0:
            return None
        m, s = self.prep_fidelity, self.prep_fidelity_sd
        return stats.truncnorm((0 - m) / s, (1 - m) / s, loc=m, scale=s)

    def tau_dist(self):
        if self.tau_sd == 0:
            return None
        m, s = self.tau, self.tau_sd
        # tau must stay strictly positive; clip just above zero
        return stats.truncnorm((1e-12 - m) / s, np.inf, loc=m, scale=s)


@dataclass
class PhotonHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    n_samples: int
    seed: Optional[int] = None
    provenance: str = "simulated"

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.counts = np.asarray(self.counts)
        if self.bin_edges.ndim != 1 or len(self.bin_edges) != len(self.counts) + 1:
            raise ValueError("need len(bin_edges) == len(counts) + 1")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if self.counts.sum() != self.n_samples:
            raise ValueError("counts do not sum to n_samples")

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def mean(self) -> float:
        return float(np.sum(self.centers * self.counts) / self.n_samples)


def _truncnorm_draw(dist, fallback: float, n: int, rng) -> np.ndarray:
    if dist is None:
        return np.full(n, fallback)
    return dist.ppf(rng.random(n))


def emccd_smear(n_photons: np.ndarray, excess_noise_factor: float, rng) -> np.ndarray:
    """Gamma-distributed register output with mean n and variance (F - 1) n."""
    n = np.asarray(n_photons, dtype=float)
    f = excess_noise_factor
    if f == 1.0:
        return n.copy()
    out = np.zeros_like(n)
    pos = n > 0
    out[pos] = rng.gamma(n[pos] / (f - 1.0), f - 1.0)
    return out


def _alive_fraction(t_decay, delay, probe_duration):
    return np.clip((t_decay - delay) / probe_duration, 0.0, 1.0)


def _simulate_chunk(model: DetectionModel, state: str, n: int, rng) -> np.ndarray:
    bg = rng.poisson(model.mu_background, n)
    if state == RYDBERG:
        fid = _truncnorm_draw(model.fidelity_dist(), model.prep_fidelity, n, rng)
        tau = _truncnorm_draw(model.tau_dist(), model.tau, n, rng)
        present = rng.random(n) < fid
        t_decay = rng.exponential(1.0, n) * tau
        alive = np.where(present, _alive_fraction(t_decay, model.delay, model.probe_duration), 0.0)
        sig = rng.poisson(model.mu_switched * alive)
    else:
        sig = 0
    return emccd_smear(bg + sig, model.excess_noise_factor, rng)


def _check_state(state: str) -> str:
    state = str(state).lower()
    if state not in (GROUND, RYDBERG):
        raise ValueError(f"ancilla_state must be {GROUND!r} or {RYDBERG!r}, got {state!r}")
    return state


def simulate_photon_numbers(model: DetectionModel, ancilla_state: str, n_samples: int, seed: int,
                            threads: Optional[int] = None, run: int = 0) -> np.ndarray:
    """Per-shot detected photon numbers (continuous after EMCCD smearing).

    Shots are generated in fixed chunks, each with its own stream keyed by
    ``(seed, run, chunk)``, so the output never depends on ``threads``.
    """
    state = _check_state(ancilla_state)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    starts = list(range(0, n_samples, CHUNK))

    def one(ci):
        s = starts[ci]
        return _simulate_chunk(model, state, min(CHUNK, n_samples - s), stream(seed, run, ci))

    return np.concatenate(pmap(one, range(len(starts)), threads))


def default_edges(bin_width: float = 1.0, upper: float = 250.0) -> np.ndarray:
    return np.arange(0.0, upper + bin_width, bin_width)


def histogram_samples(samples: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Bin counts; values above the last edge land in the last bin."""
    clipped = np.clip(samples, edges[0], np.nextafter(edges[-1], -np.inf))
    counts, _ = np.histogram(clipped, bins=edges)
    return counts


def simulate_histogram(model: DetectionModel, ancilla_state: str, n_samples: int, seed: int,
                       edges: Optional[np.ndarray] = None, threads: Optional[int] = None) -> PhotonHistogram:
    edges = default_edges() if edges is None else np.asarray(edges, dtype=float)
    y = simulate_photon_numbers(model, ancilla_state, n_samples, seed, threads)
    return PhotonHistogram(edges, histogram_samples(y, edges), n_samples, seed)


@dataclass(frozen=True)
class HistogramBand:
    bin_edges: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    n_runs: int
    n_samples: int


def histogram_band(model: DetectionModel, ancilla_state: str, n_runs: int, n_samples: int, seed: int,
                   edges: Optional[np.ndarray] = None, threads: Optional[int] = None) -> HistogramBand:
    """Per-bin mean and standard deviation over ``n_runs`` independent histograms."""
    if n_runs < 2:
        raise ValueError("a band needs at least two runs")
    edges = default_edges() if edges is None else np.asarray(edges, dtype=float)
    state = _check_state(ancilla_state)

    def one(run):
        y = simulate_photon_numbers(model, state, n_samples, seed, threads=1, run=run)
        return histogram_samples(y, edges)

    h = np.array(pmap(one, range(n_runs), threads), dtype=float)
    return HistogramBand(edges, h.mean(axis=0), h.std(axis=0, ddof=1), n_runs, n_samples)


# analytic expectations ---------------------------------------------------------

def _expect(dist, fallback: float, fn, n: int = 64) -> float:
    """E[fn(X)] for a truncated normal ``dist`` by Gauss-Legendre in probability."""
    if dist is None:
        return float(fn(np.array([fallback]))[0])
    u, w = np.polynomial.legendre.leggauss(n)
    p = 0.5 * (u + 1)
    return float(np.sum(0.5 * w * fn(dist.ppf(p))))


def _window_factor(tau, delay, probe_duration):
    x = probe_duration / tau
    return np.exp(-delay / tau) * (-np.expm1(-x)) / x


def mean_alive_fraction(model: DetectionModel) -> float:
    """E[fidelity] * E[(tau/t_p) exp(-dt/tau)(1 - exp(-t_p/tau))]."""
    ef = _expect(model.fidelity_dist(), model.prep_fidelity, lambda f: f)
    ew = _expect(model.tau_dist(), model.tau, lambda t: _window_factor(t, model.delay, model.probe_duration))
    return ef * ew


def analytic_mean(model: DetectionModel, ancilla_state: str) -> float:
    state = _check_state(ancilla_state)
    if state == GROUND:
        return model.mu_background
    return model.mu_background + model.mu_switched * mean_alive_fraction(model)


def _tau_nodes(model: DetectionModel, n: int = 24):
    dist = model.tau_dist()
    if dist is None:
        return np.array([model.tau]), np.array([1.0])
    u, w = np.polynomial.legendre.leggauss(n)
    return dist.ppf(0.5 * (u + 1)), 0.5 * w


def _photon_number_pmf(model: DetectionModel, mu_switched: float, n_max: int, n_a: int = 48) -> np.ndarray:
    """P(N = 0..n_max) of detected photons before EMCCD amplification."""
    ns = np.arange(n_max + 1)
    p_present = _expect(model.fidelity_dist(), model.prep_fidelity, lambda f: f)
    taus, wt = _tau_nodes(model)
    dt, tp = model.delay, model.probe_duration
    u, wa = np.polynomial.legendre.leggauss(n_a)
    a = 0.5 * (u + 1)
    wa = 0.5 * wa
    lam_bg = model.mu_background

    def pois(lam):
        return stats.poisson.pmf(ns[:, None], np.atleast_1d(lam)[None, :])

    pmf = (1 - p_present) * pois(lam_bg)[:, 0]
    acc = np.zeros(n_max + 1)
    for tau, w in zip(taus, wt):
        p0 = -np.expm1(-dt / tau)
        p1 = np.exp(-(dt + tp) / tau)
        dens = (tp / tau) * np.exp(-(dt + a * tp) / tau)
        part = p0 * pois(lam_bg)[:, 0] + p1 * pois(lam_bg + mu_switched)[:, 0]
        part += pois(lam_bg + mu_switched * a) @ (wa * dens)
        acc += w * part
    pmf += p_present * acc
    return pmf


def _bin_probabilities(model: DetectionModel, mu_switched: float, edges: np.ndarray) -> np.ndarray:
    n_max = int(max(edges[-1] * 1.5, model.mu_background + mu_switched + 20 * np.sqrt(
        model.mu_background + mu_switched + 1)))
    pmf = _photon_number_pmf(model, mu_switched, n_max)
    f = model.excess_noise_factor
    ns = np.arange(n_max + 1)
    if f == 1.0:
        cdf = lambda e: np.array([pmf[ns < x].sum() for x in e])  # noqa: E731
        c = cdf(edges)
    else:
        shape = np.where(ns > 0, ns / (f - 1.0), 1.0)
        g = special.gammainc(shape[None, :], np.clip(edges, 0, None)[:, None] / (f - 1.0))
        g[:, 0] = (edges > 0).astype(float)  # N = 0 gives exactly zero signal
        c = g @ pmf
    probs = np.diff(c)
    probs[-1] += max(0.0, 1.0 - c[-1])  # overflow shares the last bin
    return np.clip(probs, 1e-300, None)


@dataclass(frozen=True)
class SwitchedMeanEstimate:
    value: float
    sd: float
    n_tail: int
    neg_log_likelihood: float

    def __float__(self):
        return self.value


def estimate_switched_mean(observed: PhotonHistogram, model: DetectionModel, tail_threshold: float = 60.0,
                           mu_max: float = 400.0, return_details: bool = False):
    """Maximum-likelihood ``mu_switched`` from the histogram tail.

    Bins starting at or above ``tail_threshold`` enter individually; everything
    below is pooled into one category. The shot distribution is integrated
    semi-analytically over preparation, decay time and EMCCD gain.
    """
    edges = observed.bin_edges
    if tail_threshold < edges[0] or tail_threshold >= edges[-1]:
        raise ValueError("tail_threshold lies outside the histogram support")
    tail = edges[:-1] >= tail_threshold
    n_tail = int(observed.counts[tail].sum())
    if n_tail == 0:
        raise ValueError(f"no counts above the tail threshold {tail_threshold:g}")
    counts = np.r_[observed.counts[~tail].sum(), observed.counts[tail]].astype(float)

    def nll(mu):
        p = _bin_probabilities(
            DetectionModel(**{**model.__dict__, "mu_switched": float(mu)}), float(mu), edges)
        q = np.r_[p[~tail].sum(), p[tail]]
        return -float(np.sum(counts * np.log(q)))

    res = optimize.minimize_scalar(nll, bounds=(0.0, mu_max), method="bounded",
                                   options={"xatol": 1e-4})
    mu = float(res.x)
    h = max(1e-2, 1e-3 * mu)
    lo = max(mu - h, 0.0)
    hi = lo + 2 * h
    mid = 0.5 * (lo + hi)
    curv = (nll(hi) - 2 * nll(mid) + nll(lo)) / h**2
    sd = float(1 / np.sqrt(curv)) if curv > 0 else float("inf")
    est = SwitchedMeanEstimate(mu, sd, n_tail, float(res.fun))
    return est if return_details else mu


# camera calibration ---------------------------------------------------------------

def camera_conversion_fit(pairs: Sequence[Tuple[float, float]], excess_noise_factor: float = 2.0):
    """``(alpha, sd_alpha)`` from ``sd = sqrt(F / alpha) * sqrt(mean)``.

    ``alpha`` converts camera counts to photons (photons = alpha * counts).
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must be a sequence of (mean_counts, sd_counts)")
    if len(arr) < 2:
        raise ValueError("need at least two (mean, sd) pairs")
    res = fit_sqrt_noise(arr[:, 0], arr[:, 1])
    b, sb = res["slope"], res.sd("slope")
    if not b > 0:
        raise ValueError("noise does not grow with the signal; cannot calibrate")
    alpha = excess_noise_factor / b**2
    return float(alpha), float(2 * alpha * sb / b)


def camera_conversion_from_noise(pairs: Sequence[Tuple[float, float]], excess_noise_factor: float = 2.0) -> float:
    """Photons-per-count ``alpha`` from the square-root noise law."""
    return camera_conversion_fit(pairs, excess_noise_factor)[0]


def synthetic_noise_pairs(alpha: float, means, frames: int, seed: int, excess_noise_factor: float = 2.0):
    """(mean, sd) of ``frames`` simulated camera frames per mean level (counts)."""
    out = []
    for i, m in enumerate(np.asarray(means, dtype=float)):
        rng = stream(seed, i)
        photons = rng.poisson(m * alpha, frames)
        counts = emccd_smear(photons, excess_noise_factor, rng) / alpha
        out.append((float(counts.mean()), float(counts.std(ddof=1))))
    return out
