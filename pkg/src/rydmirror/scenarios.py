"""Scenario runners: each turns one config section into CSV files and a summary."""
from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import dynamics as dyn
from . import photons as ph
from .config import ConfigError, ScenarioConfig, default_config, with_overrides
from .dipoles import DipoleLattice, GaussianBeam, bloch_disordered_response, dipole_collection_fraction, spectrum
from .fitting import fit_damped_beating_rabi, fit_lifetime, fit_rydberg_eit_spectrum, rydberg_eit_model
from .fitting.models import beating_rabi_model, lifetime_model
from .output import write_csv, write_summary
from .pairpot import default_dataset, effective_exchange_rate, exchange_duration, pair_exchange_rate, pure_c6_dataset, read_dataset
from .parallel import set_default_threads
from .rng import stream
from .steadystate import blockade_crossing, chi_vs_distance, weak_probe
from .susceptibility import (EitConditions, atoms_in_blockade, blockade_radius, chi_two_level, eit_response,
                             isotropic_collection_fraction, rydberg_fraction)
from .units import GHZ_UM6, NM, TWO_PI, UM, US, ArraySpec, Frequency, LaserDrive, TransitionParams

MHZ = TWO_PI * 1e6


@dataclass
class ScenarioOutput:
    scenario: str
    files: List[Path]
    summary: Dict


def transition_from(cfg: ScenarioConfig) -> TransitionParams:
    t = cfg.transition
    return TransitionParams(Frequency.from_mhz(t.gamma_e_mhz), Frequency.from_khz(t.gamma_r_khz),
                            t.lambda_p_nm * NM, t.lambda_c_nm * NM)


def _grid(lo, hi, n):
    if n < 2 or not hi > lo:
        raise ConfigError("grids need n >= 2 points and max > min")
    return np.linspace(lo, hi, n)


def _maxima_positions(x, y):
    i = np.where((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
    return x[i]


# spectra ----------------------------------------------------------------------------

def model_spectra(cfg: ScenarioConfig):
    """Detuning grid (rad/s) with mirror and EIT absorption normalised to the mirror peak."""
    s = cfg["spectrum"]
    tr = transition_from(cfg)
    d = _grid(s.delta_min_mhz, s.delta_max_mhz, s.n_points) * MHZ
    gm = s.gamma_m_mhz * MHZ
    mirror = np.imag(chi_two_level(d, gm))
    eit = np.imag(eit_response(d, 0.0, s.omega_c_mhz * MHZ, gm, tr.gamma_r.value))
    return d, mirror, eit


def _to_transmission(absorption, floor):
    return 1.0 - (1.0 - floor) * absorption


def run_spectrum(cfg, out: Path, **_):
    s = cfg["spectrum"]
    d, mirror, eit = model_spectra(cfg)
    t_m = _to_transmission(mirror, s.mirror_transmittance)
    t_e = _to_transmission(eit, s.mirror_transmittance)
    peaks = _maxima_positions(d, eit)
    splitting = float(peaks.max() - peaks.min()) / MHZ if len(peaks) >= 2 else float("nan")
    f = write_csv(out / "spectrum.csv",
                  ["delta_p_MHz", "absorption_mirror", "absorption_eit", "T_mirror", "T_eit"],
                  [d / MHZ, mirror, eit, t_m, t_e])
    summary = dict(splitting_mhz=splitting, omega_c_mhz=s.omega_c_mhz,
                   mirror_min_transmittance=float(t_m.min()),
                   eit_center_transmittance=float(np.interp(0.0, d, t_e)))
    return [f], summary


def run_switched_spectrum(cfg, out: Path, **_):
    s = cfg["switched-spectrum"]
    floor = cfg["spectrum"].mirror_transmittance
    d, mirror, eit = model_spectra(cfg)
    m_s, e_s = dyn.Spectrum(d, mirror), dyn.Spectrum(d, eit)
    cols, header, counts = [d / MHZ], ["delta_p_MHz"], {}
    for label, p in (("0", 0.0), ("p_p", s.p_p), ("improved", s.p_p_improved), ("1", 1.0)):
        mix = dyn.mixture_spectrum(p, m_s, e_s)
        counts[label] = dyn.count_local_maxima(mix.values)
        if label in ("p_p", "improved"):
            header += [f"absorption_p{p:g}", f"T_p{p:g}"]
            cols += [mix.values, _to_transmission(mix.values, floor)]
    f = write_csv(out / "switched_spectrum.csv", header, cols)
    summary = dict(p_p=s.p_p, p_p_improved=s.p_p_improved, n_maxima_p0=counts["0"],
                   n_maxima_p_p=counts["p_p"], n_maxima_improved=counts["improved"], n_maxima_p1=counts["1"])
    return [f], summary


def run_mirror(cfg, out: Path, threads=None, **_):
    s = cfg["mirror"]
    tr = transition_from(cfg)
    beam = GaussianBeam(s.waist_um * UM, tr.lambda_p)
    lat = DipoleLattice.square(s.n_side, s.a_over_lambda * tr.lambda_p, beam, tr)
    g = tr.gamma_e.value
    dets = _grid(s.delta_min_gamma, s.delta_max_gamma, s.n_points) * g
    resp = spectrum(lat, dets, threads=threads)
    f = write_csv(out / "mirror.csv", ["delta_p_MHz", "T", "R"],
                  [dets / MHZ, resp.transmittance, resp.reflectance])
    summary = dict(n_atoms=lat.n_atoms, fitted_linewidth_mhz=resp.fitted_linewidth.mhz,
                   fitted_shift_mhz=resp.fitted_shift.mhz, gamma_e_mhz=tr.gamma_e.mhz,
                   subradiant=bool(resp.fitted_linewidth.value < g),
                   min_transmittance=float(resp.transmittance.min()),
                   max_reflectance=float(resp.reflectance.max()),
                   max_t_plus_r=float(np.max(resp.transmittance + resp.reflectance)))
    return [f], summary


# spatial switching -------------------------------------------------------------------

def _dataset(path: str = ""):
    return read_dataset(path) if path else default_dataset()


def j_eff_curve(eit0: EitConditions, dataset, n_sa: float) -> Callable:
    lo, hi = dataset.valid_range

    def f(r):
        return effective_exchange_rate(min(max(r, lo), hi), dataset, eit0, n_sa)

    return f


def run_spatial(cfg, out: Path, threads=None, seed=0, **_):
    s = cfg["spatial"]
    tr = transition_from(cfg)
    ds = default_dataset()
    g = tr.gamma_e.value
    dp = s.detuning_gamma * g
    eit = EitConditions(LaserDrive(s.omega_p_mhz * MHZ, dp), LaserDrive(s.omega_c_mhz * MHZ, -dp), tr)
    spec = ArraySpec(s.lattice_const_nm * NM, s.radius_um * UM, s.filling)
    rng = stream(seed, 5) if s.filling < 1 else None
    beam = GaussianBeam(s.waist_um * UM, tr.lambda_p)
    roi = min(s.roi_um * UM, 2 * spec.radius)
    parts = dyn.switched_parts(spec, eit, ds, s.mode, dp, beam, rng,
                               mirror_transmittance=s.mirror_transmittance, threads=threads)
    bw = s.bin_width_um * UM
    plain = dyn.profile_from_parts(parts, s.p_p, roi, None, bw)
    header, cols = ["radius_um", "T"], [plain.radius / UM, plain.transmittance]
    summary = dict(n_atoms=len(parts.positions), r_b_um=parts.r_b / UM, p_p=s.p_p,
                   center_transmittance=plain.center_value, slope_beyond_rb_per_um=plain.slope_beyond_rb * UM)
    img = plain.image
    if s.exchange:
        eit0 = EitConditions(LaserDrive(s.omega_p_mhz * MHZ), LaserDrive(s.omega_c_mhz * MHZ), tr)
        gamma = (lambda r: s.gamma_khz * TWO_PI * 1e3) if s.gamma_khz > 0 else None
        ex = dyn.ExchangeSmoothing(s.probe_duration_us * US, j_eff_curve(eit0, ds, s.n_sa), gamma)
        smooth = dyn.profile_from_parts(parts, s.p_p, roi, ex, bw)
        header.append("T_exchange")
        cols.append(smooth.transmittance)
        summary.update(center_transmittance_exchange=smooth.center_value,
                       slope_beyond_rb_exchange_per_um=smooth.slope_beyond_rb * UM,
                       center_weight_exchange=smooth.center_weight)
        img = smooth.image
    f1 = write_csv(out / "spatial_profile.csv", header, cols)
    c = (np.arange(img.shape[0]) - img.shape[0] // 2) * parts.pixel_pitch / UM
    xx, yy = np.meshgrid(c, c, indexing="xy")
    f2 = write_csv(out / "spatial_image.csv", ["x_um", "y_um", "T"], [xx.ravel(), yy.ravel(), img.ravel()])
    summary.update(image_pixels=int(img.shape[0]), pixel_pitch_um=parts.pixel_pitch / UM)
    return [f1, f2], summary


# ancilla dynamics --------------------------------------------------------------------

def run_rabi(cfg, out: Path, seed=0, **_):
    s = cfg["rabi"]
    t = _grid(0.0, s.t_max_us * US, s.n_points)
    om = s.omega_uv_mhz * MHZ
    truth = beating_rabi_model(t, om, s.tau_decay_us * US, 0.0, s.w2, s.amplitude, s.offset)
    y = truth + s.noise_sd * stream(seed, 3).standard_normal(t.size)
    res = fit_damped_beating_rabi(t, y, s.noise_sd if s.noise_sd > 0 else None)
    p = res.params
    fitted = beating_rabi_model(t, p["omega_uv"], p["tau_decay"], p["w0"], p["w2"], p["amplitude"], p["offset"])
    f = write_csv(out / "rabi.csv", ["t_us", "signal", "model_true", "model_fit"], [t / US, y, truth, fitted])
    sd = res.stderr
    summary = dict(omega_uv_mhz=p["omega_uv"] / MHZ, omega_uv_sd_mhz=sd["omega_uv"] / MHZ,
                   tau_decay_us=p["tau_decay"] / US, tau_decay_sd_us=sd["tau_decay"] / US,
                   w0=p["w0"], w1=p["w1"], w2=p["w2"], w2_sd=sd["w2"],
                   amplitude=p["amplitude"], offset=p["offset"], reduced_chi_sq=res.reduced_chi_sq,
                   converged=res.converged)
    (out / "rabi_fit.txt").write_text(res.report() + "\n")
    return [f, out / "rabi_fit.txt"], summary


def run_lifetime(cfg, out: Path, seed=0, **_):
    s = cfg["lifetime"]
    lt = dyn.AncillaLifetime(s.eta_init, s.tau_us * US, s.probe_duration_us * US, s.delay_us * US)
    p_p = dyn.rydberg_fraction_vs_delay(lt)
    delays = _grid(0.0, s.delay_max_us * US, s.n_points)
    truth = lifetime_model(delays, s.eta_init, s.tau_us * US, 0.0, s.t_mirror, s.t_eit, s.probe_duration_us * US)
    y = truth + s.noise_sd * stream(seed, 4).standard_normal(delays.size)
    res = fit_lifetime(delays, y, (s.t_mirror, s.t_eit), s.probe_duration_us * US,
                       s.noise_sd if s.noise_sd > 0 else None)
    f = write_csv(out / "lifetime.csv", ["delay_us", "T", "model_true", "P_P"],
                  [delays / US, y, truth, dyn.p_state_fraction(s.eta_init, s.tau_us * US,
                                                               s.probe_duration_us * US, delays)])
    summary = dict(p_p_at_delay=p_p, eta_init_fit=res["eta_init"], eta_init_sd=res.sd("eta_init"),
                   tau_fit_us=res["tau"] / US, tau_sd_us=res.sd("tau") / US, offset_fit=res["offset"],
                   tau_identifiable=res.flags.get("tau_identifiable"))
    return [f], summary


# photon statistics -------------------------------------------------------------------

def detection_model(cfg) -> ph.DetectionModel:
    s = cfg["histogram"]
    return ph.DetectionModel(s.mu_background, s.mu_switched, s.prep_fidelity, s.prep_fidelity_sd,
                             s.tau_us * US, s.tau_sd_us * US, s.delay_us * US, s.probe_duration_us * US,
                             s.excess_noise_factor)


def run_histogram(cfg, out: Path, seed=0, threads=None, band=False, **_):
    s = cfg["histogram"]
    model = detection_model(cfg)
    edges = np.arange(0.0, s.max_photons + s.bin_width, s.bin_width)
    files, summary = [], {}
    hists = {}
    for i, state in enumerate((ph.GROUND, ph.RYDBERG)):
        y = ph.simulate_photon_numbers(model, state, s.n_samples, seed + i, threads)
        counts = ph.histogram_samples(y, edges)
        hists[state] = ph.PhotonHistogram(edges, counts, s.n_samples, seed + i)
        files.append(write_csv(out / f"histogram_{state}.csv", ["bin_lo", "bin_hi", "count"],
                               [edges[:-1], edges[1:], counts]))
        summary[f"mean_{state}"] = float(y.mean())
        summary[f"sem_{state}"] = float(y.std(ddof=1) / np.sqrt(y.size))
        summary[f"variance_over_mean_{state}"] = float(y.var(ddof=1) / y.mean())
        summary[f"analytic_mean_{state}"] = ph.analytic_mean(model, state)
        if band:
            b = ph.histogram_band(model, state, s.band_runs, s.n_samples, seed + 100 + i, edges, threads)
            files.append(write_csv(out / f"histogram_band_{state}.csv", ["bin_lo", "bin_hi", "count", "mean", "sd"],
                                   [edges[:-1], edges[1:], counts, b.mean, b.sd]))
    est = ph.estimate_switched_mean(hists[ph.RYDBERG], model, s.tail_threshold, return_details=True)
    summary.update(mu_switched_ml=est.value, mu_switched_ml_sd=est.sd, n_tail=est.n_tail,
                   tail_threshold=s.tail_threshold, n_samples=s.n_samples)
    return files, summary


# exchange and blockade -----------------------------------------------------------------------

def run_exchange(cfg, out: Path, **_):
    s = cfg["exchange"]
    tr = transition_from(cfg)
    ds = default_dataset()
    eit0 = EitConditions(LaserDrive(s.omega_p_mhz * MHZ), LaserDrive(s.omega_c_mhz * MHZ), tr)
    r = np.geomspace(s.r_min_um, s.r_max_um, s.n_r) * UM
    r = np.clip(r, *ds.valid_range)
    j = effective_exchange_rate(r, ds, eit0, s.n_sa)
    jex = pair_exchange_rate(r, ds)
    i = int(np.argmax(j))
    f1 = write_csv(out / "exchange_rate.csv", ["r_um", "J_eff_kHz", "J_ex_kHz"],
                   [r / UM, j / TWO_PI / 1e3, jex / TWO_PI / 1e3])
    spec = ArraySpec(s.lattice_const_nm * NM, s.array_radius_um * UM)
    shells = dyn.lattice_shells(spec)
    gamma = (lambda rr: s.gamma_khz * TWO_PI * 1e3) if s.gamma_khz > 0 else None
    t = _grid(0.0, s.t_max_us * US, s.n_t)
    res = dyn.collective_exchange_evolution(shells, j_eff_curve(eit0, ds, s.n_sa), gamma, t)
    f2 = write_csv(out / "exchange_center.csv", ["t_us", "P_center"], [t / US, res.center])
    try:
        j_min = res.first_minimum_rate()
    except ValueError:
        j_min = float("nan")
    j_col = res.collective_rate
    summary = dict(peak_r_um=float(r[i] / UM), peak_j_eff_khz=float(j[i] / TWO_PI / 1e3),
                   collective_rate_khz=j_col / TWO_PI / 1e3, first_minimum_rate_khz=j_min / TWO_PI / 1e3,
                   exchange_duration_us=exchange_duration(j_col) / US, n_shells=len(shells),
                   n_atoms=int(sum(n for _, n in shells)))
    return [f1, f2], summary


def run_blockade(cfg, out: Path, threads=None, **_):
    s = cfg["blockade"]
    tr = transition_from(cfg)
    ds = _dataset(s.dataset)
    control = LaserDrive(s.omega_c_mhz * MHZ)
    probe = weak_probe(tr.gamma_e)
    r_b = blockade_radius(s.c6_ghz_um6 * GHZ_UM6, tr.gamma_e, control)
    cross = blockade_crossing(probe, control, ds, tr)
    pure = pure_c6_dataset(s.c6_ghz_um6 * GHZ_UM6, ds.valid_range)
    cross_pure = blockade_crossing(probe, control, pure, tr)
    r_ss = blockade_radius(s.c6_ss_ghz_um6 * GHZ_UM6, tr.gamma_e, LaserDrive(s.omega_c_ss_mhz * MHZ))
    n_sa = atoms_in_blockade(r_ss, s.lattice_const_nm * NM)
    r = np.clip(np.linspace(s.r_min_um, s.r_max_um, s.n_r) * UM, *ds.valid_range)
    chi_d = np.array([c for _, c in chi_vs_distance(probe, control, ds, tr, r, threads)])
    chi_p = np.array([c for _, c in chi_vs_distance(probe, control, pure, tr, r, threads)])
    f = write_csv(out / "chi_vs_distance.csv", ["r_um", "im_chi_dataset", "im_chi_pure_c6"],
                  [r / UM, chi_d.imag, chi_p.imag])
    summary = dict(r_b_um=r_b / UM, r_b_steady_state_um=cross / UM, r_b_pure_c6_um=cross_pure / UM,
                   r_b_ss_um=r_ss / UM, n_sa=n_sa, im_chi_at_r_max=float(chi_d.imag[-1]))
    return [f], summary


def run_nonlinearity(cfg, out: Path, seed=0, **_):
    s = cfg["nonlinearity"]
    tr = transition_from(cfg)
    d = _grid(s.delta_min_mhz, s.delta_max_mhz, s.n_points) * MHZ
    ge = tr.gamma_e.value
    truth = rydberg_eit_model(d, s.amplitude, s.offset, s.p_s, 0.5 * ge, s.omega_c_mhz * MHZ,
                              s.u_int_mhz * MHZ, tr.gamma_r.value)
    y = truth + s.noise_sd * stream(seed, 6).standard_normal(d.size)
    res = fit_rydberg_eit_spectrum(d, y, s.noise_sd if s.noise_sd > 0 else None, tr)
    predicted = rydberg_fraction(s.omega_p_mhz * MHZ, s.omega_c_mhz * MHZ, 0.0, 0.0, tr.gamma_e_half, s.n_sa)
    f = write_csv(out / "nonlinearity.csv", ["delta_p_MHz", "signal", "model_true"], [d / MHZ, y, truth])
    p, sd = res.params, res.stderr
    summary = dict(p_s_fit=p["p_s"], p_s_sd=sd["p_s"], omega_c_fit_mhz=p["omega_c"] / MHZ,
                   omega_c_sd_mhz=sd["omega_c"] / MHZ, gamma_eit_fit_mhz=p["gamma_eit"] / MHZ,
                   u_int_fit_mhz=p["u_int"] / MHZ, p_s_predicted=predicted,
                   reduced_chi_sq=res.reduced_chi_sq)
    return [f], summary


# disorder and camera calibration ------------------------------------------------------

def run_bloch(cfg, out: Path, seed=0, threads=None, **_):
    s = cfg["bloch"]
    tr = transition_from(cfg)
    a_lat = cfg["spatial"].lattice_const_nm * NM if "spatial" in cfg else 532 * NM
    period, half_width = dyn.bloch_kinematics(Frequency.from_cyclic(s.delta_z_hz),
                                              Frequency.from_cyclic(s.tunneling_hz), a_lat)
    beam = GaussianBeam(s.waist_um * UM, tr.lambda_p)
    a_sim = s.a_over_lambda * tr.lambda_p
    lat = DipoleLattice.square(s.n_side, a_sim, beam, tr)
    spread = half_width / a_lat * a_sim
    det = s.detuning_gamma * tr.gamma_e.value
    ordered = bloch_disordered_response(lat, 0.0, 1, seed, det, s.na, threads)
    dis = bloch_disordered_response(lat, spread, s.samples, seed, det, s.na, threads)
    per = dis.per_sample
    f = write_csv(out / "bloch_samples.csv", ["sample", "T", "R_mode", "R_collected"],
                  [np.arange(len(per)), per[:, 0], per[:, 1], per[:, 2]])
    summary = dict(bloch_period_ms=period * 1e3, half_width_sites=half_width / a_lat,
                   collected_reflectance_ordered=ordered.collected_reflectance,
                   collected_reflectance_disordered=dis.collected_reflectance,
                   collected_reflectance_sem=dis.collected_reflectance_sem,
                   isotropic_floor=isotropic_collection_fraction(s.na),
                   isotropic_floor_numeric=dipole_collection_fraction(s.na))
    return [f], summary


def run_calibrate(cfg, out: Path, seed=0, **_):
    s = cfg["calibrate"]
    means = _grid(s.mean_min_counts, s.mean_max_counts, s.n_levels)
    pairs = ph.synthetic_noise_pairs(s.alpha, means, s.frames, seed, s.excess_noise_factor)
    alpha, sd = ph.camera_conversion_fit(pairs, s.excess_noise_factor)
    arr = np.array(pairs)
    f = write_csv(out / "calibration.csv", ["mean_counts", "sd_counts"], [arr[:, 0], arr[:, 1]])
    return [f], dict(alpha_fit=alpha, alpha_sd=sd, alpha_true=s.alpha)


RUNNERS: Dict[str, Callable] = {
    "spectrum": run_spectrum,
    "switched-spectrum": run_switched_spectrum,
    "mirror": run_mirror,
    "spatial": run_spatial,
    "rabi": run_rabi,
    "lifetime": run_lifetime,
    "histogram": run_histogram,
    "exchange": run_exchange,
    "bloch": run_bloch,
    "calibrate": run_calibrate,
    "blockade": run_blockade,
    "nonlinearity": run_nonlinearity,
}

# sections each scenario reads besides global/transition
NEEDS = {
    "switched-spectrum": ("switched-spectrum", "spectrum"),
}

FIGURES: Dict[str, Tuple[str, Dict]] = {
    "2a": ("spectrum", {}),
    "2b": ("switched-spectrum", {}),
    "3": ("rabi", {}),
    "4": ("histogram", {}),
    "5a": ("spatial", {}),
    "5b": ("spatial", dict(radius_um=12.5, filling=0.865, exchange=True, roi_um=12.0)),
    "S3": ("nonlinearity", {}),
    "S4c": ("blockade", {}),
    "S5": ("exchange", {}),
    "S8": ("bloch", {}),
    "S9": ("calibrate", {}),
}


def run_scenario(cfg: ScenarioConfig, scenario: str, out_dir=None, seed: Optional[int] = None,
                 threads: Optional[int] = None, band: bool = False) -> ScenarioOutput:
    """Run ``scenario`` and write its CSVs plus ``summary.json`` into ``out_dir``."""
    if scenario not in RUNNERS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(RUNNERS)}")
    for sec in NEEDS.get(scenario, (scenario,)):
        if sec not in cfg:
            raise ConfigError(f"configuration has no [{sec}] section needed by {scenario!r}")
    g = cfg.globals
    seed = g.seed if seed is None else int(seed)
    threads = g.threads if threads is None else int(threads)
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    out = Path(out_dir if out_dir is not None else g.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    set_default_threads(threads)
    try:
        t0 = time.perf_counter()
        files, summary = RUNNERS[scenario](cfg, out, seed=seed, threads=threads, band=band)
        elapsed = time.perf_counter() - t0
    finally:
        set_default_threads(1)
    summary = dict(summary, scenario=scenario, seed=seed)
    files.append(write_summary(out / "summary.json", summary))
    (out / "timing.txt").write_text(f"{elapsed:.3f} s\n")
    return ScenarioOutput(scenario, files, summary)


def figure_config(figure: str, base: Optional[ScenarioConfig] = None) -> Tuple[str, ScenarioConfig]:
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}; choose from {list(FIGURES)}")
    scenario, overrides = FIGURES[figure]
    cfg = base or default_config()
    if overrides:
        cfg = with_overrides(cfg, scenario, **overrides)
    return scenario, cfg


