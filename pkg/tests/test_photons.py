import numpy as np
import pytest

from rydmirror import photons as ph
from rydmirror.rng import stream


def test_emccd_smear_moments():
    n = np.full(200000, 50.0)
    y = ph.emccd_smear(n, 2.0, stream(0))
    assert y.mean() == pytest.approx(50, rel=0.01)
    assert y.var() == pytest.approx(50, rel=0.03)
    assert np.array_equal(ph.emccd_smear(n[:5], 1.0, stream(0)), n[:5])


def test_simulation_deterministic_across_threads():
    m = ph.DetectionModel()
    a = ph.simulate_photon_numbers(m, ph.RYDBERG, 10000, seed=3, threads=1)
    b = ph.simulate_photon_numbers(m, ph.RYDBERG, 10000, seed=3, threads=4)
    c = ph.simulate_photon_numbers(m, ph.RYDBERG, 10000, seed=4, threads=1)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_histogram_overflow_and_validation():
    edges = ph.default_edges(10, 50)
    counts = ph.histogram_samples(np.array([1.0, 12.0, 49.0, 500.0]), edges)
    assert counts.sum() == 4 and counts[-1] == 2
    with pytest.raises(ValueError):
        ph.PhotonHistogram(edges, counts, 5)
    with pytest.raises(ValueError):
        ph.PhotonHistogram(edges[:-1], counts, 4)


def test_analytic_mean_limits():
    m = ph.DetectionModel(prep_fidelity=1.0, prep_fidelity_sd=0.0, tau_sd=0.0, tau=1.0)
    assert ph.analytic_mean(m, ph.GROUND) == pytest.approx(18.3)
    # no-decay limit: every shot carries background plus the full switched signal
    assert ph.analytic_mean(m, ph.RYDBERG) == pytest.approx(18.3 + 65.0, rel=1e-4)
    with pytest.raises(ValueError):
        ph.simulate_photon_numbers(m, "excited", 10, 0)


def test_model_validation():
    with pytest.raises(ValueError):
        ph.DetectionModel(prep_fidelity=1.2)
    with pytest.raises(ValueError):
        ph.DetectionModel(excess_noise_factor=0.5)


def test_estimate_errors():
    m = ph.DetectionModel()
    edges = ph.default_edges(2, 200)
    y = ph.simulate_photon_numbers(m, ph.GROUND, 2000, 0)
    h = ph.PhotonHistogram(edges, ph.histogram_samples(y, edges), 2000)
    with pytest.raises(ValueError):
        ph.estimate_switched_mean(h, m, tail_threshold=500)
    with pytest.raises(ValueError):
        ph.estimate_switched_mean(h, m, tail_threshold=190)


def test_histogram_band_shapes():
    b = ph.histogram_band(ph.DetectionModel(), ph.GROUND, 4, 500, 1, ph.default_edges(5, 100))
    assert b.mean.shape == b.sd.shape == (20,)
    assert b.mean.sum() == pytest.approx(500)


def test_camera_calibration_recovers_alpha():
    pairs = ph.synthetic_noise_pairs(0.32, np.linspace(50, 2000, 12), 400, seed=2)
    alpha, sd = ph.camera_conversion_fit(pairs)
    assert abs(alpha - 0.32) < 3 * sd
    with pytest.raises(ValueError):
        ph.camera_conversion_fit([(1.0, 1.0)])


def test_zero_signal_estimate_consistent_with_zero():
    m = ph.DetectionModel(mu_switched=0.0)
    edges = ph.default_edges(2, 200)
    y = ph.simulate_photon_numbers(m, ph.RYDBERG, 20000, 5)
    h = ph.PhotonHistogram(edges, ph.histogram_samples(y, edges), 20000)
    est = ph.estimate_switched_mean(h, m, tail_threshold=30, return_details=True)
    assert est.value < 3 * est.sd + 1e-3
