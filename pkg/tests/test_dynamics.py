import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rydmirror import dynamics as dyn
from rydmirror.units import NM, TWO_PI, UM, ArraySpec, Frequency


def test_rabi_population_limits():
    m = dyn.RabiModel(Frequency.from_mhz(1.22), 6e-6, (0.1, 0.6, 0.3))
    assert dyn.rabi_population(m, 0.0) == pytest.approx(1.0)
    assert dyn.rabi_population(m, 1.0) == pytest.approx(0.1 + 0.45)
    with pytest.raises(ValueError):
        dyn.RabiModel(1.0, 1.0, (0.5, 0.6, 0.0))
    with pytest.raises(ValueError):
        dyn.rabi_population(m, -1.0)


def test_two_atoms_flop_sqrt2_faster():
    om = Frequency.from_mhz(1.0)
    m = dyn.RabiModel(om, 1e3, (0, 0, 1))
    t_pi = np.pi / (np.sqrt(2) * om.value)
    assert dyn.rabi_population(m, t_pi) == pytest.approx(0.0, abs=1e-9)


def test_lifetime_mapping_oracle():
    lt = dyn.AncillaLifetime(0.85, 27e-6, 20e-6, 4e-6)
    tau, tp = 27e-6, 20e-6
    ref = 0.85 * tau / tp * (1 - np.exp(-tp / tau)) * np.exp(-4e-6 / tau)
    assert dyn.rydberg_fraction_vs_delay(lt) == pytest.approx(ref, rel=1e-12)
    assert dyn.p_state_fraction(0.9, 1e9, 20e-6, 0.0) == pytest.approx(0.9)


def test_mixture_and_maxima():
    d = np.linspace(-5, 5, 501)
    a = dyn.Spectrum(d, 1 / (1 + d**2))
    b = dyn.Spectrum(d, 1 / (1 + (d - 2) ** 2) + 1 / (1 + (d + 2) ** 2))
    assert dyn.count_local_maxima(dyn.mixture_spectrum(1.0, a, b).values) == 1
    assert dyn.count_local_maxima(dyn.mixture_spectrum(0.0, a, b).values) == 2
    with pytest.raises(ValueError):
        dyn.mixture_spectrum(0.5, a, dyn.Spectrum(d + 1, b.values))
    with pytest.raises(ValueError):
        dyn.mixture_spectrum(1.5, a, b)


def test_single_shell_exchange_oracle():
    j = TWO_PI * 1e3
    t = np.linspace(0, 400e-6, 4001)
    res = dyn.collective_exchange_evolution([(1 * UM, 9)], lambda r: j, t_grid=t)
    assert np.allclose(res.center, np.cos(3 * j * t) ** 2, atol=1e-10)
    assert res.collective_rate == pytest.approx(3 * j)
    assert res.first_minimum_rate() == pytest.approx(3 * j, rel=1e-5)
    assert np.allclose(res.populations.sum(axis=1), 1.0)


def test_loss_removes_population():
    t = np.linspace(0, 1e-3, 101)
    res = dyn.collective_exchange_evolution([(1 * UM, 2), (2 * UM, 4)], lambda r: 1e4,
                                            lambda r: 1e4, t)
    tot = res.populations.sum(axis=1)
    assert tot[0] == pytest.approx(1.0) and np.all(np.diff(tot) <= 1e-12) and tot[-1] < 0.5


def test_exchange_validation():
    with pytest.raises(ValueError):
        dyn.collective_exchange_evolution([], lambda r: 1.0, t_grid=[0.0])
    with pytest.raises(ValueError):
        dyn.collective_exchange_evolution([(1.0, 1)], lambda r: 1.0, lambda r: -1.0, [0.0, 1.0])


def test_lattice_shells():
    spec = ArraySpec(532 * NM, 1.1 * 532 * NM * np.sqrt(2))
    shells = dyn.lattice_shells(spec)
    assert [n for _, n in shells] == [4, 4]
    assert shells[1][0] == pytest.approx(np.sqrt(2) * 532 * NM)


def test_time_average():
    t = np.linspace(0, 1, 11)
    pops = np.c_[np.ones(11), t]
    r = dyn.ExchangeResult(t, ((1.0, 1),), pops, np.array([1.0]))
    assert r.time_average(1.0) == pytest.approx([1.0, 0.5])


@given(st.floats(100, 1e3), st.floats(10, 1e3))
def test_bloch_round_trip(dz, j):
    a = 532 * NM
    period, hw = dyn.bloch_kinematics(Frequency.from_cyclic(dz), Frequency.from_cyclic(j), a)
    assert period == pytest.approx(1 / dz)
    assert dyn.tunneling_for_half_width(hw, Frequency.from_cyclic(dz), a).cyclic == pytest.approx(j)


def test_bloch_reference_numbers():
    period, hw = dyn.bloch_kinematics(Frequency.from_cyclic(360), Frequency.from_cyclic(324), 532 * NM)
    assert period == pytest.approx(2.78e-3, rel=1e-3)
    assert hw / (532 * NM) == pytest.approx(3.6)
