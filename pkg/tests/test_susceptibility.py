import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydmirror.susceptibility import (EitConditions, atoms_in_blockade, blockade_radius, chi_eit, chi_eit_sweep,
                                      chi_rydberg_eit, chi_two_level, eit_response,
                                      isotropic_collection_fraction, rydberg_fraction)
from rydmirror.units import GHZ_UM6, NM, UM, Frequency, LaserDrive

G = Frequency.from_mhz(6.06).value


def test_two_level_resonance_and_width():
    assert chi_two_level(0.0, G) == pytest.approx(1j)
    # half maximum of Im chi at delta = +-Gamma/2
    assert np.imag(chi_two_level(0.5 * G, G)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        chi_two_level(0.0, 0.0)


@given(st.floats(-50, 50), st.floats(0.1, 10))
def test_two_level_absorptive(d, g):
    assert np.imag(chi_two_level(d, g)) >= 0


def test_eit_perfect_transparency_and_doublet():
    oc = Frequency.from_mhz(6.7).value
    assert eit_response(0.0, 0.0, oc, G, 0.0) == 0
    d = np.linspace(-2 * oc, 2 * oc, 4001)
    im = np.imag(eit_response(d, 0.0, oc, G, 0.0))
    i = np.argmax(im[d > 0])
    # Autler-Townes peaks at +-Omega_c/2 for resonant control
    assert d[d > 0][i] == pytest.approx(0.5 * oc, rel=0.01)


def test_eit_reduces_to_two_level_without_control():
    d = np.linspace(-3 * G, 3 * G, 11)
    assert np.allclose(eit_response(d, 0.0, 0.0, G, 0.0), chi_two_level(d, G))


def test_large_interaction_restores_two_level():
    oc = Frequency.from_mhz(6.7).value
    chi = eit_response(0.0, 0.0, oc, G, 0.0, u_int=1e6 * G)
    assert chi == pytest.approx(1j, rel=1e-5)


def test_rydberg_eit_mixture_endpoints(tr):
    cond = EitConditions(LaserDrive.from_mhz(0.1), LaserDrive.from_mhz(6.7), tr)
    d = np.linspace(-G, G, 9)
    assert np.allclose(chi_rydberg_eit(cond, 1.0, d), chi_two_level(d, tr.gamma_e))
    assert np.allclose(chi_rydberg_eit(cond, 0.0, d), chi_eit_sweep(d, cond))
    assert chi_eit(cond) == pytest.approx(chi_eit_sweep(0.0, cond))
    with pytest.raises(ValueError):
        chi_rydberg_eit(cond, 1.5)


def test_rydberg_fraction_bounds_and_resonance(tr):
    op, oc = Frequency.from_mhz(0.168), Frequency.from_mhz(6.7)
    p = rydberg_fraction(op, oc, 0.0, 0.0, tr.gamma_e_half, 77)
    n = 77 * op.value**2
    assert p == pytest.approx(n / (n + oc.value**2))
    d2 = np.linspace(-1e8, 1e8, 21)
    ps = rydberg_fraction(op, oc, 0.0, d2, tr.gamma_e_half, 77)
    assert np.all((ps >= 0) & (ps <= 1)) and ps.argmax() == 10
    with pytest.raises(ValueError):
        rydberg_fraction(op, oc, 0, 0, tr.gamma_e_half, 0.5)


def test_blockade_radius_closed_form():
    r_b = blockade_radius(35 * GHZ_UM6, Frequency.from_mhz(6.06), LaserDrive.from_mhz(6.7))
    assert r_b / UM == pytest.approx(4.598, abs=2e-3)
    with pytest.raises(ValueError):
        blockade_radius(-1, 1, 1)
    assert atoms_in_blockade(2.443 * UM, 532 * NM) == pytest.approx(66.2, abs=0.1)


def test_isotropic_collection_fraction():
    assert isotropic_collection_fraction(0.68) == pytest.approx(0.1334, abs=1e-4)
    assert isotropic_collection_fraction(1.0) == 0.5
    with pytest.raises(ValueError):
        isotropic_collection_fraction(1.2)


@settings(max_examples=30)
@given(st.floats(-30, 30), st.floats(0.5, 20), st.floats(0.5, 10))
def test_eit_affine_rescaling(d, oc, g):
    # chi depends only on ratios of frequencies
    k = 7.3
    a = eit_response(d, 0.0, oc, g, 0.01)
    b = eit_response(k * d, 0.0, k * oc, k * g, k * 0.01)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)
