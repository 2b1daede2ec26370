import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydmirror.pairpot import PairPotentialEntry, PotentialDataset, pure_c6_dataset
from rydmirror.steadystate import (E, G, LevelSystem, NonUniqueSteadyState, blockade_crossing,
                                   build_eit_pair_system, build_ladder, chi_vs_distance, solve_steady_state,
                                   weak_probe)
from rydmirror.susceptibility import EitConditions, chi_eit, chi_two_level
from rydmirror.units import GHZ_UM6, UM, LaserDrive


def test_two_level_matches_closed_form(tr):
    for d in np.linspace(-3, 3, 13) * tr.gamma_e.value:
        res = solve_steady_state(build_ladder(weak_probe(tr.gamma_e, d), None, tr))
        assert res.chi_norm == pytest.approx(chi_two_level(d, tr.gamma_e), rel=1e-8)


def test_ladder_matches_eit(tr):
    control = LaserDrive.from_mhz(6.7, 0.3)
    for d in np.linspace(-2, 2, 9) * tr.gamma_e.value:
        probe = weak_probe(tr.gamma_e, d)
        res = solve_steady_state(build_ladder(probe, control, tr))
        ref = chi_eit(EitConditions(probe, control, tr))
        assert res.chi_norm == pytest.approx(ref, rel=1e-7, abs=1e-10)


def test_density_matrix_invariants(tr):
    sysm = build_ladder(LaserDrive.from_mhz(3.0, 1.0), LaserDrive.from_mhz(6.7), tr)
    res = solve_steady_state(sysm)
    assert np.trace(res.rho).real == pytest.approx(1.0)
    assert np.allclose(res.rho, res.rho.conj().T)
    assert np.linalg.eigvalsh(res.rho).min() > -1e-12
    assert res.populations.sum() == pytest.approx(1.0)


def test_strong_drive_saturates(tr):
    res = solve_steady_state(build_ladder(LaserDrive(100 * tr.gamma_e.value), None, tr))
    assert res.populations[E] == pytest.approx(0.5, abs=1e-3)


def test_no_dissipation_is_not_unique():
    h = np.array([[0, 1], [1, 0]], dtype=complex)
    with pytest.raises(NonUniqueSteadyState):
        solve_steady_state(LevelSystem(h, (), 1.0, 1.0))


def test_level_system_validation():
    with pytest.raises(ValueError):
        LevelSystem(np.array([[0, 1], [2, 0]]))
    with pytest.raises(ValueError):
        LevelSystem(np.eye(2), ((0, 5, 1.0),))
    with pytest.raises(ValueError):
        LevelSystem(np.eye(2), ((1, 0, -1.0),))


def test_pair_system_levels(dataset, tr):
    probe, control = weak_probe(tr.gamma_e), LaserDrive.from_mhz(6.7)
    s = build_eit_pair_system(probe, control, dataset, 6 * UM, tr)
    assert s.labels == ("g", "e", "+", "-")
    assert s.hamiltonian[2, E] == pytest.approx(0.5 * control.rabi.value * np.sqrt(0.5))
    # at short range both curves are shifted out and the atom is two-level
    s1 = build_eit_pair_system(probe, control, dataset, 1 * UM, tr)
    assert s1.dim == 2
    assert solve_steady_state(s1).chi_norm == pytest.approx(1j, rel=1e-8)


def test_pair_system_needs_coupled_state(tr):
    ds = PotentialDataset((PairPotentialEntry("a", 1.0, overlap_sq=0.01),))
    with pytest.raises(ValueError):
        build_eit_pair_system(weak_probe(tr.gamma_e), LaserDrive.from_mhz(6.7), ds, 5 * UM, tr)


def test_chi_vs_distance_monotone_and_threads(dataset, tr):
    probe, control = weak_probe(tr.gamma_e), LaserDrive.from_mhz(6.7)
    r = np.linspace(2, 12, 21) * UM
    a = chi_vs_distance(probe, control, dataset, tr, r, threads=1)
    b = chi_vs_distance(probe, control, dataset, tr, r, threads=3)
    assert a == b
    im = np.array([c.imag for _, c in a])
    assert np.all(np.diff(im) <= 1e-12)
    assert im[0] > 0.99 and im[-1] < 0.01


def test_pure_c6_crossing_matches_closed_form(tr):
    c6 = 35 * GHZ_UM6
    control = LaserDrive.from_mhz(6.7)
    r = blockade_crossing(weak_probe(tr.gamma_e), control, pure_c6_dataset(c6), tr)
    # Im chi = 1/2 where U = Omega_c^2 / (2 Gamma_e) i.e. r = (2 C6 Gamma_e / Omega_c^2)^(1/6)
    closed = (2 * c6 * tr.gamma_e.value / control.rabi.value**2) ** (1 / 6)
    assert r == pytest.approx(closed, rel=1e-4)


def test_crossing_requires_bracket(dataset, tr):
    with pytest.raises(ValueError):
        blockade_crossing(weak_probe(tr.gamma_e), LaserDrive.from_mhz(6.7), dataset, tr,
                          bracket=(10 * UM, 20 * UM))


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(2, 10), st.floats(3, 9))
def test_relabel_invariance(dp, oc, r_um):
    # swapping the order of the pair curves only permutes the basis
    from rydmirror.units import TransitionParams

    tr = TransitionParams()
    a = PairPotentialEntry("a", 30 * GHZ_UM6, overlap_sq=0.3)
    b = PairPotentialEntry("b", 40 * GHZ_UM6, overlap_sq=0.6)
    probe = weak_probe(tr.gamma_e, dp * tr.gamma_e.value)
    control = LaserDrive.from_mhz(oc)
    x = solve_steady_state(build_eit_pair_system(probe, control, PotentialDataset((a, b)), r_um * UM, tr))
    y = solve_steady_state(build_eit_pair_system(probe, control, PotentialDataset((b, a)), r_um * UM, tr))
    assert y.chi_norm == pytest.approx(x.chi_norm, rel=1e-8, abs=1e-12)
    assert y.rho[G, G] == pytest.approx(x.rho[G, G], rel=1e-10)
