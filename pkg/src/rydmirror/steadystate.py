"""Lindblad steady states of small level systems and the pair-state probe response.

The generator is built in the column-stacked (Fortran order) vectorisation,
``vec(A rho B) = (B^T kron A) vec(rho)``. The steady state is the null vector
of that generator with one row swapped for the trace condition.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize

from .pairpot import PotentialDataset
from .parallel import pmap
from .units import TWO_PI, LaserDrive, TransitionParams, angular

G, E = 0, 1  # level indices shared by every EIT pair system


class SteadyStateError(RuntimeError):
    """The linear solve for the steady state failed numerically."""


class NonUniqueSteadyState(SteadyStateError):
    """The generator has more than one zero mode (e.g. no dissipation)."""


@dataclass(frozen=True)
class LevelSystem:
    """Hamiltonian (rad/s, hbar = 1) plus incoherent jumps ``(src, dst, rate)``.

    ``probe_rabi`` and ``gamma_e`` are carried along so the probe coherence
    can be turned into a normalised susceptibility.
    """

    hamiltonian: np.ndarray
    collapse_rates: Tuple[Tuple[int, int, float], ...] = ()
    probe_rabi: float = 0.0
    gamma_e: float = 1.0
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        h = np.array(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 2:
            raise ValueError("hamiltonian must be a square matrix of size >= 2")
        if not np.all(np.isfinite(h)):
            raise ValueError("hamiltonian must be finite")
        scale = max(np.abs(h).max(), 1.0)
        if np.abs(h - h.conj().T).max() > 1e-12 * scale:
            raise ValueError("hamiltonian is not Hermitian")
        object.__setattr__(self, "hamiltonian", h)
        rates = []
        for src, dst, rate in self.collapse_rates:
            src, dst, rate = int(src), int(dst), float(angular(rate))
            if not (0 <= src < self.dim and 0 <= dst < self.dim):
                raise ValueError(f"collapse ({src}->{dst}) outside the level range")
            if not rate >= 0 or not np.isfinite(rate):
                raise ValueError("collapse rates must be finite and non-negative")
            rates.append((src, dst, rate))
        object.__setattr__(self, "collapse_rates", tuple(rates))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def jump_operators(self) -> List[np.ndarray]:
        ops = []
        for src, dst, rate in self.collapse_rates:
            if rate > 0:
                c = np.zeros((self.dim, self.dim), dtype=complex)
                c[dst, src] = np.sqrt(rate)
                ops.append(c)
        return ops

    def liouvillian(self) -> np.ndarray:
        d = self.dim
        eye = np.eye(d)
        h = self.hamiltonian
        lv = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
        for c in self.jump_operators():
            cdc = c.conj().T @ c
            lv += np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye)
        return lv


@dataclass(frozen=True)
class SteadyStateResult:
    rho: np.ndarray
    chi_norm: complex
    residual: float = 0.0

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho))


def build_eit_pair_system(
    probe: LaserDrive,
    control: LaserDrive,
    dataset: PotentialDataset,
    r: float,
    transition: TransitionParams = TransitionParams(),
    min_overlap: float = 0.05,
    max_shift=TWO_PI * 100e6,
) -> LevelSystem:
    """g, e and one level per relevant pair curve at ancilla distance ``r``.

    Pair curves are kept when ``overlap_sq > min_overlap`` and the absolute
    shift at ``r`` is below ``max_shift`` (rad/s). With every curve shifted
    out the system reduces to the bare g-e transition.
    """
    dataset.check_range(r)
    max_shift = angular(max_shift)
    coupled = [e for e in dataset.entries if e.overlap_sq > min_overlap]
    if not coupled:
        raise ValueError(f"no pair state in the dataset has overlap_sq > {min_overlap}")
    # curves shifted beyond max_shift are fully blockaded and drop out
    pairs = [(e, float(e(r))) for e in coupled if abs(float(e(r))) < max_shift]
    dp = probe.detuning.value
    d2 = dp + control.detuning.value
    n = 2 + len(pairs)
    h = np.zeros((n, n), dtype=complex)
    h[E, E] = -dp
    h[E, G] = h[G, E] = 0.5 * probe.rabi.value
    for k, (entry, shift) in enumerate(pairs, start=2):
        h[k, k] = -(d2 + shift)
        h[k, E] = h[E, k] = 0.5 * control.rabi.value * np.sqrt(entry.overlap_sq)
    ge = transition.gamma_e.value
    gr = transition.gamma_r.value
    rates = [(E, G, ge)] + [(k, G, gr) for k in range(2, n)]
    labels = ("g", "e") + tuple(e.label for e, _ in pairs)
    return LevelSystem(h, tuple(rates), probe_rabi=probe.rabi.value, gamma_e=ge, labels=labels)


def build_ladder(probe: LaserDrive, control: Optional[LaserDrive] = None,
                 transition: TransitionParams = TransitionParams(), u_int=0.0) -> LevelSystem:
    """Two-level atom (``control=None``) or a single-Rydberg-level ladder."""
    dp = probe.detuning.value
    ge = transition.gamma_e.value
    if control is None:
        h = np.array([[0, 0.5 * probe.rabi.value], [0.5 * probe.rabi.value, -dp]], dtype=complex)
        return LevelSystem(h, ((E, G, ge),), probe.rabi.value, ge, ("g", "e"))
    h = np.zeros((3, 3), dtype=complex)
    h[E, E] = -dp
    h[E, G] = h[G, E] = 0.5 * probe.rabi.value
    h[2, 2] = -(dp + control.detuning.value + angular(u_int))
    h[2, E] = h[E, 2] = 0.5 * control.rabi.value
    rates = ((E, G, ge), (2, G, transition.gamma_r.value))
    return LevelSystem(h, rates, probe.rabi.value, ge, ("g", "e", "r"))


def solve_steady_state(sys: LevelSystem, check: bool = True) -> SteadyStateResult:
    """Unique trace-one null vector of the Lindblad generator.

    Raises ``NonUniqueSteadyState`` when the kernel is degenerate and
    ``SteadyStateError`` when the solution violates the density-matrix
    invariants.
    """
    d = sys.dim
    scale = max(sys.gamma_e, np.abs(sys.hamiltonian).max(), 1e-300)
    lv = sys.liouvillian() / scale
    sv = linalg.svdvals(lv)
    if sv[-2] <= 1e-12 * sv[0]:
        raise NonUniqueSteadyState(
            "steady state is not unique: the generator has a degenerate kernel "
            "(add decay that reaches every driven level)"
        )
    a = lv.copy()
    trace_row = np.eye(d).reshape(-1, order="F")
    a[0, :] = trace_row
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    try:
        x = linalg.solve(a, b)
    except linalg.LinAlgError as exc:  # pragma: no cover
        raise SteadyStateError(f"steady-state solve failed: {exc}") from exc
    rho = x.reshape(d, d, order="F")
    rho = 0.5 * (rho + rho.conj().T)
    residual = float(np.linalg.norm(lv @ rho.reshape(-1, order="F")))
    if check:
        if abs(np.trace(rho) - 1) > 1e-9:
            raise SteadyStateError("steady state lost normalisation")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise SteadyStateError("steady state is not positive semidefinite")
        if residual > 1e-9 * np.linalg.norm(lv, 2):
            raise SteadyStateError(f"steady-state residual {residual:.3g} too large")
    chi = _chi_from_rho(rho, sys)
    return SteadyStateResult(rho, chi, residual)


def _chi_from_rho(rho, sys: LevelSystem) -> complex:
    if sys.probe_rabi <= 0:
        return complex("nan")
    # -2 gamma_e rho_eg / Omega_p with gamma_e the half width
    return complex(-sys.gamma_e * rho[E, G] / sys.probe_rabi)


def chi_vs_distance(
    probe: LaserDrive,
    control: LaserDrive,
    dataset: PotentialDataset,
    transition: TransitionParams,
    r_grid: Sequence[float],
    threads: Optional[int] = None,
    **filters,
) -> List[Tuple[float, complex]]:
    """Steady-state susceptibility at each ancilla distance in ``r_grid``."""
    r_grid = [float(r) for r in r_grid]
    dataset.check_range(r_grid)

    def one(r):
        sys = build_eit_pair_system(probe, control, dataset, r, transition, **filters)
        return r, solve_steady_state(sys).chi_norm

    return pmap(one, r_grid, threads)


def blockade_crossing(
    probe: LaserDrive,
    control: LaserDrive,
    dataset: PotentialDataset,
    transition: TransitionParams,
    bracket: Optional[Tuple[float, float]] = None,
    level: float = 0.5,
    **filters,
) -> float:
    """Distance where ``Im chi`` falls through ``level`` (the EIT blockade radius)."""
    lo, hi = bracket or dataset.valid_range

    def f(r):
        sys = build_eit_pair_system(probe, control, dataset, r, transition, **filters)
        return solve_steady_state(sys).chi_norm.imag - level

    grid = np.geomspace(lo, hi, 40)
    vals = [f(r) for r in grid]
    for i in range(len(grid) - 1, 0, -1):
        if vals[i - 1] >= 0 > vals[i]:
            return optimize.brentq(f, grid[i - 1], grid[i], xtol=1e-12, rtol=1e-12)
    raise ValueError(f"Im chi does not cross {level} inside the bracket")


def weak_probe(gamma_e, detuning=0.0, ratio: float = 1e-5) -> LaserDrive:
    """Probe whose Rabi frequency is ``ratio * gamma_e``, deep in linear response."""
    return LaserDrive(ratio * angular(gamma_e), detuning)
