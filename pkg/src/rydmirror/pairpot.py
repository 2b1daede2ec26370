"""Tabulated Rydberg pair potentials and the S-P exchange rates derived from them.

Dataset files are line oriented::

    # comment
    range_um 1.0 30.0
    # label  c6_GHz_um6  c3_GHz_um3  asymptote_MHz  overlap_sq
    +        36.1        0.0         0.0            0.5

Coefficients are cyclic (``C6/h``); they are converted to rad/s on load.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .susceptibility import EitConditions, rydberg_fraction
from .units import GHZ_UM3, GHZ_UM6, TWO_PI, UM, Frequency, angular

COLUMNS = ("label", "c6_GHz_um6", "c3_GHz_um3", "asymptote_MHz", "overlap_sq")


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PairPotentialEntry:
    """One pair curve ``asymptote + c3/r^3 + c6/r^6`` (all in rad/s units)."""

    label: str
    c6: float
    c3: float = 0.0
    asymptote: float = 0.0
    overlap_sq: float = 1.0

    def __post_init__(self):
        for name in ("c6", "c3", "asymptote", "overlap_sq"):
            v = angular(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, float(v))
        if not 0.0 <= self.overlap_sq <= 1.0:
            raise ValueError("overlap_sq must lie in [0, 1]")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.asymptote + self.c3 / r**3 + self.c6 / r**6


@dataclass(frozen=True)
class PotentialDataset:
    entries: Tuple[PairPotentialEntry, ...]
    valid_range: Tuple[float, float] = (1.0 * UM, 30.0 * UM)
    comments: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("a potential dataset needs at least one entry")
        lo, hi = self.valid_range
        if not 0 < lo < hi:
            raise ValueError("valid_range must satisfy 0 < r_min < r_max")
        total = sum(e.overlap_sq for e in self.entries)
        if total > 1 + 1e-6:
            raise ValueError(f"overlaps sum to {total:.6f} > 1")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, label: str) -> PairPotentialEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    def check_range(self, r):
        lo, hi = self.valid_range
        r = np.asarray(r, dtype=float)
        if np.any(r < lo * (1 - 1e-12)) or np.any(r > hi * (1 + 1e-12)):
            raise ValueError(
                f"distance outside the dataset range [{lo / UM:g}, {hi / UM:g}] um"
            )

    def relevant(self, min_overlap: float = 0.05) -> List[PairPotentialEntry]:
        return [e for e in self.entries if e.overlap_sq > min_overlap]

    def effective_shift(self, r, min_overlap: float = 0.05):
        """Overlap-weighted S-P interaction shift at ``r``."""
        self.check_range(r)
        sel = self.relevant(min_overlap) or list(self.entries)
        w = np.array([e.overlap_sq for e in sel])
        if w.sum() == 0:
            w = np.ones(len(sel))
        vals = np.array([e(r) for e in sel])
        return np.tensordot(w / w.sum(), vals, axes=1)

    def exchange_pair(self) -> Tuple[PairPotentialEntry, PairPotentialEntry]:
        """The two curves with the largest overlap product."""
        if len(self.entries) < 2:
            raise ValueError("exchange needs at least two pair curves")
        ranked = sorted(self.entries, key=lambda e: e.overlap_sq, reverse=True)
        return ranked[0], ranked[1]


def evaluate_potential(entry: PairPotentialEntry, r, valid_range=None):
    """Interaction energy (rad/s) of ``entry`` at distance ``r`` (m)."""
    if valid_range is not None:
        lo, hi = valid_range
        rr = np.asarray(r, dtype=float)
        if np.any(rr < lo) or np.any(rr > hi):
            raise ValueError("distance outside the valid range of the potential")
    out = entry(r)
    return out if np.ndim(out) else float(out)


def exchange_rate(u_plus, u_minus):
    """Coherent S-P exchange rate: half the splitting of the +/- curves."""
    out = 0.5 * np.abs(np.asarray(angular(u_plus), dtype=float) - np.asarray(angular(u_minus), dtype=float))
    return out if np.ndim(out) else float(out)


def exchange_duration(j_col) -> float:
    """Time for one complete collective exchange, 1 / (2 J/2pi)."""
    return 1.0 / (2.0 * angular(j_col) / TWO_PI)


def pair_exchange_rate(r, dataset: PotentialDataset):
    dataset.check_range(r)
    a, b = dataset.exchange_pair()
    return exchange_rate(a(r), b(r))


def shifted_rydberg_fraction(r, dataset: PotentialDataset, eit: EitConditions, n_sa: float = 77.0):
    """S-state fraction of an array atom a distance ``r`` from the P ancilla."""
    shift = dataset.effective_shift(r)
    delta_2 = eit.two_photon_detuning.value + shift
    return rydberg_fraction(
        eit.probe.rabi, eit.control.rabi, eit.probe.detuning.value, delta_2,
        eit.transition.gamma_e_half, n_sa,
    )


def effective_exchange_rate(r, dataset: PotentialDataset, eit: EitConditions, n_sa: float = 77.0):
    """J_eff(r) = P_S(r) * J_ex(r), in rad/s."""
    return shifted_rydberg_fraction(r, dataset, eit, n_sa) * pair_exchange_rate(r, dataset)


def read_dataset(path) -> PotentialDataset:
    text = Path(path).read_text()
    return parse_dataset(text)


def parse_dataset(text: str) -> PotentialDataset:
    entries = []
    comments = []
    valid_range = (1.0 * UM, 30.0 * UM)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        parts = line.split()
        if parts[0] == "range_um":
            if len(parts) != 3:
                raise DatasetFormatError(f"line {lineno}: range_um needs two values")
            valid_range = (float(parts[1]) * UM, float(parts[2]) * UM)
            continue
        if len(parts) != len(COLUMNS):
            raise DatasetFormatError(
                f"line {lineno}: expected {len(COLUMNS)} columns {COLUMNS}, got {len(parts)}"
            )
        try:
            c6, c3, asym, ov = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from None
        entries.append(PairPotentialEntry(
            label=parts[0], c6=c6 * GHZ_UM6, c3=c3 * GHZ_UM3,
            asymptote=Frequency.from_mhz(asym).value, overlap_sq=ov,
        ))
    return PotentialDataset(tuple(entries), valid_range, tuple(comments))


def format_dataset(ds: PotentialDataset) -> str:
    lines = list(ds.comments)
    lo, hi = ds.valid_range
    lines.append(f"range_um {lo / UM:.12g} {hi / UM:.12g}")
    for e in ds.entries:
        lines.append(" ".join([
            e.label,
            f"{e.c6 / GHZ_UM6:.12g}",
            f"{e.c3 / GHZ_UM3:.12g}",
            f"{Frequency(e.asymptote).mhz:.12g}",
            f"{e.overlap_sq:.12g}",
        ]))
    return "\n".join(lines) + "\n"


def write_dataset(ds: PotentialDataset, path) -> None:
    Path(path).write_text(format_dataset(ds))


def default_dataset() -> PotentialDataset:
    """Effective curves bundled with the package (see data/pair_potentials.txt)."""
    text = resources.files("rydmirror").joinpath("data/pair_potentials.txt").read_text()
    return parse_dataset(text)


def pure_c6_dataset(c6, valid_range=(1.0 * UM, 30.0 * UM)) -> PotentialDataset:
    """Single effective van der Waals curve with full optical overlap."""
    return PotentialDataset((PairPotentialEntry("SP", c6=angular(c6), overlap_sq=1.0),), valid_range)

