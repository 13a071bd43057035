"""Spin-star parameters, conserved-sector bases and index-set helpers.

Natural units (hbar = 1) are used everywhere except in
:func:`ev_to_angular_frequency`. Bath spins are labelled 1..N.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Sequence

HBAR_EV_S = 6.582119569e-16


class ParamsError(ValueError):
    """Raised for malformed spin-star parameters."""


class ModelAssumptionError(ValueError):
    """Raised when a protocol is asked to run outside the regime it assumes."""


@dataclass(frozen=True)
class SpinStarParams:
    """Central spin coupled to ``n_spins`` uncoupled bath spins.

    Attributes
    ----------
    n_spins : int
        Number of bath spins N.
    couplings : tuple of float
        Exchange couplings alpha_j, j = 1..N.
    omega : float
        Bath Zeeman frequency.
    omega0 : float
        Central-spin Zeeman frequency.
    """

    n_spins: int
    couplings: tuple[float, ...]
    omega: float
    omega0: float

    def __post_init__(self):
        if isinstance(self.n_spins, bool) or int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ParamsError(f"n_spins must be a positive integer, got {self.n_spins!r}")
        couplings = tuple(float(c) for c in self.couplings)
        if len(couplings) != self.n_spins:
            raise ParamsError(
                f"couplings has {len(couplings)} entries, expected n_spins={self.n_spins}"
            )
        values = couplings + (float(self.omega), float(self.omega0))
        if not all(math.isfinite(v) for v in values):
            raise ParamsError("couplings and frequencies must be finite")
        object.__setattr__(self, "n_spins", int(self.n_spins))
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "omega0", float(self.omega0))

    @property
    def detuning(self) -> float:
        return self.omega - self.omega0

    @property
    def sum_alpha_sq(self) -> float:
        return math.fsum(a * a for a in self.couplings)

    @property
    def is_uniform(self) -> bool:
        return all(a == self.couplings[0] for a in self.couplings)

    def to_dict(self) -> dict:
        return {
            "n_spins": self.n_spins,
            "couplings": list(self.couplings),
            "omega": self.omega,
            "omega0": self.omega0,
        }


def make_params(n_spins: int, couplings: Sequence[float], omega: float, omega0: float) -> SpinStarParams:
    return SpinStarParams(n_spins, tuple(couplings), omega, omega0)


def uniform_params(n_spins: int, alpha: float, detuning: float = 0.0) -> SpinStarParams:
    """Equal couplings, with ``omega0`` fixed at zero so that ``omega`` is the detuning."""
    return SpinStarParams(n_spins, (alpha,) * n_spins, detuning, 0.0)


_SCHEMA = {"n_spins": int, "couplings": list, "omega": (int, float), "omega0": (int, float)}


def params_from_dict(doc: dict) -> SpinStarParams:
    """Validate a decoded JSON document and build parameters from it."""
    if not isinstance(doc, dict):
        raise ParamsError("params document must be a JSON object")
    missing = sorted(set(_SCHEMA) - set(doc))
    if missing:
        raise ParamsError(f"params document missing keys: {', '.join(missing)}")
    extra = sorted(set(doc) - set(_SCHEMA))
    if extra:
        raise ParamsError(f"params document has unknown keys: {', '.join(extra)}")
    for key, kind in _SCHEMA.items():
        value = doc[key]
        if isinstance(value, bool) or not isinstance(value, kind):
            raise ParamsError(f"params key {key!r} has wrong type {type(value).__name__}")
    for c in doc["couplings"]:
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            raise ParamsError("couplings must be a list of numbers")
    return make_params(doc["n_spins"], doc["couplings"], doc["omega"], doc["omega0"])


def load_params(path: str | Path) -> SpinStarParams:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParamsError(f"{path}: invalid JSON ({exc})") from exc
    return params_from_dict(doc)


def rabi_frequency(params: SpinStarParams) -> float:
    """Collective oscillation frequency sqrt(sum alpha_j^2 + detuning^2)."""
    return math.sqrt(params.sum_alpha_sq + params.detuning ** 2)


def ev_to_angular_frequency(energy_ev: float) -> float:
    """Convert an energy in eV to an angular frequency in rad/s."""
    if not math.isfinite(energy_ev):
        raise ValueError("energy must be finite")
    return energy_ev / HBAR_EV_S


def add_index(index_set: Sequence[int], r: int) -> tuple[int, ...]:
    """Insert ``r`` into a strictly increasing index tuple."""
    if r in index_set:
        raise ValueError(f"index {r} already present in {tuple(index_set)}")
    return tuple(sorted((*index_set, r)))


def remove_index(index_set: Sequence[int], r: int) -> tuple[int, ...]:
    """Drop ``r`` from an index tuple, keeping the order of the rest."""
    if r not in index_set:
        raise ValueError(f"index {r} not present in {tuple(index_set)}")
    return tuple(i for i in index_set if i != r)


@dataclass(frozen=True)
class BasisElement:
    central_up: bool
    up_set: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Ordered basis of one conserved total-S_z sector.

    The first ``C(N, p)`` elements have the central spin up and ``p`` bath
    spins up; the remaining ``C(N, p+1)`` have the central spin down and
    ``p + 1`` bath spins up. Up-sets are lexicographic within each block.
    """

    n_spins: int
    excitation_p: int
    elements: tuple[BasisElement, ...]

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def n_up_block(self) -> int:
        return math.comb(self.n_spins, self.excitation_p)

    def rank(self, element: BasisElement) -> int:
        return self._ranks[element]

    @property
    def _ranks(self) -> dict[BasisElement, int]:
        ranks = self.__dict__.get("_rank_cache")
        if ranks is None:
            ranks = {el: k for k, el in enumerate(self.elements)}
            object.__setattr__(self, "_rank_cache", ranks)
        return ranks

    def total_sz(self) -> float:
        el = self.elements[0]
        k = len(el.up_set)
        return (0.5 if el.central_up else -0.5) + (2 * k - self.n_spins) / 2


@lru_cache(maxsize=128)
def enumerate_sector(n_spins: int, excitation_p: int) -> SectorBasis:
    if n_spins < 1:
        raise ValueError("n_spins must be >= 1")
    if not 0 <= excitation_p <= n_spins - 1:
        raise ValueError(f"excitation_p must lie in [0, {n_spins - 1}], got {excitation_p}")
    spins = range(1, n_spins + 1)
    up = [BasisElement(True, s) for s in combinations(spins, excitation_p)]
    down = [BasisElement(False, s) for s in combinations(spins, excitation_p + 1)]
    return SectorBasis(n_spins, excitation_p, tuple(up + down))
