"""Numerical evolution inside conserved sectors and on the full Hilbert space.

The sector Hamiltonian has +detuning on the central-up block, -detuning on the
central-down block and coupling alpha_r between ``(up, S)`` and
``(down, S + {r})``. It differs from the full Hamiltonian restricted to the
sector by a multiple of the identity, ``sector_energy_offset``; evolution
drops that phase unless ``include_offset=True``.

Full-space vectors use the tensor order central, bath 1, ..., bath N with
|up> as the first basis vector of each spin, so bit value 0 means "up" and
the central spin is the most significant bit.

The full Hamiltonian is built with the Zeeman term
``-(omega * sum_j sz_j + omega0 * sz_A)``; this is the sign under which the
central-up configurations sit at +detuning relative to their partners, as the
amplitude equations require. ``zeeman_sign=+1`` reproduces the other sign,
which amounts to flipping the sign of the detuning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Union

import numpy as np
import scipy.sparse as sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from .model import (
    BasisElement,
    SectorBasis,
    SpinStarParams,
    add_index,
    enumerate_sector,
    remove_index,
)

MAX_SECTOR_DIM = 5000
MAX_FULL_SPINS = 12


@dataclass(frozen=True, eq=False)
class SectorState:
    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (len(self.basis),):
            raise ValueError(
                f"amplitude vector of length {amps.size} does not match sector of size {len(self.basis)}"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_spins(self) -> int:
        return self.basis.n_spins

    @property
    def up_block(self) -> np.ndarray:
        return self.amplitudes[: self.basis.n_up_block]

    @property
    def down_block(self) -> np.ndarray:
        return self.amplitudes[self.basis.n_up_block :]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, central_up: bool, up_set: Iterable[int]) -> complex:
        return complex(self.amplitudes[self.basis.rank(BasisElement(central_up, tuple(up_set)))])


@dataclass(frozen=True, eq=False)
class BathState:
    """Bath-only state with exactly ``n_up`` spins up, lexicographic up-sets."""

    n_spins: int
    n_up: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (math.comb(self.n_spins, self.n_up),):
            raise ValueError("amplitude vector does not match C(N, n_up)")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def up_sets(self) -> list[tuple[int, ...]]:
        return list(combinations(range(1, self.n_spins + 1), self.n_up))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, eq=False)
class SectorHamiltonian:
    basis: SectorBasis
    matrix: np.ndarray


def initial_state(params: SpinStarParams, up_set: Iterable[int] = ()) -> SectorState:
    """Central spin up with the bath spins in ``up_set`` up and the rest down."""
    up_set = tuple(sorted(up_set))
    basis = enumerate_sector(params.n_spins, len(up_set))
    amps = np.zeros(len(basis), dtype=complex)
    amps[basis.rank(BasisElement(True, up_set))] = 1.0
    return SectorState(basis, amps)


def with_central_up(bath: BathState) -> SectorState:
    """Re-prepare the central spin up next to a bath state."""
    basis = enumerate_sector(bath.n_spins, bath.n_up)
    amps = np.zeros(len(basis), dtype=complex)
    amps[: basis.n_up_block] = bath.amplitudes
    return SectorState(basis, amps)


def build_sector_hamiltonian(params: SpinStarParams, excitation_p: int) -> SectorHamiltonian:
    basis = enumerate_sector(params.n_spins, excitation_p)
    dim = len(basis)
    if dim > MAX_SECTOR_DIM:
        raise ValueError(f"sector dimension {dim} exceeds dense limit {MAX_SECTOR_DIM}")
    h = np.zeros((dim, dim), dtype=complex)
    n_up = basis.n_up_block
    delta = params.detuning
    h[np.arange(n_up), np.arange(n_up)] = delta
    h[np.arange(n_up, dim), np.arange(n_up, dim)] = -delta
    for k in range(n_up):
        up_set = basis.elements[k].up_set
        for r in range(1, params.n_spins + 1):
            if r in up_set:
                continue
            m = basis.rank(BasisElement(False, add_index(up_set, r)))
            h[k, m] = h[m, k] = params.couplings[r - 1]
    return SectorHamiltonian(basis, h)


def sector_energy_offset(params: SpinStarParams, excitation_p: int) -> float:
    """Energy of the full Hamiltonian's sector block minus the sector Hamiltonian."""
    return -params.omega * (2 * excitation_p + 1 - params.n_spins)


@lru_cache(maxsize=64)
def _sector_eigh(params: SpinStarParams, excitation_p: int) -> tuple[np.ndarray, np.ndarray]:
    evals, evecs = np.linalg.eigh(build_sector_hamiltonian(params, excitation_p).matrix)
    evals.flags.writeable = False
    evecs.flags.writeable = False
    return evals, evecs


def sector_propagator(params: SpinStarParams, excitation_p: int, t: float) -> np.ndarray:
    evals, evecs = _sector_eigh(params, excitation_p)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def evolve_sector(
    params: SpinStarParams, initial: SectorState, t: float, include_offset: bool = False
) -> SectorState:
    basis = initial.basis
    if basis.n_spins != params.n_spins:
        raise ValueError(f"state has N={basis.n_spins}, parameters have N={params.n_spins}")
    evals, evecs = _sector_eigh(params, basis.excitation_p)
    phases = np.exp(-1j * evals * t)
    if include_offset:
        phases = phases * np.exp(-1j * sector_energy_offset(params, basis.excitation_p) * t)
    out = evecs @ (phases * (evecs.conj().T @ initial.amplitudes))
    return SectorState(basis, out)


def evolve_sector_grid(params: SpinStarParams, initial: SectorState, times) -> np.ndarray:
    """Amplitudes at each time, shape (len(times), dim)."""
    evals, evecs = _sector_eigh(params, initial.basis.excitation_p)
    coeffs = evecs.conj().T @ initial.amplitudes
    phases = np.exp(-1j * np.outer(np.asarray(times, float), evals))
    return (phases * coeffs) @ evecs.T


def amplitude_derivative(params: SpinStarParams, basis: SectorBasis, amps: np.ndarray) -> np.ndarray:
    """Right-hand side d/dt of the coupled amplitude equations, written term by term.

    Central-up amplitudes couple to ``b[O(S + {r})]`` for every r outside S;
    central-down amplitudes couple to ``a[S - {r}]`` for every r in their own
    set S.
    """
    delta = params.detuning
    out = np.empty_like(amps)
    for k, el in enumerate(basis.elements):
        if el.central_up:
            acc = delta * amps[k]
            for r in range(1, params.n_spins + 1):
                if r not in el.up_set:
                    acc += params.couplings[r - 1] * amps[basis.rank(BasisElement(False, add_index(el.up_set, r)))]
        else:
            acc = -delta * amps[k]
            for r in el.up_set:
                acc += params.couplings[r - 1] * amps[basis.rank(BasisElement(True, remove_index(el.up_set, r)))]
        out[k] = -1j * acc
    return out


def evolve_sector_ode(
    params: SpinStarParams, initial: SectorState, times, rtol: float = 1e-12, atol: float = 1e-14
) -> np.ndarray:
    """Adaptive Runge-Kutta integration of the amplitude equations (independent check)."""
    basis = initial.basis
    times = np.atleast_1d(np.asarray(times, dtype=float))
    y0 = initial.amplitudes.astype(complex)
    if times.max() == 0.0:
        return np.tile(y0, (times.size, 1))
    sol = solve_ivp(
        lambda _t, y: amplitude_derivative(params, basis, y),
        (0.0, float(times.max())),
        y0,
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"ODE integration failed: {sol.message}")
    return sol.y.T


# --- full 2^(N+1) space ----------------------------------------------------


def _check_full_size(n_spins: int) -> None:
    if n_spins > MAX_FULL_SPINS:
        raise ValueError(f"full-space evolution limited to N <= {MAX_FULL_SPINS}, got {n_spins}")


def full_index(n_spins: int, central_up: bool, up_set: Iterable[int]) -> int:
    idx = 0 if central_up else 1 << n_spins
    ups = set(up_set)
    for j in range(1, n_spins + 1):
        if j not in ups:
            idx |= 1 << (n_spins - j)
    return idx


def _spin_bits(n_spins: int) -> np.ndarray:
    """bits[idx, k] is 1 when spin k (0 = central) is down."""
    idx = np.arange(2 ** (n_spins + 1))
    shifts = np.arange(n_spins, -1, -1)
    return (idx[:, None] >> shifts) & 1


def full_hamiltonian(params: SpinStarParams, zeeman_sign: int = -1) -> sparse.csr_matrix:
    n = params.n_spins
    _check_full_size(n)
    dim = 2 ** (n + 1)
    sz = 1 - 2 * _spin_bits(n)
    diag = zeeman_sign * (params.omega0 * sz[:, 0] + params.omega * sz[:, 1:].sum(axis=1))
    rows, cols, vals = [np.arange(dim)], [np.arange(dim)], [diag.astype(float)]
    idx = np.arange(dim)
    central_down = (idx >> n) & 1
    for j in range(1, n + 1):
        bath_down = (idx >> (n - j)) & 1
        # central up & bath j down <-> central down & bath j up
        src = idx[(central_down == 0) & (bath_down == 1)]
        dst = src ^ (1 << n) ^ (1 << (n - j))
        a = params.couplings[j - 1]
        rows += [src, dst]
        cols += [dst, src]
        vals += [np.full(src.size, a), np.full(src.size, a)]
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    ).astype(complex)


def evolve_full(params: SpinStarParams, full_state, t: float, zeeman_sign: int = -1) -> np.ndarray:
    """Brute-force evolution on the unrestricted space via a sparse matrix exponential action."""
    _check_full_size(params.n_spins)
    psi = np.asarray(full_state, dtype=complex)
    if psi.shape != (2 ** (params.n_spins + 1),):
        raise ValueError("full state has wrong dimension")
    if t == 0:
        return psi.copy()
    return expm_multiply(-1j * t * full_hamiltonian(params, zeeman_sign), psi)


def sector_indices(basis: SectorBasis) -> np.ndarray:
    return np.array([full_index(basis.n_spins, el.central_up, el.up_set) for el in basis.elements])


def to_full(state: SectorState) -> np.ndarray:
    _check_full_size(state.n_spins)
    psi = np.zeros(2 ** (state.n_spins + 1), dtype=complex)
    psi[sector_indices(state.basis)] = state.amplitudes
    return psi


def evolve_full_by_sectors(params: SpinStarParams, full_state, t: float) -> np.ndarray:
    """Evolve a full-space vector as the direct sum of every conserved sector."""
    n = params.n_spins
    psi = np.asarray(full_state, dtype=complex)
    out = np.zeros_like(psi)
    for p in range(n):
        basis = enumerate_sector(n, p)
        idx = sector_indices(basis)
        piece = SectorState(basis, psi[idx])
        out[idx] = evolve_sector(params, piece, t, include_offset=True).amplitudes
    # one-dimensional sectors: everything down, and everything up
    all_down, all_up = 2 ** (n + 1) - 1, 0
    out[all_down] = psi[all_down] * np.exp(-1j * (params.omega * n + params.omega0) * t)
    out[all_up] = psi[all_up] * np.exp(1j * (params.omega * n + params.omega0) * t)
    return out


def random_product_state(n_spins: int, rng: np.random.Generator) -> np.ndarray:
    """Tensor product of N + 1 random single-spin pure states."""
    psi = np.ones(1, dtype=complex)
    for _ in range(n_spins + 1):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi = np.kron(psi, v / np.linalg.norm(v))
    return psi


# --- observables ------------------------------------------------------------

State = Union[SectorState, BathState, np.ndarray]


def _configurations(state: State) -> list[tuple[bool | None, tuple[int, ...], complex]]:
    """(central_up, bath up-set, amplitude) triples; central is None for bath-only states."""
    if isinstance(state, SectorState):
        return [(el.central_up, el.up_set, c) for el, c in zip(state.basis.elements, state.amplitudes)]
    if isinstance(state, BathState):
        return list(zip([None] * len(state.amplitudes), state.up_sets, state.amplitudes))
    psi = np.asarray(state, dtype=complex)
    n = int(round(math.log2(psi.size))) - 1
    if 2 ** (n + 1) != psi.size:
        raise ValueError("full state length is not a power of two")
    out = []
    for idx in np.flatnonzero(psi):
        central_up = not (idx >> n) & 1
        ups = tuple(j for j in range(1, n + 1) if not (idx >> (n - j)) & 1)
        out.append((central_up, ups, psi[idx]))
    return out


def _n_spins(state: State) -> int:
    if isinstance(state, (SectorState, BathState)):
        return state.n_spins
    return int(round(math.log2(np.asarray(state).size))) - 1


def expectation_sz(state: State) -> float:
    """Total S_z including the central spin (bath-only states contribute J_z)."""
    n = _n_spins(state)
    total = 0.0
    for central_up, ups, c in _configurations(state):
        central = 0.0 if central_up is None else (0.5 if central_up else -0.5)
        total += abs(c) ** 2 * (central + len(ups) - n / 2)
    return total


def expectation_jz(state: State) -> float:
    n = _n_spins(state)
    return sum(abs(c) ** 2 * (len(ups) - n / 2) for _, ups, c in _configurations(state))


def expectation_j2(state: State) -> float:
    """<J^2> of the bath, using J^2 = J_- J_+ + J_z^2 + J_z."""
    n = _n_spins(state)
    raised: dict[tuple, complex] = {}
    jz2 = jz = 0.0
    for central_up, ups, c in _configurations(state):
        m = len(ups) - n / 2
        w = abs(c) ** 2
        jz += w * m
        jz2 += w * m * m
        for r in range(1, n + 1):
            if r not in ups:
                key = (central_up, add_index(ups, r))
                raised[key] = raised.get(key, 0j) + c
    return sum(abs(v) ** 2 for v in raised.values()) + jz2 + jz
