"""Analytic results for the single-excitation dynamics and the Dicke ladder.

All functions start from the central spin up and every bath spin down,
except the ladder formulas, which take uniform couplings and zero detuning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import SpinStarParams, rabi_frequency


@dataclass(frozen=True)
class ClosedFormAmplitudes:
    a: complex
    b: tuple[complex, ...]

    @property
    def norm_sq(self) -> float:
        return abs(self.a) ** 2 + math.fsum(abs(x) ** 2 for x in self.b)


@dataclass(frozen=True)
class WLikeState:
    amplitudes: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.amplitudes, dtype=complex)


@dataclass(frozen=True)
class LadderStep:
    step_index: int
    p_i: float
    A: complex
    B: complex


def amplitude_a(params: SpinStarParams, t: float) -> complex:
    """Amplitude of the initial configuration, cos(Wt) - i (D/W) sin(Wt)."""
    omega = rabi_frequency(params)
    if omega == 0.0:
        return 1.0 + 0.0j
    return complex(math.cos(omega * t), -params.detuning / omega * math.sin(omega * t))


def amplitude_b(params: SpinStarParams, j: int, t: float) -> complex:
    """Amplitude for central spin down and bath spin ``j`` (1-based) up."""
    if not 1 <= j <= params.n_spins:
        raise ValueError(f"spin index {j} outside 1..{params.n_spins}")
    omega = rabi_frequency(params)
    if omega == 0.0:
        return 0j
    return complex(0.0, -params.couplings[j - 1] / omega * math.sin(omega * t))


def amplitudes(params: SpinStarParams, t: float) -> ClosedFormAmplitudes:
    return ClosedFormAmplitudes(
        amplitude_a(params, t),
        tuple(amplitude_b(params, j, t) for j in range(1, params.n_spins + 1)),
    )


def amplitudes_on_grid(params: SpinStarParams, times) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (a, b) over a time grid; ``b`` has shape (len(times), N)."""
    times = np.asarray(times, dtype=float)
    omega = rabi_frequency(params)
    alphas = np.asarray(params.couplings)
    if omega == 0.0:
        return np.ones_like(times, dtype=complex), np.zeros((times.size, params.n_spins), complex)
    s = np.sin(omega * times)
    a = np.cos(omega * times) - 1j * (params.detuning / omega) * s
    b = -1j * np.outer(s, alphas / omega)
    return a, b


def success_probability(params: SpinStarParams, t: float) -> float:
    """Probability that measuring the central spin at ``t`` gives -1."""
    omega = rabi_frequency(params)
    if omega == 0.0:
        return 0.0
    return params.sum_alpha_sq / omega ** 2 * math.sin(omega * t) ** 2


def survival_probability(params: SpinStarParams, t: float) -> float:
    """Probability of finding the system back in its initial configuration."""
    return abs(amplitude_a(params, t)) ** 2


def optimal_times(params: SpinStarParams, n: int) -> float:
    """n-th time at which the success probability peaks."""
    if n < 0:
        raise ValueError("n must be non-negative")
    omega = rabi_frequency(params)
    if omega == 0.0:
        raise ValueError("no dynamics: all couplings and the detuning vanish")
    return math.pi * (2 * n + 1) / (2 * omega)


def timing_robustness(params: SpinStarParams, n: int, x: float) -> float:
    """Success probability when measuring at t_n (1 + x) instead of t_n."""
    return success_probability(params, optimal_times(params, n) * (1.0 + x))


def w_like_state(params: SpinStarParams) -> WLikeState:
    """Bath state left behind by a -1 outcome, amplitudes alpha_j / |alpha|.

    The common -i phase of the b amplitudes is dropped.
    """
    norm = math.sqrt(params.sum_alpha_sq)
    if norm == 0.0:
        raise ValueError("all couplings are zero; no W-like state can be produced")
    return WLikeState(tuple(a / norm for a in params.couplings))


def pair_concurrence(params: SpinStarParams, i: int, j: int, t: float) -> float:
    """Concurrence between bath spins ``i`` and ``j`` at time ``t``."""
    n = params.n_spins
    if i == j or not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"need two distinct spin indices in 1..{n}, got ({i}, {j})")
    omega = rabi_frequency(params)
    if omega == 0.0:
        return 0.0
    ai, aj = params.couplings[i - 1], params.couplings[j - 1]
    return 2 * abs(ai) * abs(aj) / omega ** 2 * math.sin(omega * t) ** 2


def ladder_coefficient(n_spins: int, i: int) -> float:
    """Matrix element of the collective raising operator between M = -N/2+i-1 and M+1."""
    if not 1 <= i <= n_spins:
        raise ValueError(f"ladder step {i} outside 1..{n_spins}")
    j = n_spins / 2
    m = -j + i - 1
    return math.sqrt(j * (j + 1) - m * (m + 1))


def ladder_amplitudes(n_spins: int, step_k: int, alpha: float, t: float) -> LadderStep:
    if alpha <= 0:
        raise ValueError("ladder formulas need a positive uniform coupling")
    p = ladder_coefficient(n_spins, step_k)
    return LadderStep(step_k, p, complex(math.cos(p * alpha * t)), complex(0.0, -math.sin(p * alpha * t)))


def ladder_success_probability(n_spins: int, alpha: float, times: Sequence[float]) -> float:
    """Probability that the first ``len(times)`` ladder steps all succeed."""
    if len(times) == 0:
        raise ValueError("empty measurement schedule")
    if len(times) > n_spins:
        raise ValueError(f"at most {n_spins} ladder steps for N={n_spins}")
    if alpha <= 0:
        raise ValueError("ladder formulas need a positive uniform coupling")
    prob = 1.0
    for i, t in enumerate(times, start=1):
        prob *= math.sin(ladder_coefficient(n_spins, i) * alpha * t) ** 2
    return prob


def ladder_optimal_time(n_spins: int, step_i: int, alpha: float, n: int = 0) -> float:
    if alpha <= 0:
        raise ValueError("ladder formulas need a positive uniform coupling")
    if n < 0:
        raise ValueError("n must be non-negative")
    return (2 * n + 1) * math.pi / (2 * alpha * ladder_coefficient(n_spins, step_i))
