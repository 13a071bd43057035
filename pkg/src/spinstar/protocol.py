"""Conditional state preparation by projective measurement of the central spin.

Every trajectory draws from its own Philox (counter-based) generator keyed by
an integer seed, so trajectories can be replayed individually and run in any
order. A trajectory succeeds only if every central-spin measurement returns -1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from . import closed_form as cf
from .model import ModelAssumptionError, SpinStarParams, uniform_params
from .sector import BathState, SectorState, evolve_sector, initial_state, with_central_up

RNG_ALGORITHM = "numpy.Philox4x64"
BORN_TOL = 1e-10


def make_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def trajectory_seeds(base_seed: int, count: int) -> list[int]:
    """Independent 64-bit keys for ``count`` trajectories derived from one seed."""
    if count <= 0:
        return []
    state = np.random.SeedSequence(int(base_seed)).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


@dataclass(frozen=True)
class MeasurementOutcome:
    eigenvalue: int
    probability: float
    collapsed: BathState
    probability_down: float


@dataclass
class TrajectoryRecord:
    seed: int
    steps: list[tuple[float, int, float]] = field(default_factory=list)
    final_state: BathState | None = None
    succeeded: bool = False
    rng_algorithm: str = RNG_ALGORITHM

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "rng": self.rng_algorithm,
            "steps": [{"t": t, "outcome": o, "probability": p} for t, o, p in self.steps],
            "succeeded": self.succeeded,
        }


def branch_probabilities(state: SectorState) -> tuple[float, float]:
    """Born probabilities (P(+1), P(-1)) for sigma_z of the central spin."""
    p_up = float(np.vdot(state.up_block, state.up_block).real)
    p_down = float(np.vdot(state.down_block, state.down_block).real)
    total = p_up + p_down
    if abs(total - 1.0) > BORN_TOL:
        raise ValueError(f"state is not normalised (norm^2 = {total!r})")
    return p_up / total, p_down / total


def project_central(state: SectorState, eigenvalue: int) -> BathState:
    """Renormalised bath state left by the given central-spin outcome."""
    basis = state.basis
    if eigenvalue == 1:
        block, n_up = state.up_block, basis.excitation_p
    elif eigenvalue == -1:
        block, n_up = state.down_block, basis.excitation_p + 1
    else:
        raise ValueError("eigenvalue must be +1 or -1")
    norm = np.linalg.norm(block)
    if norm == 0.0:
        raise ValueError(f"outcome {eigenvalue:+d} has zero probability")
    return BathState(basis.n_spins, n_up, block / norm)


def measure_central(state: SectorState, rng: np.random.Generator) -> MeasurementOutcome:
    """Sample a projective sigma_z measurement of the central spin.

    Consumes exactly one uniform draw from ``rng``.
    """
    p_up, p_down = branch_probabilities(state)
    eigenvalue = -1 if rng.random() < p_down else 1
    prob = p_down if eigenvalue == -1 else p_up
    if prob == 0.0:
        raise RuntimeError("sampled a zero-probability branch")
    return MeasurementOutcome(eigenvalue, prob, project_central(state, eigenvalue), p_down)


def prepare_w_like(params: SpinStarParams, measure_time: float, seed: int) -> TrajectoryRecord:
    """Evolve from central-up/bath-down for ``measure_time`` and measure once."""
    if params.sum_alpha_sq == 0.0:
        raise ValueError("all couplings are zero; no W-like state can be produced")
    rng = make_stream(seed)
    state = evolve_sector(params, initial_state(params), measure_time)
    outcome = measure_central(state, rng)
    return TrajectoryRecord(
        seed,
        [(float(measure_time), outcome.eigenvalue, outcome.probability)],
        outcome.collapsed,
        outcome.eigenvalue == -1,
    )


def _uniform_alpha(n_spins: int, alpha: float | Sequence[float]) -> float:
    if np.ndim(alpha) == 0:
        a = float(alpha)
    else:
        values = [float(x) for x in alpha]
        if len(values) != n_spins:
            raise ValueError("coupling list length does not match n_spins")
        if any(v != values[0] for v in values):
            raise ModelAssumptionError("the Dicke ladder requires equal couplings for every bath spin")
        a = values[0]
    if not a > 0:
        raise ModelAssumptionError("the Dicke ladder requires a positive uniform coupling")
    return a


def _check_schedule(n_spins: int, target_k: int, schedule: Sequence[float]) -> None:
    if not 1 <= target_k <= n_spins:
        raise ValueError(f"target_k must lie in 1..{n_spins}")
    if len(schedule) != target_k:
        raise ValueError(f"schedule has {len(schedule)} times, expected {target_k}")


def run_ladder(
    n_spins: int,
    alpha: float | Sequence[float],
    target_k: int,
    schedule: Sequence[float],
    seed: int,
) -> TrajectoryRecord:
    """Climb the symmetric ladder by ``target_k`` conditional measurements.

    After each -1 outcome the central spin is reset to up instantaneously.
    A +1 outcome ends the trajectory as a failure; ``final_state`` is then
    the collapsed bath state of that step.
    """
    a = _uniform_alpha(n_spins, alpha)
    _check_schedule(n_spins, target_k, schedule)
    params = uniform_params(n_spins, a)
    rng = make_stream(seed)
    record = TrajectoryRecord(seed)
    state = initial_state(params)
    for step, t in enumerate(schedule, start=1):
        outcome = measure_central(evolve_sector(params, state, t), rng)
        record.steps.append((float(t), outcome.eigenvalue, outcome.probability))
        record.final_state = outcome.collapsed
        if outcome.eigenvalue == 1:
            return record
        if step < target_k:
            state = with_central_up(outcome.collapsed)
    record.succeeded = True
    return record


def postselected_ladder(n_spins: int, alpha: float, schedule: Sequence[float]) -> tuple[float, BathState]:
    """Probability that every step succeeds, and the bath state on that branch."""
    params = uniform_params(n_spins, alpha)
    state = initial_state(params)
    prob = 1.0
    bath = None
    for step, t in enumerate(schedule, start=1):
        evolved = evolve_sector(params, state, t)
        _, p_down = branch_probabilities(evolved)
        prob *= p_down
        bath = project_central(evolved, -1)
        if step < len(schedule):
            state = with_central_up(bath)
    return prob, bath


def deterministic_ladder(n_spins: int, alpha: float | Sequence[float], target_k: int) -> tuple[list[float], BathState]:
    """Optimal (n = 0) schedule and the bath state it reaches with certainty.

    The returned state carries a global phase chosen so that its first
    amplitude is real and positive.
    """
    a = _uniform_alpha(n_spins, alpha)
    schedule = [cf.ladder_optimal_time(n_spins, i, a, 0) for i in range(1, target_k + 1)]
    _check_schedule(n_spins, target_k, schedule)
    _, bath = postselected_ladder(n_spins, a, schedule)
    first = bath.amplitudes[np.flatnonzero(np.abs(bath.amplitudes) > 0)[0]]
    return schedule, BathState(n_spins, target_k, bath.amplitudes * (abs(first) / first))


def dicke_state(n_spins: int, n_up: int) -> BathState:
    """Equal-weight superposition of every configuration with ``n_up`` spins up."""
    dim = math.comb(n_spins, n_up)
    return BathState(n_spins, n_up, np.full(dim, 1 / math.sqrt(dim)))


def bath_overlap(x: BathState, y: BathState) -> complex:
    if (x.n_spins, x.n_up) != (y.n_spins, y.n_up):
        return 0j
    return complex(np.vdot(x.amplitudes, y.amplitudes))


def bath_from_w_like(w: cf.WLikeState) -> BathState:
    return BathState(len(w.amplitudes), 1, w.as_array())


def success_count(records: Iterable[TrajectoryRecord]) -> tuple[int, int]:
    n = k = 0
    for rec in records:
        n += 1
        k += rec.succeeded
    return k, n


def binomial_sigma(p: float, n: int) -> float:
    p = min(max(p, 0.0), 1.0)  # round-off can push p just past 1
    return math.sqrt(p * (1 - p) / n)


def write_jsonl(records: Iterable[TrajectoryRecord], fh: IO[str], summary: dict | None = None) -> None:
    for rec in records:
        fh.write(json.dumps(rec.to_json()) + "\n")
    if summary is not None:
        fh.write(json.dumps({"summary": summary}) + "\n")
