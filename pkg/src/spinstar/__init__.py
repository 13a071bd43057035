"""Exact dynamics and conditional state preparation in the disordered spin-star model."""
from .closed_form import (
    amplitude_a,
    amplitude_b,
    ladder_amplitudes,
    ladder_coefficient,
    ladder_optimal_time,
    ladder_success_probability,
    optimal_times,
    pair_concurrence,
    success_probability,
    survival_probability,
    timing_robustness,
    w_like_state,
)
from .entanglement import PairDensityMatrix, reduced_pair_density, wootters_concurrence
from .estimation import (
    CouplingEstimate,
    ProbabilitySeries,
    estimate_coupling_ratios,
    fit_collective_coupling,
    simulate_ratio_sampling,
    simulate_survival_sampling,
)
from .model import (
    BasisElement,
    ModelAssumptionError,
    ParamsError,
    SectorBasis,
    SpinStarParams,
    add_index,
    enumerate_sector,
    ev_to_angular_frequency,
    make_params,
    rabi_frequency,
    remove_index,
    uniform_params,
)
from .protocol import (
    TrajectoryRecord,
    deterministic_ladder,
    make_stream,
    measure_central,
    prepare_w_like,
    run_ladder,
    trajectory_seeds,
)
from .sector import (
    BathState,
    SectorState,
    build_sector_hamiltonian,
    evolve_full,
    evolve_sector,
    expectation_j2,
    expectation_jz,
    expectation_sz,
    initial_state,
)

__version__ = "0.1.0"
