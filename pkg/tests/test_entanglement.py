import math

import numpy as np
import pytest

from spinstar import closed_form as cf
from spinstar.entanglement import PairDensityMatrix, reduced_pair_density, wootters_concurrence
from spinstar.model import make_params, uniform_params
from spinstar.sector import evolve_sector, evolve_sector_grid, initial_state, to_full, SectorState

from conftest import random_params


def eq18_matrix(params, i, j, t):
    a = cf.amplitude_a(params, t)
    b = [cf.amplitude_b(params, k, t) for k in range(1, params.n_spins + 1)]
    bi, bj = b[i - 1], b[j - 1]
    rest = abs(a) ** 2 + sum(abs(b[k]) ** 2 for k in range(params.n_spins) if k not in (i - 1, j - 1))
    return np.array(
        [[0, 0, 0, 0],
         [0, abs(bi) ** 2, bi * bj.conjugate(), 0],
         [0, bi.conjugate() * bj, abs(bj) ** 2, 0],
         [0, 0, 0, rest]],
        dtype=complex,
    )


def concurrence_pure(psi):
    """|<psi| sigma_y sigma_y |psi*>| for a two-qubit pure state."""
    yy = np.fliplr(np.diag([-1, 1, 1, -1])).astype(complex)
    return abs(psi @ yy @ psi)


def test_product_state():
    rho = np.zeros((4, 4))
    rho[3, 3] = 1
    assert wootters_concurrence(rho) == 0.0


@pytest.mark.parametrize(
    "psi",
    [
        np.array([1, 0, 0, 1]) / math.sqrt(2),
        np.array([0, 1, -1, 0]) / math.sqrt(2),
        np.array([0, 1, 1j, 0]) / math.sqrt(2),
    ],
)
def test_bell_states(psi):
    assert wootters_concurrence(np.outer(psi, psi.conj())) == pytest.approx(1.0, abs=1e-12)


def test_random_pure_states(rng):
    for _ in range(50):
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        assert wootters_concurrence(np.outer(psi, psi.conj())) == pytest.approx(concurrence_pure(psi), abs=1e-10)


def test_werner_state():
    # Werner state p|Bell><Bell| + (1-p)/4 has C = max(0, (3p-1)/2)
    bell = np.array([0, 1, -1, 0]) / math.sqrt(2)
    for p in (0.1, 1 / 3, 0.5, 0.9):
        rho = p * np.outer(bell, bell) + (1 - p) / 4 * np.eye(4)
        assert wootters_concurrence(rho) == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-9)


def test_rejects_non_psd():
    with pytest.raises(ValueError):
        wootters_concurrence(np.diag([1.2, -0.2, 0, 0]))
    with pytest.raises(ValueError):
        PairDensityMatrix(np.eye(3))


def test_reduced_density_initial():
    p = make_params(4, [0.1, 0.2, 0.3, 0.4], 0.1, 0)
    rho = reduced_pair_density(initial_state(p), 1, 2).matrix
    np.testing.assert_allclose(rho, np.diag([0, 0, 0, 1]))


def test_reduced_density_quarter_period():
    alphas = np.array([0.2, 0.4, 0.4, 0.8])
    alphas /= np.linalg.norm(alphas)
    p = make_params(4, alphas, 0, 0)
    state = evolve_sector(p, initial_state(p), math.pi / 2)
    for i, j in [(1, 2), (2, 4), (1, 3)]:
        b = -1j * alphas
        expected = np.zeros((4, 4), complex)
        expected[1, 1] = abs(b[i - 1]) ** 2
        expected[2, 2] = abs(b[j - 1]) ** 2
        expected[1, 2] = b[i - 1] * b[j - 1].conjugate()
        expected[2, 1] = expected[1, 2].conjugate()
        expected[3, 3] = 1 - expected[1, 1].real - expected[2, 2].real
        np.testing.assert_allclose(reduced_pair_density(state, i, j).matrix, expected, atol=1e-12)


def test_reduced_density_matches_template_and_full_trace(rng):
    p = make_params(4, rng.uniform(0.1, 1, 4), 0.7, 0.2)
    state0 = initial_state(p)
    for t in np.linspace(0, 6, 13):
        s = evolve_sector(p, state0, t)
        for i, j in [(1, 2), (1, 4), (3, 4)]:
            rho = reduced_pair_density(s, i, j).matrix
            np.testing.assert_allclose(rho, eq18_matrix(p, i, j, t), atol=1e-10)
            np.testing.assert_allclose(rho, reduced_pair_density(to_full(s), i, j).matrix, atol=1e-12)


def test_general_sector_full_trace(rng):
    p = random_params(rng, 5, 5)
    s = evolve_sector(p, initial_state(p, (2, 5)), 1.4)
    for i, j in [(1, 2), (2, 5), (3, 4)]:
        rho = reduced_pair_density(s, i, j)
        np.testing.assert_allclose(rho.matrix, reduced_pair_density(to_full(s), i, j).matrix, atol=1e-12)
        assert np.trace(rho.matrix).real == pytest.approx(1.0)
        assert np.linalg.eigvalsh(rho.matrix).min() > -1e-12


def test_concurrence_against_closed_form():
    p = make_params(3, [0.3, 0.5, 0.9], 0.4, 0.0)
    s = evolve_sector(p, initial_state(p), 1.7)
    assert wootters_concurrence(reduced_pair_density(s, 1, 3)) == pytest.approx(
        cf.pair_concurrence(p, 1, 3, 1.7), abs=1e-9
    )


def test_concurrence_symmetric_and_bounded(rng):
    p = make_params(5, rng.uniform(0.1, 1.0, 5), 0.0, 0.0)
    times = np.linspace(0, 8, 60)
    amps = evolve_sector_grid(p, initial_state(p), times)
    basis = initial_state(p).basis
    bound = 2 * p.couplings[1] * p.couplings[3] / p.sum_alpha_sq
    for vec in amps:
        s = SectorState(basis, vec)
        c24 = wootters_concurrence(reduced_pair_density(s, 2, 4))
        c42 = wootters_concurrence(reduced_pair_density(s, 4, 2))
        assert c24 == pytest.approx(c42, abs=1e-12)
        assert c24 <= bound + 1e-12


def test_index_errors():
    s = initial_state(uniform_params(3, 1.0))
    with pytest.raises(ValueError):
        reduced_pair_density(s, 2, 2)
    with pytest.raises(ValueError):
        reduced_pair_density(s, 1, 4)
