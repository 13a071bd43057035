"""Two-spin reduced density matrices and the Wootters concurrence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sector import BathState, SectorState, _configurations, _n_spins

PSD_TOL = 1e-10
# eigenvalues of rho below this are numerical zeros
NULL_TOL = 1e-14

# sigma_y (x) sigma_y in the basis {uu, ud, du, dd}
_YY = np.array(
    [[0, 0, 0, -1],
     [0, 0, 1, 0],
     [0, 1, 0, 0],
     [-1, 0, 0, 0]],
    dtype=complex,
)


@dataclass(frozen=True, eq=False)
class PairDensityMatrix:
    """4x4 density matrix of two bath spins, basis order uu, ud, du, dd."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("pair density matrix must be 4x4")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


def reduced_pair_density(state: SectorState | BathState | np.ndarray, i: int, j: int) -> PairDensityMatrix:
    """Trace out the central spin and every bath spin other than ``i`` and ``j``.

    Works on sector states, bath-only states and full-space vectors; the
    full-space path goes through an explicit tensor reshape so it can serve
    as an independent check of the other two.
    """
    n = _n_spins(state)
    if i == j or not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"need two distinct spin indices in 1..{n}, got ({i}, {j})")
    if isinstance(state, (SectorState, BathState)):
        return PairDensityMatrix(_pair_from_configs(state, i, j))
    return PairDensityMatrix(_pair_from_full(np.asarray(state, dtype=complex), n, i, j))


def _pair_from_configs(state, i: int, j: int) -> np.ndarray:
    groups: dict[tuple, np.ndarray] = {}
    for central_up, ups, c in _configurations(state):
        local = 2 * (i not in ups) + (j not in ups)
        rest = (central_up, tuple(r for r in ups if r not in (i, j)))
        vec = groups.setdefault(rest, np.zeros(4, dtype=complex))
        vec[local] += c
    rho = np.zeros((4, 4), dtype=complex)
    for vec in groups.values():
        rho += np.outer(vec, vec.conj())
    return rho


def _pair_from_full(psi: np.ndarray, n: int, i: int, j: int) -> np.ndarray:
    tensor = psi.reshape((2,) * (n + 1))
    tensor = np.moveaxis(tensor, (i, j), (0, 1)).reshape(4, -1)
    return tensor @ tensor.conj().T


def wootters_concurrence(rho: PairDensityMatrix | np.ndarray) -> float:
    """max(0, l1 - l2 - l3 - l4) with l the decreasing square roots of the spectrum of rho * flip(rho).

    The l are obtained as singular values of sqrt(rho) YY sqrt(rho)^*, whose
    squares are the eigenvalues of the Hermitian form sqrt(rho) flip(rho)
    sqrt(rho); this avoids square roots of round-off sized eigenvalues.
    """
    m = rho.matrix if isinstance(rho, PairDensityMatrix) else np.asarray(rho, dtype=complex)
    if not np.allclose(m, m.conj().T, atol=PSD_TOL):
        raise ValueError("density matrix is not Hermitian")
    m = (m + m.conj().T) / 2
    evals, evecs = np.linalg.eigh(m)
    if evals.min() < -PSD_TOL:
        raise ValueError(f"density matrix is not positive semidefinite (min eigenvalue {evals.min():.3e})")
    evals = np.where(evals > NULL_TOL, evals, 0.0)
    sqrt_rho = (evecs * np.sqrt(evals)) @ evecs.conj().T
    lam = np.linalg.svd(sqrt_rho @ _YY @ sqrt_rho.conj(), compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))
