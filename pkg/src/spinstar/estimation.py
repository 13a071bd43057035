"""Recovering coupling information from simulated measurement records.

Two routes are covered: the collective frequency from the oscillation of the
survival probability cos^2(Omega t), and per-spin weights alpha_j^2 / sum
alpha^2 from which-spin-is-up readouts on W-like states.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import closed_form as cf
from .model import ModelAssumptionError, SpinStarParams

Z95 = 1.959963984540054
CSV_HEADER = ("t", "p_hat", "shots")
MIN_POINTS = 8
MIN_PERIODS = 1.5
MAX_ITERATIONS = 200
STEP_TOL = 1e-10


class EstimationError(RuntimeError):
    """The data cannot support a reliable fit."""


class AliasingError(EstimationError):
    pass


@dataclass(frozen=True, eq=False)
class ProbabilitySeries:
    """Estimated probabilities at increasing times.

    ``exact`` marks noiseless series whose estimates are the true
    probabilities; it is not carried through CSV.
    """

    times: np.ndarray
    p_hat: np.ndarray
    shots: np.ndarray
    exact: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.p_hat, dtype=float)
        s = np.asarray(self.shots, dtype=np.int64)
        if not (t.shape == p.shape == s.shape) or t.ndim != 1:
            raise ValueError("times, p_hat and shots must be 1-d arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("probability estimates must lie in [0, 1]")
        if np.any(s < 1):
            raise ValueError("shots must be positive")
        for name, arr in (("times", t), ("p_hat", p), ("shots", s)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.times.size

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, p, s in zip(self.times, self.p_hat, self.shots):
            w.writerow((repr(float(t)), repr(float(p)), int(s)))

    @classmethod
    def read_csv(cls, fh: IO[str]) -> "ProbabilitySeries":
        reader = csv.reader(fh)
        header = tuple(h.strip() for h in next(reader, ()))
        if header != CSV_HEADER:
            raise ValueError(f"expected CSV header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}")
        rows = [r for r in reader if r]
        if not rows:
            return cls(np.empty(0), np.empty(0), np.empty(0, dtype=np.int64))
        t, p, s = zip(*rows)
        return cls(np.array(t, float), np.array(p, float), np.array(s, dtype=np.int64))


@dataclass
class CouplingEstimate:
    """Fitted collective frequency and/or per-spin weight estimates.

    ``floor`` is the fitted minimum of the survival probability,
    detuning^2 / Omega^2, and stays ``None`` unless it was fitted.
    """

    omega_hat: float | None = None
    sum_alpha_sq_hat: float | None = None
    stderr: float | None = None
    per_spin_ratios: list[tuple[float, float]] | None = None
    floor: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def interval(self, z: float = Z95) -> tuple[float, float]:
        return self.omega_hat - z * self.stderr, self.omega_hat + z * self.stderr

    def per_spin_scale(self, n_spins: int) -> float:
        """Order-of-magnitude single coupling, assuming all couplings are comparable."""
        return math.sqrt(self.sum_alpha_sq_hat / n_spins)

    def to_json(self) -> dict:
        out = {
            "omega_hat": self.omega_hat,
            "sum_alpha_sq_hat": self.sum_alpha_sq_hat,
            "stderr": self.stderr,
            "ratios": [] if self.per_spin_ratios is None else [
                {"estimate": r, "half_width": h} for r, h in self.per_spin_ratios
            ],
        }
        if self.floor is not None:
            out["floor"] = self.floor
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def simulate_survival_sampling(
    params: SpinStarParams,
    times: Sequence[float],
    shots_per_point: int,
    rng: np.random.Generator | None = None,
    exact: bool = False,
    allow_detuning: bool = False,
) -> ProbabilitySeries:
    """Binomial shot-noise samples of the survival probability.

    With ``exact=True`` no randomness is drawn and the estimates are the
    exact probabilities.
    """
    if params.detuning != 0.0 and not allow_detuning:
        raise ModelAssumptionError("survival sampling assumes zero detuning; pass allow_detuning=True")
    if shots_per_point < 1:
        raise ValueError("shots_per_point must be >= 1")
    times = np.asarray(times, dtype=float)
    probs = np.array([cf.survival_probability(params, t) for t in times])
    probs = np.clip(probs, 0.0, 1.0)
    shots = np.full(times.size, shots_per_point, dtype=np.int64)
    if exact:
        return ProbabilitySeries(times, probs, shots, exact=True)
    if rng is None:
        raise ValueError("a random generator is required unless exact=True")
    counts = rng.binomial(shots_per_point, probs)
    return ProbabilitySeries(times, counts / shots_per_point, shots)


def _model(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    c2 = np.cos(x[0] * t) ** 2
    if x.size == 1:
        return c2
    return c2 + x[1] * (1.0 - c2)


def coarse_frequency(series: ProbabilitySeries, oversample: int = 20) -> tuple[float, float]:
    """Peak of the periodogram of the centred signal 2 p - 1.

    Returns (Omega estimate, highest angular frequency probed). The signal
    oscillates at 2 Omega, hence the halving.
    """
    t = series.times
    y = 2 * series.p_hat - 1
    y = y - y.mean()
    span = t[-1] - t[0]
    nyquist = math.pi / float(np.max(np.diff(t)))
    step = 2 * math.pi / (oversample * span)
    freqs = np.arange(step, nyquist + step / 2, step)
    power = np.abs(np.exp(-1j * np.outer(freqs, t)) @ y) ** 2
    return freqs[int(np.argmax(power))] / 2, nyquist


def fit_collective_coupling(series: ProbabilitySeries, fit_floor: bool = False) -> CouplingEstimate:
    """Least-squares frequency of cos^2(Omega t), optionally with a floor.

    Series sampled more coarsely than pi / (2 Omega) are refused when this
    is visible in the data (peak near the Nyquist frequency, or a step too
    large for the estimated frequency); aliasing far below Nyquist cannot be
    told apart from a slower signal and must be excluded by the caller.

    The standard error comes from the curvature of the squared-error
    objective combined with the binomial variance m (1 - m) / shots of the
    fitted curve m; for exact series the squared residuals are used instead.
    """
    n = len(series)
    if n < MIN_POINTS:
        raise EstimationError(f"series has {n} points, need at least {MIN_POINTS}")
    t, p = series.times, series.p_hat
    omega_c, nyquist = coarse_frequency(series)
    dt_max = float(np.max(np.diff(t)))
    if dt_max > math.pi / (2 * omega_c) or 2 * omega_c > 0.95 * nyquist:
        raise AliasingError(
            f"sampling interval {dt_max:.4g} is too coarse for a frequency near {omega_c:.4g} "
            f"(need < {math.pi / (2 * omega_c):.4g}); the series may be aliased"
        )
    span = t[-1] - t[0]
    if span < MIN_PERIODS * math.pi / omega_c:
        raise EstimationError(
            f"series spans {span * omega_c / math.pi:.2f} periods, need at least {MIN_PERIODS}"
        )

    x0 = np.array([omega_c, 0.0]) if fit_floor else np.array([omega_c])
    lower = [0.5 * omega_c] + ([0.0] if fit_floor else [])
    upper = [1.5 * omega_c] + ([1.0] if fit_floor else [])
    if fit_floor:
        x0[1] = min(max(float(p.min()), 0.0), 0.99)
    res = least_squares(
        lambda x: _model(x, t) - p,
        x0,
        bounds=(lower, upper),
        xtol=STEP_TOL,
        ftol=None,
        gtol=None,
        max_nfev=MAX_ITERATIONS,
        method="trf",
    )
    if res.status <= 0:
        raise EstimationError(f"frequency fit did not converge: {res.message}")
    omega_hat = float(res.x[0])
    if abs(omega_hat - lower[0]) < 1e-12 or abs(omega_hat - upper[0]) < 1e-12:
        raise EstimationError("frequency fit ran into its search bounds")
    if dt_max > math.pi / (2 * omega_hat):
        raise AliasingError(f"sampling interval {dt_max:.4g} exceeds pi/(2 Omega) for the fitted Omega")

    jac = res.jac
    resid = res.fun
    if series.exact:
        variance = resid ** 2
    else:
        fitted = _model(res.x, t)
        variance = fitted * (1.0 - fitted) / series.shots
    bread = np.linalg.pinv(jac.T @ jac)
    meat = (jac * variance[:, None]).T @ jac
    cov = bread @ meat @ bread
    stderr = float(math.sqrt(max(cov[0, 0], 0.0)))

    floor = float(res.x[1]) if fit_floor else None
    sum_sq = omega_hat ** 2 * (1.0 - floor) if fit_floor else omega_hat ** 2
    return CouplingEstimate(
        omega_hat=omega_hat,
        sum_alpha_sq_hat=sum_sq,
        stderr=stderr,
        floor=floor,
        diagnostics={
            "coarse_omega": omega_c,
            "evaluations": int(res.nfev),
            "rss": float(resid @ resid),
            "status": int(res.status),
        },
    )


def estimate_coupling_ratios(counts: Sequence[int]) -> CouplingEstimate:
    """Relative weights counts_j / total with 95% Wald half-widths plus a 1/(2n) continuity term."""
    counts = np.asarray(counts)
    if counts.ndim != 1 or counts.size == 0 or np.any(counts < 0):
        raise ValueError("counts must be a non-empty list of non-negative integers")
    total = int(counts.sum())
    if total == 0:
        raise ValueError("all counts are zero")
    ratios = counts / total
    half = Z95 * np.sqrt(ratios * (1 - ratios) / total) + 0.5 / total
    return CouplingEstimate(per_spin_ratios=[(float(r), float(h)) for r, h in zip(ratios, half)])


def ratio_probabilities(params: SpinStarParams) -> np.ndarray:
    """Born probabilities of finding spin j up in the W-like state."""
    amps = cf.w_like_state(params).as_array()
    probs = np.abs(amps) ** 2
    return probs / probs.sum()


def simulate_ratio_sampling(params: SpinStarParams, shots: int, rng: np.random.Generator) -> list[int]:
    """Which-spin-is-up counts from ``shots`` freshly prepared W-like states."""
    return [int(c) for c in rng.multinomial(shots, ratio_probabilities(params))]
