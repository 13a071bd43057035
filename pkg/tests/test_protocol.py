import json
import math

import numpy as np
import pytest

from spinstar import closed_form as cf
from spinstar.model import ModelAssumptionError, make_params, uniform_params
from spinstar.protocol import (
    RNG_ALGORITHM,
    bath_from_w_like,
    bath_overlap,
    binomial_sigma,
    branch_probabilities,
    deterministic_ladder,
    dicke_state,
    make_stream,
    measure_central,
    prepare_w_like,
    run_ladder,
    success_count,
    write_jsonl,
)
from spinstar.sector import evolve_sector, expectation_j2, expectation_jz, initial_state


def test_measure_trivial():
    p = make_params(3, [0.2, 0.3, 0.4], 0, 0)
    out = measure_central(initial_state(p), make_stream(1))
    assert out.eigenvalue == 1 and out.probability == 1.0
    assert out.collapsed.n_up == 0 and out.collapsed.norm() == pytest.approx(1.0)


def test_measure_at_optimal_time():
    p = make_params(3, [0.3, 0.5, 0.9], 0.6, 0.6)
    state = evolve_sector(p, initial_state(p), cf.optimal_times(p, 0))
    p_up, p_down = branch_probabilities(state)
    assert p_down == pytest.approx(1.0, abs=1e-12)
    for seed in range(20):
        out = measure_central(state, make_stream(seed))
        assert out.eigenvalue == -1
        assert abs(bath_overlap(out.collapsed, bath_from_w_like(cf.w_like_state(p)))) == pytest.approx(1.0, abs=1e-10)


def test_measure_half():
    p = make_params(2, [0.6, 0.8], 0, 0)
    state = evolve_sector(p, initial_state(p), math.pi / 4)
    p_up, p_down = branch_probabilities(state)
    assert p_down == pytest.approx(0.5, abs=1e-12)
    assert p_up + p_down == pytest.approx(1.0, abs=1e-10)


def test_measure_consumes_one_draw():
    p = make_params(2, [0.6, 0.8], 0, 0)
    state = evolve_sector(p, initial_state(p), 0.5)
    rng = make_stream(42)
    measure_central(state, rng)
    ref = make_stream(42)
    ref.random()
    assert rng.random() == ref.random()


def test_prepare_w_like():
    p = make_params(4, [0.1, 0.2, 0.3, 0.4], 0.0, 0.0)
    t = cf.optimal_times(p, 3)
    target = bath_from_w_like(cf.w_like_state(p))
    for seed in range(50):
        rec = prepare_w_like(p, t, seed)
        assert rec.succeeded and rec.rng_algorithm == RNG_ALGORITHM
        assert abs(bath_overlap(rec.final_state, target)) ** 2 == pytest.approx(1.0, abs=1e-10)
    assert not any(prepare_w_like(p, 0.0, s).succeeded for s in range(50))


def test_prepare_w_like_detuned_collapses_to_w_like():
    p = make_params(3, [0.3, 0.5, 0.9], 0.2, 0.0)
    target = bath_from_w_like(cf.w_like_state(p))
    recs = [prepare_w_like(p, 1.0, s) for s in range(200)]
    for rec in recs:
        if rec.succeeded:
            assert abs(bath_overlap(rec.final_state, target)) == pytest.approx(1.0, abs=1e-10)


def test_reproducible():
    p = make_params(3, [0.3, 0.5, 0.9], 0.2, 0.0)
    a = [prepare_w_like(p, 1.0, s).to_json() for s in range(100)]
    b = [prepare_w_like(p, 1.0, s).to_json() for s in range(100)]
    assert a == b
    sched = [0.3, 0.9, 0.2]
    assert run_ladder(4, 0.7, 3, sched, 99).to_json() == run_ladder(4, 0.7, 3, sched, 99).to_json()


def test_w_like_monte_carlo():
    p = make_params(3, [0.3, 0.5, 0.9], 0.2, 0.0)
    n = 20000
    wins, total = success_count(prepare_w_like(p, 1.0, s) for s in range(n))
    expected = cf.success_probability(p, 1.0)
    assert abs(wins / total - expected) <= 3 * binomial_sigma(expected, n)


def test_ladder_optimal_schedule_always_succeeds():
    for n in (1, 3, 5):
        for k in range(1, n + 1):
            schedule, _ = deterministic_ladder(n, 0.6, k)
            for seed in range(10):
                rec = run_ladder(n, 0.6, k, schedule, seed)
                assert rec.succeeded and len(rec.steps) == k
                assert all(o == -1 for _, o, _ in rec.steps)
                assert expectation_jz(rec.final_state) == pytest.approx(-n / 2 + k, abs=1e-8)
                assert expectation_j2(rec.final_state) == pytest.approx(n / 2 * (n / 2 + 1), abs=1e-8)


def test_ladder_k1_matches_w_state():
    n, alpha, t = 4, 0.5, 0.7
    p = uniform_params(n, alpha)
    for seed in range(200):
        a = run_ladder(n, alpha, 1, [t], seed)
        b = prepare_w_like(p, t, seed)
        assert a.succeeded == b.succeeded
        assert a.steps[0][2] == pytest.approx(b.steps[0][2], abs=1e-12)


def test_ladder_failure_halts():
    rec = run_ladder(3, 1.0, 3, [0.0, 1.0, 1.0], 0)
    assert not rec.succeeded and len(rec.steps) == 1 and rec.steps[0][1] == 1


def test_ladder_rejects_nonuniform():
    with pytest.raises(ModelAssumptionError):
        run_ladder(2, [0.5, 0.6], 1, [1.0], 0)
    with pytest.raises(ModelAssumptionError):
        deterministic_ladder(2, [0.5, 0.6], 1)
    with pytest.raises(ValueError):
        run_ladder(2, 0.5, 2, [1.0], 0)
    with pytest.raises(ValueError):
        run_ladder(2, 0.5, 3, [1.0] * 3, 0)


def _dicke_by_raising(n, k):
    """Apply the collective raising operator k times to the all-down state."""
    vec = {(): 1.0}
    for _ in range(k):
        nxt = {}
        for ups, c in vec.items():
            for r in range(1, n + 1):
                if r not in ups:
                    key = tuple(sorted(ups + (r,)))
                    nxt[key] = nxt.get(key, 0) + c
        vec = nxt
    keys = sorted(vec)
    amps = np.array([vec[key] for key in keys], float)
    return amps / np.linalg.norm(amps)


def test_deterministic_ladder_states():
    sched, w = deterministic_ladder(5, 0.3, 1)
    np.testing.assert_allclose(w.amplitudes, np.full(5, 5 ** -0.5), atol=1e-12)
    assert sched == [pytest.approx(math.pi / (2 * 0.3 * math.sqrt(5)))]
    _, top = deterministic_ladder(2, 1.0, 2)
    np.testing.assert_allclose(np.abs(top.amplitudes), [1.0], atol=1e-12)
    _, d42 = deterministic_ladder(4, 1.0, 2)
    np.testing.assert_allclose(d42.amplitudes, _dicke_by_raising(4, 2), atol=1e-12)
    np.testing.assert_allclose(_dicke_by_raising(4, 2), np.full(6, 6 ** -0.5))


def test_deterministic_ladder_overlap_with_dicke():
    for n in range(1, 7):
        for k in range(1, n + 1):
            _, bath = deterministic_ladder(n, 0.9, k)
            assert abs(bath_overlap(bath, dicke_state(n, k))) == pytest.approx(1.0, abs=1e-8)


def test_jsonl_export(tmp_path):
    p = make_params(2, [0.6, 0.8], 0, 0)
    recs = [prepare_w_like(p, 0.4, s) for s in range(3)]
    path = tmp_path / "t.jsonl"
    with open(path, "w") as fh:
        write_jsonl(recs, fh, summary={"n": 3})
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(lines) == 4 and lines[-1] == {"summary": {"n": 3}}
    assert set(lines[0]) == {"seed", "rng", "steps", "succeeded"}
    assert set(lines[0]["steps"][0]) == {"t", "outcome", "probability"}
