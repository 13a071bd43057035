import json
import math

import pytest
from hypothesis import given, strategies as st

from spinstar.model import (
    BasisElement,
    ParamsError,
    add_index,
    enumerate_sector,
    ev_to_angular_frequency,
    load_params,
    make_params,
    params_from_dict,
    rabi_frequency,
    remove_index,
)


def test_make_params_detuning():
    assert make_params(3, [1, 1, 1], 2, 2).detuning == 0
    assert make_params(2, [0.5, 0.7], 3, 1).detuning == 2


@pytest.mark.parametrize(
    "args",
    [
        (1, [1.0, 2.0], 0, 0),
        (0, [], 0, 0),
        (2, [1.0, float("nan")], 0, 0),
        (1, [1.0], float("inf"), 0),
    ],
)
def test_make_params_rejects(args):
    with pytest.raises(ParamsError):
        make_params(*args)


def test_zero_coupling_allowed():
    p = make_params(2, [0.0, 1.0], 0, 0)
    assert p.couplings == (0.0, 1.0)


@pytest.mark.parametrize(
    "alphas, omega, expected",
    [([1], 0, 1.0), ([3], 4, 5.0), ([1, 1, 1, 1], 0, 2.0)],
)
def test_rabi_frequency(alphas, omega, expected):
    assert rabi_frequency(make_params(len(alphas), alphas, omega, 0)) == pytest.approx(expected, abs=1e-15)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=12), st.floats(-5, 5))
def test_rabi_frequency_squared(alphas, delta):
    p = make_params(len(alphas), alphas, delta, 0)
    assert rabi_frequency(p) ** 2 == pytest.approx(math.fsum(a * a for a in alphas) + delta ** 2, rel=1e-14, abs=1e-300)


def test_enumerate_sector_small():
    basis = enumerate_sector(2, 0)
    assert basis.elements == (
        BasisElement(True, ()),
        BasisElement(False, (1,)),
        BasisElement(False, (2,)),
    )
    assert len(enumerate_sector(4, 1)) == 10
    with pytest.raises(ValueError):
        enumerate_sector(3, 3)


@given(st.integers(1, 9).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1))))
def test_sector_invariants(np_):
    n, p = np_
    basis = enumerate_sector(n, p)
    assert len(basis) == math.comb(n, p) + math.comb(n, p + 1)
    sz = {(0.5 if el.central_up else -0.5) + (2 * len(el.up_set) - n) / 2 for el in basis.elements}
    assert sz == {basis.total_sz()}
    for k, el in enumerate(basis.elements):
        assert basis.rank(el) == k
        assert list(el.up_set) == sorted(set(el.up_set))
        assert all(1 <= j <= n for j in el.up_set)
    up = [el.up_set for el in basis.elements if el.central_up]
    down = [el.up_set for el in basis.elements if not el.central_up]
    assert up == sorted(up) and down == sorted(down)
    assert basis.elements[: len(up)] == tuple(el for el in basis.elements if el.central_up)


def test_index_operators():
    assert add_index((1, 3), 2) == (1, 2, 3)
    assert add_index((), 5) == (5,)
    with pytest.raises(ValueError):
        add_index((2,), 2)
    assert remove_index((1, 2, 3), 2) == (1, 3)
    assert remove_index((4,), 4) == ()
    with pytest.raises(ValueError):
        remove_index((1, 3), 2)


@given(
    st.sets(st.integers(1, 20), max_size=10),
    st.integers(1, 20),
)
def test_add_then_remove_is_identity(s, r):
    index_set = tuple(sorted(s - {r}))
    grown = add_index(index_set, r)
    assert list(grown) == sorted(grown) and len(set(grown)) == len(grown)
    assert remove_index(grown, r) == index_set


def test_ev_conversion():
    assert ev_to_angular_frequency(0.0) == 0.0
    assert ev_to_angular_frequency(6.582119569e-16) == pytest.approx(1.0, rel=1e-15)
    # 1e-5 eV / hbar, evaluated at 30 digits
    assert ev_to_angular_frequency(1e-5) == pytest.approx(15192674479.96127, rel=1e-14)


def test_json_ingest(tmp_path):
    doc = {"n_spins": 2, "couplings": [0.5, 0.7], "omega": 3, "omega0": 1.0}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    p = load_params(path)
    assert p.detuning == 2 and p.couplings == (0.5, 0.7)


@pytest.mark.parametrize(
    "doc",
    [
        {"n_spins": 2, "couplings": [0.5], "omega": 0, "omega0": 0},
        {"n_spins": 2, "couplings": [0.5, 1], "omega": 0},
        {"n_spins": "2", "couplings": [0.5, 1], "omega": 0, "omega0": 0},
        {"n_spins": 2, "couplings": [0.5, "x"], "omega": 0, "omega0": 0},
        {"n_spins": 2, "couplings": [0.5, 1], "omega": 0, "omega0": 0, "extra": 1},
        [1, 2],
    ],
)
def test_json_schema_errors(doc):
    with pytest.raises(ParamsError):
        params_from_dict(doc)
