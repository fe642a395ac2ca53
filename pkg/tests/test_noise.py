import itertools
from math import comb, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlqec.noise import (
    CapacityError,
    ErrorSet,
    NoiseModel,
    count_errors,
    effective_weight,
    enumerate_errors,
    enumerate_paulis,
    error_probability,
    memory_estimate,
    probabilities,
    solve_px,
    weight_class_mass,
)
from rlqec.symplectic import PauliString

P = PauliString.from_str


def test_solve_px_symmetric():
    assert solve_px(0.9, 1.0) == pytest.approx(1 / 30, rel=1e-14)


def test_solve_px_quadratic():
    assert solve_px(0.9, 2.0) == pytest.approx((-2 + sqrt(4.4)) / 2, rel=1e-14)


@pytest.mark.parametrize("p_i", [0.5, 0.9, 0.99, 0.999])
@pytest.mark.parametrize("c_z", [0.1, 0.5, 1.0, 1.7, 2.0, 5.0])
def test_solve_px_residual(p_i, c_z):
    x = solve_px(p_i, c_z)
    assert 0 < x < 1
    assert abs(2 * x + x**c_z - (1 - p_i)) < 1e-12 * (1 - p_i)


@pytest.mark.parametrize("p_i,c_z", [(0.0, 1.0), (1.0, 1.0), (0.9, 0.0), (0.9, -1.0)])
def test_solve_px_rejects(p_i, c_z):
    with pytest.raises(ValueError):
        solve_px(p_i, c_z)


def test_noise_model_normalized_and_symmetric():
    m = NoiseModel(0.9, 1.0)
    assert m.p_x == m.p_y == m.p_z
    for c in (0.3, 1.0, 2.5):
        m = NoiseModel(0.93, c)
        assert sum(m.probs) == pytest.approx(1.0, abs=1e-15)
        assert m.p_z == pytest.approx(m.p_x**c, rel=1e-15)


def test_error_probability_examples():
    m = NoiseModel(0.9, 1.0)
    assert error_probability(P("III"), m) == pytest.approx(0.729, rel=1e-15)
    assert error_probability(P("XII"), m) == pytest.approx(0.027, rel=1e-14)
    m2 = NoiseModel(0.9, 2.0)
    assert error_probability(P("XZI"), m2) == pytest.approx(m2.p_x * m2.p_x**2 * 0.9, rel=1e-14)


def test_effective_weight_examples():
    assert effective_weight(P("IXZ"), 0.5) == 1.5
    assert effective_weight(P("ZZZ"), 2.0) == 6.0
    assert effective_weight(P("XYZI"), 1.0) == 3


@settings(max_examples=60)
@given(st.text("IXYZ", min_size=1, max_size=8), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_effective_weight_monotone_in_cz(s, c1, c2):
    p = P(s)
    lo, hi = sorted((c1, c2))
    if "Z" in s and lo < hi:
        assert effective_weight(p, lo) < effective_weight(p, hi)
    else:
        assert effective_weight(p, lo) <= effective_weight(p, hi)
    if "Z" not in s:
        assert effective_weight(p, lo) == effective_weight(p, hi)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.floats(0.05, 0.999), st.floats(0.2, 4.0))
def test_full_group_probabilities_sum_to_one(n, p_i, c_z):
    m = NoiseModel(p_i, c_z)
    x, z = enumerate_paulis(n, n)
    assert len(x) == 4**n
    assert probabilities(x, z, n, m).sum() == pytest.approx(1.0, abs=1e-10)


def test_vectorized_matches_scalar():
    m = NoiseModel(0.95, 0.7)
    x, z = enumerate_paulis(4, 4)
    ps = probabilities(x, z, 4, m)
    for a, b, p in zip(x, z, ps):
        assert p == pytest.approx(error_probability(PauliString(4, int(a), int(b)), m), rel=1e-13)


def test_enumerate_counts():
    assert len(enumerate_errors(7, 3)) == 211
    assert len(enumerate_errors(3, 2)) == 10
    # the closed form counts the identity twice in css mode
    assert count_errors(3, 2, "css") == 8
    assert len(enumerate_errors(3, 2, "css")) == 7


@pytest.mark.parametrize("n", range(1, 13))
def test_enumerate_counts_closed_form(n):
    for d in range(1, 6):
        if 3 ** min(d - 1, n) * comb(n, min(d - 1, n)) > 200_000:
            continue
        assert len(enumerate_errors(n, d)) == sum(3**w * comb(n, w) for w in range(d))
        assert len(enumerate_errors(n, d, "css")) == 2 * sum(comb(n, w) for w in range(d)) - 1


def test_canonical_order():
    es = enumerate_errors(2, 3)
    assert es.strings()[:7] == ["II", "IX", "IY", "IZ", "XI", "YI", "ZI"]
    assert es.strings()[7:10] == ["XX", "XY", "XZ"]
    ref = ["".join(t) for w in range(3) for t in itertools.product("IXYZ", repeat=2)
           if sum(c != "I" for c in t) == w]
    assert es.strings() == ref


def test_identity_once_and_lambdas():
    for mode in ("stabilizer", "css"):
        es = enumerate_errors(5, 3, mode, NoiseModel(0.9, 0.6))
        assert sum(1 for s in es.strings() if set(s) == {"I"}) == 1
        assert es.lambdas.max() == 1.0
        assert es.lambdas[es.identity_index()] == 1.0
    css = enumerate_errors(4, 3, "css")
    assert all(set(s) <= {"I", "X"} or set(s) <= {"I", "Z"} for s in css.strings())


@pytest.mark.parametrize("n,p_i", [(3, 0.8), (5, 0.9), (9, 0.9), (7, 0.99), (20, 0.99)])
def test_weight_class_mass_decreasing(n, p_i):
    # consecutive classes differ by (n - w) / (w + 1) * (1 - p_I) / p_I
    assert n * (1 - p_i) < p_i
    mass = weight_class_mass(enumerate_errors(n, min(n, 4) + 1, noise=NoiseModel(p_i, 1.0)))
    vals = [mass[w] for w in sorted(mass)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_weight_class_mass_can_grow():
    mass = weight_class_mass(enumerate_errors(7, 2, noise=NoiseModel(0.8, 1.0)))
    assert mass[1] > mass[0]


def test_memory_estimate():
    assert memory_estimate(3, 2, "css") == 12
    assert memory_estimate(1, 1) == 1
    assert count_errors(1, 1) == 1
    assert memory_estimate(40, 10) / memory_estimate(40, 10, "css") > 1e3


def test_capacity_error():
    with pytest.raises(CapacityError, match="bytes"):
        enumerate_errors(40, 10)
    with pytest.raises(CapacityError):
        enumerate_errors(7, 3, memory_budget=10)


def test_from_strings_adds_identity():
    es = ErrorSet.from_strings(["XII", "IXI"])
    assert es.strings() == ["III", "XII", "IXI"]
    assert np.isclose(es.probabilities[1], 0.027)


def test_csv_columns():
    text = enumerate_errors(2, 2).to_csv().splitlines()
    assert text[0] == "pauli_string,weight,effective_weight,probability,lambda"
    assert text[1].startswith("II,0,0.0,")
    assert len(text) == 1 + 7
