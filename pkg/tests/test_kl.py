import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlqec import oracles
from rlqec.kl import KLKernel, kl_check, kl_check_batched, normalize_softness, reward
from rlqec.noise import ErrorSet, NoiseModel, enumerate_errors
from rlqec.symplectic import DimensionError, Tableau

X_ONLY = ["XII", "IXI", "IIX", "XXI", "XIX", "IXX"]


def repetition_trace():
    return [
        Tableau.from_strings(["IZI", "IIZ"]),
        Tableau.from_strings(["ZZI", "IIZ"]),
        Tableau.from_strings(["ZZI", "ZIZ"]),
    ]


def test_repetition_trace_probabilities():
    es = ErrorSet.from_strings(X_ONLY, NoiseModel(0.9, 1.0))
    p, p_i = 1 / 30, 0.9
    sums = [kl_check(t, es).prob_sum for t in repetition_trace()]
    assert abs(sums[0] - p * p_i**2) < 1e-12
    assert abs(sums[1] - p**2 * p_i) < 1e-12
    assert sums[2] == 0.0
    reps = [kl_check(t, es) for t in repetition_trace()]
    assert [es.strings()[i] for i in reps[0].undetected] == ["XII"]
    assert [es.strings()[i] for i in reps[1].undetected] == ["XXI"]
    rewards = [-r.prob_sum for r in reps]
    assert rewards[0] < rewards[1] < rewards[2] == 0


def test_reward_examples():
    es = ErrorSet.from_strings(["XII"], NoiseModel(0.9, 1.0))
    # identity is always detected; XII carries the only other weight
    r = kl_check(Tableau.from_strings(["IZI", "IIZ"]), es)
    assert r.kl_sum == pytest.approx(es.lambdas[1])
    assert reward(kl_check(Tableau.from_strings(["ZII", "IIZ"]), es)) == 0
    single = ErrorSet.from_strings(["III"])
    assert reward(kl_check(Tableau.initial(3, 1), single)) == 0
    flat = ErrorSet.from_strings(["IXI", "XII"], NoiseModel(0.9, 1.0))
    assert flat.lambdas[1] == flat.lambdas[2]


def test_one_undetected_with_unit_weight():
    es = ErrorSet.from_strings(["III", "XII"])
    object.__setattr__(es, "lambdas", np.array([1.0, 1.0]))
    assert reward(kl_check(Tableau.from_strings(["IZI", "IIZ"]), es)) == -1.0


def test_softness_normalization():
    assert normalize_softness(None) == "exact"
    assert normalize_softness("off") == 0
    assert normalize_softness(3) == 3
    with pytest.raises(ValueError):
        normalize_softness(-1)
    with pytest.raises(ValueError):
        normalize_softness("loose")


def test_membership_needs_products():
    # ZZII and IIZZ are stabilizers; ZZZZ only appears as their product
    t = Tableau.from_strings(["ZZII", "IIZZ", "XXXX"])
    es = ErrorSet.from_strings(["ZZII", "ZZZZ", "YYXX"])
    det = {s: [bool(v) for v in kl_check(t, es, s).detected] for s in (0, 1, 2, "exact")}
    assert det[0] == [True, False, False, False]
    assert det[1] == [True, True, False, False]
    assert det[2] == [True, True, True, True]
    assert det["exact"] == det[2]


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        kl_check(Tableau.initial(4, 1), enumerate_errors(3, 2))
    kernel = KLKernel(enumerate_errors(3, 2))
    with pytest.raises(DimensionError):
        kernel.detected(np.zeros(2, dtype=np.uint64), np.zeros(2, dtype=np.uint64))


@pytest.mark.parametrize("n,k", [(3, 1), (4, 1), (4, 2), (5, 1), (5, 2)])
@pytest.mark.parametrize("softness", ["exact", 0, 1, 2])
def test_oracle_agreement(n, k, softness):
    rep = oracles.check_kl(n, k, 25, np.random.default_rng(100 * n + k), softness=softness)
    assert rep.ok, rep


def test_kl_sum_matches_oracle():
    rng = np.random.default_rng(7)
    for c_z in (0.5, 1.0, 2.0):
        es = enumerate_errors(4, 3, noise=NoiseModel(0.93, c_z))
        for _ in range(10):
            t = oracles.random_tableau(4, 1, rng)
            want = oracles.kl_sum(t.to_strings(), es.strings(), 0.93, c_z)
            assert kl_check(t, es, "exact").prob_sum == pytest.approx(want, rel=1e-12, abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 7).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1))), st.integers(0, 2**31))
def test_softness_monotone(nk, seed):
    n, k = nk
    t = oracles.random_tableau(n, k, np.random.default_rng(seed))
    es = enumerate_errors(n, min(3, n + 1))
    dets = [kl_check(t, es, s).detected for s in (0, 1, 2, 3, "exact")]
    for a, b in zip(dets, dets[1:]):
        assert not np.any(a & ~b)


def test_batched_matches_loop():
    rng = np.random.default_rng(3)
    es = enumerate_errors(5, 3, noise=NoiseModel(0.9, 0.7))
    ts = [oracles.random_tableau(5, 1, rng) for _ in range(64)]
    for s in (2, "exact"):
        batch = kl_check_batched(ts, es, s)
        for t, r in zip(ts, batch):
            one = kl_check(t, es, s)
            assert np.array_equal(one.detected, r.detected)
            assert one.kl_sum == r.kl_sum and one.prob_sum == r.prob_sum
        perm = rng.permutation(len(ts))
        permuted = kl_check_batched([ts[i] for i in perm], es, s)
        for i, r in zip(perm, permuted):
            assert np.array_equal(batch[i].detected, r.detected)
    assert np.array_equal(kl_check_batched(ts[:1], es)[0].detected, kl_check(ts[0], es).detected)


def test_perfect_code_detects_everything():
    t = Tableau.from_strings(["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"])
    r = kl_check(t, enumerate_errors(5, 3), "off")
    assert r.detected.all() and r.kl_sum == 0
    assert r.undetected_min_weight == float("inf")
