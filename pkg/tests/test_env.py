import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlqec.env import (
    CodeEnv,
    Circuit,
    EnvConfig,
    EnvError,
    Episode,
    GateSetSpec,
    action_space,
    connectivity_edges,
    css_env,
    prune,
)
from rlqec.symplectic import GateAction, Tableau

X_ONLY = ("XII", "IXI", "IIX", "XXI", "XIX", "IXX")


def repetition_cfg(**kw):
    return EnvConfig(n=3, k=1, d=2, error_ops=X_ONLY, reward_weights="probability", gateset=("CNOT",), **kw)


# --- action spaces ----------------------------------------------------------


def test_action_counts():
    assert len(action_space(GateSetSpec(7, ("H", "CNOT"), "all_to_all_directed"))) == 28
    assert len(action_space(GateSetSpec(9, ("H", "S", "CNOT"), "all_to_all"))) == 90
    line = action_space(GateSetSpec(3, ("CNOT",), "line"))
    assert [g.qubits for g in line] == [(0, 1), (1, 0), (1, 2), (2, 1)]


def test_action_order():
    acts = action_space(GateSetSpec(3, ("CNOT", "S", "H")))
    assert [str(a) for a in acts[:6]] == ["H(0)", "H(1)", "H(2)", "S(0)", "S(1)", "S(2)"]
    assert all(a.kind == "CNOT" and a.qubits[0] < a.qubits[1] for a in acts[6:])


def test_symmetric_gates_listed_once():
    acts = action_space(GateSetSpec(4, ("SqrtXX",), "all_to_all"))
    assert len(acts) == 6


def test_connectivity_layouts():
    assert connectivity_edges(4, "line") == [(0, 1), (1, 2), (2, 3)]
    ring = connectivity_edges(6, "nnn_ring")
    assert (0, 5) in ring and (0, 4) in ring and len(ring) == 12
    assert len(connectivity_edges(7, "brick")) == 7
    assert len(connectivity_edges(9, "nn_square_lattice")) == 12
    assert connectivity_edges(3, "custom", [(2, 0)]) == [(0, 2)]
    with pytest.raises(EnvError):
        connectivity_edges(3, "custom")
    with pytest.raises(EnvError):
        connectivity_edges(3, "custom", [(0, 3)])
    with pytest.raises(EnvError):
        GateSetSpec(3, ("H",), "torus")
    with pytest.raises(EnvError):
        GateSetSpec(3, ("T",))


def test_empty_action_space():
    with pytest.raises(EnvError):
        action_space(GateSetSpec(1, ("CNOT",), "line"))


# --- episodes ---------------------------------------------------------------


def test_repetition_trace():
    ep = Episode(repetition_cfg())
    p, p_i = 1 / 30, 0.9
    assert ep.tableau.to_strings() == ["IZI", "IIZ"]
    assert abs(ep.kl_sum - p * p_i**2) < 1e-12
    _, r1, d1 = ep.step(GateAction("CNOT", (0, 1)))
    assert ep.tableau.to_strings() == ["ZZI", "IIZ"]
    assert abs(r1 + p**2 * p_i) < 1e-12 and not d1
    _, r2, d2 = ep.step(GateAction("CNOT", (0, 2)))
    assert ep.tableau.same_group(Tableau.from_strings(["ZZI", "ZIZ"]))
    assert r2 == 0.0 and d2


def test_double_hadamard_is_a_no_op():
    ep = Episode(EnvConfig(n=4, k=1, d=2))
    h = GateAction("H", (2,))
    before = ep.tableau
    o1, r1, _ = ep.step(GateAction("CNOT", (0, 1)))
    o2, r2, _ = ep.step(h)
    o3, r3, _ = ep.step(h)
    assert ep.tableau == before.apply(GateAction("CNOT", (0, 1)))
    assert np.array_equal(o1, o3) and r1 == r3


def test_meta_episodes_have_fixed_length():
    cfg = EnvConfig(n=3, k=1, d=2, mode="meta", max_gates=35, gateset=("H", "CNOT"))
    ep = Episode(cfg, seed=1)
    rng = np.random.default_rng(0)
    for _ in range(34):
        _, _, done = ep.step(int(rng.integers(ep.env.num_actions)))
        assert not done
    assert ep.step(0)[2]
    with pytest.raises(EnvError):
        ep.step(0)


def test_observation_layout():
    ep = Episode(EnvConfig(n=3, k=1, d=2))
    assert ep.obs.shape == (1, 12)
    # rows IZI, IIZ as x-bits then z-bits
    assert ep.obs[0].tolist() == [0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1]
    meta = Episode(EnvConfig(n=3, k=1, d=2, mode="meta"))
    assert meta.obs.shape == (1, 13) and meta.obs[0, -1] == np.float32(meta.c_z)


@pytest.mark.parametrize("n,k", [(2, 1), (5, 1), (7, 3), (9, 0)])
def test_observation_length_law(n, k):
    env = CodeEnv(EnvConfig(n=n, k=k, d=2), num_envs=3)
    assert env.reset().shape == (3, 2 * n * (n - k))


def test_meta_reset_is_seeded():
    cfg = EnvConfig(n=3, k=1, d=2, mode="meta")

    def draws(seed):
        env = CodeEnv(cfg, num_envs=4, seed=seed)
        return [env.reset().copy()[:, -1].tolist() for _ in range(5)]

    assert draws(11) == draws(11)
    assert draws(11) != draws(12)
    vals = {v for row in draws(3) for v in row}
    assert vals <= {np.float32(c) for c in cfg.c_z_grid}


def test_meta_lambdas_follow_cz():
    cfg = EnvConfig(n=3, k=1, d=2, mode="meta", c_z_grid=(0.5, 2.0))
    env = CodeEnv(cfg, num_envs=2)
    env.reset(c_z=[0.5, 2.0])
    assert np.allclose(env.lam[0], env.errors.lambdas_for(0.5))
    assert np.allclose(env.lam[1], env.errors.lambdas_for(2.0))
    assert env.lam.max(axis=1).tolist() == [1.0, 1.0]


def test_episode_determinism():
    def run():
        env = CodeEnv(EnvConfig(n=4, k=1, d=3, gateset=("H", "S", "CNOT"), max_gates=6), num_envs=5, seed=9)
        out = [env.reset()]
        rng = np.random.default_rng(1)
        for _ in range(15):
            o, r, d, fin = env.step(rng.integers(env.num_actions, size=5))
            out += [o, r, d.astype(float)]
        return out

    for a, b in zip(run(), run()):
        assert np.array_equal(a, b)


def test_batch_matches_single():
    cfg = EnvConfig(n=4, k=1, d=3, max_gates=8)
    rng = np.random.default_rng(2)
    acts = rng.integers(len(action_space(cfg.gate_spec)), size=(7, 3))
    env = CodeEnv(cfg, num_envs=3, auto_reset=False)
    env.reset()
    singles = [Episode(cfg) for _ in range(3)]
    for row in acts:
        _, rew, _, _ = env.step(row)
        for b, ep in enumerate(singles):
            _, r, _ = ep.step(int(row[b]))
            assert r == rew[b]
            assert ep.tableau == env.tableau(b)


def test_invalid_actions():
    ep = Episode(EnvConfig(n=3, k=1, d=2))
    with pytest.raises(EnvError):
        ep.step(999)
    with pytest.raises(EnvError):
        ep.step(GateAction("S", (0,)))


def test_config_validation():
    with pytest.raises(EnvError):
        EnvConfig(n=3, k=3, d=2)
    with pytest.raises(EnvError):
        EnvConfig(n=3, k=1, d=2, mode="bogus")
    with pytest.raises(EnvError):
        EnvConfig(n=3, k=1, d=2, hadamard_qubits=(1,))
    with pytest.raises(EnvError):
        EnvConfig(n=3, k=1, d=2, error_ops=("XX",))


# --- circuits and pruning ---------------------------------------------------


def test_circuit_json_round_trip():
    c = Circuit(4, 1, [GateAction("H", (1,)), GateAction("CNOT", (1, 3)), GateAction("SqrtXX", (0, 2))],
                ("H", "CNOT", "SqrtXX"), "all_to_all", {"seed": 3})
    back = Circuit.from_json(c.to_json())
    assert back == c and back.to_json() == c.to_json()


def test_prune_examples():
    g = [GateAction("H", (1,)), GateAction("CNOT", (1, 2))]
    h = GateAction("H", (2,))
    assert prune(Circuit(3, 1, g + [h, h])).gates == g
    # H on the logical slot leaves the stabilizer group unchanged
    assert prune(Circuit(3, 1, [GateAction("H", (0,))] + g)).gates == g
    s = GateAction("S", (0,))
    assert prune(Circuit(3, 1, [s, s])).gates == []


def test_prune_rejects_wrong_target():
    with pytest.raises(EnvError):
        prune(Circuit(3, 1, [GateAction("H", (1,))]), Tableau.from_strings(["ZZI", "ZIZ"]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**31))
def test_prune_keeps_group(n, seed):
    rng = np.random.default_rng(seed)
    acts = action_space(GateSetSpec(n, ("H", "S", "CNOT"), "all_to_all"))
    gates = [acts[i] for i in rng.integers(len(acts), size=int(rng.integers(0, 25)))]
    c = Circuit(n, int(rng.integers(n)), gates)
    out = prune(c)
    assert len(out) <= len(c)
    assert out.tableau().same_group(c.tableau())


# --- css mode -----------------------------------------------------------------


def test_css_env_initial_rows():
    ep = css_env(EnvConfig(n=3, k=1, d=2), [1])
    assert ep.tableau.to_strings() == ["IXI", "IIZ"]
    assert all(a.kind == "CNOT" for a in ep.env.actions)
    assert ep.circuit.gates[0] == GateAction("H", (1,))
    with pytest.raises(EnvError):
        ep.step(GateAction("H", (2,)))


def test_css_env_rejects_logical_slot():
    with pytest.raises(EnvError):
        css_env(EnvConfig(n=3, k=1, d=2), [0])


def test_css_error_set_is_css():
    ep = css_env(EnvConfig(n=5, k=1, d=3), [1, 2])
    assert all(set(s) <= {"I", "X"} or set(s) <= {"I", "Z"} for s in ep.env.errors.strings())


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**31))
def test_css_closure(n, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, n))
    hs = [q for q in range(k, n) if rng.random() < 0.5]
    ep = css_env(EnvConfig(n=n, k=k, d=2, max_gates=40, connectivity="all_to_all"), hs)
    for a in rng.integers(ep.env.num_actions, size=30):
        ep.step(int(a))
        if ep.env.done[0]:
            break
    t = ep.tableau
    assert all(x == 0 or z == 0 for x, z in zip(t.x.tolist(), t.z.tolist()))
