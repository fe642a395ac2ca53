import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlqec.env import EnvConfig
from rlqec.ppo import (
    MLP,
    ActorCritic,
    Adam,
    HyperParams,
    Minibatch,
    TrainingFault,
    clip_global_norm,
    collect,
    entropy,
    gae,
    greedy_rollout,
    load_checkpoint,
    log_softmax,
    loss_and_grad,
    orthogonal,
    sample_actions,
    save_checkpoint,
    train,
)


def random_problem(seed, obs_dim=6, num_actions=5, hidden=8, m=32, spread=0.4):
    rng = np.random.default_rng(seed)
    size = MLP.num_params((obs_dim, hidden, hidden, num_actions)) + MLP.num_params((obs_dim, hidden, hidden, 1))
    net = ActorCritic(obs_dim, num_actions, hidden, rng.normal(0, 0.5, size))
    obs = rng.normal(size=(m, obs_dim))
    actions = rng.integers(num_actions, size=m)
    lp = log_softmax(net.logits(obs))[np.arange(m), actions]
    values = net.value(obs) + rng.normal(0, spread, m)
    mb = Minibatch(obs, actions, lp + rng.normal(0, spread, m), values, rng.normal(size=m), rng.normal(size=m))
    return net, mb


def numeric_grad(net, mb, terms, eps=1e-6, **kw):
    g = np.zeros_like(net.params)
    base = net.params.copy()
    for i in range(len(base)):
        for sgn in (1, -1):
            net.params[:] = base
            net.params[i] += sgn * eps
            g[i] += sgn * loss_and_grad(net, mb, terms=terms, **kw)[0]
    net.params[:] = base
    return g / (2 * eps)


def rel_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def test_random_problem_shapes():
    net, mb = random_problem(0)
    assert net.logits(mb.obs).shape == (32, 5)
    assert net.value(mb.obs).shape == (32,)


@pytest.mark.parametrize("terms", [("actor",), ("value",), ("entropy",), ("actor", "value", "entropy")])
@pytest.mark.parametrize("seed", range(4))
def test_gradients_match_finite_differences(terms, seed):
    net, mb = random_problem(seed)
    kw = dict(clip_eps=0.2, vf_coef=0.5, ent_coef=0.05)
    _, g, _ = loss_and_grad(net, mb, terms=terms, **kw)
    fd = numeric_grad(net, mb, terms, **kw)
    assert np.linalg.norm(g) > 0
    assert rel_error(g, fd) < 1e-4


def test_ratio_one_loss_is_negative_mean_advantage():
    net, mb = random_problem(5, spread=0.0)
    mb.log_probs = log_softmax(net.logits(mb.obs))[np.arange(len(mb.actions)), mb.actions]
    loss, _, info = loss_and_grad(net, mb, 0.2, 0.5, 0.0, normalize=False, terms=("actor",))
    assert abs(loss + mb.advantages.mean()) < 1e-7
    assert abs(info["approx_kl"]) < 1e-12


def test_unbounded_clip_is_vanilla_policy_gradient():
    net, mb = random_problem(6, spread=0.0)
    m = len(mb.actions)
    mb.log_probs = log_softmax(net.logits(mb.obs))[np.arange(m), mb.actions]
    _, g, _ = loss_and_grad(net, mb, 1e9, 0.5, 0.0, normalize=False, terms=("actor",))
    # gradient of -mean(adv * log pi(a|s)) at ratio 1
    logits, cache = net.actor.forward(mb.obs)
    p = np.exp(log_softmax(logits))
    onehot = np.eye(net.num_actions)[mb.actions]
    dlogits = -(mb.advantages / m)[:, None] * (onehot - p)
    want = net.actor.backward(cache, dlogits)
    na = len(want)
    assert np.allclose(g[:na], want, rtol=1e-10, atol=1e-14)
    assert not g[na:].any()


def test_gae_examples():
    z = np.zeros((4, 2))
    adv, ret = gae(z, z, z, np.zeros(2), 0.99, 0.95)
    assert not adv.any() and not ret.any()
    adv, ret = gae(np.ones((1, 1)), np.zeros((1, 1)), np.ones((1, 1)), np.array([5.0]), 0.99, 0.95)
    assert adv[0, 0] == 1.0 and ret[0, 0] == 1.0
    r = np.array([[0.0], [0.0], [1.0]])
    v = np.ones((3, 1))
    d = np.array([[0.0], [0.0], [1.0]])
    adv, ret = gae(r, v, d, np.zeros(1), 0.5, 0.5)
    assert adv[:, 0].tolist() == [-0.625, -0.5, 0.0]
    assert ret[:, 0].tolist() == [0.375, 0.5, 1.0]


def test_gae_bootstraps_without_done():
    adv, _ = gae(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), np.array([2.0]), 0.5, 1.0)
    assert adv[0, 0] == 1.0


@settings(max_examples=50)
@given(st.integers(1, 40), st.integers(0, 2**31), st.floats(0.01, 50))
def test_softmax_and_entropy_bounds(num_actions, seed, scale):
    logits = np.random.default_rng(seed).normal(0, scale, (3, num_actions))
    p = np.exp(log_softmax(logits))
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
    h = entropy(logits)
    assert np.all(h >= -1e-12) and np.all(h <= np.log(num_actions) + 1e-12)


def test_uniform_entropy_and_sampling():
    logits = np.zeros((20000, 4))
    assert np.allclose(entropy(logits[:1]), np.log(4))
    a, lp = sample_actions(logits, np.random.default_rng(0))
    freq = np.bincount(a, minlength=4) / len(a)
    assert np.allclose(freq, 0.25, atol=0.02)
    assert np.allclose(lp, np.log(0.25))


def test_sampling_follows_probabilities():
    logits = np.tile(np.log([0.7, 0.2, 0.1]), (30000, 1))
    a, _ = sample_actions(logits, np.random.default_rng(1))
    assert np.allclose(np.bincount(a) / len(a), [0.7, 0.2, 0.1], atol=0.015)


def test_adam_zero_gradient_is_a_no_op():
    p = np.arange(5.0)
    opt = Adam(5)
    opt.step(p, np.zeros(5), 1e-3)
    assert p.tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_adam_first_step_moves_by_lr():
    p = np.zeros(3)
    g = np.array([2.0, -0.5, 1e-3])
    Adam(3).step(p, g, 0.1)
    # bias-corrected moments equal g and g**2 after one step
    assert np.allclose(p, -0.1 * g / (np.abs(g) + 1e-5), rtol=1e-12)


def test_clip_global_norm():
    g = np.array([3.0, 4.0])
    assert np.allclose(clip_global_norm(g, 1.0), [0.6, 0.8])
    assert clip_global_norm(g, 10.0).tolist() == [3.0, 4.0]


def test_orthogonal_init():
    rng = np.random.default_rng(0)
    w = orthogonal((8, 4), np.sqrt(2), rng)
    assert np.allclose(w.T @ w, 2 * np.eye(4))
    w = orthogonal((3, 6), 1.0, rng)
    assert np.allclose(w @ w.T, np.eye(3))
    net = ActorCritic(6, 5, 8, rng=rng)
    w_out = net.actor.layers[-1][0]
    assert np.allclose(w_out.T @ w_out, 1e-4 * np.eye(5))
    assert not net.actor.layers[0][1].any()


def test_hyperparam_validation():
    with pytest.raises(ValueError):
        HyperParams(num_envs=3, num_steps=3, num_minibatches=2)
    with pytest.raises(ValueError):
        HyperParams(lr=0)
    with pytest.raises(ValueError):
        HyperParams(gamma=1.5)


def test_collect_guards_non_finite_logits():
    from rlqec.env import CodeEnv

    env = CodeEnv(EnvConfig(n=3, k=1, d=2), 2)
    obs = env.reset()
    bad = lambda o: np.full((len(o), env.num_actions), np.nan)  # noqa: E731
    with pytest.raises(TrainingFault) as exc:
        collect(bad, lambda o: np.zeros(len(o)), env, obs, 4, np.random.default_rng(0))
    assert "logits" in exc.value.state


SMALL = HyperParams(num_envs=8, num_steps=8, num_epochs=40, num_minibatches=4, hidden=16)
REP = EnvConfig(n=3, k=1, d=2, max_gates=6, error_ops=("XII", "IXI", "IIX", "XXI", "XIX", "IXX"))


def test_training_is_deterministic():
    a = train(REP, SMALL, 3)
    b = train(REP, SMALL, 3)
    assert a.metrics == b.metrics
    assert np.array_equal(a.net.params, b.net.params)
    assert [f.actions for f in a.found] == [f.actions for f in b.found]
    c = train(REP, SMALL, 4)
    assert not np.array_equal(a.net.params, c.net.params)


def test_training_finds_repetition_codes():
    res = train(REP, SMALL, 0)
    assert res.found
    for f in res.found:
        assert f.success and f.kl_sum == 0
    assert len({f.actions for f in res.found}) == len(res.found)


def test_early_stop_and_checkpoint(tmp_path):
    res = train(REP, SMALL, 1, on_epoch=lambda row, r: row["epoch"] == 4)
    assert len(res.metrics) == 5
    path = tmp_path / "agent.npz"
    save_checkpoint(str(path), res.net, "abc")
    net, h = load_checkpoint(str(path))
    assert h == "abc" and np.array_equal(net.params, res.net.params)
    assert greedy_rollout(net, REP) == greedy_rollout(res.net, REP)


def test_meta_training_keeps_best_per_cz():
    cfg = EnvConfig(n=3, k=1, d=2, mode="meta", c_z_grid=(0.5, 2.0), max_gates=4)
    res = train(cfg, SMALL, 0)
    assert sorted({f.c_z for f in res.found}) == [0.5, 2.0]
    assert len(res.found) == 2
