"""Proximal policy optimization with numpy actor/critic MLPs.

Everything runs in float64 on a single thread so that a fixed seed gives a
bit-identical run.  Gradients are written out by hand; ``loss_and_grad`` is
the single entry point the finite-difference tests exercise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .env import CodeEnv, EnvConfig, FinishedEpisode


class TrainingFault(RuntimeError):
    """Non-finite values during collection or update."""

    def __init__(self, msg: str, state: dict[str, Any] | None = None):
        super().__init__(msg)
        self.state = state or {}


@dataclass(frozen=True)
class HyperParams:
    lr: float = 5e-4
    num_envs: int = 64
    num_steps: int = 16
    num_epochs: int = 1000
    update_epochs: int = 4
    num_minibatches: int = 8
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    ent_coef: float = 0.05
    vf_coef: float = 0.5
    max_grad_norm: float = 0.25
    anneal_lr: bool = True
    hidden: int = 64

    def __post_init__(self) -> None:
        for name in ("lr", "num_envs", "num_steps", "num_epochs", "update_epochs", "num_minibatches", "hidden"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("clip_eps", "max_grad_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("ent_coef", "vf_coef"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 <= self.gamma <= 1 or not 0 <= self.gae_lambda <= 1:
            raise ValueError("gamma and gae_lambda must lie in [0, 1]")
        if (self.num_envs * self.num_steps) % self.num_minibatches:
            raise ValueError("num_envs * num_steps must be divisible by num_minibatches")

    @property
    def minibatch_size(self) -> int:
        return self.num_envs * self.num_steps // self.num_minibatches


# ---------------------------------------------------------------------------
# Networks


def orthogonal(shape: tuple[int, int], gain: float, rng: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class MLP:
    """Dense ReLU network ``in -> h -> h -> out`` backed by a flat vector."""

    def __init__(self, sizes: Iterable[int], params: np.ndarray):
        self.sizes = tuple(sizes)
        self.shapes = [(a, b) for a, b in zip(self.sizes[:-1], self.sizes[1:])]
        if len(params) != self.num_params(self.sizes):
            raise ValueError("parameter vector has the wrong length")
        self.params = params
        self.layers: list[tuple[np.ndarray, np.ndarray]] = []
        off = 0
        for a, b in self.shapes:
            w = params[off : off + a * b].reshape(a, b)
            off += a * b
            bias = params[off : off + b]
            off += b
            self.layers.append((w, bias))

    @staticmethod
    def num_params(sizes: tuple[int, ...]) -> int:
        return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))

    @staticmethod
    def init_params(sizes: tuple[int, ...], out_gain: float, rng: np.random.Generator) -> np.ndarray:
        chunks = []
        last = len(sizes) - 2
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            chunks.append(orthogonal((a, b), out_gain if i == last else np.sqrt(2.0), rng).ravel())
            chunks.append(np.zeros(b))
        return np.concatenate(chunks)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        acts = [x]
        h = x
        for i, (w, b) in enumerate(self.layers):
            h = h @ w + b
            if i < len(self.layers) - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts: list[np.ndarray], dout: np.ndarray) -> np.ndarray:
        grads: list[np.ndarray] = []
        g = dout
        for i in range(len(self.layers) - 1, -1, -1):
            w, _ = self.layers[i]
            if i < len(self.layers) - 1:
                g = g * (acts[i + 1] > 0)
            grads.append(g.sum(axis=0))
            grads.append((acts[i].T @ g).ravel())
            g = g @ w.T
        return np.concatenate(grads[::-1])


class ActorCritic:
    """Separate actor and critic MLPs sharing one flat parameter vector."""

    def __init__(self, obs_dim: int, num_actions: int, hidden: int = 64, params: np.ndarray | None = None,
                 rng: np.random.Generator | None = None):
        self.obs_dim, self.num_actions, self.hidden = obs_dim, num_actions, hidden
        a_sizes = (obs_dim, hidden, hidden, num_actions)
        c_sizes = (obs_dim, hidden, hidden, 1)
        na, nc = MLP.num_params(a_sizes), MLP.num_params(c_sizes)
        if params is None:
            rng = rng or np.random.default_rng(0)
            params = np.concatenate([MLP.init_params(a_sizes, 0.01, rng), MLP.init_params(c_sizes, 1.0, rng)])
        if len(params) != na + nc:
            raise ValueError(f"expected {na + nc} parameters, got {len(params)}")
        self.params = params
        self.actor = MLP(a_sizes, params[:na])
        self.critic = MLP(c_sizes, params[na:])

    def logits(self, obs: np.ndarray) -> np.ndarray:
        return self.actor(obs)

    def value(self, obs: np.ndarray) -> np.ndarray:
        return self.critic(obs)[:, 0]

    def copy(self) -> "ActorCritic":
        return ActorCritic(self.obs_dim, self.num_actions, self.hidden, self.params.copy())


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def entropy(logits: np.ndarray) -> np.ndarray:
    lp = log_softmax(logits)
    return -(np.exp(lp) * lp).sum(axis=-1)


# ---------------------------------------------------------------------------
# Advantage estimation and losses


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    last_value: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """GAE over ``(T, B)`` arrays; ``dones[t]`` marks that step t ended an episode."""
    T = rewards.shape[0]
    adv = np.zeros_like(rewards, dtype=np.float64)
    last = np.zeros(rewards.shape[1:], dtype=np.float64)
    next_v = last_value
    for t in range(T - 1, -1, -1):
        nonterm = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_v * nonterm - values[t]
        last = delta + gamma * lam * nonterm * last
        adv[t] = last
        next_v = values[t]
    return adv, adv + values


@dataclass
class Minibatch:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def loss_and_grad(
    net: ActorCritic,
    mb: Minibatch,
    clip_eps: float,
    vf_coef: float,
    ent_coef: float,
    normalize: bool = True,
    terms: tuple[str, ...] = ("actor", "value", "entropy"),
) -> tuple[float, np.ndarray, dict[str, float]]:
    """Total PPO loss and its gradient with respect to ``net.params``.

    ``terms`` selects which pieces enter the total (the gradient check uses
    each in isolation).
    """
    M = len(mb.actions)
    adv = mb.advantages
    if normalize:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    logits, a_cache = net.actor.forward(mb.obs)
    lp = log_softmax(logits)
    p = np.exp(lp)
    rows = np.arange(M)
    logp_a = lp[rows, mb.actions]
    ratio = np.exp(logp_a - mb.log_probs)
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    surr1, surr2 = ratio * adv, clipped * adv
    actor_loss = -np.minimum(surr1, surr2).mean()
    ent = -(p * lp).sum(axis=1)
    ent_mean = ent.mean()

    v, c_cache = net.critic.forward(mb.obs)
    v = v[:, 0]
    v_clip = mb.values + np.clip(v - mb.values, -clip_eps, clip_eps)
    l1, l2 = (v - mb.returns) ** 2, (v_clip - mb.returns) ** 2
    value_loss = 0.5 * np.maximum(l1, l2).mean()

    total = 0.0
    dlogits = np.zeros_like(logits)
    dv = np.zeros(M)
    if "actor" in terms:
        total += actor_loss
        use = surr1 <= surr2
        dlogp = -(ratio * adv * use) / M
        onehot = np.zeros_like(p)
        onehot[rows, mb.actions] = 1.0
        dlogits += dlogp[:, None] * (onehot - p)
    if "entropy" in terms:
        total -= ent_coef * ent_mean
        dlogits += (ent_coef / M) * p * (lp + ent[:, None])
    if "value" in terms:
        total += vf_coef * value_loss
        inside = np.abs(v - mb.values) < clip_eps
        dv = np.where(l1 >= l2, v - mb.returns, (v_clip - mb.returns) * inside) * (vf_coef / M)
    ga = net.actor.backward(a_cache, dlogits)
    gc = net.critic.backward(c_cache, dv[:, None])
    info = {
        "actor_loss": float(actor_loss),
        "value_loss": float(value_loss),
        "entropy": float(ent_mean),
        "approx_kl": float(((ratio - 1) - np.log(ratio)).mean()),
    }
    return float(total), np.concatenate([ga, gc]), info


class Adam:
    def __init__(self, size: int, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-5):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0
        self.b1, self.b2, self.eps = b1, b2, eps

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> None:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        mhat = self.m / (1 - self.b1**self.t)
        vhat = self.v / (1 - self.b2**self.t)
        params -= lr * mhat / (np.sqrt(vhat) + self.eps)


def clip_global_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = np.sqrt((grad * grad).sum())
    return grad * (max_norm / max(norm, max_norm))


# ---------------------------------------------------------------------------
# Collect / update


@dataclass
class TrajectoryBatch:
    obs: np.ndarray  # (T, B, D)
    actions: np.ndarray  # (T, B)
    rewards: np.ndarray
    values: np.ndarray
    log_probs: np.ndarray
    dones: np.ndarray
    last_value: np.ndarray  # (B,)
    episodes: list[FinishedEpisode] = field(default_factory=list)


def sample_actions(logits: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    lp = log_softmax(logits)
    cdf = np.cumsum(np.exp(lp), axis=1)
    u = rng.random(len(logits)) * cdf[:, -1]
    a = np.minimum((cdf < u[:, None]).sum(axis=1), logits.shape[1] - 1)
    return a, lp[np.arange(len(a)), a]


def collect(
    policy: Callable[[np.ndarray], np.ndarray],
    value_fn: Callable[[np.ndarray], np.ndarray],
    env: CodeEnv,
    obs: np.ndarray,
    num_steps: int,
    rng: np.random.Generator,
) -> tuple[TrajectoryBatch, np.ndarray]:
    """Roll ``env`` forward ``num_steps``; returns the batch and the next observation."""
    B = env.num_envs
    T = num_steps
    buf_obs = np.zeros((T, B, obs.shape[1]))
    acts = np.zeros((T, B), dtype=np.int64)
    rews = np.zeros((T, B))
    vals = np.zeros((T, B))
    logps = np.zeros((T, B))
    dones = np.zeros((T, B))
    episodes: list[FinishedEpisode] = []
    for t in range(T):
        logits = policy(obs)
        if not np.isfinite(logits).all():
            raise TrainingFault("non-finite policy logits", {"obs": obs, "logits": logits, "step": t})
        a, lp = sample_actions(logits, rng)
        buf_obs[t] = obs
        acts[t] = a
        logps[t] = lp
        vals[t] = value_fn(obs)
        obs, r, d, fin = env.step(a)
        rews[t] = r
        dones[t] = d
        episodes.extend(fin)
    batch = TrajectoryBatch(buf_obs, acts, rews, vals, logps, dones, value_fn(obs), episodes)
    return batch, obs


def ppo_update(
    net: ActorCritic,
    opt: Adam,
    batch: TrajectoryBatch,
    hp: HyperParams,
    lr: float,
    rng: np.random.Generator,
) -> dict[str, float]:
    adv, ret = gae(batch.rewards, batch.values, batch.dones, batch.last_value, hp.gamma, hp.gae_lambda)
    T, B = batch.actions.shape
    flat = lambda a: a.reshape(T * B, *a.shape[2:])  # noqa: E731
    obs, actions, logps, values = flat(batch.obs), flat(batch.actions), flat(batch.log_probs), flat(batch.values)
    adv, ret = flat(adv), flat(ret)
    stats: dict[str, list[float]] = {}
    for _ in range(hp.update_epochs):
        perm = rng.permutation(T * B)
        for idx in perm.reshape(hp.num_minibatches, -1):
            mb = Minibatch(obs[idx], actions[idx], logps[idx], values[idx], adv[idx], ret[idx])
            loss, grad, info = loss_and_grad(net, mb, hp.clip_eps, hp.vf_coef, hp.ent_coef)
            if not np.isfinite(loss) or not np.isfinite(grad).all():
                raise TrainingFault("non-finite loss during update", {"params": net.params.copy(), **info})
            opt.step(net.params, clip_global_norm(grad, hp.max_grad_norm), lr)
            for k, v in info.items():
                stats.setdefault(k, []).append(v)
    return {k: float(np.mean(v)) for k, v in stats.items()}


# ---------------------------------------------------------------------------
# Training driver


@dataclass
class DiscoveredCircuit:
    seed: int
    epoch: int
    actions: tuple[int, ...]
    kl_sum: float
    c_z: float
    success: bool


@dataclass
class TrainResult:
    seed: int
    net: ActorCritic
    metrics: list[dict[str, Any]]
    found: list[DiscoveredCircuit]
    env: CodeEnv


def train(
    env_cfg: EnvConfig,
    hp: HyperParams,
    seed: int,
    on_epoch: Callable[[dict[str, Any], "TrainResult"], bool] | None = None,
    keep: str = "unique",
) -> TrainResult:
    """Train one agent.

    Fixed-target runs keep every successful episode (deduplicated by action
    sequence when ``keep="unique"``); meta runs keep, per c_Z value, the
    episode with the lowest final KL sum (ties go to the earliest).
    ``on_epoch`` may return True to stop early.
    """
    ss = np.random.SeedSequence(seed)
    env_seed, net_seed, act_seed = ss.spawn(3)
    env = CodeEnv(env_cfg, hp.num_envs, int(env_seed.generate_state(1)[0]))
    net = ActorCritic(env.obs_dim, env.num_actions, hp.hidden, rng=np.random.default_rng(net_seed))
    opt = Adam(len(net.params))
    rng = np.random.default_rng(act_seed)
    result = TrainResult(seed, net, [], [], env)
    seen: set[tuple[int, ...]] = set()
    best: dict[float, DiscoveredCircuit] = {}
    obs = env.reset()
    for epoch in range(hp.num_epochs):
        lr = hp.lr * (1.0 - epoch / hp.num_epochs) if hp.anneal_lr else hp.lr
        batch, obs = collect(net.logits, net.value, env, obs, hp.num_steps, rng)
        ppo_update(net, opt, batch, hp, lr, rng)
        eps = batch.episodes
        wins = [e for e in eps if e.success]
        for e in eps:
            rec = DiscoveredCircuit(seed, epoch, tuple(e.actions), e.kl_sum, e.c_z, e.success)
            if env_cfg.mode == "meta":
                cur = best.get(e.c_z)
                if cur is None or e.kl_sum < cur.kl_sum:
                    best[e.c_z] = rec
            elif e.success and (keep != "unique" or rec.actions not in seen):
                seen.add(rec.actions)
                result.found.append(rec)
        row = {
            "epoch": epoch,
            "mean_return": float(np.mean([e.ret for e in eps])) if eps else None,
            "mean_circuit_size": float(np.mean([len(e.actions) for e in eps])) if eps else None,
            "success_count": len(wins),
            "lr": lr,
        }
        result.metrics.append(row)
        if on_epoch is not None and on_epoch(row, result):
            break
    if env_cfg.mode == "meta":
        result.found = [best[c] for c in sorted(best)]
    return result


def greedy_rollout(net: ActorCritic, env_cfg: EnvConfig, c_z: float | None = None, steps: int | None = None) -> list[int]:
    """Argmax actions from a fresh reset (meta runs pass the bias to condition on)."""
    env = CodeEnv(env_cfg, 1, 0, auto_reset=False)
    obs = env.reset(c_z)
    out: list[int] = []
    for _ in range(steps or env_cfg.max_gates):
        a = int(np.argmax(net.logits(obs)[0]))
        out.append(a)
        obs, _, done, _ = env.step(np.array([a]))
        if done[0]:
            break
    return out


def save_checkpoint(path: str, net: ActorCritic, cfg_hash: str) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, params=net.params, obs_dim=net.obs_dim, num_actions=net.num_actions, hidden=net.hidden,
                 config_hash=np.array(cfg_hash))


def load_checkpoint(path: str) -> tuple[ActorCritic, str]:
    with np.load(path) as z:
        net = ActorCritic(int(z["obs_dim"]), int(z["num_actions"]), int(z["hidden"]), z["params"].copy())
        return net, str(z["config_hash"])
