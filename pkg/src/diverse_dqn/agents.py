"""DQN, Double DQN, EnsembleDQN and MaxminDQN with norm-inequality regularisation."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .network import MLP
from .regularizers import KINDS, Regularizer
from .replay import Batch, ReplayBuffer, Transition

ALGORITHMS = ("dqn", "ddqn", "ensemble", "maxmin")
SEED_POLICIES = ("independent", "identical_layers")


@dataclass
class AgentConfig:
    algorithm: str = "maxmin"
    n_members: int = 2
    hidden: tuple[int, ...] = (64, 64)
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_decay_steps: int | None = None  # None: first 10% of the run
    lam: float = 0.0
    regularizer: str = "none"
    atkinson_epsilon: float = 0.5
    unsquared_norm: bool = False
    optimizer: str = "adam"
    lr: float = 1e-3
    batch_size: int = 32
    buffer_capacity: int = 100_000
    exploration_steps: int = 1000
    grad_clip: float = 5.0
    target_sync: int = 200
    seed_policy: str = "independent"
    eval_episodes: int = 10

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.algorithm in ("dqn", "ddqn"):
            self.n_members = 1
        if self.n_members < 1:
            raise ValueError("n_members must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.regularizer not in KINDS:
            raise ValueError(f"regularizer must be one of {KINDS}")
        if self.regularizer != "none" and self.n_members < 2:
            raise ValueError("a regularizer needs at least two ensemble members")
        if self.seed_policy not in SEED_POLICIES:
            raise ValueError(f"seed_policy must be one of {SEED_POLICIES}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if self.batch_size < 1 or self.target_sync < 1:
            raise ValueError("batch_size and target_sync must be positive")


@dataclass
class TrainingRecord:
    step: int
    return_mean: float
    return_std: float
    loss: float
    reg_value: float
    norms: tuple[float, ...] = field(default_factory=tuple)


def q_min(values: np.ndarray) -> np.ndarray:
    """Elementwise minimum over the member axis (axis 0)."""
    return np.min(values, axis=0)


def q_ens(values: np.ndarray) -> np.ndarray:
    """Elementwise mean over the member axis (axis 0)."""
    return np.mean(values, axis=0)


def masked_argmax(q: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest index. Illegal actions are skipped."""
    q = np.atleast_2d(q)
    if mask is not None:
        q = np.where(mask, q, -np.inf)
    return np.argmax(q, axis=1)


def masked_max(q: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    q = np.atleast_2d(q)
    if mask is not None:
        q = np.where(mask, q, -np.inf)
    return np.max(q, axis=1)


class Agent:
    """An ensemble of Q-networks with target copies.

    ``dqn`` and ``ddqn`` are the single-member cases. Only one member is
    updated per environment step.
    """

    def __init__(self, config: AgentConfig, obs_dim: int, n_actions: int, seed: int = 0,
                 mask_fn: Callable[[np.ndarray], np.ndarray | None] | None = None):
        self.config = config
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.seed = seed
        self.mask_fn = mask_fn
        streams = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(streams[0])
        self.buffer = ReplayBuffer(config.buffer_capacity, obs_dim, seed=streams[1])
        sizes = [obs_dim, *config.hidden, n_actions]
        identical = config.seed_policy == "identical_layers"
        self.members = [MLP(sizes, seed=seed, member=k, identical_layers=identical)
                        for k in range(config.n_members)]
        self.targets = [m.clone() for m in self.members]
        if config.optimizer == "adam":
            self.optimizers = [ad.Adam(m.params, lr=config.lr) for m in self.members]
        else:
            self.optimizers = [ad.SGD(m.params, lr=config.lr) for m in self.members]
        self.reg = Regularizer(config.regularizer, config.atkinson_epsilon)
        self.updates = 0
        self.last_reg_value = 0.0

    @property
    def n_members(self) -> int:
        return len(self.members)

    def _mask(self, s: np.ndarray) -> np.ndarray | None:
        return None if self.mask_fn is None else self.mask_fn(s)

    # --- value estimates -------------------------------------------------
    def member_values(self, s: np.ndarray, nets: Sequence[MLP] | None = None) -> np.ndarray:
        """Q-values of every member, shape (N, batch, n_actions)."""
        nets = self.members if nets is None else nets
        return np.stack([net(s) for net in nets])

    def q_proxy(self, s: np.ndarray, nets: Sequence[MLP] | None = None) -> np.ndarray:
        """The action-value estimate the algorithm acts and bootstraps on."""
        values = self.member_values(s, nets)
        if self.config.algorithm == "maxmin":
            return q_min(values)
        if self.config.algorithm == "ensemble":
            return q_ens(values)
        return values[0]

    def select_action(self, s: np.ndarray, eps: float) -> int:
        if not 0.0 <= eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        mask = self._mask(s)
        if self.rng.random() < eps:
            if mask is None:
                return int(self.rng.integers(self.n_actions))
            return int(self.rng.choice(np.flatnonzero(mask[0])))
        return int(masked_argmax(self.q_proxy(s), mask)[0])

    def compute_target(self, batch: Batch) -> np.ndarray:
        if len(batch) == 0:
            raise ValueError("empty batch")
        gamma = self.config.gamma
        mask = self._mask(batch.s_next)
        if self.config.algorithm == "ddqn":
            return self.double_dqn_target(batch, mask)
        bootstrap = masked_max(self.q_proxy(batch.s_next, self.targets), mask)
        return batch.r + gamma * np.where(batch.done, 0.0, bootstrap)

    def double_dqn_target(self, batch: Batch, mask: np.ndarray | None = None) -> np.ndarray:
        best = masked_argmax(self.members[0](batch.s_next), mask)
        value = self.targets[0](batch.s_next)[np.arange(len(batch)), best]
        return batch.r + self.config.gamma * np.where(batch.done, 0.0, value)

    # --- learning -------------------------------------------------------
    def norms(self) -> list[float]:
        sq = [m.squared_norm() for m in self.members]
        return [float(np.sqrt(v)) for v in sq] if self.config.unsquared_norm else sq

    def loss(self, i: int, batch: Batch, target: np.ndarray | None = None) -> tuple[ad.Tensor, float, float]:
        """Recorded loss for member ``i``: mean squared TD error minus lam * I.

        Returns the loss tensor, the TD part and the regulariser value.
        """
        if target is None:
            target = self.compute_target(batch)
        member = self.members[i]
        q = member.forward(ad.Tensor(batch.s))
        td = ad.mean(ad.square(ad.sub(ad.pick(q, batch.a), ad.Tensor(target))))
        if not self.reg.active:
            return td, td.item(), 0.0
        norm_i = ad.squared_l2_norm(member.params)
        if self.config.unsquared_norm:
            norm_i = ad.sqrt(norm_i)
        norms = self.norms()
        norms[i] = norm_i.item()
        value = self.reg.value(norms, i)
        term = ad.scalar_function(norm_i, value, self.reg.grad(norms, i), name=self.reg.kind)
        total = ad.sub(td, ad.mul(ad.Tensor(self.config.lam), term))
        return total, td.item(), value

    def update_member(self, i: int, batch: Batch) -> float:
        """One optimiser step on member ``i``; returns the TD loss."""
        member = self.members[i]
        total, td_value, reg_value = self.loss(i, batch)
        member.zero_grad()
        ad.backward(total)
        if self.config.grad_clip > 0:
            ad.clip_grad_norm(member.params, self.config.grad_clip)
        self.optimizers[i].step()
        self.last_reg_value = reg_value
        self.updates += 1
        if self.updates % self.config.target_sync == 0:
            self.sync_targets()
        return td_value

    def sync_targets(self) -> None:
        for target, member in zip(self.targets, self.members):
            target.copy_from(member)

    def regularizer_value(self) -> float:
        if not self.reg.active:
            return 0.0
        return self.reg.value(self.norms(), 0)


def epsilon_at(config: AgentConfig, t: int, total_steps: int) -> float:
    """Exploration rate at env step ``t``; pure random before ``exploration_steps``."""
    if t < config.exploration_steps:
        return 1.0
    decay = config.eps_decay_steps
    if decay is None:
        decay = max(1, total_steps // 10)
    frac = min(1.0, (t - config.exploration_steps) / decay)
    return config.eps_start + frac * (config.eps_end - config.eps_start)


def evaluate(agent: Agent, env, episodes: int, max_steps: int = 10_000) -> np.ndarray:
    """Greedy returns over ``episodes`` episodes."""
    returns = np.zeros(episodes)
    for k in range(episodes):
        obs = env.reset()
        for _ in range(max_steps):
            mask = agent._mask(obs)
            a = int(masked_argmax(agent.q_proxy(obs), mask)[0])
            res = env.step(a)
            returns[k] += res.reward
            obs = res.next_observation
            if res.terminal:
                break
    return returns


def train(agent: Agent, env, total_steps: int, eval_every: int, eval_env=None,
          callback: Callable[[int, Agent], None] | None = None) -> list[TrainingRecord]:
    """Interact for ``total_steps`` steps, updating one random member per step.

    Every ``eval_every`` steps a greedy evaluation on ``eval_env`` is recorded
    and ``callback(step, agent)`` is invoked.
    """
    cfg = agent.config
    records: list[TrainingRecord] = []
    losses: list[float] = []
    obs = env.reset() if total_steps > 0 else None
    for t in range(total_steps):
        a = agent.select_action(obs, epsilon_at(cfg, t, total_steps))
        res = env.step(a)
        agent.buffer.push(Transition(obs, a, res.reward, res.next_observation, res.terminal))
        obs = env.reset() if res.terminal else res.next_observation
        if t >= cfg.exploration_steps and len(agent.buffer) >= cfg.batch_size:
            i = int(agent.rng.integers(agent.n_members))
            losses.append(agent.update_member(i, agent.buffer.sample(cfg.batch_size)))
        step = t + 1
        if eval_every > 0 and step % eval_every == 0:
            rets = evaluate(agent, eval_env, cfg.eval_episodes) if eval_env is not None else np.zeros(1)
            records.append(TrainingRecord(
                step=step,
                return_mean=float(rets.mean()),
                return_std=float(rets.std()),
                loss=float(np.mean(losses)) if losses else float("nan"),
                reg_value=agent.regularizer_value(),
                norms=tuple(agent.norms()),
            ))
            losses = []
            if callback is not None:
                callback(step, agent)
    return records


CSV_BASE = ("step", "return_mean", "return_std", "loss", "reg_value")


def records_to_csv(records: Sequence[TrainingRecord], n_members: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*CSV_BASE, *(f"l2_norm_{k + 1}" for k in range(n_members))])
    for rec in records:
        writer.writerow([rec.step, repr(rec.return_mean), repr(rec.return_std), repr(rec.loss),
                         repr(rec.reg_value), *(repr(v) for v in rec.norms)])
    return buf.getvalue()


def records_from_csv(text: str) -> list[TrainingRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or list(rows[0][:len(CSV_BASE)]) != list(CSV_BASE):
        raise ValueError("training CSV is missing its header row")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            out.append(TrainingRecord(int(row[0]), float(row[1]), float(row[2]), float(row[3]),
                                      float(row[4]), tuple(float(v) for v in row[5:])))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"malformed training CSV row {lineno}: {exc}") from None
    return out


def config_dict(config: AgentConfig) -> dict:
    d = asdict(config)
    d["hidden"] = list(config.hidden)
    return d


def config_fields() -> dict[str, type]:
    return {f.name: f.type for f in fields(AgentConfig)}
