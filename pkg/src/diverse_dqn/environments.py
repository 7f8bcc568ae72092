"""Desk-scale environments with a shared ``reset``/``step`` interface."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ContractError(RuntimeError):
    """Raised when an environment is stepped after its episode ended."""


@dataclass
class StepResult:
    next_observation: np.ndarray
    reward: float
    terminal: bool


class CatcherLite:
    """Paddle-and-fruit game on a ``width`` x ``height`` grid.

    The paddle sits on row 0 and moves one column per step (actions 0=left,
    1=stay, 2=right). A fruit drops one row per step from the top row; when
    it reaches row 0 the agent gets +1 if the paddle is in the fruit's column
    and -1 otherwise, and a new fruit spawns. The episode ends after
    ``fruit_budget`` fruits, or at the first miss when ``end_on_miss``.
    """

    n_actions = 3
    obs_dim = 3
    LEFT, STAY, RIGHT = 0, 1, 2

    def __init__(self, width: int = 10, height: int = 10, fruit_budget: int = 10,
                 end_on_miss: bool = False, seed: int = 0):
        self.width = width
        self.height = height
        self.fruit_budget = fruit_budget
        self.end_on_miss = end_on_miss
        self.rng = np.random.default_rng(seed)
        self.paddle_x = width // 2
        self.fruit_x = 0
        self.fruit_y = height - 1
        self.fruits_done = 0
        self.step_index = 0
        self.terminal = True

    @property
    def max_return(self) -> float:
        return float(self.fruit_budget)

    def action_mask(self, obs) -> None:
        return None

    def reset(self) -> np.ndarray:
        self.paddle_x = self.width // 2
        self._spawn()
        self.fruits_done = 0
        self.step_index = 0
        self.terminal = False
        return self.observation()

    def _spawn(self) -> None:
        self.fruit_x = int(self.rng.integers(self.width))
        self.fruit_y = self.height - 1

    def observation(self) -> np.ndarray:
        scale_x = max(self.width - 1, 1)
        scale_y = max(self.height - 1, 1)
        return np.array([self.paddle_x / scale_x, self.fruit_x / scale_x, self.fruit_y / scale_y])

    def step(self, action: int) -> StepResult:
        if self.terminal:
            raise ContractError("step() called on a terminal CatcherLite state; call reset()")
        if action not in (0, 1, 2):
            raise ValueError(f"invalid action {action}")
        self.paddle_x = min(max(self.paddle_x + action - 1, 0), self.width - 1)
        self.fruit_y -= 1
        self.step_index += 1
        reward = 0.0
        if self.fruit_y == 0:
            caught = self.paddle_x == self.fruit_x
            reward = 1.0 if caught else -1.0
            self.fruits_done += 1
            if self.fruits_done >= self.fruit_budget or (self.end_on_miss and not caught):
                self.terminal = True
            else:
                self._spawn()
        return StepResult(self.observation(), reward, self.terminal)


def greedy_catcher_action(env: CatcherLite) -> int:
    """Move toward the fruit column; an optimal policy for CatcherLite."""
    if env.fruit_x < env.paddle_x:
        return CatcherLite.LEFT
    if env.fruit_x > env.paddle_x:
        return CatcherLite.RIGHT
    return CatcherLite.STAY


class MaxBiasChain:
    """Two-state maximisation-bias MDP.

    From state A, RIGHT (action 0) ends the episode with reward 0 and LEFT
    (action 1) moves to state B with reward 0. Every one of the
    ``n_b_actions`` actions in B ends the episode with a reward drawn from
    Normal(``mu``, ``sigma``). Only RIGHT and LEFT are legal in A; see
    ``action_mask``. Observations are one-hot over (A, B).
    """

    obs_dim = 2
    RIGHT, LEFT = 0, 1
    STATE_A, STATE_B = 0, 1

    def __init__(self, n_b_actions: int = 8, mu: float = -0.1, sigma: float = 1.0, seed: int = 0):
        if n_b_actions < 2:
            raise ValueError("state B needs at least two actions")
        self.n_b_actions = n_b_actions
        self.mu = mu
        self.sigma = sigma
        self.rng = np.random.default_rng(seed)
        self.state = self.STATE_A
        self.step_index = 0
        self.terminal = True

    @property
    def n_actions(self) -> int:
        return self.n_b_actions

    @property
    def max_return(self) -> float:
        return 0.0

    @staticmethod
    def one_hot(state: int) -> np.ndarray:
        obs = np.zeros(2)
        obs[state] = 1.0
        return obs

    def action_mask(self, obs) -> np.ndarray:
        """Legal actions for one observation (or a batch of them)."""
        obs = np.atleast_2d(obs)
        mask = np.ones((obs.shape[0], self.n_b_actions), dtype=bool)
        in_a = obs[:, self.STATE_A] > 0.5
        mask[in_a, 2:] = False
        return mask

    def reset(self) -> np.ndarray:
        self.state = self.STATE_A
        self.step_index = 0
        self.terminal = False
        return self.one_hot(self.state)

    def step(self, action: int) -> StepResult:
        if self.terminal:
            raise ContractError("step() called on a terminal MaxBiasChain state; call reset()")
        self.step_index += 1
        if self.state == self.STATE_A:
            if action == self.LEFT:
                self.state = self.STATE_B
                return StepResult(self.one_hot(self.STATE_B), 0.0, False)
            if action != self.RIGHT:
                raise ValueError(f"action {action} is not legal in state A")
            self.terminal = True
            return StepResult(self.one_hot(self.STATE_A), 0.0, True)
        if not 0 <= action < self.n_b_actions:
            raise ValueError(f"invalid action {action}")
        self.terminal = True
        return StepResult(self.one_hot(self.STATE_B), float(self.rng.normal(self.mu, self.sigma)), True)


def sine_dataset(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``n`` inputs uniform on [-2pi, 2pi] (shape (n, 1)) and their sines."""
    if n < 2:
        raise ValueError("sine_dataset needs n >= 2")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2 * np.pi, 2 * np.pi, size=(n, 1))
    return x, np.sin(x)


def make_env(name: str, seed: int = 0, **params):
    if name == "catcher_lite":
        return CatcherLite(seed=seed, **params)
    if name == "maxbias_chain":
        return MaxBiasChain(seed=seed, **params)
    raise ValueError(f"unknown environment {name!r}")
