"""Benchmark games and a loader for user-defined tabular games.

Three built-in families:

* an epidemic game over states {susceptible, infectious} where quarantine
  blocks infection at a running cost;
* a sequential rock-paper-scissors game where jumps between strategy
  states succeed with probability one minus the target state's mass;
* randomly generated tabular games with a crowd-aversion log-barrier
  reward, reproducible from a 64-bit seed.

User-defined games are single JSON documents with dense probability and
reward tables plus optional mean-field reward couplings; see ``load_game``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import MfgModel

# Algorithm identifier of the seeded generator behind make_random; recorded
# in experiment metadata so "same seed" is meaningful across platforms.
PRNG_ALGORITHM = "pcg64"


@dataclass(frozen=True)
class SisParams:
    """Epidemic game parameters.

    ``gamma`` is the healing rate, ``kappa`` the infection rate (scaled by
    the infectious mass), ``c_i`` the cost of being infected and ``c_q``
    the cost of staying in quarantine.  The horizon is not part of the
    published dynamics; 50 steps is long enough for the infection level to
    settle and can be overridden.
    """

    gamma: float = 0.4
    kappa: float = 0.81
    c_i: float = 1.0
    c_q: float = 0.5
    mu0_infected: float = 0.1
    horizon: int = 50

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1] to keep rows stochastic, got {self.kappa}")
        if self.c_i < 0.0 or self.c_q < 0.0:
            raise ValueError("costs must be nonnegative")
        if not 0.0 <= self.mu0_infected <= 1.0:
            raise ValueError(f"mu0_infected must lie in [0, 1], got {self.mu0_infected}")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")


# State / action indices of the epidemic game.
SIS_SUSCEPTIBLE, SIS_INFECTIOUS = 0, 1
SIS_NO_QUARANTINE, SIS_QUARANTINE = 0, 1


def make_sis(params: SisParams = SisParams()) -> MfgModel:
    """Susceptible-infectious game with a quarantine action.

    Infectious agents heal with probability ``gamma`` under either action.
    Susceptible agents get infected with probability ``kappa * mu(I)``
    unless they quarantine, which blocks infection entirely.  Rewards:
    0 for healthy non-quarantined agents, ``-c_i`` while infected, and
    ``-c_i - c_q`` for quarantining in either state (as published, the
    infection cost is charged to quarantined susceptible agents too).
    """
    gamma, kappa = params.gamma, params.kappa
    reward_rows = np.array([
        [0.0, -params.c_i - params.c_q],
        [-params.c_i, -params.c_i - params.c_q],
    ])
    reward_rows.setflags(write=False)

    def kernel(t: int, mu: np.ndarray) -> np.ndarray:
        infection = kappa * mu[SIS_INFECTIOUS]
        kern = np.zeros((2, 2, 2))
        kern[SIS_SUSCEPTIBLE, SIS_NO_QUARANTINE, SIS_INFECTIOUS] = infection
        kern[SIS_SUSCEPTIBLE, SIS_NO_QUARANTINE, SIS_SUSCEPTIBLE] = 1.0 - infection
        kern[SIS_SUSCEPTIBLE, SIS_QUARANTINE, SIS_SUSCEPTIBLE] = 1.0
        kern[SIS_INFECTIOUS, :, SIS_SUSCEPTIBLE] = gamma
        kern[SIS_INFECTIOUS, :, SIS_INFECTIOUS] = 1.0 - gamma
        return kern

    def reward_table(t: int, mu: np.ndarray) -> np.ndarray:
        return reward_rows

    return MfgModel(
        num_states=2, num_actions=2, horizon=params.horizon,
        initial_mf=np.array([1.0 - params.mu0_infected, params.mu0_infected]),
        transition=lambda t, x, u, mu: kernel(t, mu)[x, u],
        reward=lambda t, x, u, mu: float(reward_rows[x, u]),
        transition_kernel=kernel, reward_table=reward_table)


@dataclass(frozen=True)
class RpsParams:
    """Reward weights of the sequential rock-paper-scissors game; chosen
    asymmetric so the Nash policy is not uniform."""

    a: float = 10.0
    b: float = 1.0
    c: float = 10.0
    horizon: int = 10

    def __post_init__(self):
        for name in ("a", "b", "c"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"weight {name} must be finite")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")


# State indices: a neutral start state plus one state per strategy.
RPS_START, RPS_ROCK, RPS_PAPER, RPS_SCISSOR = 0, 1, 2, 3


def make_rps(params: RpsParams = RpsParams()) -> MfgModel:
    """Sequential rock-paper-scissors over four states.

    All mass begins in the start state.  Choosing target strategy ``u``
    moves the agent there with probability ``1 - mu(target)`` and leaves it
    in place otherwise, so crowded strategies are hard to enter (jumping at
    the own state always stays, which the same rule covers).  Rewards
    depend on the state only: each strategy earns its weighted wins minus
    its weighted losses against the current mass; the start state is
    neutral and earns 0.
    """
    a, b, c = params.a, params.b, params.c
    num_states, num_actions = 4, 3

    def kernel(t: int, mu: np.ndarray) -> np.ndarray:
        kern = np.zeros((num_states, num_actions, num_states))
        for u in range(num_actions):
            target = u + 1
            stay = mu[target]
            kern[:, u, target] += 1.0 - stay
            kern[np.arange(num_states), u, np.arange(num_states)] += stay
        return kern

    def reward_table(t: int, mu: np.ndarray) -> np.ndarray:
        by_state = np.array([
            0.0,
            -a * mu[RPS_PAPER] + b * mu[RPS_SCISSOR],
            -c * mu[RPS_SCISSOR] + a * mu[RPS_ROCK],
            -b * mu[RPS_ROCK] + c * mu[RPS_PAPER],
        ])
        return np.repeat(by_state[:, None], num_actions, axis=1)

    return MfgModel(
        num_states=num_states, num_actions=num_actions, horizon=params.horizon,
        initial_mf=np.array([1.0, 0.0, 0.0, 0.0]),
        transition=lambda t, x, u, mu: kernel(t, mu)[x, u],
        reward=lambda t, x, u, mu: float(reward_table(t, mu)[x, u]),
        transition_kernel=kernel, reward_table=reward_table)


@dataclass(frozen=True)
class RandomMfgParams:
    """Seeded random tabular game with a crowd-aversion reward term.

    ``eta`` weighs the log-barrier penalty on the own state's mass, which
    rewards spreading out; ``mf_floor`` clamps the mass inside the log so
    empty states yield a large but finite bonus.
    """

    num_states: int = 100
    num_actions: int = 10
    horizon: int = 10
    eta: float = 1.0
    seed: int = 0
    mf_floor: float = 1e-10

    def __post_init__(self):
        if self.num_states < 1 or self.num_actions < 1 or self.horizon < 1:
            raise ValueError("num_states, num_actions and horizon must be positive")
        if self.eta < 0.0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if not self.mf_floor > 0.0:
            raise ValueError(f"mf_floor must be positive, got {self.mf_floor}")


def make_random(params: RandomMfgParams = RandomMfgParams()) -> MfgModel:
    """Random game, reproducible from the seed.

    Draw order from one PCG64 stream: first the ``(T, X, U, X')`` transition
    weights, i.i.d. uniform on [0, 1) and normalized over the next state,
    then the ``(T, X, U)`` base rewards, also uniform.  The total reward is
    ``base(t, x, u) - eta * log(max(mu(x), mf_floor))``; transitions do not
    depend on the mean field.
    """
    rng = np.random.Generator(np.random.PCG64(params.seed))
    shape = (params.horizon, params.num_states, params.num_actions, params.num_states)
    raw = rng.random(shape)
    transitions = raw / raw.sum(axis=3, keepdims=True)
    transitions.setflags(write=False)
    base_rewards = rng.random(shape[:3])
    base_rewards.setflags(write=False)
    eta, floor = params.eta, params.mf_floor

    def reward_table(t: int, mu: np.ndarray) -> np.ndarray:
        barrier = -eta * np.log(np.maximum(mu, floor))
        return base_rewards[t] + barrier[:, None]

    return MfgModel(
        num_states=params.num_states, num_actions=params.num_actions,
        horizon=params.horizon,
        initial_mf=np.full(params.num_states, 1.0 / params.num_states),
        transition=lambda t, x, u, mu: transitions[t, x, u],
        reward=lambda t, x, u, mu: float(reward_table(t, mu)[x, u]),
        transition_kernel=lambda t, mu: transitions[t],
        reward_table=reward_table)


def tabular_model(num_states: int, num_actions: int, horizon: int, initial_mf,
                  transitions, rewards, *, log_barrier: tuple[float, float] | None = None,
                  linear_coupling: np.ndarray | None = None) -> MfgModel:
    """Build a model from dense tables.

    ``transitions`` is ``(X, U, X')`` (time-invariant) or ``(T, X, U, X')``;
    ``rewards`` is ``(X, U)`` or ``(T, X, U)``.  Optional reward couplings:
    ``log_barrier=(eta, floor)`` adds ``-eta * log(max(mu(x), floor))`` and
    ``linear_coupling`` (an ``(X, X)`` matrix ``C``) adds
    ``sum_x' C[x, x'] mu(x')``.  Transitions are always mean-field
    independent here.
    """
    transitions = np.asarray(transitions, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    if transitions.ndim == 3:
        transitions = np.broadcast_to(transitions, (horizon,) + transitions.shape)
    if rewards.ndim == 2:
        rewards = np.broadcast_to(rewards, (horizon,) + rewards.shape)
    if transitions.shape != (horizon, num_states, num_actions, num_states):
        raise ValueError(f"transition table has shape {transitions.shape}, expected "
                         f"({horizon}, {num_states}, {num_actions}, {num_states})")
    if rewards.shape != (horizon, num_states, num_actions):
        raise ValueError(f"reward table has shape {rewards.shape}, expected "
                         f"({horizon}, {num_states}, {num_actions})")
    if linear_coupling is not None:
        linear_coupling = np.asarray(linear_coupling, dtype=np.float64)
        if linear_coupling.shape != (num_states, num_states):
            raise ValueError(f"coupling matrix has shape {linear_coupling.shape}, "
                             f"expected ({num_states}, {num_states})")
    if log_barrier is not None:
        eta, floor = float(log_barrier[0]), float(log_barrier[1])
        if not floor > 0.0:
            raise ValueError("log-barrier floor must be positive")
        log_barrier = (eta, floor)

    def reward_table(t: int, mu: np.ndarray) -> np.ndarray:
        table = rewards[t]
        if log_barrier is not None:
            eta, floor = log_barrier
            table = table - eta * np.log(np.maximum(mu, floor))[:, None]
        if linear_coupling is not None:
            table = table + (linear_coupling @ mu)[:, None]
        return table

    return MfgModel(
        num_states=num_states, num_actions=num_actions, horizon=horizon,
        initial_mf=initial_mf,
        transition=lambda t, x, u, mu: transitions[t, x, u],
        reward=lambda t, x, u, mu: float(reward_table(t, mu)[x, u]),
        transition_kernel=lambda t, mu: transitions[t],
        reward_table=reward_table)


class GameFormatError(ValueError):
    """A game file failed to parse or violated the document schema."""


def _require_field(doc: dict, name: str):
    if name not in doc:
        raise GameFormatError(f"field '{name}' is missing")
    return doc[name]


def _numeric_array(value, field: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise GameFormatError(f"field '{field}' is not a rectangular numeric array: {exc}") from None
    return arr


def load_game(path) -> MfgModel:
    """Load a tabular game from a JSON document.

    Required fields: ``name``, ``num_states``, ``num_actions``, ``horizon``,
    ``initial_mf``, ``transitions`` and ``rewards``.  Tables may be given
    per time step (``[t][x][u][x']`` / ``[t][x][u]``) or time-invariant
    (``[x][u][x']`` / ``[x][u]``, detected by nesting depth); writing the
    string ``"time-invariant"`` and putting the table in
    ``transitions_table`` / ``rewards_table`` is also accepted.  The
    optional ``coupling`` object may add a ``log_barrier`` ({eta, floor})
    and/or ``linear`` ({matrix}) term to the reward.

    Transition rows are expected to sum to 1 within 1e-9 but are loaded
    as-is; defective rows are surfaced by ``validate_model``, not here.
    """
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise GameFormatError(f"{path}: file is empty")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{path}: invalid JSON at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise GameFormatError(f"{path}: top-level value must be an object")

    try:
        num_states = int(_require_field(doc, "num_states"))
        num_actions = int(_require_field(doc, "num_actions"))
        horizon = int(_require_field(doc, "horizon"))
        initial_mf = _numeric_array(_require_field(doc, "initial_mf"), "initial_mf")

        transitions = _require_field(doc, "transitions")
        if transitions == "time-invariant":
            transitions = _require_field(doc, "transitions_table")
        transitions = _numeric_array(transitions, "transitions")
        if transitions.ndim not in (3, 4):
            raise GameFormatError(
                f"field 'transitions' must be [x][u][x'] or [t][x][u][x'], "
                f"got {transitions.ndim} dimensions")

        rewards = _require_field(doc, "rewards")
        if rewards == "time-invariant":
            rewards = _require_field(doc, "rewards_table")
        rewards = _numeric_array(rewards, "rewards")
        if rewards.ndim not in (2, 3):
            raise GameFormatError(
                f"field 'rewards' must be [x][u] or [t][x][u], got {rewards.ndim} dimensions")

        log_barrier = None
        linear = None
        coupling = doc.get("coupling", {})
        if coupling:
            if not isinstance(coupling, dict):
                raise GameFormatError("field 'coupling' must be an object")
            if "log_barrier" in coupling:
                spec = coupling["log_barrier"]
                log_barrier = (float(spec.get("eta", 1.0)), float(spec.get("floor", 1e-10)))
            if "linear" in coupling:
                linear = _numeric_array(
                    _require_field(coupling["linear"], "matrix"), "coupling.linear.matrix")
        return tabular_model(num_states, num_actions, horizon, initial_mf,
                             transitions, rewards,
                             log_barrier=log_barrier, linear_coupling=linear)
    except GameFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise GameFormatError(f"{path}: {exc}") from None
