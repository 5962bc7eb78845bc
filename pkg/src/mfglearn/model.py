"""Data model for finite, discrete-time mean field games.

A game couples a finite state space, a finite action space, a decision
horizon and an initial state distribution with two evaluators (transition
kernel and per-stage reward) that may depend on the current mean field,
i.e. the population's state distribution.  All containers wrap dense
numpy tensors indexed time-major: policies as ``[t, x, u]``, mean field
flows as ``[t, x]`` and state-action value tables as ``[t, x, u]``.

Every type here is immutable after construction -- the wrapped arrays are
marked read-only -- so instances can be shared freely between threads.
Model evaluators are expected to be pure functions of their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Row-sum tolerance for distributions supplied at construction time.
SIMPLEX_ATOL = 1e-12
# Looser tolerance for flows, which accumulate rounding over many forward steps.
FLOW_ATOL = 1e-10

# Scalar evaluators: (t, x, u, mu) -> next-state distribution / reward.
TransitionFn = Callable[[int, int, int, np.ndarray], np.ndarray]
RewardFn = Callable[[int, int, int, np.ndarray], float]
# Optional vectorized evaluators: (t, mu) -> full (X, U, X') kernel / (X, U) table.
TransitionKernelFn = Callable[[int, np.ndarray], np.ndarray]
RewardTableFn = Callable[[int, np.ndarray], np.ndarray]


def _read_only(values, dtype=np.float64) -> np.ndarray:
    """Copy ``values`` into a locked float array."""
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def normalize_rows(rows: np.ndarray) -> np.ndarray:
    """Scale nonnegative rows (last axis) to sum to one.

    Raises ValueError on rows with negative entries or zero total mass.
    Normalization is idempotent up to floating-point rounding.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if np.any(rows < 0.0):
        raise ValueError("rows must be nonnegative")
    totals = rows.sum(axis=-1, keepdims=True)
    if np.any(totals <= 0.0):
        raise ValueError("cannot normalize an all-zero row")
    return rows / totals


@dataclass(frozen=True)
class Policy:
    """Time-indexed behavioural policy.

    ``probs[t, x, u]`` is the probability of action ``u`` in state ``x``
    at decision time ``t``.  Every row ``probs[t, x, :]`` must lie on the
    probability simplex within ``SIMPLEX_ATOL``.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = _read_only(self.probs)
        if probs.ndim != 3 or min(probs.shape) < 1:
            raise ValueError(f"policy tensor must be [t, x, u], got shape {probs.shape}")
        if np.any(probs < 0.0):
            raise ValueError("policy probabilities must be nonnegative")
        err = np.max(np.abs(probs.sum(axis=2) - 1.0))
        if err > SIMPLEX_ATOL:
            raise ValueError(f"policy rows must sum to 1 within {SIMPLEX_ATOL}, worst error {err:.3e}")
        object.__setattr__(self, "probs", probs)

    @staticmethod
    def uniform(horizon: int, num_states: int, num_actions: int) -> "Policy":
        return Policy(np.full((horizon, num_states, num_actions), 1.0 / num_actions))

    @property
    def horizon(self) -> int:
        return self.probs.shape[0]

    @property
    def num_states(self) -> int:
        return self.probs.shape[1]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[2]


@dataclass(frozen=True)
class MeanFieldFlow:
    """Time-indexed population state distribution ``mass[t, x]``.

    Rows must lie on the simplex within ``FLOW_ATOL``.  A flow produced by
    forward propagation over a window starting at time ``s`` stores the
    window rows only; row 0 then corresponds to global time ``s``.
    """

    mass: np.ndarray

    def __post_init__(self):
        mass = _read_only(self.mass)
        if mass.ndim != 2 or min(mass.shape) < 1:
            raise ValueError(f"mean field flow must be [t, x], got shape {mass.shape}")
        if np.any(mass < 0.0):
            raise ValueError("mean field mass must be nonnegative")
        err = np.max(np.abs(mass.sum(axis=1) - 1.0))
        if err > FLOW_ATOL:
            raise ValueError(f"mean field rows must sum to 1 within {FLOW_ATOL}, worst error {err:.3e}")
        object.__setattr__(self, "mass", mass)

    @property
    def horizon(self) -> int:
        return self.mass.shape[0]

    @property
    def num_states(self) -> int:
        return self.mass.shape[1]


@dataclass(frozen=True)
class QFunction:
    """State-action value table ``values[t, x, u]``; all entries finite."""

    values: np.ndarray

    def __post_init__(self):
        values = _read_only(self.values)
        if values.ndim != 3 or min(values.shape) < 1:
            raise ValueError(f"value tensor must be [t, x, u], got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("state-action values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def horizon(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PolicyEnsemble:
    """A family of window policies, one per planning start time.

    The member at start time ``s`` covers global times
    ``{s, ..., min(total_horizon - 1, s + horizon)}``.  ``horizon`` is the
    lookahead depth of each window; ``total_horizon`` is the horizon of the
    generating game.
    """

    start_times: tuple[int, ...]
    members: tuple[Policy, ...]
    horizon: int
    total_horizon: int

    def __post_init__(self):
        starts = tuple(int(s) for s in self.start_times)
        members = tuple(self.members)
        if len(starts) != len(members) or not members:
            raise ValueError("ensemble needs one member policy per start time")
        if self.horizon < 0:
            raise ValueError("ensemble lookahead horizon must be nonnegative")
        if self.total_horizon < 1:
            raise ValueError("total horizon must be positive")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("start times must be strictly increasing")
        if starts[0] < 0 or starts[-1] > self.total_horizon - 1:
            raise ValueError("start times must lie in [0, total_horizon - 1]")
        for s, member in zip(starts, members):
            t_end = min(self.total_horizon - 1, s + self.horizon)
            if member.horizon != t_end - s + 1:
                raise ValueError(
                    f"member at start {s} must cover times {s}..{t_end}, "
                    f"got {member.horizon} rows"
                )
        shapes = {(m.num_states, m.num_actions) for m in members}
        if len(shapes) != 1:
            raise ValueError("ensemble members must share state/action spaces")
        object.__setattr__(self, "start_times", starts)
        object.__setattr__(self, "members", members)

    def member_at(self, start_time: int) -> Policy:
        try:
            return self.members[self.start_times.index(start_time)]
        except ValueError:
            raise KeyError(f"no ensemble member starts at time {start_time}") from None


@dataclass(frozen=True)
class ConvergenceTrace:
    """Per-iteration metric records emitted by the solvers.

    One row per recorded iteration: the three concept distances, the exact
    and regularized exploitability, and the cumulative wall time.  Iteration
    numbers are strictly increasing and start at 0.
    """

    iterations: np.ndarray
    delta_qpire: np.ndarray
    delta_qstarre: np.ndarray
    delta_re: np.ndarray
    exploitability: np.ndarray
    reg_exploitability: np.ndarray
    wall_time_seconds: np.ndarray

    def __post_init__(self):
        iters = _read_only(self.iterations, dtype=np.int64)
        cols = {}
        for name in ("delta_qpire", "delta_qstarre", "delta_re",
                     "exploitability", "reg_exploitability", "wall_time_seconds"):
            col = _read_only(getattr(self, name))
            if col.shape != iters.shape:
                raise ValueError(f"trace column {name} must match iteration count")
            cols[name] = col
        if iters.ndim != 1 or iters.size < 1:
            raise ValueError("trace must contain at least one row")
        if iters[0] != 0:
            raise ValueError("trace iterations must start at 0")
        if np.any(np.diff(iters) <= 0):
            raise ValueError("trace iterations must be strictly increasing")
        object.__setattr__(self, "iterations", iters)
        for name, col in cols.items():
            object.__setattr__(self, name, col)

    @classmethod
    def from_rows(cls, iterations: Sequence[int],
                  metrics: Sequence[Sequence[float]],
                  wall_times: Sequence[float]) -> "ConvergenceTrace":
        """Build a trace from parallel lists; each metrics entry holds the
        five metric values in column order."""
        m = np.asarray(metrics, dtype=np.float64).reshape(len(iterations), 5)
        return cls(
            iterations=np.asarray(iterations, dtype=np.int64),
            delta_qpire=m[:, 0],
            delta_qstarre=m[:, 1],
            delta_re=m[:, 2],
            exploitability=m[:, 3],
            reg_exploitability=m[:, 4],
            wall_time_seconds=np.asarray(wall_times, dtype=np.float64),
        )

    def __len__(self) -> int:
        return int(self.iterations.size)

    METRIC_COLUMNS = ("delta_qpire", "delta_qstarre", "delta_re",
                      "exploitability", "reg_exploitability")


@dataclass(frozen=True)
class MfgModel:
    """A finite mean field game.

    ``transition(t, x, u, mu)`` returns the next-state distribution and
    ``reward(t, x, u, mu)`` the stage reward, where ``mu`` is the current
    state distribution of the population.  Both must be deterministic,
    pure functions.  The optional vectorized evaluators return the full
    ``(X, U, X')`` kernel / ``(X, U)`` reward table for one time step and
    are used by the solvers when present; otherwise they are synthesized
    by looping over the scalar evaluators.
    """

    num_states: int
    num_actions: int
    horizon: int
    initial_mf: np.ndarray
    transition: TransitionFn
    reward: RewardFn
    transition_kernel: TransitionKernelFn | None = None
    reward_table: RewardTableFn | None = None

    def __post_init__(self):
        for name in ("num_states", "num_actions", "horizon"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
            object.__setattr__(self, name, int(getattr(self, name)))
        mu0 = _read_only(self.initial_mf)
        if mu0.shape != (self.num_states,):
            raise ValueError(f"initial_mf must have shape ({self.num_states},), got {mu0.shape}")
        if np.any(mu0 < 0.0) or abs(mu0.sum() - 1.0) > SIMPLEX_ATOL:
            raise ValueError(f"initial_mf must be a distribution within {SIMPLEX_ATOL}")
        object.__setattr__(self, "initial_mf", mu0)

    def kernel(self, t: int, mu: np.ndarray) -> np.ndarray:
        """Transition kernel ``P[x, u, x']`` at time ``t`` under mean field ``mu``."""
        if self.transition_kernel is not None:
            kern = np.asarray(self.transition_kernel(t, mu), dtype=np.float64)
        else:
            kern = np.empty((self.num_states, self.num_actions, self.num_states))
            for x in range(self.num_states):
                for u in range(self.num_actions):
                    kern[x, u] = np.asarray(self.transition(t, x, u, mu), dtype=np.float64)
        if kern.shape != (self.num_states, self.num_actions, self.num_states):
            raise ValueError(f"transition kernel at t={t} has shape {kern.shape}")
        return kern

    def rewards(self, t: int, mu: np.ndarray) -> np.ndarray:
        """Reward table ``R[x, u]`` at time ``t`` under mean field ``mu``."""
        if self.reward_table is not None:
            table = np.asarray(self.reward_table(t, mu), dtype=np.float64)
        else:
            table = np.empty((self.num_states, self.num_actions))
            for x in range(self.num_states):
                for u in range(self.num_actions):
                    table[x, u] = float(self.reward(t, x, u, mu))
        if table.shape != (self.num_states, self.num_actions):
            raise ValueError(f"reward table at t={t} has shape {table.shape}")
        return table


@dataclass(frozen=True)
class ModelViolation:
    """One defect found by ``validate_model``: which check failed and where."""

    kind: str  # "transition_row_sum" | "transition_negative" | "reward_not_finite"
    time: int
    state: int
    action: int
    probe: int
    detail: str

    def __str__(self) -> str:
        return (f"{self.kind} at (t={self.time}, x={self.state}, u={self.action}) "
                f"probe {self.probe}: {self.detail}")


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[ModelViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "model ok: no violations"
        lines = [f"{len(self.violations)} violation(s):"]
        lines += [f"  - {v}" for v in self.violations]
        return "\n".join(lines)


def validate_model(model: MfgModel, probe_mfs: Sequence[np.ndarray], *,
                   sum_tol: float = 1e-9) -> ValidationReport:
    """Probe a model for defective transition rows and non-finite rewards.

    Evaluates the kernel and reward table for every ``(t, x, u)`` at each
    probe mean field and reports rows that are negative or do not sum to 1
    within ``sum_tol``, and rewards that are not finite.  Violations are
    collected, never raised.
    """
    if len(probe_mfs) == 0:
        raise ValueError("probe_mfs must be non-empty")
    probes = []
    for i, mu in enumerate(probe_mfs):
        mu = np.asarray(mu, dtype=np.float64)
        if mu.shape != (model.num_states,) or np.any(mu < 0.0) or abs(mu.sum() - 1.0) > FLOW_ATOL:
            raise ValueError(f"probe {i} is not a valid state distribution")
        probes.append(mu)

    found: list[ModelViolation] = []
    for i, mu in enumerate(probes):
        for t in range(model.horizon):
            kern = model.kernel(t, mu)
            table = model.rewards(t, mu)
            for x in range(model.num_states):
                for u in range(model.num_actions):
                    row = kern[x, u]
                    if np.any(row < 0.0):
                        found.append(ModelViolation(
                            "transition_negative", t, x, u, i,
                            f"min entry {row.min():.3e}"))
                    row_sum = float(row.sum())
                    if abs(row_sum - 1.0) > sum_tol:
                        found.append(ModelViolation(
                            "transition_row_sum", t, x, u, i,
                            f"row sums to {row_sum!r}"))
                    if not np.isfinite(table[x, u]):
                        found.append(ModelViolation(
                            "reward_not_finite", t, x, u, i,
                            f"reward is {table[x, u]!r}"))
    return ValidationReport(tuple(found))
