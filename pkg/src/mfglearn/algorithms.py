"""Equilibrium learning algorithms.

Four solvers share one configuration type:

* ``gfpi``   -- fixed-point iteration of the concept's response map;
* ``gfp``    -- fictitious play: best-respond to an averaged mean field and
  average policies weighted by state occupancy;
* ``rh_sequential`` / ``rh_parallel`` -- receding-horizon variants that run
  fictitious play on a chain of lookahead subgames, one per start time,
  either to convergence in order or interleaved one step per subgame.

All solvers are deterministic: identical model and configuration produce
identical iterates, and the interleaved receding-horizon solver reads only
previous-iteration snapshots of its neighbours, so its result does not
depend on any execution order.  Recorded wall times are the only
non-reproducible trace column.
"""

from __future__ import annotations

from dataclasses import dataclass
from time import perf_counter
from typing import Callable

import numpy as np

from .metrics import (
    MetricValues,
    _exploitability_given_flow,
    delta_equilibrium_windowed,
    equilibrium_metrics,
    policy_distance,
)
from .model import ConvergenceTrace, MeanFieldFlow, MfgModel, Policy, PolicyEnsemble
from .operators import (
    Concept,
    _forward_step,
    mean_field_forward,
    mean_field_forward_windowed,
    response_policy,
    window_end,
)

IterationCallback = Callable[[int, Policy], None]
SubgameCallback = Callable[[int, int, Policy], None]


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver configuration.

    ``alpha`` is the softmax temperature (the inverse of the response
    noise precision); it also parameterizes the regularized trace metrics,
    so it must be positive even for concept NE.  ``beta`` is the geometric
    averaging weight of fictitious play; ``uniform_averaging`` switches to
    classical running-mean (1/k) averaging instead.  ``tolerance`` stops a
    run early once the concept's own distance-to-equilibrium falls below
    it; 0 disables early stopping in practice.
    """

    concept: Concept
    alpha: float = 1.0
    beta: float = 0.95
    max_iterations: int = 1000
    tolerance: float = 0.0
    horizon_rh: int | None = None
    initial_policy: Policy | None = None
    trace_every: int = 1
    uniform_averaging: bool = False

    def __post_init__(self):
        object.__setattr__(self, "concept", Concept(self.concept))
        if not float(self.alpha) > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < float(self.beta) < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if int(self.max_iterations) < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if float(self.tolerance) < 0.0:
            raise ValueError(f"tolerance must be nonnegative, got {self.tolerance}")
        if self.horizon_rh is not None and int(self.horizon_rh) < 1:
            raise ValueError(f"horizon_rh must be >= 1, got {self.horizon_rh}")
        if int(self.trace_every) < 1:
            raise ValueError(f"trace_every must be >= 1, got {self.trace_every}")


@dataclass(frozen=True)
class SolverResult:
    """Outcome of a solver run.

    For ``gfpi``/``gfp``, ``converged`` means the concept distance of the
    final policy is at or below the configured tolerance (the last trace
    row reproduces it).  For the receding-horizon solvers it means every
    subgame's windowed distance reached tolerance; ``final_policy`` is then
    the implemented policy (first stage of each window, tail stages from
    the last window) and the trace records full-game metrics of that
    policy's successive snapshots.
    """

    final_policy: Policy
    trace: ConvergenceTrace
    converged: bool
    iterations_used: int
    ensemble: PolicyEnsemble | None = None
    implemented_policy: Policy | None = None
    subgame_iterations: tuple[int, ...] | None = None


def _initial_policy(model: MfgModel, config: SolverConfig) -> Policy:
    if config.initial_policy is None:
        return Policy.uniform(model.horizon, model.num_states, model.num_actions)
    pi0 = config.initial_policy
    if pi0.probs.shape != (model.horizon, model.num_states, model.num_actions):
        raise ValueError(
            f"initial_policy shape {pi0.probs.shape} does not match model "
            f"({model.horizon}, {model.num_states}, {model.num_actions})")
    return pi0


def _normalize_mass(pibar: np.ndarray, fill_rows: np.ndarray) -> np.ndarray:
    """Normalize occupancy-weighted policy mass per (t, x) row.

    Rows with zero accumulated occupancy are unnormalizable and take the
    matching row of ``fill_rows`` (the latest best response).  States that
    no policy can make the population visit -- a point-mass start leaves
    some (t, x) pairs unreachable -- never accumulate occupancy, and only
    the response row there is consistent with the fixed point; any choice
    leaves the mean field and objectives unchanged.
    """
    totals = pibar.sum(axis=2, keepdims=True)
    out = fill_rows.copy()
    np.divide(pibar, totals, out=out, where=totals > 0.0)
    return out


class _TraceRecorder:
    """Collects metric rows keyed by iteration, last write wins."""

    def __init__(self):
        self._start = perf_counter()
        self._rows: dict[int, tuple[MetricValues, float]] = {}

    def record(self, k: int, values: MetricValues) -> None:
        self._rows[k] = (values, perf_counter() - self._start)

    def has(self, k: int) -> bool:
        return k in self._rows

    def build(self) -> ConvergenceTrace:
        ks = sorted(self._rows)
        return ConvergenceTrace.from_rows(
            ks,
            [self._rows[k][0] for k in ks],
            [self._rows[k][1] for k in ks],
        )


def gfpi(model: MfgModel, config: SolverConfig, *,
         iteration_callback: IterationCallback | None = None) -> SolverResult:
    """Fixed-point iteration: repeatedly apply the concept's response map.

    Each iteration recomputes the mean field induced by the current policy
    and replaces the policy by the concept response to it.  Converges for
    high enough temperatures, where the response map is a contraction, and
    may oscillate otherwise.
    """
    pi = _initial_policy(model, config)
    recorder = _TraceRecorder()
    converged = False
    k = 0
    while True:
        flow = mean_field_forward(model, pi)
        mapped = response_policy(model, flow, pi, config.alpha, config.concept)
        if config.concept is Concept.NE:
            stop_value = _exploitability_given_flow(model, pi, flow)
        else:
            stop_value = policy_distance(pi, mapped)
        if k % config.trace_every == 0:
            recorder.record(k, equilibrium_metrics(model, pi, config.alpha, flow))
        if iteration_callback is not None:
            iteration_callback(k, pi)
        if stop_value <= config.tolerance:
            converged = True
            break
        if k >= config.max_iterations:
            break
        pi = mapped
        k += 1
    if not recorder.has(k):
        recorder.record(k, equilibrium_metrics(model, pi, config.alpha))
    return SolverResult(final_policy=pi, trace=recorder.build(),
                        converged=converged, iterations_used=k)


class _FictitiousPlayState:
    """Fictitious-play state for one (possibly windowed) game.

    Maintains the current normalized policy, the unnormalized
    occupancy-weighted policy mass, and the averaged mean field over the
    window ``start .. min(T-1, start+lookahead)`` propagated from
    ``start_mf``.  The full-horizon solver is the special case
    ``start = 0``, ``lookahead >= T - 1``.
    """

    def __init__(self, model: MfgModel, config: SolverConfig, start: int,
                 lookahead: int, pi0: Policy, start_mf: np.ndarray):
        self.model = model
        self.config = config
        self.start = start
        self.lookahead = lookahead
        self.t_end = window_end(model, start, lookahead)
        self.start_mf = np.asarray(start_mf, dtype=np.float64)
        flow0 = mean_field_forward_windowed(model, pi0, start, self.start_mf, lookahead)
        self.pibar = flow0.mass[:, :, None] * pi0.probs
        self.mu_avg = flow0.mass.copy()
        self.pi = pi0
        self.steps = 0

    def relink(self, start_mf: np.ndarray) -> None:
        self.start_mf = np.asarray(start_mf, dtype=np.float64)

    def delta(self) -> float:
        return delta_equilibrium_windowed(
            self.model, self.pi, self.start, self.start_mf,
            self.lookahead, self.config.alpha, self.config.concept)

    def step(self) -> None:
        cfg = self.config
        if cfg.uniform_averaging:
            beta = (self.steps + 1.0) / (self.steps + 2.0)
        else:
            beta = cfg.beta
        br = response_policy(self.model, MeanFieldFlow(self.mu_avg), self.pi,
                             cfg.alpha, cfg.concept, self.start)
        flow_br = mean_field_forward_windowed(
            self.model, br, self.start, self.start_mf, self.lookahead)
        self.pibar = beta * self.pibar + (1.0 - beta) * (flow_br.mass[:, :, None] * br.probs)
        self.mu_avg = (1.0 - beta) * flow_br.mass + beta * self.mu_avg
        self.pi = Policy(_normalize_mass(self.pibar, br.probs))
        self.steps += 1

    def mf_after_one_step(self) -> np.ndarray:
        return _forward_step(self.model, self.start, self.start_mf, self.pi.probs[0])


def gfp(model: MfgModel, config: SolverConfig, *,
        iteration_callback: IterationCallback | None = None) -> SolverResult:
    """Fictitious play against the averaged mean field.

    Per iteration: best-respond to the averaged mean field, recompute the
    mean field the response induces, fold it into the running averages
    (policy mass weighted by state occupancy, mean field directly) with
    weight ``beta``, and report the normalized averaged policy.  Rows of
    the policy average with zero accumulated occupancy take the latest
    response row (see ``_normalize_mass``).
    """
    pi0 = _initial_policy(model, config)
    state = _FictitiousPlayState(model, config, 0, model.horizon - 1, pi0, model.initial_mf)
    recorder = _TraceRecorder()
    converged = False
    k = 0
    while True:
        stop_value = state.delta()
        if k % config.trace_every == 0:
            recorder.record(k, equilibrium_metrics(model, state.pi, config.alpha))
        if iteration_callback is not None:
            iteration_callback(k, state.pi)
        if stop_value <= config.tolerance:
            converged = True
            break
        if k >= config.max_iterations:
            break
        state.step()
        k += 1
    if not recorder.has(k):
        recorder.record(k, equilibrium_metrics(model, state.pi, config.alpha))
    return SolverResult(final_policy=state.pi, trace=recorder.build(),
                        converged=converged, iterations_used=k)


def _subgame_starts(model: MfgModel, lookahead: int) -> list[int]:
    # A window starting at 0 with lookahead >= T-1 already covers the whole
    # game; otherwise one subgame per start time until the window reaches
    # the final stage, i.e. T - lookahead + 1 subgames in total.
    if lookahead >= model.horizon - 1:
        return [0]
    return list(range(model.horizon - lookahead + 1))


def _window_slice(pi0: Policy, start: int, t_end: int) -> Policy:
    return Policy(pi0.probs[start:t_end + 1])


def _diagonal_probs(starts: list[int], member_probs: list[np.ndarray],
                    horizon: int) -> np.ndarray:
    rows = np.empty((horizon, member_probs[0].shape[1], member_probs[0].shape[2]))
    last_start = starts[-1]
    for t in range(horizon):
        if t <= last_start:
            rows[t] = member_probs[t][0]
        else:
            rows[t] = member_probs[-1][t - last_start]
    return rows


def diagonal_policy(ensemble: PolicyEnsemble) -> Policy:
    """Implemented policy of a window ensemble.

    Row ``t`` is the first stage of the member starting at ``t``; times
    beyond the last start time use the later stages of the final member.
    Raises if some time is covered by no member.
    """
    horizon = ensemble.total_horizon
    starts = ensemble.start_times
    last_start = starts[-1]
    last = ensemble.members[-1]
    rows = np.empty((horizon, last.num_states, last.num_actions))
    for t in range(horizon):
        if t <= last_start:
            if t not in starts:
                raise ValueError(f"no ensemble member starts at time {t}")
            rows[t] = ensemble.member_at(t).probs[0]
        else:
            offset = t - last_start
            if offset >= last.horizon:
                raise ValueError(f"time {t} not covered by the final ensemble member")
            rows[t] = last.probs[offset]
    return Policy(rows)


def _require_rh(config: SolverConfig) -> int:
    if config.horizon_rh is None:
        raise ValueError("receding-horizon solvers require horizon_rh")
    return int(config.horizon_rh)


def _finish_rh(model: MfgModel, config: SolverConfig, starts: list[int],
               states: list[_FictitiousPlayState], recorder: _TraceRecorder,
               global_k: int, converged: bool,
               subgame_iterations: list[int]) -> SolverResult:
    members = tuple(st.pi for st in states)
    ensemble = PolicyEnsemble(tuple(starts), members, _require_rh(config), model.horizon)
    implemented = diagonal_policy(ensemble)
    recorder.record(global_k, equilibrium_metrics(model, implemented, config.alpha))
    return SolverResult(
        final_policy=implemented, trace=recorder.build(), converged=converged,
        iterations_used=global_k, ensemble=ensemble, implemented_policy=implemented,
        subgame_iterations=tuple(subgame_iterations))


def rh_sequential(model: MfgModel, config: SolverConfig, *,
                  iteration_callback: IterationCallback | None = None,
                  subgame_callback: SubgameCallback | None = None) -> SolverResult:
    """Receding-horizon fictitious play, one subgame after another.

    Subgames are solved in ascending start-time order; each starts from the
    previous subgame's converged mean field advanced by one step under its
    member policy.  A subgame stops at the windowed concept distance
    tolerance or after ``max_iterations`` steps, whichever comes first.
    Trace rows hold full-game metrics of the implemented-policy snapshot
    and are indexed by the cumulative step count across subgames.
    """
    lookahead = _require_rh(config)
    pi0 = _initial_policy(model, config)
    starts = _subgame_starts(model, lookahead)
    member_probs = [
        _window_slice(pi0, s, window_end(model, s, lookahead)).probs for s in starts
    ]
    recorder = _TraceRecorder()

    def record_diag(k: int) -> None:
        snapshot = Policy(_diagonal_probs(starts, member_probs, model.horizon))
        if k % config.trace_every == 0 or k == 0:
            recorder.record(k, equilibrium_metrics(model, snapshot, config.alpha))
        if iteration_callback is not None:
            iteration_callback(k, snapshot)

    global_k = 0
    record_diag(0)
    mu_chain = model.initial_mf
    subgame_iterations: list[int] = []
    states: list[_FictitiousPlayState] = []
    all_hit = True
    for idx, s in enumerate(starts):
        state = _FictitiousPlayState(model, config, s, lookahead,
                                     Policy(member_probs[idx]), mu_chain)
        states.append(state)
        if subgame_callback is not None:
            subgame_callback(idx, 0, state.pi)
        while True:
            if state.delta() <= config.tolerance:
                break
            if state.steps >= config.max_iterations:
                all_hit = False
                break
            state.step()
            global_k += 1
            member_probs[idx] = state.pi.probs
            if subgame_callback is not None:
                subgame_callback(idx, state.steps, state.pi)
            record_diag(global_k)
        subgame_iterations.append(state.steps)
        mu_chain = state.mf_after_one_step()
    return _finish_rh(model, config, starts, states, recorder, global_k,
                      all_hit, subgame_iterations)


def rh_parallel(model: MfgModel, config: SolverConfig, *,
                iteration_callback: IterationCallback | None = None,
                subgame_callback: SubgameCallback | None = None) -> SolverResult:
    """Receding-horizon fictitious play with interleaved subgames.

    Every global iteration advances each subgame by one fictitious-play
    step; before stepping, each subgame re-links its start mean field to
    its predecessor's previous-iteration mean field advanced by one step.
    Subgames therefore read only snapshots from the previous iteration,
    which makes the result independent of any within-iteration execution
    order.  Stops when every subgame's windowed distance is at or below
    tolerance, or at ``max_iterations`` global iterations.
    """
    lookahead = _require_rh(config)
    pi0 = _initial_policy(model, config)
    starts = _subgame_starts(model, lookahead)
    flow0 = mean_field_forward(model, pi0)
    states = [
        _FictitiousPlayState(model, config, s, lookahead,
                             _window_slice(pi0, s, window_end(model, s, lookahead)),
                             flow0.mass[s])
        for s in starts
    ]
    member_probs = [st.pi.probs for st in states]
    recorder = _TraceRecorder()

    def record_diag(k: int) -> None:
        snapshot = Policy(_diagonal_probs(starts, member_probs, model.horizon))
        if k % config.trace_every == 0 or k == 0:
            recorder.record(k, equilibrium_metrics(model, snapshot, config.alpha))
        if iteration_callback is not None:
            iteration_callback(k, snapshot)

    first_hit: list[int | None] = [None] * len(states)
    global_k = 0
    converged = False
    while True:
        deltas = [st.delta() for st in states]
        for i, d in enumerate(deltas):
            if d <= config.tolerance and first_hit[i] is None:
                first_hit[i] = global_k
        record_diag(global_k)
        if subgame_callback is not None:
            for i, st in enumerate(states):
                subgame_callback(i, st.steps, st.pi)
        if all(d <= config.tolerance for d in deltas):
            converged = True
            break
        if global_k >= config.max_iterations:
            break
        snapshot = [(st.start_mf, st.pi.probs) for st in states]
        for i, st in enumerate(states):
            if i > 0:
                prev_mf, prev_probs = snapshot[i - 1]
                st.relink(_forward_step(model, states[i - 1].start, prev_mf, prev_probs[0]))
            st.step()
            member_probs[i] = st.pi.probs
        global_k += 1
    subgame_iterations = [global_k if h is None else h for h in first_hit]
    return _finish_rh(model, config, starts, states, recorder, global_k,
                      converged, subgame_iterations)
