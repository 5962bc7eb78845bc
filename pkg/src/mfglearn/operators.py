"""Fixed-point building blocks for mean field game equilibria.

Forward mean field propagation, the three backward state-action value
recursions (policy evaluation, hard optimality, smooth maximum), the two
policy-improvement maps (greedy and softmax), and the deviating-agent
objectives, together with the windowed variants used by receding-horizon
solvers.

Conventions shared by every operator here:

* all functions are pure and never mutate their inputs;
* log-sum-exp and softmax computations are max-shift stabilized, so
  temperatures down to 0.01 and below are safe;
* entropy uses the natural logarithm with ``0 * log 0 := 0``;
* windowed operators take a ``t_start`` offset so that time-dependent
  kernels and rewards are evaluated at the correct global time.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from scipy.special import logsumexp as _logsumexp
from scipy.special import softmax as _softmax
from scipy.special import xlogy as _xlogy

from .model import MeanFieldFlow, MfgModel, Policy, QFunction


class Concept(str, Enum):
    """Equilibrium solution concepts supported by the solvers.

    NE: best response is the greedy policy of the optimal values.
    QPI_RE: softmax response on the policy-evaluation values.
    QSTAR_RE: softmax response on the optimal values.
    RE: softmax response on the smooth-maximum (entropy-regularized) values.
    """

    NE = "ne"
    QPI_RE = "qpi_re"
    QSTAR_RE = "qstar_re"
    RE = "re"


REGULARIZED_CONCEPTS = (Concept.QPI_RE, Concept.QSTAR_RE, Concept.RE)


def _check_dims(model: MfgModel, policy: Policy) -> None:
    if (policy.num_states, policy.num_actions) != (model.num_states, model.num_actions):
        raise ValueError(
            f"policy is {policy.num_states}x{policy.num_actions} but model is "
            f"{model.num_states}x{model.num_actions}")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0.0:
        raise ValueError(f"temperature alpha must be positive, got {alpha}")
    return alpha


def window_end(model: MfgModel, t_start: int, horizon: int) -> int:
    """Last decision time of the window starting at ``t_start`` with
    lookahead ``horizon``, clamped to the model's final stage."""
    if not 0 <= t_start <= model.horizon - 1:
        raise ValueError(f"t_start must lie in [0, {model.horizon - 1}], got {t_start}")
    if horizon < 0:
        raise ValueError(f"lookahead horizon must be nonnegative, got {horizon}")
    return min(model.horizon - 1, t_start + horizon)


def _forward_step(model: MfgModel, t: int, mu: np.ndarray, pi_rows: np.ndarray) -> np.ndarray:
    """One mean field step under policy rows ``pi_rows``; renormalized."""
    kern = model.kernel(t, mu)
    nxt = np.einsum("x,xu,xuy->y", mu, pi_rows, kern)
    total = nxt.sum()
    if not total > 0.0:
        raise ValueError(f"mean field mass vanished at time {t}")
    return nxt / total


def mean_field_forward(model: MfgModel, policy: Policy) -> MeanFieldFlow:
    """Propagate the initial mean field forward under a shared policy.

    Implements the population recursion
    ``mu[t+1](x') = sum_x mu[t](x) sum_u pi[t](u|x) p_t(x'|x,u,mu[t])``
    with ``mu[0]`` equal to the model's initial mean field.  Each row is
    renormalized after the step to stop rounding drift.
    """
    _check_dims(model, policy)
    if policy.horizon != model.horizon:
        raise ValueError(f"policy horizon {policy.horizon} != model horizon {model.horizon}")
    mass = np.empty((model.horizon, model.num_states))
    mass[0] = model.initial_mf
    for t in range(model.horizon - 1):
        mass[t + 1] = _forward_step(model, t, mass[t], policy.probs[t])
    return MeanFieldFlow(mass)


def mean_field_forward_windowed(model: MfgModel, policy: Policy, t_start: int,
                                mu_start: np.ndarray, horizon: int) -> MeanFieldFlow:
    """Forward propagation restricted to a lookahead window.

    The window covers global times ``t_start .. min(T-1, t_start+horizon)``
    and starts from ``mu_start`` instead of the model's initial mean field;
    kernels are evaluated at their global time indices.  Returns a flow
    whose row 0 corresponds to ``t_start``.
    """
    _check_dims(model, policy)
    t_end = window_end(model, t_start, horizon)
    length = t_end - t_start + 1
    if policy.horizon != length:
        raise ValueError(f"window policy must cover {length} stages, got {policy.horizon}")
    mu_start = np.asarray(mu_start, dtype=np.float64)
    if mu_start.shape != (model.num_states,) or np.any(mu_start < 0.0) \
            or abs(mu_start.sum() - 1.0) > 1e-10:
        raise ValueError("mu_start must be a state distribution")
    mass = np.empty((length, model.num_states))
    mass[0] = mu_start
    for i in range(length - 1):
        mass[i + 1] = _forward_step(model, t_start + i, mass[i], policy.probs[i])
    return MeanFieldFlow(mass)


def _check_window(model: MfgModel, mf: MeanFieldFlow, t_start: int) -> int:
    if mf.num_states != model.num_states:
        raise ValueError("mean field flow and model disagree on the state count")
    length = mf.horizon
    if t_start < 0 or t_start + length - 1 > model.horizon - 1:
        raise ValueError(
            f"flow of length {length} starting at {t_start} exceeds horizon {model.horizon}")
    return length


def q_policy(model: MfgModel, mf: MeanFieldFlow, policy: Policy, t_start: int = 0) -> QFunction:
    """Backward policy-evaluation values under a frozen mean field flow.

    ``Q[t](x,u) = r_t(x,u,mu_t) + sum_x' p_t(x'|x,u,mu_t)
    sum_u' pi[t+1](u'|x') Q[t+1](x',u')`` with terminal ``Q = r`` at the
    flow's final stage.  Next-state values are weighted by the policy at
    the successor time index, which makes the recursion agree with
    trajectory-wise expectation.
    """
    _check_dims(model, policy)
    length = _check_window(model, mf, t_start)
    if policy.horizon != length:
        raise ValueError(f"policy must cover {length} stages, got {policy.horizon}")
    q = np.empty((length, model.num_states, model.num_actions))
    q[length - 1] = model.rewards(t_start + length - 1, mf.mass[length - 1])
    for i in range(length - 2, -1, -1):
        t = t_start + i
        values_next = np.einsum("xu,xu->x", policy.probs[i + 1], q[i + 1])
        q[i] = model.rewards(t, mf.mass[i]) + np.einsum(
            "xuy,y->xu", model.kernel(t, mf.mass[i]), values_next)
    return QFunction(q)


def q_optimal(model: MfgModel, mf: MeanFieldFlow, t_start: int = 0) -> QFunction:
    """Backward optimal values: as ``q_policy`` with a hard max over the
    successor actions and terminal ``Q = r``."""
    length = _check_window(model, mf, t_start)
    q = np.empty((length, model.num_states, model.num_actions))
    q[length - 1] = model.rewards(t_start + length - 1, mf.mass[length - 1])
    for i in range(length - 2, -1, -1):
        t = t_start + i
        values_next = q[i + 1].max(axis=1)
        q[i] = model.rewards(t, mf.mass[i]) + np.einsum(
            "xuy,y->xu", model.kernel(t, mf.mass[i]), values_next)
    return QFunction(q)


def q_soft(model: MfgModel, mf: MeanFieldFlow, alpha: float, t_start: int = 0) -> QFunction:
    """Backward smooth-maximum values at temperature ``alpha``.

    The hard max of ``q_optimal`` is replaced by
    ``alpha * log sum_u' exp(Q[t+1](x',u') / alpha)`` (max-shift
    stabilized); terminal ``Q = r``.
    """
    alpha = _check_alpha(alpha)
    length = _check_window(model, mf, t_start)
    q = np.empty((length, model.num_states, model.num_actions))
    q[length - 1] = model.rewards(t_start + length - 1, mf.mass[length - 1])
    for i in range(length - 2, -1, -1):
        t = t_start + i
        values_next = alpha * _logsumexp(q[i + 1] / alpha, axis=1)
        q[i] = model.rewards(t, mf.mass[i]) + np.einsum(
            "xuy,y->xu", model.kernel(t, mf.mass[i]), values_next)
    return QFunction(q)


def log_sum_exp(values, alpha: float) -> float:
    """Smooth maximum ``alpha * log sum_i exp(values[i] / alpha)``.

    Max-shift stabilized; bounds the hard maximum from above by at most
    ``alpha * log n``.  See ``log_sum_exp_gradient`` for its gradient.
    """
    alpha = _check_alpha(alpha)
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty vector is undefined")
    if not np.all(np.isfinite(v)):
        raise ValueError("log_sum_exp requires finite values")
    return float(alpha * _logsumexp(v / alpha))


def log_sum_exp_gradient(values, alpha: float) -> np.ndarray:
    """Gradient of ``log_sum_exp``: the softmax of ``values / alpha``."""
    alpha = _check_alpha(alpha)
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("softmax of an empty vector is undefined")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax requires finite values")
    return _softmax(v / alpha)


def greedy_policy(q: QFunction) -> Policy:
    """Deterministic policy putting all mass on the maximizing action.

    Ties are broken deterministically toward the lowest action index.
    """
    best = q.values.argmax(axis=2)
    horizon, num_states, num_actions = q.values.shape
    probs = np.zeros((horizon, num_states, num_actions))
    t_idx = np.arange(horizon)[:, None]
    x_idx = np.arange(num_states)[None, :]
    probs[t_idx, x_idx, best] = 1.0
    return Policy(probs)


def softmax_policy(q: QFunction, alpha: float) -> Policy:
    """Softmax policy ``pi(u|x) proportional to exp(Q(x,u) / alpha)``."""
    alpha = _check_alpha(alpha)
    return Policy(_softmax(q.values / alpha, axis=2))


def _row_entropy(rows: np.ndarray) -> np.ndarray:
    """Entropy of each probability row (last axis), natural log."""
    return -_xlogy(rows, rows).sum(axis=-1)


def _objective_core(model: MfgModel, dev_probs: np.ndarray, mf: MeanFieldFlow,
                    t_start: int, alpha: float, rho0: np.ndarray) -> float:
    """Expected (optionally entropy-bonused) return of a lone deviator.

    The deviator's own state distribution rho starts at ``rho0`` and is
    propagated under the deviating policy through kernels frozen at the
    supplied population flow.
    """
    length = mf.horizon
    rho = np.asarray(rho0, dtype=np.float64)
    total = 0.0
    for i in range(length):
        t = t_start + i
        table = model.rewards(t, mf.mass[i])
        total += float(np.einsum("x,xu,xu->", rho, dev_probs[i], table))
        if alpha != 0.0:
            total += alpha * float(rho @ _row_entropy(dev_probs[i]))
        if i < length - 1:
            kern = model.kernel(t, mf.mass[i])
            rho = np.einsum("x,xu,xuy->y", rho, dev_probs[i], kern)
    return total


def objective(model: MfgModel, deviating_policy: Policy, mf: MeanFieldFlow) -> float:
    """Total expected reward of an agent playing ``deviating_policy``
    against the population flow ``mf`` (which stays frozen)."""
    _check_dims(model, deviating_policy)
    length = _check_window(model, mf, 0)
    if length != model.horizon or deviating_policy.horizon != model.horizon:
        raise ValueError("objective expects full-horizon policy and flow")
    return _objective_core(model, deviating_policy.probs, mf, 0, 0.0, model.initial_mf)


def objective_regularized(model: MfgModel, deviating_policy: Policy,
                          mf: MeanFieldFlow, alpha: float) -> float:
    """``objective`` plus ``alpha`` times the expected entropy of the
    deviating policy along its own state distribution."""
    alpha = _check_alpha(alpha)
    _check_dims(model, deviating_policy)
    length = _check_window(model, mf, 0)
    if length != model.horizon or deviating_policy.horizon != model.horizon:
        raise ValueError("objective expects full-horizon policy and flow")
    return _objective_core(model, deviating_policy.probs, mf, 0, alpha, model.initial_mf)


def objective_windowed(model: MfgModel, deviating_policy: Policy, mf: MeanFieldFlow,
                       t_start: int, horizon: int, alpha: float = 0.0) -> float:
    """Deviator objective restricted to a lookahead window.

    The stage sum runs over ``t_start .. min(T-1, t_start+horizon)`` and the
    deviator starts from the window flow's first row.  ``alpha = 0`` gives
    the plain objective, ``alpha > 0`` adds the entropy bonus.
    """
    if alpha < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    _check_dims(model, deviating_policy)
    t_end = window_end(model, t_start, horizon)
    length = t_end - t_start + 1
    if mf.horizon != length or deviating_policy.horizon != length:
        raise ValueError(f"window at {t_start} has {length} stages; flow has "
                         f"{mf.horizon} rows, policy {deviating_policy.horizon}")
    if mf.num_states != model.num_states:
        raise ValueError("mean field flow and model disagree on the state count")
    return _objective_core(model, deviating_policy.probs, mf, t_start, alpha, mf.mass[0])


def response_policy(model: MfgModel, mf: MeanFieldFlow, policy: Policy,
                    alpha: float, concept: Concept, t_start: int = 0) -> Policy:
    """The concept's best-response map applied to a frozen flow.

    NE composes the greedy map with the optimal values; the regularized
    concepts compose the softmax map with the policy-evaluation, optimal,
    or smooth-maximum values respectively.  ``policy`` is only consulted
    for the policy-evaluation values of QPI_RE.
    """
    concept = Concept(concept)
    if concept is Concept.NE:
        return greedy_policy(q_optimal(model, mf, t_start))
    alpha = _check_alpha(alpha)
    if concept is Concept.QPI_RE:
        return softmax_policy(q_policy(model, mf, policy, t_start), alpha)
    if concept is Concept.QSTAR_RE:
        return softmax_policy(q_optimal(model, mf, t_start), alpha)
    return softmax_policy(q_soft(model, mf, alpha, t_start), alpha)
