"""Distance-to-equilibrium functionals and exact exploitability.

Every metric here is exact (no sampling): best responses are computed by
backward induction, so exploitability is the true supremum over deviating
policies.  Tiny negative exploitability values caused by rounding are
clamped to zero; values below -1e-6 trigger a warning because they would
indicate a real defect rather than rounding.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp as _logsumexp

from .model import MeanFieldFlow, MfgModel, Policy, PolicyEnsemble
from .operators import (
    Concept,
    _check_alpha,
    _forward_step,
    mean_field_forward,
    mean_field_forward_windowed,
    objective,
    objective_regularized,
    objective_windowed,
    q_optimal,
    q_soft,
    response_policy,
)

_NEGATIVE_WARN = -1e-6


class MetricValues(NamedTuple):
    """The five metric columns recorded per solver iteration."""

    delta_qpire: float
    delta_qstarre: float
    delta_re: float
    exploitability: float
    reg_exploitability: float


def policy_distance(a: Policy, b: Policy) -> float:
    """Sup over times and states of the L1 distance between action rows."""
    if a.probs.shape != b.probs.shape:
        raise ValueError(f"policy shapes differ: {a.probs.shape} vs {b.probs.shape}")
    return float(np.abs(a.probs - b.probs).sum(axis=2).max())


def _clamp_gap(gap: float) -> float:
    if gap < _NEGATIVE_WARN:
        warnings.warn(f"exploitability gap {gap:.3e} below {_NEGATIVE_WARN}; clamped to 0",
                      RuntimeWarning, stacklevel=3)
    return max(gap, 0.0)


def _exploitability_given_flow(model: MfgModel, policy: Policy, flow: MeanFieldFlow) -> float:
    best = q_optimal(model, flow)
    br_value = float(model.initial_mf @ best.values[0].max(axis=1))
    return _clamp_gap(br_value - objective(model, policy, flow))


def _reg_exploitability_given_flow(model: MfgModel, policy: Policy,
                                   flow: MeanFieldFlow, alpha: float) -> float:
    soft = q_soft(model, flow, alpha)
    soft_values = alpha * _logsumexp(soft.values[0] / alpha, axis=1)
    br_value = float(model.initial_mf @ soft_values)
    return _clamp_gap(br_value - objective_regularized(model, policy, flow, alpha))


def exploitability(model: MfgModel, policy: Policy) -> float:
    """Best achievable objective gain of a lone deviator against ``policy``.

    Zero (up to rounding) exactly when ``policy`` is a Nash equilibrium of
    the mean field it induces.
    """
    return _exploitability_given_flow(model, policy, mean_field_forward(model, policy))


def exploitability_regularized(model: MfgModel, policy: Policy, alpha: float) -> float:
    """Entropy-regularized exploitability at temperature ``alpha``."""
    alpha = _check_alpha(alpha)
    flow = mean_field_forward(model, policy)
    return _reg_exploitability_given_flow(model, policy, flow, alpha)


def delta_equilibrium(model: MfgModel, policy: Policy, alpha: float,
                      concept: Concept) -> float:
    """Distance of ``policy`` to its image under the concept's fixed-point map.

    For the regularized concepts this is ``policy_distance`` between the
    policy and the concept response computed at the policy's own induced
    mean field; it is zero exactly at the concept's equilibria.  For NE the
    exploitability is returned instead.
    """
    concept = Concept(concept)
    flow = mean_field_forward(model, policy)
    if concept is Concept.NE:
        return _exploitability_given_flow(model, policy, flow)
    alpha = _check_alpha(alpha)
    return policy_distance(policy, response_policy(model, flow, policy, alpha, concept))


def delta_equilibrium_windowed(model: MfgModel, policy: Policy, t_start: int,
                               mu_start: np.ndarray, horizon: int, alpha: float,
                               concept: Concept) -> float:
    """Windowed analogue of ``delta_equilibrium`` for one lookahead subgame."""
    concept = Concept(concept)
    flow = mean_field_forward_windowed(model, policy, t_start, mu_start, horizon)
    if concept is Concept.NE:
        return _exploitability_windowed_given_flow(model, policy, flow, t_start, horizon, 0.0)
    alpha = _check_alpha(alpha)
    return policy_distance(policy, response_policy(model, flow, policy, alpha, concept, t_start))


def _exploitability_windowed_given_flow(model: MfgModel, policy: Policy,
                                        flow: MeanFieldFlow, t_start: int,
                                        horizon: int, alpha: float) -> float:
    mu_start = flow.mass[0]
    if alpha == 0.0:
        best = q_optimal(model, flow, t_start)
        br_value = float(mu_start @ best.values[0].max(axis=1))
        self_value = objective_windowed(model, policy, flow, t_start, horizon, 0.0)
    else:
        soft = q_soft(model, flow, alpha, t_start)
        soft_values = alpha * _logsumexp(soft.values[0] / alpha, axis=1)
        br_value = float(mu_start @ soft_values)
        self_value = objective_windowed(model, policy, flow, t_start, horizon, alpha)
    return _clamp_gap(br_value - self_value)


def rh_exploitability(model: MfgModel, ensemble: PolicyEnsemble, alpha: float = 0.0) -> float:
    """Sum of windowed exploitabilities over a chained policy ensemble.

    The start mean field of each window is the previous window's mean field
    after one step under its own member policy, beginning from the model's
    initial mean field.  ``alpha = 0`` uses plain exploitability per window,
    ``alpha > 0`` the entropy-regularized one.
    """
    if alpha < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    if ensemble.total_horizon != model.horizon:
        raise ValueError("ensemble was built for a different horizon")
    starts = ensemble.start_times
    if starts[0] != 0 or any(b - a != 1 for a, b in zip(starts, starts[1:])):
        raise ValueError("ensemble start times must be consecutive from 0 for chaining")
    total = 0.0
    mu = model.initial_mf
    for s, member in zip(starts, ensemble.members):
        flow = mean_field_forward_windowed(model, member, s, mu, ensemble.horizon)
        total += _exploitability_windowed_given_flow(
            model, member, flow, s, ensemble.horizon, alpha)
        mu = _forward_step(model, s, mu, member.probs[0])
    return total


def equilibrium_metrics(model: MfgModel, policy: Policy, alpha: float,
                        flow: MeanFieldFlow | None = None) -> MetricValues:
    """All five per-iteration metrics of a policy, sharing one forward pass.

    ``alpha`` parameterizes the three concept distances and the regularized
    exploitability; plain exploitability does not depend on it.
    """
    alpha = _check_alpha(alpha)
    if flow is None:
        flow = mean_field_forward(model, policy)
    d_qpi = policy_distance(policy, response_policy(model, flow, policy, alpha, Concept.QPI_RE))
    d_qstar = policy_distance(policy, response_policy(model, flow, policy, alpha, Concept.QSTAR_RE))
    d_re = policy_distance(policy, response_policy(model, flow, policy, alpha, Concept.RE))
    expl = _exploitability_given_flow(model, policy, flow)
    reg = _reg_exploitability_given_flow(model, policy, flow, alpha)
    return MetricValues(d_qpi, d_qstar, d_re, expl, reg)
