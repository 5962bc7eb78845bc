import sys
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pytest

from mfglearn import (
    MfgModel,
    RandomMfgParams,
    SisParams,
    make_random,
    make_rps,
    make_sis,
    tabular_model,
)

sys.path.insert(0, str(Path(__file__).parent))


class OracleGame(NamedTuple):
    """The 2-state / 2-action / 2-stage tabular game used by the
    enumeration oracles, plus its raw tables."""

    model: MfgModel
    mu0: np.ndarray
    kernel: np.ndarray  # (x, u, x'), time-invariant
    r0: np.ndarray
    r1: np.ndarray


@pytest.fixture(scope="session")
def sis_model():
    return make_sis()


@pytest.fixture(scope="session")
def sis_model_short():
    return make_sis(SisParams(horizon=10))


@pytest.fixture(scope="session")
def rps_model():
    return make_rps()


@pytest.fixture(scope="session")
def random_reduced_model():
    return make_random(RandomMfgParams(num_states=20, num_actions=5, horizon=10,
                                       eta=1.0, seed=0))


@pytest.fixture(scope="session")
def oracle_game() -> OracleGame:
    mu0 = np.array([0.6, 0.4])
    kernel = np.array([
        [[0.7, 0.3], [0.2, 0.8]],
        [[0.5, 0.5], [0.9, 0.1]],
    ])
    r0 = np.array([[1.0, -0.5], [0.25, 2.0]])
    r1 = np.array([[0.5, 1.5], [-1.0, 0.75]])
    model = tabular_model(2, 2, 2, mu0, kernel, np.stack([r0, r1]))
    return OracleGame(model, mu0, kernel, r0, r1)


@pytest.fixture(scope="session")
def monotone_model():
    # MF-independent transitions; reward base(x, u) - mu(x) satisfies the
    # Lasry-Lions monotonicity condition, so averaged fictitious play has a
    # provable decay rate on this game.
    rng = np.random.Generator(np.random.PCG64(7))
    num_states, num_actions, horizon = 3, 2, 5
    raw = rng.random((num_states, num_actions, num_states))
    transitions = raw / raw.sum(axis=-1, keepdims=True)
    base = rng.random((num_states, num_actions))
    return tabular_model(num_states, num_actions, horizon,
                         np.full(num_states, 1.0 / num_states),
                         transitions, base, linear_coupling=-np.eye(num_states))
