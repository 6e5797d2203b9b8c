"""Vehicle routing with attention policies, classical baselines and exact oracles."""

import json as _json
import os as _os

from ._vrprl import *  # noqa: F401,F403
from ._vrprl import _svrp_bench, _train


def train(config):
    """Runs REINFORCE from a config dict (same keys as a train config file).

    Returns the per-iteration metrics as a list of dicts.
    """
    return _train(_json.dumps(config))


def svrp_bench(config, strategies, episodes=100, seed=0, checkpoint=None):
    """Satisfied demand per strategy over seeded stochastic-VRP episodes."""
    ckpt = _os.fspath(checkpoint) if checkpoint is not None else ""
    return _svrp_bench(_json.dumps(config), list(strategies), episodes, seed, ckpt)
