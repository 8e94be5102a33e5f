"""Exploration agents behind a shared episode-scoped interface."""
from __future__ import annotations

import dataclasses

import numpy as np

from ..mdp import TabularMdp
from .base import Agent, ReplayBuffer, UniformAgent
from .bdqn import BdqnAgent, BdqnAgentConfig
from .bootstrap import BootstrapAgent, EnsembleConfig
from .su import SuAgent, SuAgentConfig
from .ube import UbeAgent, UbeAgentConfig

AGENTS = {
    "su": (SuAgent, SuAgentConfig),
    "bootstrap": (BootstrapAgent, EnsembleConfig),
    "bdqn": (BdqnAgent, BdqnAgentConfig),
    "ube": (UbeAgent, UbeAgentConfig),
    "uniform": (UniformAgent, None),
}


def config_fields(name: str) -> list[str]:
    cfg_cls = AGENTS[name][1]
    return [] if cfg_cls is None else [f.name for f in dataclasses.fields(cfg_cls)]


def make_agent(name: str, env: TabularMdp, rng: np.random.Generator, **overrides) -> Agent:
    """Build agent ``name`` with its default config updated by ``overrides``."""
    if name not in AGENTS:
        raise ValueError(f"unknown agent {name!r}; choose from {sorted(AGENTS)}")
    agent_cls, cfg_cls = AGENTS[name]
    if cfg_cls is None:
        if overrides:
            raise ValueError(f"agent {name!r} takes no options, got {sorted(overrides)}")
        return agent_cls(env, rng)
    unknown = set(overrides) - set(config_fields(name))
    if unknown:
        raise ValueError(f"unknown options for {name!r}: {sorted(unknown)}")
    return agent_cls(env, rng, cfg_cls(**overrides))


__all__ = [
    "AGENTS", "Agent", "ReplayBuffer", "UniformAgent", "SuAgent", "SuAgentConfig", "BootstrapAgent",
    "EnsembleConfig", "BdqnAgent", "BdqnAgentConfig", "UbeAgent", "UbeAgentConfig", "make_agent", "config_fields",
]
