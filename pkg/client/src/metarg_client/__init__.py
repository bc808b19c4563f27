"""Client for the metarg wire protocol: reset/step env plus baseline rollouts."""

from .baselines import ReplayPolicy, random_policy, run_baseline
from .env import ClientEnv, ClientProtocolError, connect

__version__ = "0.1.0"

__all__ = [
    "ClientEnv",
    "ClientProtocolError",
    "ReplayPolicy",
    "connect",
    "random_policy",
    "run_baseline",
]
