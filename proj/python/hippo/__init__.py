"""Python access to the HI-PPO endoscopy navigation core.

Configurations are plain dicts or paths to JSON files; episode logs are JSON
Lines text, parsed with :func:`parse_log`.
"""

import json
import os

from . import _hippo
from ._hippo import ACTIONS, HippoError, adjust_reward, bc_similarity, gae, security

__all__ = [
    "ACTIONS",
    "Env",
    "HippoError",
    "adjust_reward",
    "bc_similarity",
    "config_hash",
    "default_config",
    "evaluate",
    "expert_episode",
    "gae",
    "parse_log",
    "replay",
    "report",
    "security",
    "train",
]


def _config_text(config, base_dir=None):
    """JSON text and the directory relative colon paths resolve against."""
    if isinstance(config, (str, os.PathLike)):
        path = os.fspath(config)
        with open(path, encoding="utf-8") as f:
            return f.read(), base_dir or os.path.dirname(os.path.abspath(path))
    return json.dumps(config), base_dir or os.getcwd()


def default_config():
    return json.loads(_hippo.default_config())


def config_hash(config, base_dir=None):
    return _hippo.config_hash(*_config_text(config, base_dir))


def train(config, base_dir=None, keep_logs=True):
    text, base = _config_text(config, base_dir)
    return _hippo.train(text, base, keep_logs)


def evaluate(checkpoint, segments=(), episodes=1, deterministic=True, seed=0):
    return _hippo.evaluate(checkpoint, list(segments), episodes, deterministic, seed)


def expert_episode(config, base_dir=None):
    return _hippo.expert_episode(*_config_text(config, base_dir))


def replay(log, tolerance=1e-9):
    return _hippo.replay(log, tolerance)


def report(logs, baseline="ppo", candidate="hi-ppo"):
    return _hippo.report(list(logs), baseline, candidate)


def parse_log(text):
    """Header, step records and summary of one episode log."""
    lines = [json.loads(line) for line in text.splitlines() if line.strip()]
    return {
        "header": lines[0],
        "steps": [line for line in lines if line.get("kind") == "step"],
        "summary": lines[-1],
    }


class Env(_hippo.Env):
    """Simulator stepping without learning: reset() -> obs, step(a) -> (obs, r, done, info)."""

    def __init__(self, config=None, base_dir=None):
        text, base = _config_text(config if config is not None else default_config(), base_dir)
        super().__init__(text, base)
