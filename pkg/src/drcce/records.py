"""Run artifacts and their JSON documents.

Floats are written with Python's shortest round-trip repr, so arrays read
back bit-for-bit. Wall-clock time is kept out of the main document (it
would break byte-identical reruns) and written to a sidecar file instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

SCHEMA = "drcce-run/1"


@dataclass
class RunRecord:
    config: dict
    betas: list
    policy_episodes: np.ndarray  # episode index of each stored policy
    policies: np.ndarray  # (snapshots, H, S, A)
    states: np.ndarray  # (K, H + 1)
    actions: np.ndarray  # (K, H) flat joint actions
    rewards: np.ndarray  # (K, H, n)
    final_Q: np.ndarray  # (H, n, S, A)
    final_V: np.ndarray  # (H + 1, n, S)
    wall_clock: float = 0.0
    env: dict = field(default_factory=dict)
    seed: Optional[int] = None
    gaps: Optional[np.ndarray] = None  # (K', n) per-episode best-response gaps
    gap_episodes: Optional[np.ndarray] = None
    eval_sigma: Optional[list] = None
    gram: Any = None  # live GramState, not serialized

    @property
    def final_policy(self) -> np.ndarray:
        return self.policies[-1]

    def regret(self) -> np.ndarray:
        """Running ``max_i sum_{k' <= k} gap_i^{k'}``."""
        if self.gaps is None:
            raise ValueError("record has no regret data")
        return np.cumsum(self.gaps, axis=0).max(axis=1)

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        return {
            "schema": SCHEMA,
            "env": self.env,
            "seed": self.seed,
            "config": self.config,
            "betas": list(self.betas),
            "eval_sigma": self.eval_sigma,
            "trajectories": {
                "states": arr(self.states),
                "actions": arr(self.actions),
                "rewards": arr(self.rewards),
            },
            "policy_episodes": arr(self.policy_episodes),
            "policies": arr(self.policies),
            "final_Q": arr(self.final_Q),
            "final_V": arr(self.final_V),
            "regret": None
            if self.gaps is None
            else {
                "episodes": arr(self.gap_episodes),
                "gaps": arr(self.gaps),
                "cumulative": arr(self.regret()),
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported run record schema {doc.get('schema')!r}")
        traj = doc["trajectories"]
        reg = doc.get("regret")
        return cls(
            config=doc["config"],
            betas=doc["betas"],
            policy_episodes=np.array(doc["policy_episodes"], dtype=int),
            policies=np.array(doc["policies"], dtype=float),
            states=np.array(traj["states"], dtype=int),
            actions=np.array(traj["actions"], dtype=int),
            rewards=np.array(traj["rewards"], dtype=float),
            final_Q=np.array(doc["final_Q"], dtype=float),
            final_V=np.array(doc["final_V"], dtype=float),
            env=doc.get("env", {}),
            seed=doc.get("seed"),
            gaps=None if reg is None else np.array(reg["gaps"], dtype=float),
            gap_episodes=None if reg is None else np.array(reg["episodes"], dtype=int),
            eval_sigma=doc.get("eval_sigma"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def save(self, path) -> None:
        path = Path(path)
        path.write_text(self.dumps())
        timing = path.with_name(path.name + ".timing.json")
        timing.write_text(json.dumps({"wall_clock_seconds": self.wall_clock}))

    @classmethod
    def load(cls, path) -> "RunRecord":
        path = Path(path)
        rec = cls.from_dict(json.loads(path.read_text()))
        timing = path.with_name(path.name + ".timing.json")
        if timing.exists():
            rec.wall_clock = json.loads(timing.read_text())["wall_clock_seconds"]
        return rec
