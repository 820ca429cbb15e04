from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class Trace:
    """Fixed-timestep sequence of states, sample ``k`` taken at time ``k*dt``.

    ``actions[k]`` is the action applied between ``states[k]`` and
    ``states[k+1]``, so there is one action fewer than states.
    """

    dt: float
    states: np.ndarray
    actions: Optional[np.ndarray] = None
    metadata: Mapping[str, Any] = field(default_factory=dict)
    truncated: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2 or states.shape[0] < 1:
            raise ValueError("states must be a non-empty (T, n) array")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        if self.actions is not None:
            actions = np.array(self.actions, dtype=float)
            if actions.ndim == 1:
                actions = actions[:, None]
            if actions.shape[0] != states.shape[0] - 1:
                raise ValueError(
                    f"expected {states.shape[0] - 1} actions, got {actions.shape[0]}"
                )
            actions.setflags(write=False)
            object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def duration(self) -> float:
        return (len(self) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt

    def padded_states(self, length: int) -> np.ndarray:
        """States extended to ``length`` samples by repeating the last one."""
        n = len(self)
        if length <= n:
            return self.states[:length]
        pad = np.repeat(self.states[-1:], length - n, axis=0)
        return np.vstack([self.states, pad])
