"""Deterministic black-box policies mapping states to actions.

Three kinds are supported and round-trip through JSON files carrying a
versioned ``schema`` field:

* ``pid``  - single-output PID on one state component,
* ``lqr``  - linear state feedback ``u = u0 - K (s - s_ref)``,
* ``mlp``  - fixed-weight feed-forward network (row-major weights).

Every kind clamps its output to optional ``low``/``high`` action bounds.
"""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

SCHEMA = "tolfalsify.policy/v1"

ACTIVATIONS = {
    "tanh": np.tanh,
    "relu": lambda x: np.maximum(x, 0.0),
    "linear": lambda x: x,
}


class PolicyFormatError(ValueError):
    pass


def _clamp(u: Sequence[float], low, high) -> tuple:
    if low is None:
        return tuple(float(v) for v in u)
    return tuple(min(max(float(v), lo), hi) for v, lo, hi in zip(u, low, high))


class Policy:
    kind = ""

    def __init__(self, low=None, high=None):
        if (low is None) != (high is None):
            raise PolicyFormatError("give both action bounds or neither")
        self.low = None if low is None else tuple(float(v) for v in low)
        self.high = None if high is None else tuple(float(v) for v in high)
        if self.low is not None and any(a > b for a, b in zip(self.low, self.high)):
            raise PolicyFormatError("action lower bound above upper bound")

    @property
    def state_dim(self) -> Optional[int]:
        return None

    @property
    def action_dim(self) -> int:
        raise NotImplementedError

    def act(self, state: Sequence[float]) -> tuple:
        if self.state_dim is not None and len(state) != self.state_dim:
            raise ValueError(f"state has {len(state)} components, expected {self.state_dim}")
        return _clamp(self._act(state), self.low, self.high)

    def _act(self, state):
        raise NotImplementedError

    def reset_episode(self) -> None:
        """Clear per-episode scratch (no-op for stateless policies)."""

    def clone(self) -> "Policy":
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA, "kind": self.kind}
        d.update(self._params())
        if self.low is not None:
            d["low"] = list(self.low)
            d["high"] = list(self.high)
        return d

    def _params(self) -> dict:
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()


class PID(Policy):
    """PID regulating ``state[measured]`` toward a setpoint.

    The setpoint is either the constant ``setpoint`` or, when
    ``setpoint_index`` is given, another state component. The integrator is
    frozen while the output is saturated in the direction of the error.
    """

    kind = "pid"

    def __init__(
        self,
        kp: float,
        ki: float = 0.0,
        kd: float = 0.0,
        dt: float = 1.0,
        measured: int = 0,
        setpoint: float = 0.0,
        setpoint_index: Optional[int] = None,
        bias: float = 0.0,
        low=None,
        high=None,
    ):
        super().__init__(low, high)
        if not dt > 0:
            raise PolicyFormatError("pid dt must be positive")
        self.kp, self.ki, self.kd = float(kp), float(ki), float(kd)
        self.dt = float(dt)
        self.measured = int(measured)
        self.setpoint = float(setpoint)
        self.setpoint_index = None if setpoint_index is None else int(setpoint_index)
        self.bias = float(bias)
        self.reset_episode()

    @property
    def action_dim(self) -> int:
        return 1

    def reset_episode(self) -> None:
        self._integral = 0.0
        self._prev_error: Optional[float] = None

    def _act(self, state):
        ref = self.setpoint if self.setpoint_index is None else state[self.setpoint_index]
        error = float(ref) - float(state[self.measured])
        deriv = 0.0 if self._prev_error is None else (error - self._prev_error) / self.dt
        self._prev_error = error
        integral = self._integral + error * self.dt
        u = self.bias + self.kp * error + self.ki * integral + self.kd * deriv
        if self.low is not None:
            saturated_hi = u > self.high[0] and error > 0
            saturated_lo = u < self.low[0] and error < 0
            if saturated_hi or saturated_lo:
                integral = self._integral
                u = self.bias + self.kp * error + self.ki * integral + self.kd * deriv
        self._integral = integral
        return (u,)

    def _params(self) -> dict:
        d = {
            "kp": self.kp,
            "ki": self.ki,
            "kd": self.kd,
            "dt": self.dt,
            "measured": self.measured,
            "setpoint": self.setpoint,
            "bias": self.bias,
        }
        if self.setpoint_index is not None:
            d["setpoint_index"] = self.setpoint_index
        return d


class LinearFeedback(Policy):
    """Linear state feedback ``u = u0 - K (s - s_ref)`` (LQR-style gains)."""

    kind = "lqr"

    def __init__(self, gain, reference=None, offset=None, low=None, high=None):
        super().__init__(low, high)
        gain = [[float(v) for v in row] for row in np.atleast_2d(np.asarray(gain, dtype=float))]
        m, n = len(gain), len(gain[0])
        self.gain = tuple(tuple(row) for row in gain)
        self.reference = tuple(float(v) for v in (reference if reference is not None else [0.0] * n))
        self.offset = tuple(float(v) for v in (offset if offset is not None else [0.0] * m))
        if len(self.reference) != n:
            raise PolicyFormatError(f"reference has {len(self.reference)} entries, gain has {n} columns")
        if len(self.offset) != m:
            raise PolicyFormatError(f"offset has {len(self.offset)} entries, gain has {m} rows")
        if self.low is not None and len(self.low) != m:
            raise PolicyFormatError("action bounds do not match gain rows")

    @property
    def state_dim(self) -> int:
        return len(self.reference)

    @property
    def action_dim(self) -> int:
        return len(self.gain)

    def _act(self, state):
        err = [s - r for s, r in zip(state, self.reference)]
        return tuple(
            u0 - sum(k * e for k, e in zip(row, err))
            for u0, row in zip(self.offset, self.gain)
        )

    def _params(self) -> dict:
        return {
            "gain": [list(r) for r in self.gain],
            "reference": list(self.reference),
            "offset": list(self.offset),
        }


class MLP(Policy):
    """Feed-forward network; each layer computes ``act(W x + b)``."""

    kind = "mlp"

    def __init__(self, layers: List[Dict], low=None, high=None):
        super().__init__(low, high)
        if not layers:
            raise PolicyFormatError("mlp needs at least one layer")
        self.layers = []
        width = None
        for i, layer in enumerate(layers):
            try:
                w = np.array(layer["weights"], dtype=float)
                b = np.array(layer["bias"], dtype=float)
                act = layer.get("activation", "linear")
            except (KeyError, TypeError, ValueError) as exc:
                raise PolicyFormatError(f"layer {i}: {exc}") from None
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise PolicyFormatError(f"layer {i}: weights {w.shape} and bias {b.shape} disagree")
            if width is not None and w.shape[1] != width:
                raise PolicyFormatError(
                    f"layer {i} expects {w.shape[1]} inputs but layer {i - 1} gives {width}"
                )
            if act not in ACTIVATIONS:
                raise PolicyFormatError(f"layer {i}: unknown activation {act!r}")
            width = w.shape[0]
            self.layers.append((w, b, act))
        if self.low is not None and len(self.low) != width:
            raise PolicyFormatError("action bounds do not match the output layer")

    @property
    def state_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def action_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    def _act(self, state):
        x = np.asarray(state, dtype=float)
        for w, b, act in self.layers:
            x = ACTIVATIONS[act](w @ x + b)
        return tuple(x.tolist())

    def _params(self) -> dict:
        return {
            "layers": [
                {"weights": w.tolist(), "bias": b.tolist(), "activation": act}
                for w, b, act in self.layers
            ]
        }


KINDS = {cls.kind: cls for cls in (PID, LinearFeedback, MLP)}


def policy_from_dict(data: dict) -> Policy:
    if not isinstance(data, dict):
        raise PolicyFormatError("policy must be a JSON object")
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise PolicyFormatError(f"unsupported policy schema {schema!r}")
    params = {k: v for k, v in data.items() if k not in ("schema", "kind")}
    kind = data.get("kind")
    if kind not in KINDS:
        raise PolicyFormatError(f"unknown policy kind {kind!r}")
    try:
        return KINDS[kind](**params)
    except TypeError as exc:
        raise PolicyFormatError(f"bad {kind} parameters: {exc}") from None


def load_policy(path) -> Policy:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PolicyFormatError(f"{path}: malformed JSON ({exc})") from None
    return policy_from_dict(data)


def save_policy(policy: Policy, path) -> None:
    Path(path).write_text(json.dumps(policy.to_dict(), indent=2) + "\n")


def default_policy(system: str) -> Policy:
    """The controller shipped for a registered system."""
    ref = resources.files("tolfalsify") / "policies" / f"{system}.json"
    if not ref.is_file():
        raise KeyError(f"no shipped controller for system {system!r}")
    return policy_from_dict(json.loads(ref.read_text()))
