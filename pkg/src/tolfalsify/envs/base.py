"""Parametric closed-loop simulators.

A ``SystemModel`` describes a family of systems indexed by a deviation
``delta``; ``instantiate`` closes the dynamics over one concrete ``delta``.
All randomness of a rollout lives in the lower-layer variables (initial
state and piecewise-constant disturbance points), so ``simulate`` is a pure
function of its arguments.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..stl import Formula, Trace, horizon, parse_formula

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6
BOUNDS_TOL = 1e-9

Vector = Tuple[float, ...]


class DeviationError(ValueError):
    """A deviation lies outside its deviation space."""


@dataclass(frozen=True)
class DeviationSpace:
    names: Tuple[str, ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    nominal: Tuple[float, ...]

    def __post_init__(self):
        k = len(self.names)
        for attr in ("lower", "upper", "nominal"):
            value = tuple(float(v) for v in getattr(self, attr))
            if len(value) != k:
                raise ValueError(f"{attr} has {len(value)} entries, expected {k}")
            object.__setattr__(self, attr, value)
        object.__setattr__(self, "names", tuple(self.names))
        for name, lo, hi, nom in zip(self.names, self.lower, self.upper, self.nominal):
            if not lo < hi:
                raise ValueError(f"{name}: lower bound {lo} not below upper {hi}")
            if not lo < nom < hi:
                raise ValueError(f"{name}: nominal {nom} not strictly inside [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def span(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    def check(self, delta: Sequence[float]) -> np.ndarray:
        """Return ``delta`` as an array, clipping excursions of at most 1e-9."""
        d = np.asarray(delta, dtype=float)
        if d.shape != (self.dim,):
            raise DeviationError(f"expected {self.dim} deviation values, got {d.shape}")
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        excess = np.maximum(lo - d, d - hi)
        if np.any(~np.isfinite(d)) or np.any(excess > BOUNDS_TOL):
            raise DeviationError(f"deviation {d.tolist()} outside {self.lower}..{self.upper}")
        if np.any(excess > 0):
            log.warning("clipping deviation %s into bounds", d.tolist())
            d = np.clip(d, lo, hi)
        return d

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "lower": list(self.lower),
            "upper": list(self.upper),
            "nominal": list(self.nominal),
        }


class Dynamics:
    """Continuous dynamics of one system closed over a deviation.

    Subclasses implement ``derivative``; ``step`` integrates it with one RK4
    step holding action and disturbance constant. ``post_step`` lets a model
    apply algebraic constraints (velocity floors, exogenous components).
    """

    def __init__(self, delta: Sequence[float], model: "SystemModel"):
        self.delta = tuple(float(v) for v in delta)
        self.model = model
        self.constants = dict(model.constants)

    def derivative(self, s: Vector, u: Vector, w: Vector) -> Vector:
        raise NotImplementedError

    def post_step(self, s: Vector, w: Vector) -> Vector:
        return s

    def step(self, s: Vector, u: Vector, w: Vector, dt: float) -> Vector:
        return self.post_step(rk4_step(self.derivative, s, u, w, dt), w)


def rk4_step(deriv: Callable, s: Vector, u: Vector, w: Vector, h: float) -> Vector:
    k1 = deriv(s, u, w)
    k2 = deriv(tuple(x + 0.5 * h * d for x, d in zip(s, k1)), u, w)
    k3 = deriv(tuple(x + 0.5 * h * d for x, d in zip(s, k2)), u, w)
    k4 = deriv(tuple(x + h * d for x, d in zip(s, k3)), u, w)
    return tuple(
        x + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for x, a, b, c, d in zip(s, k1, k2, k3, k4)
    )


DYNAMICS: Dict[str, type] = {}


def register_dynamics(name: str):
    def deco(cls):
        DYNAMICS[name] = cls
        return cls

    return deco


@lru_cache(maxsize=64)
def _parse_cached(text: str, names: Tuple[str, ...]) -> Formula:
    return parse_formula(text, {n: i for i, n in enumerate(names)})


@dataclass(frozen=True)
class SystemModel:
    """Static description of a parametric system and its falsification setup.

    ``init_low``/``init_high`` bound the initial state; components with equal
    bounds are fixed and not searched. Each disturbance channel ``c`` is a
    piecewise-constant signal with ``disturbance_points`` control points in
    ``[disturbance_low[c], disturbance_high[c]]`` spread evenly over the
    horizon.
    """

    name: str
    dynamics: str
    state_names: Tuple[str, ...]
    action_low: Tuple[float, ...]
    action_high: Tuple[float, ...]
    dt: float
    horizon: int
    init_low: Tuple[float, ...]
    init_high: Tuple[float, ...]
    deviation: DeviationSpace
    spec: str
    disturbance_low: Tuple[float, ...] = ()
    disturbance_high: Tuple[float, ...] = ()
    disturbance_points: int = 0
    constants: Mapping[str, float] = field(default_factory=dict)
    reward: Optional[Callable[[Vector], float]] = field(default=None, compare=False)

    def __post_init__(self):
        for attr in (
            "state_names",
            "action_low",
            "action_high",
            "init_low",
            "init_high",
            "disturbance_low",
            "disturbance_high",
        ):
            value = getattr(self, attr)
            if attr != "state_names":
                value = tuple(float(v) for v in value)
            object.__setattr__(self, attr, tuple(value))
        n = len(self.state_names)
        if len(self.init_low) != n or len(self.init_high) != n:
            raise ValueError("initial-state box does not match the state dimension")
        if any(lo > hi for lo, hi in zip(self.init_low, self.init_high)):
            raise ValueError("initial-state box is empty")
        if len(self.action_low) != len(self.action_high):
            raise ValueError("action bounds differ in length")
        if len(self.disturbance_low) != len(self.disturbance_high):
            raise ValueError("disturbance bounds differ in length")
        if any(lo > hi for lo, hi in zip(self.disturbance_low, self.disturbance_high)):
            raise ValueError("disturbance range is empty")
        if self.disturbance_low and self.disturbance_points < 1:
            raise ValueError("disturbance channels need at least one control point")
        if not self.dt > 0 or self.horizon < 0:
            raise ValueError("dt must be positive and horizon non-negative")
        if self.dynamics not in DYNAMICS:
            raise ValueError(f"unknown dynamics {self.dynamics!r}")
        needed = horizon(self.formula())
        if self.horizon * self.dt < needed - 1e-9:
            raise ValueError(
                f"{self.name}: {self.horizon} steps of {self.dt}s are shorter than "
                f"the formula horizon {needed}s"
            )

    # -- dimensions -----------------------------------------------------------

    @property
    def state_dim(self) -> int:
        return len(self.state_names)

    @property
    def action_dim(self) -> int:
        return len(self.action_low)

    @property
    def disturbance_channels(self) -> int:
        return len(self.disturbance_low)

    def formula(self) -> Formula:
        return _parse_cached(self.spec, self.state_names)

    # -- lower-layer search variables -----------------------------------------

    @property
    def free_init(self) -> Tuple[int, ...]:
        return tuple(i for i, (lo, hi) in enumerate(zip(self.init_low, self.init_high)) if hi > lo)

    def lower_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Box of the lower-layer variables: free initial states, then
        disturbance points channel by channel."""
        free = self.free_init
        lo = [self.init_low[i] for i in free]
        hi = [self.init_high[i] for i in free]
        for c in range(self.disturbance_channels):
            lo += [self.disturbance_low[c]] * self.disturbance_points
            hi += [self.disturbance_high[c]] * self.disturbance_points
        return np.array(lo, dtype=float), np.array(hi, dtype=float)

    @property
    def lower_dim(self) -> int:
        return len(self.free_init) + self.disturbance_channels * self.disturbance_points

    def split_lower(self, z: Sequence[float]) -> Tuple[Vector, np.ndarray]:
        """Map lower-layer variables to ``(initial state, disturbance points)``."""
        z = [float(v) for v in z]
        if len(z) != self.lower_dim:
            raise ValueError(f"expected {self.lower_dim} lower-layer values, got {len(z)}")
        init = list(self.init_low)
        free = self.free_init
        for i, v in zip(free, z):
            init[i] = v
        points = np.array(z[len(free):], dtype=float).reshape(
            self.disturbance_channels, self.disturbance_points
        )
        return tuple(init), points

    def join_lower(self, init: Sequence[float], points) -> np.ndarray:
        free = [float(init[i]) for i in self.free_init]
        return np.concatenate([free, np.asarray(points, dtype=float).ravel()])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dynamics": self.dynamics,
            "state_names": list(self.state_names),
            "action_low": list(self.action_low),
            "action_high": list(self.action_high),
            "dt": self.dt,
            "horizon": self.horizon,
            "init_low": list(self.init_low),
            "init_high": list(self.init_high),
            "deviation": self.deviation.to_dict(),
            "spec": self.spec,
            "disturbance_low": list(self.disturbance_low),
            "disturbance_high": list(self.disturbance_high),
            "disturbance_points": self.disturbance_points,
            "constants": dict(sorted(self.constants.items())),
        }


class SystemInstance:
    """A system closed over one deviation, with mutable current state."""

    def __init__(self, model: SystemModel, delta: Sequence[float]):
        self.model = model
        self.delta = tuple(model.deviation.check(delta).tolist())
        self.dynamics: Dynamics = DYNAMICS[model.dynamics](self.delta, model)
        self.state: Optional[Vector] = None

    def reset(self, init: Sequence[float]) -> Vector:
        init = tuple(float(v) for v in init)
        if len(init) != self.model.state_dim:
            raise ValueError(f"initial state has {len(init)} entries, expected {self.model.state_dim}")
        self.state = init
        return init

    def step(self, action: Sequence[float], disturbance: Sequence[float] = ()) -> Vector:
        if self.state is None:
            raise RuntimeError("step() called before reset()")
        self.state = self.dynamics.step(
            self.state, tuple(action), tuple(disturbance), self.model.dt
        )
        return self.state


def instantiate(model: SystemModel, delta: Sequence[float]) -> SystemInstance:
    return SystemInstance(model, delta)


class SimulationCounter:
    """Process-wide tally of closed-loop rollouts."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = 0

    @property
    def value(self) -> int:
        return self._value

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._value += n


SIMULATIONS = SimulationCounter()


def _blown_up(s: Vector) -> bool:
    return not all(math.isfinite(v) and abs(v) <= BLOWUP_LIMIT for v in s)


def _clamp(u, lo, hi) -> Vector:
    return tuple(min(max(float(v), a), b) for v, a, b in zip(u, lo, hi))


def simulate(
    inst: SystemInstance,
    policy,
    init: Sequence[float],
    disturbance_points=None,
    horizon: Optional[int] = None,
    seed: Optional[int] = None,
) -> Trace:
    """Roll out ``policy`` on ``inst`` from ``init``.

    Disturbance channel ``c`` takes the value ``points[c, j]`` during steps
    ``k`` with ``j = k * P // H`` (``P`` points, ``H`` model horizon). A state
    that leaves ``[-1e6, 1e6]`` or turns non-finite stops the rollout; the
    last finite state is repeated to full length and the trace is flagged
    truncated. Each call adds one to ``SIMULATIONS``.
    """
    model = inst.model
    steps = model.horizon if horizon is None else int(horizon)
    n_ch, n_pts = model.disturbance_channels, model.disturbance_points
    points = np.zeros((n_ch, n_pts)) if disturbance_points is None else np.asarray(
        disturbance_points, dtype=float
    ).reshape(n_ch, n_pts)
    schedule_len = max(model.horizon, 1)
    pts = points.tolist()
    zero_action = tuple(0.0 for _ in range(model.action_dim))

    SIMULATIONS.add()
    policy.reset_episode()
    state = inst.reset(init)
    states = [state]
    actions = []
    truncated = False
    for k in range(steps):
        j = min(k * n_pts // schedule_len, n_pts - 1) if n_pts else 0
        w = tuple(ch[j] for ch in pts)
        u = _clamp(policy.act(state), model.action_low, model.action_high)
        nxt = inst.step(u, w)
        if _blown_up(nxt):
            truncated = True
            pad = steps - k
            states.extend([state] * pad)
            actions.extend([zero_action] * pad)
            inst.state = state
            break
        state = nxt
        states.append(state)
        actions.append(u)
    return Trace(
        model.dt,
        np.array(states, dtype=float).reshape(len(states), model.state_dim),
        np.array(actions, dtype=float).reshape(len(actions), model.action_dim),
        metadata={"delta": list(inst.delta), "seed": seed},
        truncated=truncated,
    )
