"""Kinematic CarRun: a unicycle driving down a corridor ``|y| < C1``.

``x' = v cos(theta)``, ``y' = v sin(theta)``,
``theta' = c_turn * tm * steer + w``, ``v' = c_speed * sm * throttle``,
with ``steer`` and ``throttle`` in ``[-1, 1]`` and ``w`` a piecewise-constant
yaw-rate disturbance. Deviations: turn multiplier ``tm`` and speed
multiplier ``sm``.
"""

import math

from .base import DeviationSpace, Dynamics, SystemModel, register_dynamics


@register_dynamics("carrun")
class CarRunDynamics(Dynamics):
    def __init__(self, delta, model):
        super().__init__(delta, model)
        self.tm, self.sm = self.delta
        self.c_turn = float(self.constants.get("c_turn", 0.04))
        self.c_speed = float(self.constants.get("c_speed", 30.0))

    def derivative(self, s, u, w):
        _, _, th, v = s
        return (
            v * math.cos(th),
            v * math.sin(th),
            self.c_turn * self.tm * u[0] + (w[0] if w else 0.0),
            self.c_speed * self.sm * u[1],
        )


def carrun_model() -> SystemModel:
    return SystemModel(
        name="carrun",
        dynamics="carrun",
        state_names=("x", "y", "theta", "v"),
        action_low=(-1.0, -1.0),
        action_high=(1.0, 1.0),
        dt=0.05,
        horizon=200,
        init_low=(0.0, -0.02, -0.05, 0.4),
        init_high=(0.0, 0.02, 0.05, 0.6),
        deviation=DeviationSpace(
            names=("tm", "sm"),
            lower=(10.0, 0.25),
            upper=(30.0, 0.75),
            nominal=(20.0, 0.5),
        ),
        spec="alw[0,10] (abs(y) < 0.5 and abs(v) < 2.0)",
        disturbance_low=(-0.55,),
        disturbance_high=(0.55,),
        disturbance_points=4,
        constants={"c_turn": 0.04, "c_speed": 30.0},
    )
