"""Water tank: level ``h`` driven by a valve command ``u`` in ``[0, 1]``.

``A dh/dt = pump_gain * k_in * u - k_out * sqrt(h)``. The second state
component is the level reference handed to the controller; it is exogenous,
set each step to ``h_ref`` plus the reference-perturbation disturbance.
Deviations: inflow rate ``k_in`` and outflow rate ``k_out``.
"""

import math

from .base import DeviationSpace, Dynamics, SystemModel, register_dynamics

H_REF = 10.0


@register_dynamics("watertank")
class WaterTankDynamics(Dynamics):
    def __init__(self, delta, model):
        super().__init__(delta, model)
        self.k_in, self.k_out = self.delta
        self.area = float(self.constants.get("area", 1.0))
        self.pump_gain = float(self.constants.get("pump_gain", 3.0))
        self.h_ref = float(self.constants.get("h_ref", H_REF))

    def inflow(self, u: float) -> float:
        return self.pump_gain * self.k_in * u

    def outflow(self, h: float) -> float:
        return self.k_out * math.sqrt(max(h, 0.0))

    def derivative(self, s, u, w):
        return ((self.inflow(u[0]) - self.outflow(s[0])) / self.area, 0.0)

    def post_step(self, s, w):
        return (max(s[0], 0.0), self.h_ref + (w[0] if w else 0.0))


def watertank_model() -> SystemModel:
    return SystemModel(
        name="watertank",
        dynamics="watertank",
        state_names=("h", "h_cmd"),
        action_low=(0.0,),
        action_high=(1.0,),
        dt=0.1,
        horizon=300,
        init_low=(4.0, H_REF),
        init_high=(12.0, H_REF),
        deviation=DeviationSpace(
            names=("k_in", "k_out"),
            lower=(0.4, 0.2),
            upper=(1.6, 0.8),
            nominal=(1.0, 0.5),
        ),
        spec="alw[5,30] (abs(h - 10) < 0.5)",
        disturbance_low=(-0.25,),
        disturbance_high=(0.25,),
        disturbance_points=3,
        constants={"area": 1.0, "pump_gain": 3.0, "h_ref": H_REF},
    )
