"""Cart-pole: cart on a track with a hinged pole, pushed by a bounded force.

State ``(x, x_dot, theta, theta_dot)`` with ``theta = 0`` upright; the single
action in ``[-1, 1]`` is scaled by the force magnitude and a
piecewise-constant push ``w`` (newtons) is added to it. ``pole_length`` is
the half-length (pivot to centre of mass). Deviations: cart mass, pole
mass, pole length, force magnitude.
"""

import math

from .base import DeviationSpace, Dynamics, SystemModel, register_dynamics

GRAVITY = 9.8


@register_dynamics("cartpole")
class CartPoleDynamics(Dynamics):
    def __init__(self, delta, model):
        super().__init__(delta, model)
        self.cart_mass, self.pole_mass, self.length, self.force = self.delta
        self.gravity = float(self.constants.get("gravity", GRAVITY))

    def derivative(self, s, u, w):
        _, x_dot, th, th_dot = s
        f = self.force * u[0] + (w[0] if w else 0.0)
        mc, mp, l = self.cart_mass, self.pole_mass, self.length
        total = mc + mp
        sin, cos = math.sin(th), math.cos(th)
        temp = (f + mp * l * th_dot * th_dot * sin) / total
        th_acc = (self.gravity * sin - cos * temp) / (l * (4.0 / 3.0 - mp * cos * cos / total))
        x_acc = temp - mp * l * th_acc * cos / total
        return (x_dot, x_acc, th_dot, th_acc)


def cartpole_model() -> SystemModel:
    return SystemModel(
        name="cartpole",
        dynamics="cartpole",
        state_names=("x", "x_dot", "theta", "theta_dot"),
        action_low=(-1.0,),
        action_high=(1.0,),
        dt=0.02,
        horizon=200,
        init_low=(-0.3, -0.3, -0.1, -0.3),
        init_high=(0.3, 0.3, 0.1, 0.3),
        deviation=DeviationSpace(
            names=("cart_mass", "pole_mass", "pole_length", "force"),
            lower=(0.5, 0.05, 0.25, 5.0),
            upper=(1.5, 0.15, 0.75, 15.0),
            nominal=(1.0, 0.1, 0.5, 10.0),
        ),
        spec="alw[0,4] (abs(theta) < 0.2 and abs(x) < 2.4)",
        disturbance_low=(-1.0,),
        disturbance_high=(1.0,),
        disturbance_points=4,
        constants={"gravity": GRAVITY},
    )
