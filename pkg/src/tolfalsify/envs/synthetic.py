"""Synthetic disk: a test system with a known minimal violating deviation.

One "simulation" step maps the state ``m`` to ``radius - dist(delta)``,
where ``dist`` is the normalized l2 distance of ``delta`` to nominal. The
initial margin is drawn from ``[1, 2]``, above any reachable value, so the
worst-case robustness of ``alw[0,1] (m > 0)`` is exactly
``radius - dist(delta)`` for every choice of lower-layer variables.
"""

import math

from .base import DeviationSpace, Dynamics, SystemModel, register_dynamics

RADIUS = 0.4


@register_dynamics("synthetic-disk")
class DiskDynamics(Dynamics):
    def __init__(self, delta, model):
        super().__init__(delta, model)
        self.radius = float(self.constants.get("radius", RADIUS))
        space = model.deviation
        nominal, span = space.nominal, space.span
        self.margin = self.radius - math.sqrt(
            sum(((d - n) / s) ** 2 for d, n, s in zip(self.delta, nominal, span))
        )

    def step(self, s, u, w, dt):
        return (self.margin,)


def disk_model() -> SystemModel:
    return SystemModel(
        name="synthetic-disk",
        dynamics="synthetic-disk",
        state_names=("m",),
        action_low=(-1.0,),
        action_high=(1.0,),
        dt=1.0,
        horizon=1,
        init_low=(1.0,),
        init_high=(2.0,),
        deviation=DeviationSpace(
            names=("p0", "p1"), lower=(-1.0, -1.0), upper=(1.0, 1.0), nominal=(0.0, 0.0)
        ),
        spec="alw[0,1] (m > 0)",
        constants={"radius": RADIUS},
    )
