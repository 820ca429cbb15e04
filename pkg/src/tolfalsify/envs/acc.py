"""Adaptive cruise control: lead and ego vehicles as double integrators.

State ``(x_lead, v_lead, x_ego, v_ego)``. The lead acceleration is a
disturbance clamped to ``[a_min, a_max]``; the ego action is a commanded
acceleration realized through a force sized for the nominal mass, so the
achieved acceleration is ``u * nominal_mass / mass``. Both speeds are
floored at zero (no reversing). Deviations: ego mass, ``a_min``, ``a_max``.
"""

from .base import DeviationSpace, Dynamics, SystemModel, register_dynamics

NOMINAL_MASS = 1650.0


@register_dynamics("acc")
class ACCDynamics(Dynamics):
    def __init__(self, delta, model):
        super().__init__(delta, model)
        self.mass, self.a_min, self.a_max = self.delta
        self.nominal_mass = float(self.constants.get("nominal_mass", NOMINAL_MASS))

    def lead_accel(self, w) -> float:
        return min(max(w[0], self.a_min), self.a_max)

    def ego_accel(self, u) -> float:
        return u[0] * self.nominal_mass / self.mass

    def derivative(self, s, u, w):
        _, v_lead, _, v_ego = s
        a_lead = self.lead_accel(w)
        a_ego = self.ego_accel(u)
        if v_lead <= 0.0 and a_lead < 0.0:
            a_lead = 0.0
        if v_ego <= 0.0 and a_ego < 0.0:
            a_ego = 0.0
        return (v_lead, a_lead, v_ego, a_ego)

    def post_step(self, s, w):
        return (s[0], max(s[1], 0.0), s[2], max(s[3], 0.0))


def acc_model() -> SystemModel:
    return SystemModel(
        name="acc",
        dynamics="acc",
        state_names=("x_lead", "v_lead", "x_ego", "v_ego"),
        action_low=(-2.0,),
        action_high=(2.0,),
        dt=0.1,
        horizon=300,
        init_low=(40.0, 18.0, 0.0, 18.0),
        init_high=(60.0, 22.0, 0.0, 22.0),
        deviation=DeviationSpace(
            names=("mass", "a_min", "a_max"),
            lower=(1155.0, -3.0, 0.5),
            upper=(2145.0, -0.5, 3.0),
            nominal=(NOMINAL_MASS, -1.0, 1.0),
        ),
        spec="alw[0,30] (x_lead - x_ego - 10 > 0)",
        disturbance_low=(-3.0,),
        disturbance_high=(3.0,),
        disturbance_points=5,
        constants={"nominal_mass": NOMINAL_MASS},
    )
