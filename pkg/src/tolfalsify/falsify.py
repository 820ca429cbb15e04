"""Two-layer tolerance falsification and the one-layer baseline.

The lower layer searches initial states and disturbance points of one
deviated system for the smallest robustness ``gamma``. The upper layer
searches deviations ``delta`` for the one closest to nominal whose lower
layer finds ``gamma < 0``. Infeasible deviations are scored
``distance + penalty + w_gamma * gamma`` and, in heuristic mode, also
``+ w_sim * max(similarity, 0)``, where ``similarity`` is the cosine between
the worst trace at ``delta`` and the worst nominal trace.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .envs import SystemModel, instantiate, simulate
from .search import default_popsize, generations, make_optimizer, minimize
from .stl import Formula, Trace, parse_formula, robustness

MODES = ("plain", "heuristic", "one-layer")


def derive_seed(*parts: int) -> int:
    """Deterministic 63-bit seed from non-negative integers."""
    # the length prefix keeps (a, b) and (a, b, 0) apart; SeedSequence
    # ignores trailing zero words
    words = [len(parts)] + [int(p) for p in parts]
    state = np.random.SeedSequence(words).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def deviation_distance(delta, space, p: float = 2) -> float:
    """Norm of ``(delta - nominal) / (upper - lower)``."""
    scaled = (np.asarray(delta, dtype=float) - space.nominal) / space.span
    if p == 2:
        return float(math.sqrt(float(np.dot(scaled, scaled))))
    if p == 1:
        return float(np.sum(np.abs(scaled)))
    if p in (math.inf, "inf"):
        return float(np.max(np.abs(scaled))) if scaled.size else 0.0
    raise ValueError(f"unsupported norm order {p!r}")


def trajectory_similarity(a: Trace, b: Trace) -> float:
    """Cosine similarity of the flattened state sequences.

    The shorter trace is padded with its last state. If either vector is
    zero the result is 1.0 when both are, else 0.0.
    """
    n = max(len(a), len(b))
    va = a.padded_states(n).ravel()
    vb = b.padded_states(n).ravel()
    na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 1.0 if na == nb else 0.0
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def upper_objective(
    distance: float,
    gamma: float,
    similarity: Optional[float] = None,
    mode: str = "plain",
    penalty: float = 1.0,
    w_gamma: float = 1.0,
    w_sim: float = 0.5,
) -> float:
    if gamma < 0:
        return distance
    v = distance + penalty + w_gamma * gamma
    if mode == "heuristic" and similarity is not None:
        v += w_sim * max(similarity, 0.0)
    return v


@dataclass
class FalsificationOutcome:
    gamma: float
    trace: Optional[Trace]
    init: tuple
    points: list
    evaluations: int
    seed: int

    @property
    def violating(self) -> bool:
        return self.gamma < 0


def _spec(model: SystemModel, spec) -> Formula:
    if spec is None:
        return model.formula()
    if isinstance(spec, str):
        return parse_formula(spec, {n: i for i, n in enumerate(model.state_names)})
    return spec


def lower_falsify(
    model: SystemModel,
    delta,
    policy,
    budget: int = 100,
    seed: int = 0,
    spec=None,
    optimizer: str = "cmaes",
    popsize: Optional[int] = None,
) -> FalsificationOutcome:
    """Approximate the minimum robustness over trajectories of ``model`` at ``delta``."""
    if budget < 1:
        raise ValueError("lower-layer budget must be at least 1")
    formula = _spec(model, spec)
    inst = instantiate(model, delta)
    policy = policy.clone()
    best: Dict[str, Any] = {"rho": math.inf}

    def objective(z):
        init, points = model.split_lower(z)
        tr = simulate(inst, policy, init, points, seed=seed)
        rho = robustness(formula, tr, 0.0)
        if rho < best["rho"] or "trace" not in best:
            best.update(rho=rho, trace=tr, init=init, points=points.tolist())
        return rho

    lo, hi = model.lower_bounds()
    _, _, history = minimize(objective, lo, hi, budget, seed=seed, kind=optimizer, popsize=popsize)
    return FalsificationOutcome(
        gamma=float(best["rho"]),
        trace=best["trace"],
        init=tuple(best["init"]),
        points=best["points"],
        evaluations=len(history),
        seed=seed,
    )


@dataclass
class CampaignConfig:
    """Budgets are counts of evaluations: ``upper_budget`` deviations each
    getting ``lower_budget`` simulations, or ``budget`` joint samples for the
    one-layer baseline. ``upper_iterations`` overrides ``upper_budget`` with
    ``iterations * popsize``."""

    mode: str = "plain"
    upper_budget: int = 100
    upper_iterations: Optional[int] = None
    lower_budget: int = 100
    budget: int = 10_000
    popsize: Optional[int] = None
    sigma0: float = 0.2
    penalty: float = 1.0
    w_gamma: float = 1.0
    w_sim: float = 0.5
    norm: Any = 2
    seed: int = 0
    optimizer: str = "cmaes"
    lower_optimizer: str = "cmaes"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        for name in ("upper_budget", "lower_budget", "budget"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.norm == "inf":
            self.norm = math.inf

    def upper_evaluations(self, dim: int) -> int:
        if self.upper_iterations is None:
            return int(self.upper_budget)
        return int(self.upper_iterations) * (self.popsize or default_popsize(dim))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["norm"] == math.inf:
            d["norm"] = "inf"
        return d


@dataclass
class DeviationRecord:
    iteration: int
    index: int
    delta: List[float]
    gamma: float
    distance: float
    similarity: Optional[float]
    objective: float
    violating: bool
    evaluations: int
    seed: int
    init: List[float]
    points: List[List[float]]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DeviationRecord":
        return cls(**{f.name: d[f.name] for f in dataclasses.fields(cls)})


def config_hash(model: SystemModel, policy, spec_text: Optional[str] = None) -> str:
    """Fingerprint of everything a replay depends on."""
    payload = {
        "model": model.to_dict(),
        "policy": policy.to_dict(),
        "spec": spec_text if spec_text is not None else model.spec,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class CampaignReport:
    system: str
    mode: str
    config: dict
    records: List[DeviationRecord] = field(default_factory=list)
    nominal: Optional[FalsificationOutcome] = None
    simulations: int = 0
    controller: str = ""
    hash: str = ""

    @property
    def violations(self) -> List[DeviationRecord]:
        return [r for r in self.records if r.violating]

    @property
    def best(self) -> Optional[DeviationRecord]:
        v = self.violations
        return min(v, key=lambda r: r.distance) if v else None

    def summary(self) -> dict:
        v = self.violations
        dists = [r.distance for r in v]
        best = self.best
        return {
            "system": self.system,
            "mode": self.mode,
            "controller": self.controller,
            "records": len(self.records),
            "violations": len(v),
            "min_distance": min(dists) if dists else None,
            "avg_distance": sum(dists) / len(dists) if dists else None,
            "best_delta": best.delta if best else None,
            "best_gamma": best.gamma if best else None,
            "nominal_gamma": self.nominal.gamma if self.nominal else None,
            "simulations": self.simulations,
            "config_hash": self.hash,
            "config": self.config,
        }

    def jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.records)

    def witnesses(self) -> List[dict]:
        out = []
        for r in self.violations:
            out.append(
                {
                    "system": self.system,
                    "mode": self.mode,
                    "iteration": r.iteration,
                    "index": r.index,
                    "delta": r.delta,
                    "init": r.init,
                    "points": r.points,
                    "gamma": r.gamma,
                    "violating": r.violating,
                    "seed": r.seed,
                    "config_hash": self.hash,
                }
            )
        return out


def replay_record(model: SystemModel, policy, rec, spec=None) -> float:
    """Re-simulate a stored witness and return its robustness."""
    get = rec.get if isinstance(rec, dict) else lambda k: getattr(rec, k)
    inst = instantiate(model, get("delta"))
    points = np.asarray(get("points"), dtype=float)
    tr = simulate(inst, policy.clone(), get("init"), points, seed=get("seed"))
    return robustness(_spec(model, spec), tr, 0.0)


def _record_from(it, idx, delta, outcome, distance, similarity, objective) -> DeviationRecord:
    return DeviationRecord(
        iteration=it,
        index=idx,
        delta=[float(v) for v in delta],
        gamma=float(outcome.gamma),
        distance=float(distance),
        similarity=None if similarity is None else float(similarity),
        objective=float(objective),
        violating=bool(outcome.gamma < 0),
        evaluations=int(outcome.evaluations),
        seed=int(outcome.seed),
        init=[float(v) for v in outcome.init],
        points=[[float(v) for v in row] for row in outcome.points],
    )


def falsify_tolerance(model: SystemModel, policy, config: CampaignConfig, spec=None) -> CampaignReport:
    """Two-layer search for the violating deviation closest to nominal."""
    if config.mode == "one-layer":
        return one_layer_falsify(model, policy, config, spec)
    spec_text = spec if isinstance(spec, str) else None
    space = model.deviation
    report = CampaignReport(
        system=model.name,
        mode=config.mode,
        config=config.to_dict(),
        controller=policy.kind,
        hash=config_hash(model, policy, spec_text),
    )
    lower = max(int(config.lower_budget), 1)
    nominal = lower_falsify(
        model, space.nominal, policy, lower, derive_seed(config.seed, 0, 0), spec,
        optimizer=config.lower_optimizer,
    )
    report.nominal = nominal
    report.simulations += nominal.evaluations

    opt = make_optimizer(
        config.optimizer,
        space.lower,
        space.upper,
        seed=derive_seed(config.seed, 0, 1),
        x0=space.nominal,
        popsize=config.popsize,
        sigma0=config.sigma0,
    )
    for it, (candidates, complete) in enumerate(generations(opt, config.upper_evaluations(space.dim))):
        values = []
        for idx, delta in enumerate(candidates):
            out = lower_falsify(
                model, delta, policy, lower, derive_seed(config.seed, it + 1, idx), spec,
                optimizer=config.lower_optimizer,
            )
            report.simulations += out.evaluations
            dist = deviation_distance(delta, space, config.norm)
            sim = trajectory_similarity(out.trace, nominal.trace)
            v = upper_objective(
                dist, out.gamma, sim, config.mode, config.penalty, config.w_gamma, config.w_sim
            )
            values.append(v)
            report.records.append(_record_from(it, idx, delta, out, dist, sim, v))
        if complete:
            opt.tell(candidates, values)
    return report


def one_layer_falsify(model: SystemModel, policy, config: CampaignConfig, spec=None) -> CampaignReport:
    """Single search over deviation and trajectory variables jointly,
    minimizing ``robustness + distance``."""
    spec_text = spec if isinstance(spec, str) else None
    formula = _spec(model, spec)
    space = model.deviation
    report = CampaignReport(
        system=model.name,
        mode="one-layer",
        config=config.to_dict(),
        controller=policy.kind,
        hash=config_hash(model, policy, spec_text),
    )
    lo, hi = model.lower_bounds()
    joint_lo = np.concatenate([space.lower, lo])
    joint_hi = np.concatenate([space.upper, hi])
    x0 = np.concatenate([space.nominal, (lo + hi) / 2])
    k = space.dim
    pol = policy.clone()
    opt = make_optimizer(
        config.optimizer,
        joint_lo,
        joint_hi,
        seed=derive_seed(config.seed, 0, 2),
        x0=x0,
        popsize=config.popsize,
        sigma0=config.sigma0,
    )
    for it, (candidates, complete) in enumerate(generations(opt, config.budget)):
        values = []
        for idx, x in enumerate(candidates):
            delta = x[:k]
            init, points = model.split_lower(x[k:])
            tr = simulate(instantiate(model, delta), pol, init, points, seed=config.seed)
            report.simulations += 1
            rho = robustness(formula, tr, 0.0)
            dist = deviation_distance(delta, space, config.norm)
            v = rho + dist
            values.append(v)
            out = FalsificationOutcome(rho, None, init, points.tolist(), 1, config.seed)
            report.records.append(_record_from(it, idx, delta, out, dist, None, v))
        if complete:
            opt.tell(candidates, values)
    return report


def run_campaign(model: SystemModel, policy, config: CampaignConfig, spec=None) -> CampaignReport:
    if config.mode == "one-layer":
        return one_layer_falsify(model, policy, config, spec)
    return falsify_tolerance(model, policy, config, spec)
