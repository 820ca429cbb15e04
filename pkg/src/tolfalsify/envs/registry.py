"""Named benchmark systems and config overrides."""

from __future__ import annotations

import dataclasses
from typing import Any, Callable, Dict, Mapping

from .acc import acc_model
from .base import DeviationSpace, SystemModel
from .carrun import carrun_model
from .cartpole import cartpole_model
from .synthetic import disk_model
from .watertank import watertank_model

SYSTEMS: Dict[str, Callable[[], SystemModel]] = {
    "cartpole": cartpole_model,
    "watertank": watertank_model,
    "acc": acc_model,
    "carrun": carrun_model,
    "synthetic-disk": disk_model,
}

BENCHMARKS = ("cartpole", "watertank", "acc", "carrun")


def make_model(name: str, overrides: Mapping[str, Any] | None = None) -> SystemModel:
    """Build the named system, replacing any field given in ``overrides``.

    ``overrides["deviation"]`` may be a partial mapping of ``lower``,
    ``upper``, ``nominal`` and ``names``; ``overrides["constants"]`` is merged
    into the model constants.
    """
    try:
        model = SYSTEMS[name]()
    except KeyError:
        raise KeyError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None
    if not overrides:
        return model
    fields = {f.name for f in dataclasses.fields(SystemModel)}
    changes = dict(overrides)
    unknown = set(changes) - fields
    if unknown:
        raise KeyError(f"unknown model fields {sorted(unknown)}")
    if "deviation" in changes:
        dev = model.deviation.to_dict()
        dev.update(changes["deviation"])
        changes["deviation"] = DeviationSpace(**dev)
    if "constants" in changes:
        changes["constants"] = {**model.constants, **changes["constants"]}
    return dataclasses.replace(model, **changes)
