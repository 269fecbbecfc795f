from __future__ import annotations

from collections.abc import Callable, Generator
from contextlib import contextmanager
from typing import Any

from django.dispatch import Signal

from segomoe.design_space import ActivityRule, DesignSpace, VariableKind, VariableSpec


@contextmanager
def temporary_handler(signal: Signal, handler: Callable[..., Any]) -> Generator[None]:
    signal.connect(handler)
    try:
        yield
    finally:
        signal.disconnect(handler)


def retrofit_space_document() -> dict[str, Any]:
    return {
        "name": "retrofit",
        "variables": [
            {"name": "bpr", "kind": "continuous", "bounds": [9, 15]},
            {"name": "engine_x", "kind": "continuous", "bounds": [-0.98, -0.80]},
            {"name": "engine_z", "kind": "continuous", "bounds": [-0.39, -0.21]},
            {
                "name": "obs",
                "kind": "categorical",
                "levels": ["CONV", "MEA1", "MEA2", "AEA"],
            },
        ],
    }


def small_mixed_space() -> DesignSpace:
    return DesignSpace(
        (
            VariableSpec("x", VariableKind.CONTINUOUS, bounds=(0.0, 1.0)),
            VariableSpec("n", VariableKind.INTEGER, bounds=(1, 4)),
            VariableSpec("c", VariableKind.CATEGORICAL, levels=("a", "b", "c")),
            VariableSpec(
                "y",
                VariableKind.CONTINUOUS,
                bounds=(-2.0, 2.0),
                active_when=ActivityRule("c", ("b",)),
            ),
        ),
        name="small",
    )
