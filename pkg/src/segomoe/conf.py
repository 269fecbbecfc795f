from __future__ import annotations

import os
from pathlib import Path

from django.conf import settings

from segomoe import defaults


def _environ(name: str, default: object) -> object:
    value = os.environ.get(name)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        return value


class Settings:
    """
    Shadow Django's settings with a little logic
    """

    @property
    def SEGOMOE_DATA_DIR(self) -> str | Path:
        return getattr(
            settings,
            "SEGOMOE_DATA_DIR",
            os.environ.get("SEGOMOE_DATA_DIR", defaults.data_dir),
        )

    @property
    def SEGOMOE_PORT(self) -> int:
        return getattr(settings, "SEGOMOE_PORT", _environ("SEGOMOE_PORT", defaults.port))

    @property
    def SEGOMOE_MAX_BUDGET(self) -> int:
        return getattr(settings, "SEGOMOE_MAX_BUDGET", defaults.max_budget)

    @property
    def SEGOMOE_INFILL_STARTS(self) -> int:
        return getattr(settings, "SEGOMOE_INFILL_STARTS", defaults.infill_starts)

    @property
    def SEGOMOE_NSGA2_POPULATION(self) -> int:
        return getattr(settings, "SEGOMOE_NSGA2_POPULATION", defaults.population_size)

    @property
    def SEGOMOE_NSGA2_GENERATIONS(self) -> int:
        return getattr(settings, "SEGOMOE_NSGA2_GENERATIONS", defaults.generations)


conf = Settings()
