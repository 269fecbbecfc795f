from __future__ import annotations

from pathlib import Path
from typing import Any

from django.core.checks import CheckMessage, Error

from segomoe.conf import conf


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def check_settings(**kwargs: Any) -> list[CheckMessage]:
    errors: list[CheckMessage] = []

    if not isinstance(conf.SEGOMOE_DATA_DIR, (str, Path)) or not str(
        conf.SEGOMOE_DATA_DIR
    ):
        errors.append(
            Error(
                "SEGOMOE_DATA_DIR should be a nonempty string or path.",
                id="segomoe.E001",
            )
        )
    elif Path(conf.SEGOMOE_DATA_DIR).exists() and not Path(
        conf.SEGOMOE_DATA_DIR
    ).is_dir():
        errors.append(
            Error(
                f"SEGOMOE_DATA_DIR {str(conf.SEGOMOE_DATA_DIR)!r} is not a directory.",
                id="segomoe.E002",
            )
        )

    if not _is_int(conf.SEGOMOE_PORT) or not 0 < conf.SEGOMOE_PORT < 65536:
        errors.append(
            Error(
                "SEGOMOE_PORT should be an integer between 1 and 65535.",
                id="segomoe.E003",
                hint="Check the SEGOMOE_PORT environment variable.",
            )
        )

    if not _is_int(conf.SEGOMOE_MAX_BUDGET) or conf.SEGOMOE_MAX_BUDGET < 2:
        errors.append(
            Error(
                "SEGOMOE_MAX_BUDGET should be an integer greater than or equal to 2.",
                id="segomoe.E004",
            )
        )

    if not _is_int(conf.SEGOMOE_INFILL_STARTS) or conf.SEGOMOE_INFILL_STARTS < 1:
        errors.append(
            Error(
                "SEGOMOE_INFILL_STARTS should be a positive integer.",
                id="segomoe.E005",
            )
        )

    population = conf.SEGOMOE_NSGA2_POPULATION
    if not _is_int(population) or population < 4 or population % 2:
        errors.append(
            Error(
                "SEGOMOE_NSGA2_POPULATION should be an even integer of at least 4.",
                id="segomoe.E006",
            )
        )

    if not _is_int(conf.SEGOMOE_NSGA2_GENERATIONS) or conf.SEGOMOE_NSGA2_GENERATIONS < 0:
        errors.append(
            Error(
                (
                    "SEGOMOE_NSGA2_GENERATIONS should be an integer greater than "
                    + "or equal to zero."
                ),
                id="segomoe.E007",
            )
        )

    return errors
