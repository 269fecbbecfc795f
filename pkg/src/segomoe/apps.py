from __future__ import annotations

from django.apps import AppConfig
from django.core.checks import register

from segomoe.checks import check_settings


class SegomoeAppConfig(AppConfig):
    name = "segomoe"
    verbose_name = "segomoe"

    def ready(self) -> None:
        register()(check_settings)
