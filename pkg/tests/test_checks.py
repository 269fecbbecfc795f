from __future__ import annotations

from unittest import mock

import pytest
from django.core.checks import CheckMessage, Error
from django.core.management import base, call_command
from django.test import SimpleTestCase
from django.test.utils import override_settings

from segomoe.checks import check_settings


class ChecksTests(SimpleTestCase):
    def check_error_codes(self, expected: list[str]) -> list[CheckMessage]:
        errors = check_settings()
        assert len(errors) == len(expected)
        assert all(isinstance(e, Error) for e in errors)
        assert [e.id for e in errors] == expected
        return errors

    def test_defaults_pass(self):
        self.check_error_codes([])

    def test_defaults_pass_check(self):
        call_command("check")

    @override_settings(SEGOMOE_MAX_BUDGET=object)
    def test_checks_are_bound(self):
        with pytest.raises(base.SystemCheckError):
            call_command("check")

    @override_settings(SEGOMOE_DATA_DIR=object)
    def test_data_dir_non_path(self):
        self.check_error_codes(["segomoe.E001"])

    @override_settings(SEGOMOE_DATA_DIR="")
    def test_data_dir_empty(self):
        self.check_error_codes(["segomoe.E001"])

    @override_settings(SEGOMOE_DATA_DIR=__file__)
    def test_data_dir_is_a_file(self):
        errors = self.check_error_codes(["segomoe.E002"])
        assert "is not a directory" in errors[0].msg

    @override_settings(SEGOMOE_DATA_DIR="/nonexistent/segomoe")
    def test_data_dir_created_later(self):
        self.check_error_codes([])

    @override_settings(SEGOMOE_PORT=0)
    def test_port_zero(self):
        self.check_error_codes(["segomoe.E003"])

    @override_settings(SEGOMOE_PORT=True)
    def test_port_bool(self):
        self.check_error_codes(["segomoe.E003"])

    def test_port_from_environment(self):
        with mock.patch.dict("os.environ", {"SEGOMOE_PORT": "http"}):
            errors = self.check_error_codes(["segomoe.E003"])
        assert errors[0].hint == "Check the SEGOMOE_PORT environment variable."

    @override_settings(SEGOMOE_MAX_BUDGET=1)
    def test_max_budget_too_small(self):
        self.check_error_codes(["segomoe.E004"])

    @override_settings(SEGOMOE_MAX_BUDGET="100")
    def test_max_budget_non_integer(self):
        self.check_error_codes(["segomoe.E004"])

    @override_settings(SEGOMOE_INFILL_STARTS=0)
    def test_infill_starts_zero(self):
        self.check_error_codes(["segomoe.E005"])

    @override_settings(SEGOMOE_NSGA2_POPULATION=11)
    def test_population_odd(self):
        self.check_error_codes(["segomoe.E006"])

    @override_settings(SEGOMOE_NSGA2_POPULATION=2)
    def test_population_too_small(self):
        self.check_error_codes(["segomoe.E006"])

    @override_settings(SEGOMOE_NSGA2_GENERATIONS=-1)
    def test_generations_negative(self):
        errors = self.check_error_codes(["segomoe.E007"])
        assert errors[0].msg.startswith("SEGOMOE_NSGA2_GENERATIONS should be")

    @override_settings(SEGOMOE_NSGA2_GENERATIONS=0)
    def test_generations_zero(self):
        self.check_error_codes([])

    @override_settings(SEGOMOE_PORT=70000, SEGOMOE_INFILL_STARTS=-2)
    def test_collects_every_error(self):
        self.check_error_codes(["segomoe.E003", "segomoe.E005"])
