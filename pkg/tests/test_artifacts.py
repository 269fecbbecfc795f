from __future__ import annotations

import io

import pytest
from django.test import SimpleTestCase

from segomoe import artifacts, driver
from segomoe.driver import EvaluationStatus, RunConfig
from segomoe.exceptions import SchemaError
from segomoe.problems import mixed_retrofit_toy


def doe_history():
    problem = mixed_retrofit_toy()
    config = RunConfig(
        space=problem.space,
        n_objectives=4,
        n_constraints=4,
        doe_size=6,
        budget=6,
        maximize=problem.maximize,
        seed=2,
    )
    state = driver.start(config)
    for position in range(6):
        point = driver.ask(state)
        if position == 3:
            driver.tell(state, point, (), status=EvaluationStatus.FAILED)
        else:
            driver.tell(state, point, *problem.evaluate(point))
    handle = io.StringIO()
    artifacts.write_history(handle, config, state.history)
    return config, state.history, handle.getvalue()


def summary(evaluations):
    return [(e.point, e.f, e.g, e.origin, e.status) for e in evaluations]


class ReadHistoryTests(SimpleTestCase):
    def test_reads_written_history(self):
        config, history, text = doe_history()
        read = artifacts.read_history(io.StringIO(text), config)
        assert summary(read) == summary(history)

    def test_last_row_cut_mid_line(self):
        config, history, text = doe_history()
        lines = text.splitlines(keepends=True)
        cut = "".join(lines[:-1]) + lines[-1][: len(lines[-1]) // 2]
        with self.assertLogs("segomoe.artifacts", "WARNING"):
            read = artifacts.read_history(io.StringIO(cut), config)
        assert summary(read) == summary(history[:-1])

    def test_last_row_missing_trailing_fields(self):
        config, history, text = doe_history()
        lines = text.splitlines(keepends=True)
        cut = "".join(lines[:-1]) + lines[-1].rsplit(",", 3)[0]
        with self.assertLogs("segomoe.artifacts", "WARNING"):
            read = artifacts.read_history(io.StringIO(cut), config)
        assert len(read) == len(history) - 1

    def test_bad_middle_row(self):
        config, _, text = doe_history()
        lines = text.splitlines(keepends=True)
        lines[2] = lines[2][:10] + "\n"
        with pytest.raises(SchemaError) as excinfo:
            artifacts.read_history(io.StringIO("".join(lines)), config)
        assert excinfo.value.fields["history"][0].startswith("row 1:")

    def test_missing_columns(self):
        config, _, _ = doe_history()
        with pytest.raises(SchemaError):
            artifacts.read_history(io.StringIO("index,origin\n0,doe\n"), config)
