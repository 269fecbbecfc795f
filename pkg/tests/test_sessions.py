from __future__ import annotations

import json
import tempfile
from pathlib import Path

import pytest
from django.test import SimpleTestCase

from segomoe.design_space import DesignSpace
from segomoe.driver import EvaluationStatus, Phase, RunConfig
from segomoe.exceptions import (
    NoPendingAskError,
    SessionNotFound,
    TokenMismatchError,
)
from segomoe.moea import Nsga2Config
from segomoe.problems import continuous
from segomoe.schemas import TellRequest
from segomoe.sessions import EVENTS_FILE, SessionStore, get_store
from segomoe.signals import evaluation_told, session_finished
from segomoe.surrogate import KernelConfig
from tests.utils import temporary_handler


def line_config(budget: int = 3) -> RunConfig:
    return RunConfig(
        space=DesignSpace((continuous("x", 0.0, 1.0),), name="line"),
        n_objectives=2,
        doe_size=3,
        budget=budget,
        kernel=KernelConfig(n_starts=2, polish_iterations=50),
        infill_starts=2,
    )


def told(token: str, x: float) -> TellRequest:
    return TellRequest(token, (x, (1.0 - x) ** 2), (), EvaluationStatus.OK)


class SessionStoreTests(SimpleTestCase):
    def setUp(self):
        temporary = tempfile.TemporaryDirectory()
        self.addCleanup(temporary.cleanup)
        self.root = Path(temporary.name)
        self.store = SessionStore(self.root)

    def ask_and_tell(self, session, count: int) -> None:
        for _ in range(count):
            point, token = self.store.ask(session)
            self.store.tell(session, told(token, point.values[0]))

    def test_create_writes_event_log(self):
        session = self.store.create(line_config())
        lines = (self.root / session.id / EVENTS_FILE).read_text().splitlines()
        assert len(lines) == 1
        event = json.loads(lines[0])
        assert event["event"] == "created"
        assert RunConfig.from_dict(event["config"]) == session.config

    def test_get_returns_cached_session(self):
        session = self.store.create(line_config())
        assert self.store.get(session.id) is session

    def test_unknown_session(self):
        with pytest.raises(SessionNotFound):
            self.store.get("0" * 32)

    def test_path_like_session_id(self):
        with pytest.raises(SessionNotFound):
            self.store.get("../etc")

    def test_replay_rebuilds_history(self):
        session = self.store.create(line_config(budget=5))
        self.ask_and_tell(session, 2)
        point, token = self.store.ask(session)

        replayed = SessionStore(self.root).get(session.id)
        assert replayed.config == session.config
        assert [e.point for e in replayed.state.history] == [
            e.point for e in session.state.history
        ]
        assert [e.f for e in replayed.state.history] == [
            e.f for e in session.state.history
        ]
        assert replayed.state.pending is not None
        assert replayed.state.pending.point == point
        assert replayed.state.pending.token == token
        assert replayed.updated == session.updated

    def test_replay_then_continue(self):
        session = self.store.create(line_config())
        self.ask_and_tell(session, 1)
        point, token = self.store.ask(session)
        other = SessionStore(self.root)
        replayed = other.get(session.id)
        other.tell(replayed, told(token, point.values[0]))
        assert replayed.state.n_evaluations == 2
        assert SessionStore(self.root).get(session.id).state.n_evaluations == 2

    def test_truncated_last_event_is_ignored(self):
        session = self.store.create(line_config())
        self.ask_and_tell(session, 2)
        with (self.root / session.id / EVENTS_FILE).open("a") as handle:
            handle.write('{"event": "ask", "tok')
        with self.assertLogs("segomoe.sessions", "WARNING"):
            replayed = SessionStore(self.root).get(session.id)
        assert replayed.state.n_evaluations == 2
        assert replayed.state.pending is None

    def test_corrupt_middle_event_raises(self):
        session = self.store.create(line_config())
        path = self.root / session.id / EVENTS_FILE
        lines = path.read_text().splitlines()
        path.write_text("\n".join([*lines, "{not json", '{"event": "noop"}']) + "\n")
        with pytest.raises(json.JSONDecodeError):
            SessionStore(self.root).get(session.id)

    def test_failed_tell_is_replayed(self):
        session = self.store.create(line_config())
        _, token = self.store.ask(session)
        self.store.tell(session, TellRequest(token, (), (), EvaluationStatus.FAILED))
        replayed = SessionStore(self.root).get(session.id)
        assert replayed.state.n_failed == 1
        assert replayed.state.history[0].status is EvaluationStatus.FAILED

    def test_tell_without_ask(self):
        session = self.store.create(line_config())
        with pytest.raises(NoPendingAskError):
            self.store.tell(session, told("abc", 0.5))

    def test_rejected_tell_is_not_logged(self):
        session = self.store.create(line_config())
        self.store.ask(session)
        path = self.root / session.id / EVENTS_FILE
        before = path.read_text()
        with pytest.raises(TokenMismatchError):
            self.store.tell(session, told("f" * 16, 0.5))
        assert path.read_text() == before

    def test_signals(self):
        seen = []
        finished = []

        def on_told(sender, session_id, evaluation, **kwargs):
            seen.append((session_id, evaluation.status))

        def on_finished(sender, session_id, state, **kwargs):
            finished.append((session_id, state.phase))

        session = self.store.create(line_config())
        with temporary_handler(evaluation_told, on_told), temporary_handler(
            session_finished, on_finished
        ):
            self.ask_and_tell(session, 3)
        assert seen == [(session.id, EvaluationStatus.OK)] * 3
        assert finished == [(session.id, Phase.DONE)]

    def test_results_are_cached(self):
        session = self.store.create(line_config())
        self.ask_and_tell(session, 3)
        nsga2 = Nsga2Config(population_size=8, generations=3)
        first = self.store.results(session, nsga2)
        assert self.store.results(session, nsga2) is first


class GetStoreTests(SimpleTestCase):
    def test_one_store_per_directory(self):
        with tempfile.TemporaryDirectory() as root:
            assert get_store(root) is get_store(Path(root) / ".")
