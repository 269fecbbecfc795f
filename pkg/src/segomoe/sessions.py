"""
Session records persisted as append-only JSON-lines event logs.

``<data_dir>/<session id>/events.jsonl`` holds one event per line:

    {"event": "created", "config": {...}, "timestamp": ...}
    {"event": "ask", "token": "...", "origin": "doe", "values": [...]}
    {"event": "tell", "token": "...", "f": [...], "g": [...], "status": "ok",
     "timestamp": ...}

Replaying the log rebuilds the run state without recomputing any ask.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from segomoe import driver
from segomoe.design_space import MixedPoint
from segomoe.driver import (
    Evaluation,
    EvaluationStatus,
    Origin,
    Phase,
    RunConfig,
    RunResult,
    RunState,
)
from segomoe.exceptions import NoPendingAskError, SessionNotFound
from segomoe.moea import Nsga2Config
from segomoe.schemas import TellRequest
from segomoe.signals import evaluation_told, session_finished

logger = logging.getLogger(__name__)

EVENTS_FILE = "events.jsonl"


@dataclass
class Session:
    id: str
    config: RunConfig
    state: RunState
    created: float
    updated: float
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionStore:
    """
    Sessions under one data directory; mutations of a session hold its lock.
    """

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _log_path(self, session_id: str) -> Path:
        return self.root / session_id / EVENTS_FILE

    def _append(self, session_id: str, event: dict[str, Any]) -> None:
        with self._log_path(session_id).open("a") as handle:
            handle.write(json.dumps(event) + "\n")

    def create(self, config: RunConfig) -> Session:
        session_id = uuid.uuid4().hex
        now = time.time()
        (self.root / session_id).mkdir(parents=True)
        self._append(
            session_id,
            {"event": "created", "config": config.to_dict(), "timestamp": now},
        )
        session = Session(session_id, config, driver.start(config), now, now)
        with self._lock:
            self._sessions[session_id] = session
        logger.info("Created session %s (%s)", session_id, config.space.name)
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                session = self._replay(session_id)
                self._sessions[session_id] = session
        return session

    def _events(self, path: Path) -> Iterator[dict[str, Any]]:
        lines = path.read_text().splitlines()
        for number, line in enumerate(lines):
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                if number == len(lines) - 1:
                    logger.warning("Ignoring a truncated last event in %s", path)
                    return
                raise

    def _replay(self, session_id: str) -> Session:
        if not session_id.isalnum():
            raise SessionNotFound
        path = self._log_path(session_id)
        if not path.is_file():
            raise SessionNotFound
        events = self._events(path)
        created = next(events)
        config = RunConfig.from_dict(created["config"])
        state = driver.start(config)
        updated = created["timestamp"]
        for event in events:
            if event["event"] == "ask":
                point = config.space.point(event["values"])
                driver.mark_pending(state, point, event["token"], Origin(event["origin"]))
            elif event["event"] == "tell":
                assert state.pending is not None
                driver.tell(
                    state,
                    state.pending.point,
                    event["f"],
                    event["g"],
                    status=EvaluationStatus(event["status"]),
                    token=event["token"],
                    timestamp=event["timestamp"],
                )
                updated = event["timestamp"]
        logger.info(
            "Replayed session %s: %d evaluations", session_id, state.n_evaluations
        )
        return Session(session_id, config, state, created["timestamp"], updated)

    def ask(self, session: Session) -> tuple[MixedPoint, str]:
        with session.lock:
            state = session.state
            driver.ask(state)
            pending = state.pending
            assert pending is not None
            self._append(
                session.id,
                {
                    "event": "ask",
                    "token": pending.token,
                    "origin": pending.origin.value,
                    "values": list(pending.point.values),
                },
            )
            return pending.point, pending.token

    def tell(self, session: Session, request: TellRequest) -> Evaluation:
        with session.lock:
            state = session.state
            if state.pending is None:
                raise NoPendingAskError
            evaluation = driver.tell(
                state,
                state.pending.point,
                request.f,
                request.g,
                status=request.status,
                token=request.token,
            )
            self._append(
                session.id,
                {
                    "event": "tell",
                    "token": request.token,
                    "f": list(evaluation.f),
                    "g": list(evaluation.g),
                    "status": evaluation.status.value,
                    "timestamp": evaluation.timestamp,
                },
            )
            session.updated = evaluation.timestamp
            finished = state.phase is Phase.DONE
        evaluation_told.send(sender=None, session_id=session.id, evaluation=evaluation)
        if finished:
            session_finished.send(sender=None, session_id=session.id, state=state)
        return evaluation

    def results(
        self, session: Session, nsga2: Nsga2Config, *, force: bool = False
    ) -> RunResult:
        with session.lock:
            if session.state.result is None:
                driver.finalize(session.state, nsga2, force=force)
            assert session.state.result is not None
            return session.state.result


_stores: dict[Path, SessionStore] = {}
_stores_lock = threading.Lock()


def get_store(root: str | Path) -> SessionStore:
    key = Path(root).resolve()
    with _stores_lock:
        if key not in _stores:
            _stores[key] = SessionStore(key)
        return _stores[key]
