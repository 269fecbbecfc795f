from __future__ import annotations

import io
import json
import threading
import time
from http import HTTPStatus
from pathlib import Path
from typing import Any

from django.test import Client, SimpleTestCase

from segomoe import artifacts, driver
from segomoe.conf import conf
from segomoe.sessions import EVENTS_FILE, SessionStore, get_store
from tests.utils import retrofit_space_document

OBS_PENALTY = {"CONV": 0.0, "MEA1": 0.3, "MEA2": 0.5, "AEA": 0.8}


def evaluate(point: dict[str, Any]) -> tuple[list[float], list[float]]:
    fuel = 20.0 - point["bpr"] + OBS_PENALTY[point["obs"]]
    noise = point["bpr"] * (1.0 + point["engine_x"]) - point["engine_z"]
    return [fuel, noise], [point["engine_z"] + 0.3]


def create_body(**overrides: Any) -> dict[str, Any]:
    body = {
        "version": 1,
        "space": retrofit_space_document(),
        "n_objectives": 2,
        "n_constraints": 1,
        "doe_size": 3,
        "budget": 3,
        "seed": 5,
        "kernel": {"n_starts": 2},
    }
    body.update(overrides)
    return body


class ServiceTestCase(SimpleTestCase):
    def post(self, url: str, body: Any):
        return self.client.post(url, body, content_type="application/json")

    def create(self, **overrides: Any) -> dict[str, Any]:
        resp = self.post("/v1/sessions", create_body(**overrides))
        assert resp.status_code == HTTPStatus.CREATED, resp.content
        return resp.json()

    def step(self, session: dict[str, Any]) -> dict[str, Any]:
        asked = self.client.get(session["links"]["ask"]).json()
        f, g = evaluate(asked["point"])
        resp = self.post(
            session["links"]["tell"],
            {"version": 1, "token": asked["token"], "f": f, "g": g},
        )
        assert resp.status_code == HTTPStatus.OK, resp.content
        return asked


class CreateSessionTests(ServiceTestCase):
    def test_created(self):
        body = self.create()
        assert body["version"] == 1
        assert body["relaxed_dimension"] == 7
        assert body["phase"] == "doe"
        assert body["evaluations"] == 0
        assert body["pending"] is False
        assert body["links"] == {
            "status": f"/v1/sessions/{body['id']}",
            "ask": f"/v1/sessions/{body['id']}/ask",
            "tell": f"/v1/sessions/{body['id']}/tell",
            "results": f"/v1/sessions/{body['id']}/results",
        }

    def test_missing_fields(self):
        body = create_body()
        del body["space"]
        del body["n_objectives"]
        resp = self.post("/v1/sessions", body)
        assert resp.status_code == HTTPStatus.BAD_REQUEST
        data = resp.json()
        assert data["error"] == "schema-violation"
        assert set(data["fields"]) == {"space", "n_objectives"}

    def test_budget_below_doe(self):
        resp = self.post("/v1/sessions", create_body(budget=2))
        assert resp.status_code == HTTPStatus.BAD_REQUEST
        assert resp.json()["fields"]["budget"] == ["should be >= doe_size"]

    def test_budget_above_maximum(self):
        resp = self.post("/v1/sessions", create_body(budget=conf.SEGOMOE_MAX_BUDGET + 1))
        assert resp.status_code == HTTPStatus.BAD_REQUEST
        assert "budget" in resp.json()["fields"]

    def test_bad_space(self):
        space = retrofit_space_document()
        space["variables"][0]["kind"] = "real"
        resp = self.post("/v1/sessions", create_body(space=space))
        assert resp.status_code == HTTPStatus.BAD_REQUEST
        assert resp.json()["fields"]["space"] == [
            "variables[0].kind: unknown kind 'real'"
        ]

    def test_unknown_fields(self):
        resp = self.post("/v1/sessions", create_body(population=40))
        assert resp.status_code == HTTPStatus.BAD_REQUEST
        assert resp.json()["fields"]["body"] == ["unknown fields ['population']"]

    def test_wrong_version(self):
        resp = self.post("/v1/sessions", create_body(version=2))
        assert resp.status_code == HTTPStatus.BAD_REQUEST
        assert resp.json()["fields"]["version"] == ["should be 1"]

    def test_invalid_json(self):
        resp = self.client.post(
            "/v1/sessions", b"{not json", content_type="application/json"
        )
        assert resp.status_code == HTTPStatus.BAD_REQUEST
        assert resp.json()["fields"] == {"body": ["should be valid JSON"]}

    def test_get_not_allowed(self):
        resp = self.client.get("/v1/sessions")
        assert resp.status_code == HTTPStatus.METHOD_NOT_ALLOWED


class AskTellTests(ServiceTestCase):
    def test_ask(self):
        session = self.create()
        resp = self.client.get(session["links"]["ask"])
        assert resp.status_code == HTTPStatus.OK
        data = resp.json()
        assert data["index"] == 0
        assert data["origin"] == "doe"
        assert set(data["point"]) == {"bpr", "engine_x", "engine_z", "obs"}
        assert data["point"]["obs"] in OBS_PENALTY
        status = self.client.get(session["links"]["status"]).json()
        assert status["pending"] is True

    def test_ask_twice(self):
        session = self.create()
        self.client.get(session["links"]["ask"])
        resp = self.client.get(session["links"]["ask"])
        assert resp.status_code == HTTPStatus.CONFLICT
        assert resp.json()["error"] == "pending-evaluation"
        assert resp.json()["detail"] == "pending evaluation"

    def test_tell(self):
        session = self.create()
        self.step(session)
        status = self.client.get(session["links"]["status"]).json()
        assert status["evaluations"] == 1
        assert status["pending"] is False

    def test_tell_without_ask(self):
        session = self.create()
        resp = self.post(
            session["links"]["tell"], {"version": 1, "token": "abc", "f": [1.0, 2.0]}
        )
        assert resp.status_code == HTTPStatus.CONFLICT
        assert resp.json()["error"] == "no-pending-ask"

    def test_tell_wrong_token(self):
        session = self.create()
        self.client.get(session["links"]["ask"])
        resp = self.post(
            session["links"]["tell"],
            {"version": 1, "token": "0" * 16, "f": [1.0, 2.0], "g": [0.0]},
        )
        assert resp.status_code == HTTPStatus.CONFLICT
        assert resp.json()["error"] == "token-mismatch"

    def test_tell_wrong_arity(self):
        session = self.create()
        token = self.client.get(session["links"]["ask"]).json()["token"]
        resp = self.post(
            session["links"]["tell"], {"version": 1, "token": token, "f": [1.0], "g": [0.0]}
        )
        assert resp.status_code == HTTPStatus.UNPROCESSABLE_ENTITY
        assert resp.json()["error"] == "wrong-arity"
        status = self.client.get(session["links"]["status"]).json()
        assert status["pending"] is True

    def test_tell_bad_body(self):
        session = self.create()
        token = self.client.get(session["links"]["ask"]).json()["token"]
        resp = self.post(
            session["links"]["tell"], {"version": 1, "token": token, "f": "1.0"}
        )
        assert resp.status_code == HTTPStatus.BAD_REQUEST
        assert resp.json()["fields"] == {"f": ["should be a list of numbers"]}

    def test_tell_null_is_failure(self):
        session = self.create()
        token = self.client.get(session["links"]["ask"]).json()["token"]
        with self.assertLogs("segomoe.driver", "WARNING"):
            resp = self.post(
                session["links"]["tell"],
                {"version": 1, "token": token, "f": [None, 1.0], "g": [0.0]},
            )
        assert resp.status_code == HTTPStatus.OK
        assert resp.json()["status"] == "failed"
        assert resp.json()["failed"] == 1

    def test_budget_exhausted(self):
        session = self.create()
        for _ in range(3):
            self.step(session)
        resp = self.client.get(session["links"]["ask"])
        assert resp.status_code == HTTPStatus.GONE
        data = resp.json()
        assert data["error"] == "budget-exhausted"
        assert data["links"]["results"] == session["links"]["results"]

    def test_unknown_session(self):
        resp = self.client.get("/v1/sessions/" + "0" * 32 + "/ask")
        assert resp.status_code == HTTPStatus.NOT_FOUND
        assert resp.json()["error"] == "session-not-found"

    def test_history_matches_in_process_driver(self):
        session = self.create(budget=5)
        asked = [self.step(session)["point"] for _ in range(5)]

        served = get_store(conf.SEGOMOE_DATA_DIR).get(session["id"])
        config = served.config
        state = driver.start(config)
        expected = []
        for _ in range(5):
            point = driver.ask(state)
            named = point.as_dict(config.space)
            expected.append(named)
            driver.tell(state, point, *evaluate(named))
        assert asked == expected

        local, remote = io.StringIO(), io.StringIO()
        artifacts.write_history(local, config, state.history)
        artifacts.write_history(remote, config, served.state.history)
        assert remote.getvalue().encode() == local.getvalue().encode()
        assert len(local.getvalue().splitlines()) == 6

    def test_concurrent_clients_on_one_session(self):
        session = self.create(doe_size=6, budget=6)
        tokens: list[str] = []
        failures: list[int] = []
        guard = threading.Lock()

        def work() -> None:
            client = Client()
            while True:
                resp = client.get(session["links"]["ask"])
                if resp.status_code == HTTPStatus.GONE:
                    return
                if resp.status_code == HTTPStatus.CONFLICT:
                    time.sleep(0.001)
                    continue
                if resp.status_code != HTTPStatus.OK:
                    failures.append(resp.status_code)
                    return
                asked = resp.json()
                f, g = evaluate(asked["point"])
                told = client.post(
                    session["links"]["tell"],
                    {"version": 1, "token": asked["token"], "f": f, "g": g},
                    content_type="application/json",
                )
                if told.status_code != HTTPStatus.OK:
                    failures.append(told.status_code)
                    return
                with guard:
                    tokens.append(asked["token"])

        workers = [threading.Thread(target=work) for _ in range(4)]
        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join(timeout=120)

        assert failures == []
        assert len(tokens) == 6
        assert len(set(tokens)) == 6
        path = Path(conf.SEGOMOE_DATA_DIR) / session["id"] / EVENTS_FILE
        events = [json.loads(line) for line in path.read_text().splitlines()]
        assert [e["event"] for e in events] == ["created"] + ["ask", "tell"] * 6
        asks, tells = events[1::2], events[2::2]
        assert [e["token"] for e in asks] == [e["token"] for e in tells]
        assert sorted(e["token"] for e in asks) == sorted(tokens)
        replayed = SessionStore(conf.SEGOMOE_DATA_DIR).get(session["id"])
        assert replayed.state.n_evaluations == 6
        assert replayed.state.phase is driver.Phase.DONE


class ResultsTests(ServiceTestCase):
    def test_unfinished_session(self):
        session = self.create()
        self.step(session)
        resp = self.client.get(session["links"]["results"])
        assert resp.status_code == HTTPStatus.CONFLICT

    def test_forced_results(self):
        session = self.create()
        self.step(session)
        self.step(session)
        resp = self.client.get(session["links"]["results"] + "?force=true")
        assert resp.status_code == HTTPStatus.OK
        data = resp.json()
        assert data["evaluations"] == 2
        assert data["phase"] == "doe"

    def test_results(self):
        session = self.create()
        for _ in range(3):
            self.step(session)
        first = self.client.get(session["links"]["results"])
        assert first.status_code == HTTPStatus.OK
        data = first.json()
        assert data["phase"] == "done"
        assert data["evaluations"] == 3
        for member in data["pf_database"]:
            assert member["g"][0] <= 0.0
            assert set(member["point"]) == {"bpr", "engine_x", "engine_z", "obs"}
        assert len(data["proximity"]["distances"]) == len(data["predicted_pf"])
        second = self.client.get(session["links"]["results"])
        assert second.json() == data
