from __future__ import annotations

import json
from http import HTTPStatus
from typing import Any

from django.http import HttpRequest, JsonResponse
from django.urls import reverse
from django.views.decorators.csrf import csrf_exempt
from django.views.decorators.http import require_GET, require_POST

from segomoe.conf import conf
from segomoe.defaults import wire_version
from segomoe.design_space import relaxed_dimension
from segomoe.exceptions import BudgetExhaustedError, SchemaError
from segomoe.moea import Nsga2Config
from segomoe.pareto import ParetoArchive
from segomoe.schemas import parse_create_body, parse_tell_body
from segomoe.sessions import Session, SessionStore, get_store


def _store() -> SessionStore:
    return get_store(conf.SEGOMOE_DATA_DIR)


def _body(request: HttpRequest) -> Any:
    try:
        return json.loads(request.body or b"null")
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError({"body": ["should be valid JSON"]}) from exc


def _links(session_id: str) -> dict[str, str]:
    return {
        name: reverse(f"segomoe:{name}", args=[session_id])
        for name in ("status", "ask", "tell", "results")
    }


def _status(session: Session) -> dict[str, Any]:
    state = session.state
    return {
        "version": wire_version,
        "id": session.id,
        "phase": state.phase.value,
        "evaluations": state.n_evaluations,
        "failed": state.n_failed,
        "budget": session.config.budget,
        "pending": state.pending is not None,
        "created": session.created,
        "updated": session.updated,
        "links": _links(session.id),
    }


@csrf_exempt
@require_POST
def create_session(request: HttpRequest) -> JsonResponse:
    config = parse_create_body(
        _body(request),
        max_budget=conf.SEGOMOE_MAX_BUDGET,
        infill_starts=conf.SEGOMOE_INFILL_STARTS,
    )
    session = _store().create(config)
    body = _status(session)
    body["relaxed_dimension"] = relaxed_dimension(config.space)
    return JsonResponse(body, status=HTTPStatus.CREATED)


@require_GET
def session_status(request: HttpRequest, session_id: str) -> JsonResponse:
    return JsonResponse(_status(_store().get(session_id)))


@require_GET
def ask(request: HttpRequest, session_id: str) -> JsonResponse:
    store = _store()
    session = store.get(session_id)
    try:
        point, token = store.ask(session)
    except BudgetExhaustedError as exc:
        exc.links = _links(session_id)  # type: ignore [attr-defined]
        raise
    state = session.state
    assert state.pending is not None
    return JsonResponse(
        {
            "version": wire_version,
            "token": token,
            "index": state.n_evaluations,
            "origin": state.pending.origin.value,
            "phase": state.phase.value,
            "point": point.as_dict(session.config.space),
        }
    )


@csrf_exempt
@require_POST
def tell(request: HttpRequest, session_id: str) -> JsonResponse:
    store = _store()
    session = store.get(session_id)
    evaluation = store.tell(session, parse_tell_body(_body(request)))
    state = session.state
    return JsonResponse(
        {
            "version": wire_version,
            "status": evaluation.status.value,
            "phase": state.phase.value,
            "evaluations": state.n_evaluations,
            "failed": state.n_failed,
        }
    )


def _front(session: Session, front: ParetoArchive, senses: Any) -> list[dict[str, Any]]:
    space = session.config.space
    return [
        {
            "point": entry.point.as_dict(space),
            "f": [float(v * s) for v, s in zip(entry.objectives, senses)],
            "g": list(entry.constraints),
        }
        for entry in front.entries
    ]


@require_GET
def results(request: HttpRequest, session_id: str) -> JsonResponse:
    store = _store()
    session = store.get(session_id)
    nsga2 = Nsga2Config(
        population_size=conf.SEGOMOE_NSGA2_POPULATION,
        generations=conf.SEGOMOE_NSGA2_GENERATIONS,
        seed=session.config.seed,
    )
    result = store.results(
        session, nsga2, force=request.GET.get("force", "").lower() == "true"
    )
    return JsonResponse(
        {
            "version": wire_version,
            "phase": session.state.phase.value,
            "evaluations": session.state.n_evaluations,
            "ref_point": None
            if result.ref_point is None
            else [float(v * s) for v, s in zip(result.ref_point, result.senses)],
            "pf_database": _front(session, result.pf_database, result.senses),
            "predicted_pf": _front(session, result.predicted_pf, result.senses),
            "proximity": result.proximity.to_dict(),
        }
    )
