"""
Wire bodies of the ask-tell service.

Every body carries ``"version": 1``; unknown fields are rejected. Validation
collects field-level messages instead of stopping at the first problem.

Create a session (``POST /v1/sessions``)::

    {
        "version": 1,
        "space": {"name": ..., "variables": [...]},
        "n_objectives": 2,
        "n_constraints": 1,
        "doe_size": 13,
        "budget": 81,
        "seed": 0,
        "maximize": [false, true],
        "acquisition": {"criterion": "ehvi", "reg": "sum", "gamma": 1.0,
                        "ref_point": null, "method": "auto", "mc_samples": 2000},
        "kernel": {"family": "squared-exponential", "n_pls_components": 2},
        "infill_starts": 20
    }

Tell (``POST /v1/sessions/{id}/tell``)::

    {"version": 1, "token": "...", "f": [1.0, 2.0], "g": [-0.5], "status": "ok"}

``f`` and ``g`` may be omitted when ``status`` is ``"failed"``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

from segomoe import defaults
from segomoe.acquisition import AcquisitionConfig, Criterion, Regularization
from segomoe.design_space import check_space_document
from segomoe.driver import EvaluationStatus, RunConfig
from segomoe.exceptions import ConfigurationError, DesignSpaceError, SchemaError
from segomoe.surrogate import KernelConfig, KernelFamily

WIRE_VERSION = defaults.wire_version

_CREATE_FIELDS = {
    "version",
    "space",
    "n_objectives",
    "n_constraints",
    "doe_size",
    "budget",
    "seed",
    "maximize",
    "acquisition",
    "kernel",
    "infill_starts",
}
_ACQUISITION_FIELDS = {"criterion", "reg", "gamma", "ref_point", "method", "mc_samples"}
_KERNEL_FIELDS = {"family", "n_pls_components", "nugget", "n_starts"}
_TELL_FIELDS = {"version", "token", "f", "g", "status"}

Errors = dict[str, list[str]]


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _add(errors: Errors, field: str, message: str) -> None:
    errors.setdefault(field, []).append(message)


def _check_envelope(data: Any, allowed: set[str], errors: Errors) -> bool:
    if not isinstance(data, Mapping):
        _add(errors, "body", "should be a JSON object")
        return False
    unknown = sorted(set(data) - allowed)
    if unknown:
        _add(errors, "body", f"unknown fields {unknown!r}")
    if data.get("version") != WIRE_VERSION:
        _add(errors, "version", f"should be {WIRE_VERSION}")
    return True


def _check_int(data: Mapping[str, Any], field: str, errors: Errors, minimum: int) -> None:
    value = data.get(field)
    if not _is_int(value) or value < minimum:
        _add(errors, field, f"should be an integer >= {minimum}")


def check_create_body(data: Any, max_budget: int = defaults.max_budget) -> Errors:
    errors: Errors = {}
    if not _check_envelope(data, _CREATE_FIELDS, errors):
        return errors

    if "space" not in data:
        _add(errors, "space", "is required")
    else:
        for message in check_space_document(data["space"]):
            _add(errors, "space", message)

    _check_int(data, "n_objectives", errors, 1)
    if "n_constraints" in data:
        _check_int(data, "n_constraints", errors, 0)
    _check_int(data, "doe_size", errors, 2)
    _check_int(data, "budget", errors, 2)
    if "seed" in data:
        _check_int(data, "seed", errors, 0)
    if "infill_starts" in data:
        _check_int(data, "infill_starts", errors, 1)
    budget, doe_size = data.get("budget"), data.get("doe_size")
    if _is_int(budget) and _is_int(doe_size) and budget < doe_size:
        _add(errors, "budget", "should be >= doe_size")
    if _is_int(budget) and budget > max_budget:
        _add(errors, "budget", f"should be <= {max_budget}")

    maximize = data.get("maximize")
    if maximize is not None and (
        not isinstance(maximize, list)
        or not all(isinstance(flag, bool) for flag in maximize)
    ):
        _add(errors, "maximize", "should be a list of booleans")

    acquisition = data.get("acquisition", {})
    if not isinstance(acquisition, Mapping):
        _add(errors, "acquisition", "should be an object")
    else:
        unknown = sorted(set(acquisition) - _ACQUISITION_FIELDS)
        if unknown:
            _add(errors, "acquisition", f"unknown fields {unknown!r}")
        if acquisition.get("criterion", "ehvi") not in {c.value for c in Criterion}:
            _add(errors, "acquisition.criterion", "should be one of ehvi, pi, mpi")
        if acquisition.get("reg", "none") not in {r.value for r in Regularization}:
            _add(errors, "acquisition.reg", "should be one of none, max, sum")
        if acquisition.get("method", "auto") not in {"auto", "exact", "mc"}:
            _add(errors, "acquisition.method", "should be one of auto, exact, mc")
        gamma = acquisition.get("gamma", 1.0)
        if not _is_number(gamma) or not gamma > 0:
            _add(errors, "acquisition.gamma", "should be a number > 0")
        ref_point = acquisition.get("ref_point")
        if ref_point is not None and (
            not isinstance(ref_point, list)
            or not all(_is_number(v) and math.isfinite(v) for v in ref_point)
        ):
            _add(errors, "acquisition.ref_point", "should be a list of numbers")
        if "mc_samples" in acquisition:
            _check_int(acquisition, "mc_samples", errors, 1)

    kernel = data.get("kernel", {})
    if not isinstance(kernel, Mapping):
        _add(errors, "kernel", "should be an object")
    else:
        unknown = sorted(set(kernel) - _KERNEL_FIELDS)
        if unknown:
            _add(errors, "kernel", f"unknown fields {unknown!r}")
        if kernel.get("family", KernelFamily.SQUARED_EXPONENTIAL.value) not in {
            k.value for k in KernelFamily
        }:
            _add(errors, "kernel.family", "should be squared-exponential or matern-5/2")
        if "n_pls_components" in kernel:
            _check_int(kernel, "n_pls_components", errors, 0)
        if "n_starts" in kernel:
            _check_int(kernel, "n_starts", errors, 1)
        nugget = kernel.get("nugget", defaults.nugget_start)
        if not _is_number(nugget) or not nugget > 0:
            _add(errors, "kernel.nugget", "should be a number > 0")
    return errors


def parse_create_body(
    data: Any,
    *,
    max_budget: int = defaults.max_budget,
    infill_starts: int = defaults.infill_starts,
) -> RunConfig:
    errors = check_create_body(data, max_budget)
    if errors:
        raise SchemaError(errors)
    acquisition = dict(data.get("acquisition", {}))
    if acquisition.get("ref_point") is not None:
        acquisition["ref_point"] = tuple(float(v) for v in acquisition["ref_point"])
    try:
        return RunConfig.from_dict(
            {
                "space": data["space"],
                "n_objectives": data["n_objectives"],
                "n_constraints": data.get("n_constraints", 0),
                "doe_size": data["doe_size"],
                "budget": data["budget"],
                "seed": data.get("seed", 0),
                "maximize": data.get("maximize") or (),
                "acquisition": AcquisitionConfig(**acquisition).to_dict(),
                "kernel": KernelConfig(**data.get("kernel", {})).to_dict(),
                "infill_starts": data.get("infill_starts", infill_starts),
            }
        )
    except DesignSpaceError as exc:
        raise SchemaError({"space": exc.messages}) from exc
    except ConfigurationError as exc:
        raise SchemaError({"body": [str(exc)]}) from exc


@dataclass(frozen=True)
class TellRequest:
    token: str
    f: tuple[float, ...]
    g: tuple[float, ...]
    status: EvaluationStatus


def parse_tell_body(data: Any) -> TellRequest:
    """
    Shape checks only; arity against the session is the driver's job.
    """
    errors: Errors = {}
    if _check_envelope(data, _TELL_FIELDS, errors):
        if not isinstance(data.get("token"), str) or not data["token"]:
            _add(errors, "token", "should be a nonempty string")
        status = data.get("status", EvaluationStatus.OK.value)
        if status not in {s.value for s in EvaluationStatus}:
            _add(errors, "status", "should be ok or failed")
        required = status == EvaluationStatus.OK.value
        for field in ("f", "g"):
            value = data.get(field)
            if value is None:
                if required and field == "f":
                    _add(errors, field, "is required")
                continue
            if not isinstance(value, list) or not all(
                _is_number(v) or v is None for v in value
            ):
                _add(errors, field, "should be a list of numbers")
    if errors:
        raise SchemaError(errors)
    return TellRequest(
        token=data["token"],
        # null marks a value the client could not compute
        f=tuple(math.nan if v is None else float(v) for v in data.get("f") or ()),
        g=tuple(math.nan if v is None else float(v) for v in data.get("g") or ()),
        status=EvaluationStatus(data.get("status", EvaluationStatus.OK.value)),
    )
