"""
Run artifact directory: configuration snapshot, history and front CSV files.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import IO, Any

import numpy as np
import numpy.typing as npt

from segomoe.design_space import DesignSpace, MixedPoint, VariableKind
from segomoe.driver import (
    Evaluation,
    EvaluationStatus,
    Origin,
    RunConfig,
    RunResult,
    RunState,
)
from segomoe.exceptions import SchemaError
from segomoe.pareto import ParetoArchive

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"
HISTORY_FILE = "history.csv"
PF_DATABASE_FILE = "pf_database.csv"
PREDICTED_PF_FILE = "predicted_pf.csv"
PROXIMITY_FILE = "proximity.csv"
REPORT_FILE = "report.json"
LOG_FILE = "run.log"


def _cell(value: float) -> str:
    return repr(float(value))


def _point_cells(space: DesignSpace, point: MixedPoint) -> list[str]:
    cells = []
    for spec, value in zip(space.variables, point.values):
        if spec.kind is VariableKind.CATEGORICAL:
            assert spec.levels is not None
            cells.append(spec.levels[int(value)])
        elif spec.kind is VariableKind.INTEGER:
            cells.append(str(int(value)))
        else:
            cells.append(_cell(value))
    return cells


def _headers(config: RunConfig) -> tuple[list[str], list[str]]:
    return (
        [f"f{i + 1}" for i in range(config.n_objectives)],
        [f"g{j + 1}" for j in range(config.n_constraints)],
    )


def write_history(handle: IO[str], config: RunConfig, history: Sequence[Evaluation]) -> None:
    f_names, g_names = _headers(config)
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(
        ["index", "origin", "status", *config.space.names, *f_names, *g_names, "feasible"]
    )
    for index, evaluation in enumerate(history):
        f = [_cell(v) for v in evaluation.f] if evaluation.ok else [""] * len(f_names)
        g = [_cell(v) for v in evaluation.g] if evaluation.ok else [""] * len(g_names)
        writer.writerow(
            [
                index,
                evaluation.origin.value,
                evaluation.status.value,
                *_point_cells(config.space, evaluation.point),
                *f,
                *g,
                int(evaluation.feasible),
            ]
        )


def _history_row(row: Mapping[str, str | None], config: RunConfig) -> Evaluation:
    if None in row.values():
        raise ValueError("row is cut short")
    cells: Mapping[str, str] = row  # type: ignore[assignment]
    f_names, g_names = _headers(config)
    point = config.space.point_from_dict(
        {
            spec.name: (
                cells[spec.name]
                if spec.kind is VariableKind.CATEGORICAL
                else float(cells[spec.name])
            )
            for spec in config.space.variables
        }
    )
    status = EvaluationStatus(cells["status"])
    ok = status is EvaluationStatus.OK
    return Evaluation(
        point=point,
        f=tuple(float(cells[name]) for name in f_names) if ok else (),
        g=tuple(float(cells[name]) for name in g_names) if ok else (),
        origin=Origin(cells["origin"]),
        status=status,
    )


def read_history(handle: IO[str], config: RunConfig) -> list[Evaluation]:
    """
    Parse a history CSV written by ``write_history``.

    A last row cut off mid-write is dropped with a warning; a bad row anywhere
    else raises ``SchemaError``.
    """
    f_names, g_names = _headers(config)
    reader = csv.DictReader(handle)
    expected = {"origin", "status", *config.space.names, *f_names, *g_names}
    missing = sorted(expected - set(reader.fieldnames or ()))
    if missing:
        raise SchemaError({"history": [f"missing columns {missing!r}"]})
    rows = list(reader)
    evaluations = []
    for position, row in enumerate(rows):
        try:
            evaluations.append(_history_row(row, config))
        except (TypeError, ValueError, KeyError) as exc:
            if position == len(rows) - 1:
                logger.warning("Ignoring a truncated last row in the history")
                break
            raise SchemaError({"history": [f"row {position}: {exc}"]}) from exc
    return evaluations


def write_front(
    handle: IO[str],
    config: RunConfig,
    front: ParetoArchive,
    senses: FloatArray,
) -> None:
    """
    Front members with objectives back in user sense.
    """
    f_names, g_names = _headers(config)
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow([*config.space.names, *f_names, *g_names])
    for entry in front.entries:
        writer.writerow(
            [
                *_point_cells(config.space, entry.point),
                *(_cell(v * s) for v, s in zip(entry.objectives, senses)),
                *(_cell(v) for v in entry.constraints),
            ]
        )


def write_proximity(handle: IO[str], result: RunResult) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["predicted_index", "nearest_database_distance"])
    for index, distance in enumerate(result.proximity.distances):
        writer.writerow([index, _cell(distance)])


def write_plot_data(
    directory: Path,
    database: FloatArray,
    predicted: FloatArray,
    names: Sequence[str] | None = None,
) -> list[Path]:
    """
    One CSV per objective pair with both fronts, ``k * (k - 1) / 2`` files.
    """
    k = database.shape[1] if database.ndim == 2 and database.size else predicted.shape[1]
    names = list(names) if names is not None else [f"f{i + 1}" for i in range(k)]
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for i, j in itertools.combinations(range(k), 2):
        path = directory / f"front_{names[i]}_{names[j]}.csv"
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["source", names[i], names[j]])
            for source, rows in (("database", database), ("predicted", predicted)):
                for row in rows:
                    writer.writerow([source, _cell(row[i]), _cell(row[j])])
        written.append(path)
    return written


def write_config(directory: Path, config: RunConfig, extra: Mapping[str, Any] | None = None) -> Path:
    path = directory / CONFIG_FILE
    data = {"version": 1, **config.to_dict(), **(extra or {})}
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def read_config(directory: Path) -> tuple[RunConfig, dict[str, Any]]:
    data = json.loads((directory / CONFIG_FILE).read_text())
    data.pop("version", None)
    known = set(RunConfig.__dataclass_fields__)
    extra = {key: data.pop(key) for key in list(data) if key not in known}
    return RunConfig.from_dict(data), extra


def write_run(
    directory: Path,
    state: RunState,
    result: RunResult | None,
    extra: Mapping[str, Any] | None = None,
) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    config = state.config
    write_config(directory, config, extra)
    with (directory / HISTORY_FILE).open("w", newline="") as handle:
        write_history(handle, config, state.history)
    if result is None:
        return
    write_results(directory, config, result)


def write_results(directory: Path, config: RunConfig, result: RunResult) -> None:
    with (directory / PF_DATABASE_FILE).open("w", newline="") as handle:
        write_front(handle, config, result.pf_database, result.senses)
    with (directory / PREDICTED_PF_FILE).open("w", newline="") as handle:
        write_front(handle, config, result.predicted_pf, result.senses)
    with (directory / PROXIMITY_FILE).open("w", newline="") as handle:
        write_proximity(handle, result)
    report = {
        "ref_point": None
        if result.ref_point is None
        else [float(v) for v in result.ref_point],
        "proximity": result.proximity.to_dict(),
    }
    (directory / REPORT_FILE).write_text(json.dumps(report, indent=2) + "\n")
