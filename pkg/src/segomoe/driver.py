"""
Ask-tell orchestration of the enrichment loop.

A run starts with a Latin hypercube DOE, then each further ask refits the
surrogates on the successful history, maximizes the regularized criterion
under the surrogate constraints and returns the decoded optimum. ``finalize``
produces the two outputs of a run: the PF database (feasible nondominated
evaluated points) and the predicted PF (NSGA-II on the final surrogates).

Objectives are reported in user sense everywhere outside this module's
archive, where maximized objectives are negated.
"""

from __future__ import annotations

import logging
import math
import secrets
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import numpy.typing as npt

from segomoe import defaults
from segomoe.acquisition import AcquisitionConfig, ObjectiveScaling
from segomoe.design_space import (
    DesignSpace,
    MixedPoint,
    decode,
    encode,
    encode_many,
    lhs_sample,
)
from segomoe.exceptions import (
    ArityError,
    BudgetExhaustedError,
    ConfigurationError,
    NoPendingAskError,
    PendingEvaluationError,
    PointMismatchError,
    ProtocolError,
    TokenMismatchError,
)
from segomoe.infill import build_infill_problem, dedup_guard, solve
from segomoe.moea import Nsga2Config, SurrogateProblem, evolve
from segomoe.pareto import ArchiveEntry, ParetoArchive, nondominated_filter
from segomoe.surrogate import KernelConfig, fit_multi

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

Evaluator = Callable[[MixedPoint], tuple[Sequence[float], Sequence[float]]]


class Phase(str, Enum):
    DOE = "doe"
    ENRICH = "enrich"
    DONE = "done"


class Origin(str, Enum):
    DOE = "doe"
    INFILL = "infill"


class EvaluationStatus(str, Enum):
    OK = "ok"
    FAILED = "failed"


@dataclass(frozen=True)
class RunConfig:
    space: DesignSpace
    n_objectives: int
    doe_size: int
    budget: int
    n_constraints: int = 0
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    seed: int = 0
    # One flag per objective; maximized objectives are negated internally.
    maximize: tuple[bool, ...] = ()
    infill_starts: int = defaults.infill_starts

    def __post_init__(self) -> None:
        if self.n_objectives < 1:
            raise ConfigurationError("n_objectives should be >= 1")
        if self.n_constraints < 0:
            raise ConfigurationError("n_constraints should be >= 0")
        if not self.budget >= self.doe_size >= 2:
            raise ConfigurationError("budget >= doe_size >= 2 is required")
        if not self.maximize:
            object.__setattr__(self, "maximize", (False,) * self.n_objectives)
        elif len(self.maximize) != self.n_objectives:
            raise ConfigurationError("maximize needs one flag per objective")
        if self.infill_starts < 1:
            raise ConfigurationError("infill_starts should be >= 1")
        ref = self.acquisition.ref_point
        if ref is not None and len(ref) != self.n_objectives:
            raise ConfigurationError("ref_point needs one value per objective")

    @property
    def senses(self) -> FloatArray:
        return np.array([-1.0 if flag else 1.0 for flag in self.maximize])

    def to_dict(self) -> dict[str, Any]:
        return {
            "space": self.space.to_dict(),
            "n_objectives": self.n_objectives,
            "n_constraints": self.n_constraints,
            "doe_size": self.doe_size,
            "budget": self.budget,
            "acquisition": self.acquisition.to_dict(),
            "kernel": self.kernel.to_dict(),
            "seed": self.seed,
            "maximize": list(self.maximize),
            "infill_starts": self.infill_starts,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RunConfig:
        acquisition = dict(data.get("acquisition") or {})
        acquisition.pop("standardized_scalarization", None)
        if acquisition.get("ref_point") is not None:
            acquisition["ref_point"] = tuple(acquisition["ref_point"])
        return cls(
            space=DesignSpace.from_dict(data["space"]),
            n_objectives=data["n_objectives"],
            n_constraints=data.get("n_constraints", 0),
            doe_size=data["doe_size"],
            budget=data["budget"],
            acquisition=AcquisitionConfig(**acquisition),
            kernel=KernelConfig(**(data.get("kernel") or {})),
            seed=data.get("seed", 0),
            maximize=tuple(data.get("maximize") or ()),
            infill_starts=data.get("infill_starts", defaults.infill_starts),
        )


@dataclass(frozen=True)
class Evaluation:
    point: MixedPoint
    f: tuple[float, ...]
    g: tuple[float, ...]
    origin: Origin
    status: EvaluationStatus = EvaluationStatus.OK
    timestamp: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status is EvaluationStatus.OK

    @property
    def feasible(self) -> bool:
        return self.ok and all(value <= 0.0 for value in self.g)


@dataclass(frozen=True)
class Ask:
    point: MixedPoint
    token: str
    origin: Origin


@dataclass
class RunState:
    config: RunConfig
    doe: list[MixedPoint]
    history: list[Evaluation] = field(default_factory=list)
    archive: ParetoArchive = field(default_factory=ParetoArchive)
    pending: Ask | None = None
    phase: Phase = Phase.DOE
    result: RunResult | None = None

    @property
    def n_evaluations(self) -> int:
        return len(self.history)

    @property
    def n_failed(self) -> int:
        return sum(not evaluation.ok for evaluation in self.history)


@dataclass(frozen=True)
class ProximityReport:
    """
    Nearest-neighbour distances from each predicted point to the PF database,
    in standardized objective space, and merged-front membership counts.
    """

    distances: tuple[float, ...]
    database_total: int
    database_kept: int
    predicted_total: int
    predicted_kept: int

    def summary(self, label: str = "predicted") -> str:
        return (
            f"{self.database_kept} of {self.database_total} database + "
            + f"{self.predicted_kept} of {self.predicted_total} {label} points "
            + "survive in the merged front"
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "distances": [None if math.isnan(d) else d for d in self.distances],
            "database_total": self.database_total,
            "database_kept": self.database_kept,
            "predicted_total": self.predicted_total,
            "predicted_kept": self.predicted_kept,
            "summary": self.summary(),
        }


@dataclass(frozen=True)
class RunResult:
    pf_database: ParetoArchive
    predicted_pf: ParetoArchive
    proximity: ProximityReport
    ref_point: FloatArray | None
    scaling: ObjectiveScaling | None
    senses: FloatArray


@dataclass(frozen=True)
class ValidationReport:
    """
    The predicted PF re-evaluated with the true evaluator.
    """

    evaluated_pf: ParetoArchive
    evaluated: ParetoArchive
    errors: tuple[float, ...]
    membership: ProximityReport


def start(config: RunConfig) -> RunState:
    return RunState(config=config, doe=lhs_sample(config.space, config.doe_size, config.seed))


def _iteration_seeds(seed: int, step: int) -> list[int]:
    sequence = np.random.SeedSequence([seed, step])
    return [int(s) for s in sequence.generate_state(3)]


def _training_data(state: RunState) -> tuple[FloatArray, FloatArray, FloatArray]:
    ok = [e for e in state.history if e.ok]
    space = state.config.space
    X = encode_many(space, [e.point for e in ok])
    F = np.array([e.f for e in ok], dtype=float).reshape(
        len(ok), state.config.n_objectives
    )
    F = F * state.config.senses
    G = np.array([e.g for e in ok], dtype=float).reshape(
        len(ok), state.config.n_constraints
    )
    return X, F, G


def _infill_point(state: RunState, step: int) -> MixedPoint:
    config = state.config
    space = config.space
    fit_seed, criterion_seed, solve_seed = _iteration_seeds(config.seed, step)
    X, F, G = _training_data(state)
    evaluated = encode_many(space, [e.point for e in state.history])
    if X.shape[0] < 2:
        logger.warning("Fewer than two successful evaluations, sampling at random")
        candidate = encode(space, lhs_sample(space, 1, solve_seed)[0]).coords
        vector, _ = dedup_guard(candidate, evaluated, space, seed=solve_seed)
        return decode(space, vector)

    surrogate = fit_multi(X, F, G, config.kernel, fit_seed % 2**31)
    front_indices = state.archive.nondominated
    front = state.archive.objectives()[front_indices] if front_indices else np.empty(
        (0, config.n_objectives)
    )
    if config.acquisition.ref_point is not None:
        R = np.asarray(config.acquisition.ref_point, dtype=float)
    else:
        R = state.archive.update_reference()
        assert R is not None
    problem = build_infill_problem(
        surrogate,
        config.acquisition.with_seed(criterion_seed % 2**31),
        space,
        front,
        R,
        ObjectiveScaling.from_objectives(F),
        archive_points=encode_many(
            space, [state.archive.entries[i].point for i in front_indices]
        ),
    )
    result = solve(problem, config.infill_starts, solve_seed)
    vector, exhausted = dedup_guard(
        result.x, evaluated, space, seed=solve_seed, feasible=problem.is_feasible
    )
    if exhausted:
        logger.warning("Asking an already evaluated point at step %d", step)
    return decode(space, vector)


def ask(state: RunState) -> MixedPoint:
    """
    Next point to evaluate; it stays pending until told.
    """
    if state.phase is Phase.DONE or state.n_evaluations >= state.config.budget:
        raise BudgetExhaustedError
    if state.pending is not None:
        raise PendingEvaluationError
    step = state.n_evaluations
    if step < state.config.doe_size:
        point, origin = state.doe[step], Origin.DOE
    else:
        point, origin = _infill_point(state, step), Origin.INFILL
    mark_pending(state, point, secrets.token_hex(8), origin)
    logger.info("Ask %d (%s): %s", step + 1, origin.value, point.values)
    return point


def mark_pending(state: RunState, point: MixedPoint, token: str, origin: Origin) -> Ask:
    """
    Record an ask without computing it, as when replaying a session log.
    """
    if state.pending is not None:
        raise PendingEvaluationError
    state.pending = Ask(point, token, origin)
    return state.pending


def _advance(state: RunState) -> None:
    if state.n_evaluations >= state.config.budget:
        state.phase = Phase.DONE
    elif state.n_evaluations >= state.config.doe_size:
        state.phase = Phase.ENRICH
    else:
        state.phase = Phase.DOE


def tell(
    state: RunState,
    point: MixedPoint,
    f: Sequence[float],
    g: Sequence[float] = (),
    *,
    status: EvaluationStatus = EvaluationStatus.OK,
    token: str | None = None,
    timestamp: float | None = None,
) -> Evaluation:
    pending = state.pending
    if pending is None:
        raise NoPendingAskError
    if token is not None and token != pending.token:
        raise TokenMismatchError
    if point != pending.point:
        raise PointMismatchError
    config = state.config
    status = EvaluationStatus(status)
    if status is EvaluationStatus.OK:
        if len(f) != config.n_objectives or len(g) != config.n_constraints:
            raise ArityError(
                f"expected {config.n_objectives} objectives and "
                + f"{config.n_constraints} constraints, got {len(f)} and {len(g)}"
            )
        if not all(math.isfinite(float(v)) for v in [*f, *g]):
            logger.warning("Non-finite evaluation recorded as failed")
            status = EvaluationStatus.FAILED

    evaluation = Evaluation(
        point=point,
        f=tuple(float(v) for v in f),
        g=tuple(float(v) for v in g),
        origin=pending.origin,
        status=status,
        timestamp=time.time() if timestamp is None else timestamp,
    )
    state.history.append(evaluation)
    if evaluation.ok:
        internal = tuple(float(v) for v in np.asarray(evaluation.f) * config.senses)
        state.archive.add(ArchiveEntry(point, internal, evaluation.g))
        state.archive.update_reference()
    state.pending = None
    state.result = None
    _advance(state)
    logger.info(
        "Tell %d (%s): status=%s phase=%s",
        state.n_evaluations,
        evaluation.origin.value,
        evaluation.status.value,
        state.phase.value,
    )
    return evaluation


def restore(config: RunConfig, evaluations: Sequence[Evaluation]) -> RunState:
    """
    Rebuild a run from recorded evaluations without recomputing any ask.
    """
    state = start(config)
    for evaluation in evaluations:
        if state.n_evaluations >= config.budget:
            raise BudgetExhaustedError
        mark_pending(state, evaluation.point, "restored", evaluation.origin)
        tell(
            state,
            evaluation.point,
            evaluation.f if evaluation.ok else (),
            evaluation.g if evaluation.ok else (),
            status=evaluation.status,
            timestamp=evaluation.timestamp,
        )
    return state


def merged_membership(
    database: FloatArray,
    other: FloatArray,
) -> tuple[int, int]:
    """
    How many rows of each front survive in their merged nondominated set.
    """
    if database.shape[0] + other.shape[0] == 0:
        return 0, 0
    stacked = np.vstack([m for m in (database, other) if m.shape[0]])
    kept = set(nondominated_filter(stacked))
    n_database = database.shape[0]
    return (
        sum(1 for i in kept if i < n_database),
        sum(1 for i in kept if i >= n_database),
    )


def proximity_report(
    database: FloatArray,
    predicted: FloatArray,
    scaling: ObjectiveScaling | None,
) -> ProximityReport:
    distances: list[float] = []
    if predicted.shape[0]:
        if database.shape[0] and scaling is not None:
            left = scaling.standardize(predicted)
            right = scaling.standardize(database)
            gaps = np.linalg.norm(left[:, None, :] - right[None, :, :], axis=2)
            distances = [float(v) for v in gaps.min(axis=1)]
        else:
            distances = [math.nan] * predicted.shape[0]
    database_kept, predicted_kept = merged_membership(database, predicted)
    return ProximityReport(
        distances=tuple(distances),
        database_total=database.shape[0],
        database_kept=database_kept,
        predicted_total=predicted.shape[0],
        predicted_kept=predicted_kept,
    )


def _front_matrix(archive: ParetoArchive, n: int) -> FloatArray:
    if not archive.entries:
        return np.empty((0, n))
    return archive.objectives()


def finalize(
    state: RunState,
    nsga2: Nsga2Config | None = None,
    *,
    force: bool = False,
) -> RunResult:
    """
    PF database, predicted PF and proximity report of a finished run.

    ``force`` allows finalizing before the budget is spent.
    """
    config = state.config
    if state.phase is not Phase.DONE and not force:
        raise ProtocolError("run is not finished")
    nsga2 = nsga2 or Nsga2Config(seed=config.seed)
    n = config.n_objectives

    database = ParetoArchive(
        [state.archive.entries[i] for i in state.archive.nondominated]
    )
    if not database.entries:
        logger.warning("No feasible evaluation, the PF database is empty")
    ref_point = None if state.archive.ref_point is None else state.archive.ref_point.copy()
    database.ref_point = ref_point

    X, F, G = _training_data(state)
    scaling = ObjectiveScaling.from_objectives(F) if F.shape[0] else None
    if X.shape[0] >= 2:
        surrogate = fit_multi(X, F, G, config.kernel, config.seed)
        predicted = evolve(
            SurrogateProblem(surrogate, config.space),
            config.space,
            nsga2,
            initial=encode_many(config.space, [e.point for e in database.entries]),
        )
        predicted.ref_point = ref_point
    else:
        logger.warning("Too few successful evaluations to predict a front")
        predicted = ParetoArchive(ref_point=ref_point)

    proximity = proximity_report(
        _front_matrix(database, n), _front_matrix(predicted, n), scaling
    )
    logger.info("Finalized: %s", proximity.summary())
    result = RunResult(
        pf_database=database,
        predicted_pf=predicted,
        proximity=proximity,
        ref_point=ref_point,
        scaling=scaling,
        senses=config.senses,
    )
    state.result = result
    return result


def run(
    config: RunConfig,
    evaluator: Evaluator,
    nsga2: Nsga2Config | None = None,
    *,
    on_evaluation: Callable[[Evaluation], None] | None = None,
) -> tuple[RunState, RunResult]:
    """
    Drive ask/tell until the budget is spent, then finalize.

    An evaluator that raises marks the point as failed.
    """
    state = start(config)
    while state.phase is not Phase.DONE:
        point = ask(state)
        try:
            f, g = evaluator(point)
        except Exception:
            logger.exception("Evaluation failed for %s", point.values)
            evaluation = tell(state, point, (), (), status=EvaluationStatus.FAILED)
        else:
            evaluation = tell(state, point, list(f), list(g))
        if on_evaluation is not None:
            on_evaluation(evaluation)
    return state, finalize(state, nsga2)


def evaluate_predicted(result: RunResult, evaluator: Evaluator) -> ValidationReport:
    """
    Evaluate every predicted PF point with the true evaluator.

    ``errors`` are standardized distances between predicted and true
    objectives; membership counts compare the PF database against the
    evaluated PF.
    """
    entries: list[ArchiveEntry] = []
    errors: list[float] = []
    for predicted in result.predicted_pf.entries:
        f, g = evaluator(predicted.point)
        internal = np.asarray(f, dtype=float) * result.senses
        entries.append(
            ArchiveEntry(
                predicted.point,
                tuple(float(v) for v in internal),
                tuple(float(v) for v in g),
            )
        )
        gap = internal - np.asarray(predicted.objectives)
        if result.scaling is not None:
            gap = gap / result.scaling.std
        errors.append(float(np.linalg.norm(gap)))
    evaluated = ParetoArchive(entries, ref_point=result.ref_point)
    evaluated_pf = ParetoArchive(
        [entries[i] for i in evaluated.nondominated], ref_point=result.ref_point
    )
    n = result.senses.shape[0]
    membership = proximity_report(
        _front_matrix(result.pf_database, n),
        _front_matrix(evaluated_pf, n),
        result.scaling,
    )
    logger.info("Evaluated predicted front: %s", membership.summary("evaluated"))
    return ValidationReport(
        evaluated_pf=evaluated_pf,
        evaluated=evaluated,
        errors=tuple(errors),
        membership=membership,
    )

