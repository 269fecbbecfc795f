"""
Inner optimization: maximize the acquisition over the relaxed box subject to
the surrogate constraint means being nonpositive.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.optimize import minimize

from segomoe import defaults
from segomoe.acquisition import AcquisitionConfig, AcquisitionFunction, ObjectiveScaling
from segomoe.design_space import (
    DesignSpace,
    RelaxedVector,
    decode,
    encode,
    lhs_sample,
    lhs_unit,
)
from segomoe.surrogate import MultiOutputSurrogate

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


@dataclass
class InfillProblem:
    objective: Callable[[FloatArray], float]
    lower: FloatArray
    upper: FloatArray
    constraints: Callable[[FloatArray], FloatArray] | None = None
    # Encoded archive points used as additional (perturbed) starts.
    archive_points: FloatArray | None = None
    tolerance: float = defaults.constraint_tolerance
    max_iterations: int = defaults.infill_max_iterations

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("infill bounds must be finite")

    def violation(self, x: FloatArray) -> float:
        if self.constraints is None:
            return 0.0
        return float(np.sum(np.maximum(self.constraints(x), 0.0)))

    def is_feasible(self, x: FloatArray) -> bool:
        if self.constraints is None:
            return True
        return bool(np.all(self.constraints(x) <= self.tolerance))


@dataclass(frozen=True)
class InfillResult:
    x: FloatArray
    value: float
    feasible: bool


def build_infill_problem(
    surrogate: MultiOutputSurrogate,
    config: AcquisitionConfig,
    space: DesignSpace,
    front: FloatArray,
    R: FloatArray,
    scaling: ObjectiveScaling | None = None,
    archive_points: FloatArray | None = None,
) -> InfillProblem:
    acquisition = AcquisitionFunction(config, front, R, scaling)

    def objective(x: FloatArray) -> float:
        means, sigmas = surrogate.predict_objectives(x)
        return acquisition(means[0], sigmas[0])

    constraints = None
    if surrogate.n_constraints:

        def constraints(x: FloatArray) -> FloatArray:
            return surrogate.constraint_means(x)[0]

    lower, upper = space.relaxed_bounds
    return InfillProblem(
        objective=objective,
        lower=lower,
        upper=upper,
        constraints=constraints,
        archive_points=archive_points,
    )


def _starts(problem: InfillProblem, n_starts: int, rng: np.random.Generator) -> FloatArray:
    width = problem.upper - problem.lower
    archive = problem.archive_points
    n_archive = 0
    if archive is not None and archive.shape[0]:
        n_archive = min(defaults.infill_archive_starts, archive.shape[0], n_starts - 1)
    unit = lhs_unit(width.shape[0], n_starts - n_archive, rng)
    starts = [problem.lower + unit * width]
    if n_archive:
        assert archive is not None
        chosen = archive[:n_archive]
        jitter = rng.normal(scale=0.05, size=chosen.shape) * width
        starts.append(np.clip(chosen + jitter, problem.lower, problem.upper))
    return np.vstack(starts)


def solve(
    problem: InfillProblem,
    n_starts: int = defaults.infill_starts,
    seed: int = 0,
) -> InfillResult:
    """
    Multistart COBYLA from Latin hypercube and perturbed archive starts.

    Returns the best iterate satisfying the constraints, or the one with the
    least total violation if none does.
    """
    rng = np.random.default_rng(seed)
    width = np.where(problem.upper > problem.lower, problem.upper - problem.lower, 1.0)

    def to_box(z: FloatArray) -> FloatArray:
        return np.clip(problem.lower + np.asarray(z) * width, problem.lower, problem.upper)

    constraints = []
    if problem.constraints is not None:
        surrogate_constraints = problem.constraints
        constraints.append(
            {
                "type": "ineq",
                "fun": lambda z: problem.tolerance - surrogate_constraints(to_box(z)),
            }
        )

    results: list[tuple[FloatArray, float, float]] = []
    for start in _starts(problem, max(n_starts, 1), rng):
        z0 = (start - problem.lower) / width
        outcome = minimize(
            lambda z: -problem.objective(to_box(z)),
            z0,
            method="COBYLA",
            constraints=constraints,
            bounds=[(0.0, 1.0)] * z0.shape[0],
            options={"maxiter": problem.max_iterations, "rhobeg": 0.1, "tol": 1e-6},
        )
        x = to_box(outcome.x)
        results.append((x, problem.objective(x), problem.violation(x)))

    feasible = [
        index for index, (x, _, _) in enumerate(results) if problem.is_feasible(x)
    ]
    if feasible:
        # max() keeps the lowest start index among ties
        best = max(feasible, key=lambda index: results[index][1])
        x, value, _ = results[best]
        return InfillResult(x, value, True)
    logger.warning("No surrogate-feasible infill point, using least violation")
    best = min(range(len(results)), key=lambda index: results[index][2])
    x, value, _ = results[best]
    return InfillResult(x, value, False)


def _collides(row: FloatArray, X_train: FloatArray) -> bool:
    if X_train.shape[0] == 0:
        return False
    distances = np.linalg.norm(X_train - row, axis=1)
    return bool(np.min(distances) <= defaults.duplicate_tolerance)


def dedup_guard(
    candidate: RelaxedVector | npt.ArrayLike,
    X_train: npt.ArrayLike,
    space: DesignSpace,
    *,
    seed: int = 0,
    feasible: Callable[[FloatArray], bool] | None = None,
    draws: int = defaults.dedup_draws,
) -> tuple[FloatArray, bool]:
    """
    Replace a candidate whose decoded point was already evaluated.

    Returns the (possibly replaced) relaxed vector and an ``exhausted`` flag,
    set when every draw also collides.
    """
    coords = np.asarray(
        candidate.coords if isinstance(candidate, RelaxedVector) else candidate,
        dtype=float,
    )
    train = np.atleast_2d(np.asarray(X_train, dtype=float))
    decoded = encode(space, decode(space, coords)).coords
    if not _collides(decoded, train):
        return coords, False

    lower, upper = space.relaxed_bounds
    width = np.where(upper > lower, upper - lower, 1.0)
    pool = [encode(space, p).coords for p in lhs_sample(space, draws, seed)]
    fresh = [row for row in pool if not _collides(row, train)]
    if not fresh:
        logger.warning("Every replacement candidate was already evaluated")
        return coords, True
    preferred = [row for row in fresh if feasible is None or feasible(row)] or fresh
    scaled_train = train / width

    def spacing(row: FloatArray) -> float:
        return float(np.min(np.linalg.norm(scaled_train - row / width, axis=1)))

    best = max(range(len(preferred)), key=lambda index: spacing(preferred[index]))
    return preferred[best], False
