"""
NSGA-II over mixed design spaces.

Individuals live in the relaxed space; SBX crossover and polynomial mutation
act on relaxed coordinates and every individual is decoded to a valid
``MixedPoint`` before evaluation. Constraints use the constrained-domination
rule: a feasible individual beats an infeasible one, two infeasible ones are
compared by total violation.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import numpy.typing as npt

from segomoe import defaults
from segomoe.design_space import (
    DesignSpace,
    MixedPoint,
    decode,
    encode_many,
    lhs_sample,
    relaxed_dimension,
)
from segomoe.exceptions import ConfigurationError
from segomoe.pareto import ArchiveEntry, ParetoArchive
from segomoe.surrogate import MultiOutputSurrogate

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True)
class Nsga2Config:
    population_size: int = defaults.population_size
    generations: int = defaults.generations
    crossover_probability: float = defaults.crossover_probability
    crossover_eta: float = defaults.crossover_eta
    # None means 1 / relaxed dimension.
    mutation_probability: float | None = None
    mutation_eta: float = defaults.mutation_eta
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 4 or self.population_size % 2:
            raise ConfigurationError("population_size should be even and >= 4")
        if self.generations < 0:
            raise ConfigurationError("generations should be >= 0")
        if not 0.0 <= self.crossover_probability <= 1.0:
            raise ConfigurationError("crossover_probability should be in [0, 1]")
        if self.mutation_probability is not None and not (
            0.0 <= self.mutation_probability <= 1.0
        ):
            raise ConfigurationError("mutation_probability should be in [0, 1]")
        if not (self.crossover_eta > 0 and self.mutation_eta > 0):
            raise ConfigurationError("distribution indices should be > 0")

    def to_dict(self) -> dict[str, object]:
        return {
            "population_size": self.population_size,
            "generations": self.generations,
            "crossover_probability": self.crossover_probability,
            "crossover_eta": self.crossover_eta,
            "mutation_probability": self.mutation_probability,
            "mutation_eta": self.mutation_eta,
            "seed": self.seed,
        }


class MoeaProblem(Protocol):
    n_objectives: int
    n_constraints: int

    def evaluate(self, points: Sequence[MixedPoint]) -> tuple[FloatArray, FloatArray]:
        """
        Objectives ``(N, n)`` and constraints ``(N, m)``, all minimized / <= 0.
        """
        ...


@dataclass
class FunctionProblem:
    """
    Wraps a per-point callable returning ``(f, g)``.
    """

    function: Callable[[MixedPoint], tuple[Sequence[float], Sequence[float]]]
    n_objectives: int
    n_constraints: int = 0

    def evaluate(self, points: Sequence[MixedPoint]) -> tuple[FloatArray, FloatArray]:
        F = np.empty((len(points), self.n_objectives))
        G = np.empty((len(points), self.n_constraints))
        for row, point in enumerate(points):
            f, g = self.function(point)
            F[row] = f
            G[row] = g
        return F, G


@dataclass
class SurrogateProblem:
    """
    Surrogate means as objectives and constraints.
    """

    surrogate: MultiOutputSurrogate
    space: DesignSpace

    @property
    def n_objectives(self) -> int:
        return self.surrogate.n_objectives

    @property
    def n_constraints(self) -> int:
        return self.surrogate.n_constraints

    def evaluate(self, points: Sequence[MixedPoint]) -> tuple[FloatArray, FloatArray]:
        V = encode_many(self.space, points)
        means, _ = self.surrogate.predict_objectives(V)
        return means, self.surrogate.constraint_means(V)


def _domination_matrix(
    F: FloatArray, violation: FloatArray | None = None
) -> npt.NDArray[np.bool_]:
    """
    ``dom[i, j]`` is True when individual i dominates individual j.
    """
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt
    if violation is None:
        return dom
    feasible = violation <= 0.0
    both_feasible = feasible[:, None] & feasible[None, :]
    constrained = np.where(
        both_feasible,
        dom,
        (feasible[:, None] & ~feasible[None, :])
        | (~feasible[:, None] & ~feasible[None, :] & (violation[:, None] < violation[None, :])),
    )
    return np.asarray(constrained, dtype=bool)


def fast_nondominated_sort(
    points: Sequence[Sequence[float]] | npt.ArrayLike,
    violation: Sequence[float] | FloatArray | None = None,
) -> list[list[int]]:
    """
    Partition ``points`` into ranked fronts of indices.

    With ``violation`` (total constraint violation per point) the
    constrained-domination rule is used. Identical vectors share a front; the
    duplicate convention is described in ``segomoe.pareto``.
    """
    F = np.asarray(points, dtype=float)
    if F.size == 0:
        return []
    if F.ndim == 1:
        F = F[None, :]
    dom = _domination_matrix(
        F, None if violation is None else np.asarray(violation, dtype=float)
    )
    remaining = dom.sum(axis=0)
    current = [i for i in range(F.shape[0]) if remaining[i] == 0]
    fronts: list[list[int]] = []
    while current:
        fronts.append(current)
        following: list[int] = []
        for i in current:
            for j in np.flatnonzero(dom[i]):
                remaining[j] -= 1
                if remaining[j] == 0:
                    following.append(int(j))
        current = sorted(following)
    return fronts


def crowding_distance(front: Sequence[Sequence[float]] | npt.ArrayLike) -> FloatArray:
    """
    Normalized cuboid semi-perimeter of each member; boundaries are ``inf``.

    Repeated objective vectors share the distance of their first occurrence
    and every later copy gets 0.
    """
    F = np.asarray(front, dtype=float)
    if F.ndim == 1:
        F = F[None, :]
    count = F.shape[0]
    distance = np.zeros(count)
    _, first = np.unique(F, axis=0, return_index=True)
    first = np.sort(first)
    unique = F[first]
    if unique.shape[0] <= 2:
        distance[first] = np.inf
        return distance
    crowd = np.zeros(unique.shape[0])
    for column in range(unique.shape[1]):
        order = np.argsort(unique[:, column], kind="stable")
        values = unique[order, column]
        span = values[-1] - values[0]
        crowd[order[0]] = np.inf
        crowd[order[-1]] = np.inf
        if span <= 0:
            continue
        crowd[order[1:-1]] += (values[2:] - values[:-2]) / span
    distance[first] = crowd
    return distance


def _rank_and_crowding(
    F: FloatArray, violation: FloatArray
) -> tuple[list[list[int]], npt.NDArray[np.int64], FloatArray]:
    fronts = fast_nondominated_sort(F, violation)
    rank = np.empty(F.shape[0], dtype=np.int64)
    crowd = np.zeros(F.shape[0])
    for level, members in enumerate(fronts):
        rank[members] = level
        crowd[members] = crowding_distance(F[members])
    return fronts, rank, crowd


def _tournament(
    rank: npt.NDArray[np.int64],
    crowd: FloatArray,
    count: int,
    rng: np.random.Generator,
) -> npt.NDArray[np.int64]:
    contenders = rng.integers(0, rank.shape[0], size=(count, 2))
    a, b = contenders[:, 0], contenders[:, 1]
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] >= crowd[b]))
    return np.where(a_wins, a, b)


def sbx_crossover(
    first: FloatArray,
    second: FloatArray,
    lower: FloatArray,
    upper: FloatArray,
    eta: float,
    rng: np.random.Generator,
) -> tuple[FloatArray, FloatArray]:
    """
    Bounded simulated binary crossover, each variable crossed with p = 0.5.
    """
    child1, child2 = first.copy(), second.copy()
    for i in range(first.shape[0]):
        if rng.random() > 0.5:
            continue
        if abs(first[i] - second[i]) <= 1e-14 or upper[i] <= lower[i]:
            continue
        y1, y2 = min(first[i], second[i]), max(first[i], second[i])
        u = rng.random()
        exponent = 1.0 / (eta + 1.0)

        def spread(beta: float) -> float:
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                return float((u * alpha) ** exponent)
            return float((1.0 / (2.0 - u * alpha)) ** exponent)

        low_beta = spread(1.0 + 2.0 * (y1 - lower[i]) / (y2 - y1))
        high_beta = spread(1.0 + 2.0 * (upper[i] - y2) / (y2 - y1))
        c1 = 0.5 * ((y1 + y2) - low_beta * (y2 - y1))
        c2 = 0.5 * ((y1 + y2) + high_beta * (y2 - y1))
        c1, c2 = np.clip(c1, lower[i], upper[i]), np.clip(c2, lower[i], upper[i])
        if rng.random() <= 0.5:
            c1, c2 = c2, c1
        child1[i], child2[i] = c1, c2
    return child1, child2


def polynomial_mutation(
    x: FloatArray,
    lower: FloatArray,
    upper: FloatArray,
    eta: float,
    probability: float,
    rng: np.random.Generator,
) -> FloatArray:
    mutant = x.copy()
    exponent = 1.0 / (eta + 1.0)
    for i in range(x.shape[0]):
        if rng.random() > probability or upper[i] <= lower[i]:
            continue
        width = upper[i] - lower[i]
        delta1 = (mutant[i] - lower[i]) / width
        delta2 = (upper[i] - mutant[i]) / width
        u = rng.random()
        if u < 0.5:
            value = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - delta1) ** (eta + 1.0)
            step = value**exponent - 1.0
        else:
            value = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - delta2) ** (eta + 1.0)
            step = 1.0 - value**exponent
        mutant[i] = np.clip(mutant[i] + step * width, lower[i], upper[i])
    return mutant


def _evaluate(
    problem: MoeaProblem, space: DesignSpace, genotypes: FloatArray
) -> tuple[list[MixedPoint], FloatArray, FloatArray]:
    points = [decode(space, row) for row in genotypes]
    F, G = problem.evaluate(points)
    F = np.asarray(F, dtype=float).reshape(len(points), problem.n_objectives)
    G = np.asarray(G, dtype=float).reshape(len(points), problem.n_constraints)
    return points, F, G


def _violation(G: FloatArray) -> FloatArray:
    if G.shape[1] == 0:
        return np.zeros(G.shape[0])
    return np.sum(np.maximum(G, 0.0), axis=1)


def evolve(
    problem: MoeaProblem,
    space: DesignSpace,
    config: Nsga2Config | None = None,
    *,
    initial: FloatArray | None = None,
) -> ParetoArchive:
    """
    Run NSGA-II and return the feasible nondominated set of the last population.

    ``initial`` rows (relaxed vectors) replace the first members of the Latin
    hypercube starting population.
    """
    config = config or Nsga2Config()
    size = config.population_size
    lower, upper = space.relaxed_bounds
    mutation_probability = (
        config.mutation_probability
        if config.mutation_probability is not None
        else 1.0 / relaxed_dimension(space)
    )
    rng = np.random.default_rng(config.seed)

    population = encode_many(space, lhs_sample(space, size, config.seed))
    if initial is not None and initial.size:
        seeded = np.atleast_2d(np.asarray(initial, dtype=float))[:size]
        population[: seeded.shape[0]] = np.clip(seeded, lower, upper)
    points, F, G = _evaluate(problem, space, population)
    violation = _violation(G)
    _, rank, crowd = _rank_and_crowding(F, violation)

    for generation in range(config.generations):
        parents = _tournament(rank, crowd, size, rng)
        children = np.empty_like(population)
        for k in range(0, size, 2):
            first, second = population[parents[k]], population[parents[k + 1]]
            if rng.random() <= config.crossover_probability:
                first, second = sbx_crossover(
                    first, second, lower, upper, config.crossover_eta, rng
                )
            children[k] = polynomial_mutation(
                first, lower, upper, config.mutation_eta, mutation_probability, rng
            )
            children[k + 1] = polynomial_mutation(
                second, lower, upper, config.mutation_eta, mutation_probability, rng
            )
        child_points, child_F, child_G = _evaluate(problem, space, children)

        merged = np.vstack([population, children])
        merged_points = points + child_points
        merged_F = np.vstack([F, child_F])
        merged_G = np.vstack([G, child_G])
        merged_violation = _violation(merged_G)
        fronts, _, merged_crowd = _rank_and_crowding(merged_F, merged_violation)

        survivors: list[int] = []
        for members in fronts:
            if len(survivors) + len(members) <= size:
                survivors.extend(members)
                continue
            order = np.argsort(-merged_crowd[members], kind="stable")
            survivors.extend(members[i] for i in order[: size - len(survivors)])
            break

        population = merged[survivors]
        points = [merged_points[i] for i in survivors]
        F, G = merged_F[survivors], merged_G[survivors]
        violation = merged_violation[survivors]
        _, rank, crowd = _rank_and_crowding(F, violation)
        logger.debug(
            "Generation %d: %d rank-0 individuals", generation + 1, int(np.sum(rank == 0))
        )

    final = ParetoArchive(
        [
            ArchiveEntry(point, tuple(map(float, f)), tuple(map(float, g)))
            for point, f, g in zip(points, F, G)
        ]
    )
    front = ParetoArchive([final.entries[i] for i in final.nondominated])
    front.update_reference()
    return front
