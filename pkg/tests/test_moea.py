from __future__ import annotations

import numpy as np
import pytest
from django.test import SimpleTestCase

from segomoe.design_space import DesignSpace, encode, encode_many
from segomoe.exceptions import ConfigurationError
from segomoe.moea import (
    FunctionProblem,
    Nsga2Config,
    SurrogateProblem,
    crowding_distance,
    evolve,
    fast_nondominated_sort,
    polynomial_mutation,
    sbx_crossover,
)
from segomoe.pareto import hypervolume, nondominated_filter
from segomoe.problems import bnh, continuous, zdt1
from segomoe.surrogate import fit_multi
from tests.utils import small_mixed_space


def brute_force_first_front(F: np.ndarray) -> list[int]:
    return [
        i
        for i in range(F.shape[0])
        if not any(
            np.all(F[j] <= F[i]) and np.any(F[j] < F[i]) for j in range(F.shape[0])
        )
    ]


def single_optimum_problem() -> tuple[FunctionProblem, DesignSpace]:
    space = DesignSpace((continuous("x", 0.0, 1.0), continuous("y", 0.0, 1.0)))

    def function(point):
        x, y = point.values
        distance = (x - 0.3) ** 2 + (y - 0.7) ** 2
        return [distance, 2.0 * distance + 1.0], []

    return FunctionProblem(function, n_objectives=2), space


class NondominatedSortTests(SimpleTestCase):
    def test_chain(self):
        assert fast_nondominated_sort([(1, 1), (2, 2), (3, 3)]) == [[0], [1], [2]]

    def test_incomparable(self):
        assert fast_nondominated_sort([(1, 3), (2, 2), (3, 1)]) == [[0, 1, 2]]

    def test_duplicates_share_a_front(self):
        assert fast_nondominated_sort([(1, 2), (1, 2), (2, 3)]) == [[0, 1], [2]]

    def test_copies_ranked_together_but_filtered_once(self):
        F = [(1, 2), (2, 1), (1, 2)]
        front = fast_nondominated_sort(F)[0]
        assert front == [0, 1, 2]
        assert nondominated_filter(F) == [0, 1]
        distance = crowding_distance([F[i] for i in front])
        assert np.all(np.isinf(distance[:2]))
        assert distance[2] == 0.0

    def test_first_front_matches_oracle(self):
        F = np.random.default_rng(0).random((100, 2))
        fronts = fast_nondominated_sort(F)
        assert fronts[0] == brute_force_first_front(F)
        assert sorted(i for front in fronts for i in front) == list(range(100))

    def test_fronts_are_ordered(self):
        F = np.random.default_rng(1).random((60, 3))
        fronts = fast_nondominated_sort(F)
        for upper, lower in zip(fronts, fronts[1:]):
            for j in lower:
                assert any(
                    np.all(F[i] <= F[j]) and np.any(F[i] < F[j]) for i in upper
                )

    def test_feasible_beats_infeasible(self):
        fronts = fast_nondominated_sort([(5, 5), (0, 0), (1, 1)], [0.0, 2.0, 1.0])
        assert fronts == [[0], [2], [1]]

    def test_empty(self):
        assert fast_nondominated_sort(np.empty((0, 2))) == []


class CrowdingDistanceTests(SimpleTestCase):
    def test_two_points(self):
        assert np.all(np.isinf(crowding_distance([(0, 1), (1, 0)])))

    def test_evenly_spaced_line(self):
        distance = crowding_distance([(0, 2), (1, 1), (2, 0)])
        assert np.isinf(distance[0]) and np.isinf(distance[2])
        assert distance[1] == pytest.approx(2.0)

    def test_duplicates_get_zero(self):
        distance = crowding_distance([(0, 2), (1, 1), (1, 1), (2, 0)])
        assert distance[1] == pytest.approx(2.0)
        assert distance[2] == 0.0

    def test_single_point(self):
        assert np.isinf(crowding_distance([(0.5, 0.5)])[0])


class OperatorTests(SimpleTestCase):
    def test_crossover_stays_in_bounds(self):
        rng = np.random.default_rng(2)
        lower, upper = np.zeros(4), np.ones(4)
        for _ in range(200):
            first, second = rng.random(4), rng.random(4)
            for child in sbx_crossover(first, second, lower, upper, 15.0, rng):
                assert np.all(child >= lower) and np.all(child <= upper)

    def test_crossover_of_identical_parents(self):
        rng = np.random.default_rng(3)
        parent = np.array([0.2, 0.4])
        first, second = sbx_crossover(parent, parent, np.zeros(2), np.ones(2), 15.0, rng)
        assert first.tolist() == second.tolist() == parent.tolist()

    def test_mutation_stays_in_bounds(self):
        rng = np.random.default_rng(4)
        lower, upper = np.array([-1.0, 0.0]), np.array([1.0, 10.0])
        for _ in range(200):
            x = lower + rng.random(2) * (upper - lower)
            mutant = polynomial_mutation(x, lower, upper, 20.0, 1.0, rng)
            assert np.all(mutant >= lower) and np.all(mutant <= upper)

    def test_mutation_probability_zero(self):
        rng = np.random.default_rng(5)
        x = np.array([0.3, 0.6])
        assert polynomial_mutation(x, np.zeros(2), np.ones(2), 20.0, 0.0, rng).tolist() == [
            0.3,
            0.6,
        ]


class ConfigTests(SimpleTestCase):
    def test_population_must_be_even(self):
        with pytest.raises(ConfigurationError):
            Nsga2Config(population_size=11)

    def test_negative_generations(self):
        with pytest.raises(ConfigurationError):
            Nsga2Config(generations=-1)

    def test_to_dict(self):
        assert Nsga2Config(population_size=20, seed=3).to_dict()["population_size"] == 20


class EvolveTests(SimpleTestCase):
    @pytest.mark.slow
    def test_zdt1_front(self):
        problem = zdt1()
        assert problem.known_front is not None
        R = (1.1, 1.1)
        front = evolve(
            FunctionProblem(problem.evaluate, n_objectives=2),
            problem.space,
            Nsga2Config(population_size=100, generations=150, seed=0),
        )
        analytic = problem.known_front.hypervolume(R)
        assert analytic == pytest.approx(0.1 + 2.0 / 3.0 + 0.11)
        assert hypervolume(front.front(), R) >= 0.97 * analytic

    def test_collapses_to_single_optimum(self):
        problem, space = single_optimum_problem()
        front = evolve(problem, space, Nsga2Config(population_size=20, generations=100))
        assert front.entries
        for entry in front.entries:
            x, y = entry.point.values
            assert abs(x - 0.3) <= 1e-2
            assert abs(y - 0.7) <= 1e-2

    def test_deterministic(self):
        problem, space = single_optimum_problem()
        config = Nsga2Config(population_size=12, generations=10, seed=4)
        first = evolve(problem, space, config)
        second = evolve(problem, space, config)
        assert first.front().tolist() == second.front().tolist()
        assert [e.point for e in first.entries] == [e.point for e in second.entries]

    def test_constrained_front_is_feasible(self):
        problem = bnh()
        front = evolve(
            FunctionProblem(problem.evaluate, n_objectives=2, n_constraints=2),
            problem.space,
            Nsga2Config(population_size=40, generations=30, seed=5),
        )
        assert front.entries
        assert all(entry.feasible for entry in front.entries)
        assert front.ref_point is not None

    def test_mixed_individuals_are_valid_points(self):
        space = small_mixed_space()

        def function(point):
            x, n, c, y = point.values
            return [x + 0.1 * n + 0.2 * c, (1.0 - x) + y**2], [0.5 - x - y]

        front = evolve(
            FunctionProblem(function, n_objectives=2, n_constraints=1),
            space,
            Nsga2Config(population_size=16, generations=10, seed=6),
        )
        for entry in front.entries:
            assert space.point(list(entry.point.values)) == entry.point
            assert entry.constraints[0] <= 0.0

    def test_initial_population_is_used(self):
        problem, space = single_optimum_problem()
        optimum = encode(space, space.point([0.3, 0.7])).coords
        front = evolve(
            problem,
            space,
            Nsga2Config(population_size=8, generations=0),
            initial=optimum[None, :],
        )
        assert [entry.point.values for entry in front.entries] == [(0.3, 0.7)]

    def test_surrogate_problem(self):
        space = DesignSpace((continuous("x", 0.0, 1.0),))
        X = np.linspace(0.0, 1.0, 7)[:, None]
        F = np.column_stack([X[:, 0], (1.0 - X[:, 0]) ** 2])
        surrogate = fit_multi(X, F, None)
        problem = SurrogateProblem(surrogate, space)
        assert problem.n_objectives == 2
        assert problem.n_constraints == 0
        front = evolve(problem, space, Nsga2Config(population_size=12, generations=10))
        values = front.objectives()
        assert nondominated_filter(values) == list(range(len(front.entries)))
        means, _ = surrogate.predict_objectives(
            encode_many(space, [e.point for e in front.entries])
        )
        np.testing.assert_allclose(values, means)
