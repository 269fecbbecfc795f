"""
Analytic benchmark problems.

The mixed-variable problems are cheap smooth analogues of aircraft retrofit,
aircraft family and supply-chain studies: they keep the shape of those
design spaces (variable kinds, level counts, activity rules, number of
objectives and constraints) but none of their physics.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from functools import cache

import numpy as np
import numpy.typing as npt
from scipy.integrate import quad

from segomoe.design_space import (
    ActivityRule,
    DesignSpace,
    MixedPoint,
    VariableKind,
    VariableSpec,
)
from segomoe.pareto import nondominated_filter

FloatArray = npt.NDArray[np.float64]

Function = Callable[[MixedPoint], tuple[list[float], list[float]]]


@dataclass(frozen=True)
class AnalyticFront:
    """
    Bi-objective front ``f2 = curve(f1)`` for ``f1`` in ``[start, stop]``,
    ``curve`` decreasing.
    """

    curve: Callable[[float], float]
    start: float
    stop: float

    def sample(self, count: int) -> FloatArray:
        f1 = np.linspace(self.start, self.stop, count)
        return np.column_stack([f1, [self.curve(v) for v in f1]])

    def hypervolume(self, R: Sequence[float]) -> float:
        area, _ = quad(lambda x: R[1] - self.curve(x), self.start, self.stop)
        return float(area + (R[0] - self.stop) * (R[1] - self.curve(self.stop)))

    def distance(self, f: Sequence[float]) -> float:
        """
        Euclidean distance from ``f`` to the curve, on a dense sample.
        """
        return float(np.min(np.linalg.norm(self.sample(2001) - np.asarray(f), axis=1)))


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    space: DesignSpace
    function: Function
    n_objectives: int
    n_constraints: int = 0
    maximize: tuple[bool, ...] = ()
    known_front: AnalyticFront | None = None
    description: str = ""

    def evaluate(self, point: MixedPoint) -> tuple[list[float], list[float]]:
        return self.function(point)

    __call__ = evaluate

    @property
    def enumerable(self) -> bool:
        return all(v.kind is not VariableKind.CONTINUOUS for v in self.space.variables)

    @property
    def n_configurations(self) -> int:
        if not self.enumerable:
            raise ValueError(f"{self.name} has continuous variables")
        total = 1
        for spec in self.space.variables:
            if spec.kind is VariableKind.CATEGORICAL:
                total *= spec.width
            else:
                low, high = spec.integer_range
                total *= high - low + 1
        return total

    def enumerate(self) -> Iterator[tuple[MixedPoint, list[float], list[float]]]:
        """
        Every configuration of a discrete space with its evaluation.

        Configurations that only differ in inactive variables are yielded once.
        """
        if not self.enumerable:
            raise ValueError(f"{self.name} has continuous variables")
        axes: list[range] = []
        for spec in self.space.variables:
            if spec.kind is VariableKind.CATEGORICAL:
                axes.append(range(spec.width))
            else:
                low, high = spec.integer_range
                axes.append(range(low, high + 1))
        seen: set[tuple[float | int, ...]] = set()
        for values in itertools.product(*axes):
            point = self.space.point(list(values))
            if point.values in seen:
                continue
            seen.add(point.values)
            f, g = self.evaluate(point)
            yield point, f, g

    def pareto_front(self) -> tuple[list[MixedPoint], FloatArray]:
        """
        Feasible nondominated set of the full enumeration, in user sense.
        """
        senses = np.array([-1.0 if flag else 1.0 for flag in self.maximize or ()])
        points: list[MixedPoint] = []
        rows: list[list[float]] = []
        for point, f, g in self.enumerate():
            if all(value <= 0.0 for value in g):
                points.append(point)
                rows.append(f)
        if not rows:
            return [], np.empty((0, self.n_objectives))
        F = np.asarray(rows, dtype=float)
        internal = F * senses if senses.size else F
        keep = nondominated_filter(internal)
        return [points[i] for i in keep], F[keep]


def continuous(name: str, lower: float, upper: float, **kwargs: ActivityRule) -> VariableSpec:
    return VariableSpec(name, VariableKind.CONTINUOUS, bounds=(lower, upper), **kwargs)


def categorical(name: str, levels: Sequence[str]) -> VariableSpec:
    return VariableSpec(name, VariableKind.CATEGORICAL, levels=tuple(levels))


# zdt1


def _zdt1(point: MixedPoint) -> tuple[list[float], list[float]]:
    x = np.asarray(point.values, dtype=float)
    g = 1.0 + 9.0 * float(np.mean(x[1:]))
    f1 = float(x[0])
    return [f1, g * (1.0 - np.sqrt(f1 / g))], []


def zdt1(n_variables: int = 5) -> BenchmarkProblem:
    space = DesignSpace(
        tuple(continuous(f"x{i + 1}", 0.0, 1.0) for i in range(n_variables)),
        name="zdt1",
    )
    return BenchmarkProblem(
        name="zdt1",
        space=space,
        function=_zdt1,
        n_objectives=2,
        known_front=AnalyticFront(lambda f1: 1.0 - np.sqrt(f1), 0.0, 1.0),
        description="ZDT1, continuous bi-objective, convex front f2 = 1 - sqrt(f1)",
    )


# bnh


def _bnh(point: MixedPoint) -> tuple[list[float], list[float]]:
    x1, x2 = (float(v) for v in point.values)
    f = [4 * x1**2 + 4 * x2**2, (x1 - 5) ** 2 + (x2 - 5) ** 2]
    g = [(x1 - 5) ** 2 + x2**2 - 25, 7.7 - (x1 - 8) ** 2 - (x2 + 3) ** 2]
    return f, g


def bnh() -> BenchmarkProblem:
    return BenchmarkProblem(
        name="bnh",
        space=DesignSpace(
            (continuous("x1", 0.0, 5.0), continuous("x2", 0.0, 3.0)), name="bnh"
        ),
        function=_bnh,
        n_objectives=2,
        n_constraints=2,
        description="Binh and Korn, constrained bi-objective",
    )


# mixed-retrofit-toy

OBS_LEVELS = ("CONV", "MEA1", "MEA2", "AEA")
_ELECTRIFICATION = np.array([0.0, 0.3, 0.55, 0.85])
_SYSTEM_COST = np.array([0.0, 0.2, 0.45, 0.9])


def _retrofit(point: MixedPoint) -> tuple[list[float], list[float]]:
    bpr, engine_x, engine_z, obs = point.values
    u1 = (float(bpr) - 9.0) / 6.0
    u2 = (float(engine_x) + 0.98) / 0.18
    u3 = (float(engine_z) + 0.39) / 0.18
    a = _ELECTRIFICATION[int(obs)]
    b = _SYSTEM_COST[int(obs)]
    fuel = 1.0 + 0.5 * (u1 - 0.7) ** 2 + 0.2 * (u2 - 0.5) ** 2 + 0.1 * u3**2 - 0.15 * a
    mtow = 1.0 + 0.4 * u1 + 0.25 * a + 0.05 * u2 + 0.05 * np.sin(np.pi * u3)
    sar = 1.0 + 0.3 * u1 - 0.4 * (u1 - 0.6) ** 2 + 0.1 * a - 0.1 * (u3 - 0.5) ** 2
    cost = 1.0 + 0.2 * u1**2 + 0.3 * b + 0.1 * u2
    takeoff = 0.2 * u1 + 0.3 * a - 0.45
    climb = 0.35 - 0.3 * u1 * (1.0 - 0.5 * a) - 0.2 * u2
    clearance = u3 - 0.9 - 0.1 * u2
    span = 0.3 * u2 + 0.2 * a - 0.6
    return [fuel, mtow, float(sar), cost], [takeoff, climb, clearance, span]


def mixed_retrofit_toy() -> BenchmarkProblem:
    space = DesignSpace(
        (
            continuous("bpr", 9.0, 15.0),
            continuous("engine_x", -0.98, -0.80),
            continuous("engine_z", -0.39, -0.21),
            categorical("obs", OBS_LEVELS),
        ),
        name="mixed-retrofit-toy",
    )
    return BenchmarkProblem(
        name="mixed-retrofit-toy",
        space=space,
        function=_retrofit,
        n_objectives=4,
        n_constraints=4,
        maximize=(False, False, True, False),
        description="3 continuous + 1 categorical(4), 4 objectives, 4 constraints",
    )


# mixed-family-toy

COMMONALITIES = (
    "engine_12",
    "engine_23",
    "wing_12",
    "wing_23",
    "gear_12",
    "gear_23",
    "obs_12",
    "obs_23",
    "empennage_13",
    "empennage_32",
)
SHARED_LEVELS = ("distinct", "shared")
_IDEAL_SWEEP = (32.0, 36.0, 40.0)
_IDEAL_SPAR = (0.74, 0.77, 0.80)
_IDEAL_THICKNESS = (0.10, 0.085, 0.07)


def _family(point: MixedPoint) -> tuple[list[float], list[float]]:
    values = point.values
    shared = {name: int(values[i]) == 1 for i, name in enumerate(COMMONALITIES)}
    wings = [
        tuple(float(v) for v in values[10 + 3 * k : 13 + 3 * k]) for k in range(3)
    ]
    # a shared wing takes the parameters of the aircraft it is shared with
    if shared["wing_12"]:
        wings[1] = wings[0]
    if shared["wing_23"]:
        wings[2] = wings[1]
    fuel = 0.0
    for k, (sweep, spar, thickness) in enumerate(wings):
        fuel += 1.0 + 0.5 * ((sweep - _IDEAL_SWEEP[k]) / 12.0) ** 2
        fuel += 0.3 * ((spar - _IDEAL_SPAR[k]) / 0.1) ** 2
        fuel += 0.4 * ((thickness - _IDEAL_THICKNESS[k]) / 0.05) ** 2
    other_shared = sum(shared[name] for name in COMMONALITIES if "wing" not in name)
    fuel += 0.04 * other_shared
    cost = 3.0 - 0.2 * sum(shared.values()) + 0.1 * sum(w[1] for w in wings)
    thickness_limit = 0.068 - wings[2][2] + 0.0005 * (42.0 - wings[2][0])
    spar_limit = wings[0][1] - 0.80
    return [fuel, cost], [thickness_limit, spar_limit]


def mixed_family_toy() -> BenchmarkProblem:
    variables: list[VariableSpec] = [categorical(n, SHARED_LEVELS) for n in COMMONALITIES]
    for wing in (1, 2, 3):
        rule = None
        if wing == 2:
            rule = ActivityRule("wing_12", ("distinct",))
        elif wing == 3:
            rule = ActivityRule("wing_23", ("distinct",))
        extra = {} if rule is None else {"active_when": rule}
        variables += [
            continuous(f"sweep_{wing}", 30.0, 42.0, **extra),
            continuous(f"rear_spar_{wing}", 0.72, 0.82, **extra),
            continuous(f"thickness_{wing}", 0.06, 0.11, **extra),
        ]
    return BenchmarkProblem(
        name="mixed-family-toy",
        space=DesignSpace(tuple(variables), name="mixed-family-toy"),
        function=_family,
        n_objectives=2,
        n_constraints=2,
        description="10 binary commonality choices + 9 wing variables with activity",
    )


# cat-supply-toy

N_SITES = 21
PROCESS_LEVELS = (6, 5, 4, 5)
SMALL_SITES = ((0, 3, 7, 12), (1, 5, 9, 14), (2, 6, 11, 17), (4, 8, 13, 20))
SMALL_PROCESSES = ((0, 2), (1, 3), (0, 2), (1, 4))


@dataclass(frozen=True)
class _SupplyTables:
    site: FloatArray  # (sites, 5): cost, time, quality, co2, risk
    process: tuple[FloatArray, ...]  # per part (levels, 5)
    distance: FloatArray
    capability: tuple[npt.NDArray[np.bool_], ...]  # per part (sites, levels)


@cache
def _supply_tables() -> _SupplyTables:
    rng = np.random.default_rng(20240521)
    site = rng.uniform(0.5, 1.5, size=(N_SITES, 5))
    process = tuple(rng.uniform(0.6, 1.4, size=(levels, 5)) for levels in PROCESS_LEVELS)
    locations = rng.uniform(0.0, 1.0, size=(N_SITES, 2))
    distance = np.linalg.norm(locations[:, None, :] - locations[None, :, :], axis=2)
    capability = tuple(
        rng.random((N_SITES, levels)) < 0.8 for levels in PROCESS_LEVELS
    )
    # the reduced catalog is always manufacturable with its first process
    for part, sites in enumerate(SMALL_SITES):
        capability[part][list(sites), SMALL_PROCESSES[part][0]] = True
    return _SupplyTables(site, process, distance, capability)


def _supply_objectives(
    sites: Sequence[int], processes: Sequence[int]
) -> tuple[list[float], list[float]]:
    tables = _supply_tables()
    totals = np.zeros(5)
    for part, (s, p) in enumerate(zip(sites, processes)):
        totals += tables.site[s] * tables.process[part][p]
    transport = sum(tables.distance[sites[k], sites[k + 1]] for k in range(3))
    cost, lead_time, quality, co2, risk = totals
    lead_time += 2.0 * transport
    co2 += 1.5 * transport
    risk += 0.5 * (4 - len(set(sites)))
    quality = 8.0 - quality
    unavailable = sum(
        not tables.capability[part][s, p]
        for part, (s, p) in enumerate(zip(sites, processes))
    )
    overload = sum(max(sites.count(s) - 2, 0) for s in set(sites))
    return (
        [float(cost), float(lead_time), float(quality), float(co2), float(risk)],
        [float(unavailable), float(overload)],
    )


def _supply(point: MixedPoint) -> tuple[list[float], list[float]]:
    values = [int(v) for v in point.values]
    return _supply_objectives(values[:4], values[4:])


def _supply_small(point: MixedPoint) -> tuple[list[float], list[float]]:
    values = [int(v) for v in point.values]
    sites = [SMALL_SITES[part][v] for part, v in enumerate(values[:4])]
    processes = [SMALL_PROCESSES[part][v] for part, v in enumerate(values[4:])]
    return _supply_objectives(sites, processes)


_SUPPLY_MAXIMIZE = (False, False, True, False, False)


def cat_supply_toy() -> BenchmarkProblem:
    labels = [f"S{i + 1:02d}" for i in range(N_SITES)]
    variables = [categorical(f"site_{part + 1}", labels) for part in range(4)]
    variables += [
        categorical(f"process_{part + 1}", [f"P{k + 1}" for k in range(levels)])
        for part, levels in enumerate(PROCESS_LEVELS)
    ]
    return BenchmarkProblem(
        name="cat-supply-toy",
        space=DesignSpace(tuple(variables), name="cat-supply-toy"),
        function=_supply,
        n_objectives=5,
        n_constraints=2,
        maximize=_SUPPLY_MAXIMIZE,
        description="8 categoricals (21,21,21,21,6,5,4,5), 5 objectives, 2 masks",
    )


def cat_supply_toy_small() -> BenchmarkProblem:
    variables = [
        categorical(f"site_{part + 1}", [f"S{s + 1:02d}" for s in sites])
        for part, sites in enumerate(SMALL_SITES)
    ]
    variables += [
        categorical(f"process_{part + 1}", [f"P{p + 1}" for p in processes])
        for part, processes in enumerate(SMALL_PROCESSES)
    ]
    return BenchmarkProblem(
        name="cat-supply-toy-small",
        space=DesignSpace(tuple(variables), name="cat-supply-toy-small"),
        function=_supply_small,
        n_objectives=5,
        n_constraints=2,
        maximize=_SUPPLY_MAXIMIZE,
        description="cat-supply-toy restricted to 4 sites and 2 processes per part",
    )


def builtin_problems() -> dict[str, BenchmarkProblem]:
    problems = [
        zdt1(),
        bnh(),
        mixed_retrofit_toy(),
        mixed_family_toy(),
        cat_supply_toy(),
        cat_supply_toy_small(),
    ]
    return {problem.name: problem for problem in problems}


def get_problem(name: str) -> BenchmarkProblem:
    catalog = builtin_problems()
    try:
        return catalog[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}") from None
