"""
Pareto dominance, archives and hypervolume.

All objectives are minimized; maximized objectives are negated before they
reach this module.

Identical objective vectors do not dominate each other. ``nondominated_filter``
keeps only the first copy, and archives and reported fronts list each vector
once. ``segomoe.moea.fast_nondominated_sort`` ranks every copy in the same
front and ``segomoe.moea.crowding_distance`` gives the later copies 0, so
survival selection discards them first.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import IO

import numpy as np
import numpy.typing as npt

from segomoe import defaults
from segomoe.design_space import MixedPoint

FloatArray = npt.NDArray[np.float64]


def _as_matrix(points: Sequence[Sequence[float]] | npt.ArrayLike, n: int | None = None) -> FloatArray:
    matrix = np.asarray(points, dtype=float)
    if matrix.size == 0:
        return np.empty((0, n if n is not None else 0))
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    return matrix


def dominates(a: Sequence[float] | FloatArray, b: Sequence[float] | FloatArray) -> bool:
    """
    Weak dominance: ``a`` is no worse than ``b`` in every objective.
    """
    left = np.asarray(a, dtype=float)
    right = np.asarray(b, dtype=float)
    if left.shape != right.shape:
        raise ValueError(
            f"objective vectors differ in length: {left.shape} vs {right.shape}"
        )
    return bool(np.all(left <= right))


def nondominated_filter(points: Sequence[Sequence[float]] | npt.ArrayLike) -> list[int]:
    """
    Indices of the points not weakly dominated by a distinct point.

    Of several identical vectors only the first occurrence is kept (see the
    module docstring).
    """
    F = _as_matrix(points)
    count = F.shape[0]
    if count == 0:
        return []
    # le[j, i]: F[j] <= F[i] componentwise
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    eq = np.all(F[:, None, :] == F[None, :, :], axis=2)
    dominated = np.any(le & ~eq, axis=0)
    earlier_copy = np.any(np.tril(eq, k=-1), axis=1)
    return [i for i in range(count) if not dominated[i] and not earlier_copy[i]]


def _relevant(front: FloatArray, R: FloatArray) -> FloatArray:
    if front.shape[0] == 0:
        return front
    inside = front[np.all(front < R, axis=1)]
    return inside[nondominated_filter(inside)] if inside.shape[0] else inside


def _hv2d(front: FloatArray, R: FloatArray) -> float:
    order = np.lexsort((front[:, 1], front[:, 0]))
    volume = 0.0
    ceiling = R[1]
    for f1, f2 in front[order]:
        if f2 < ceiling:
            volume += (R[0] - f1) * (ceiling - f2)
            ceiling = f2
    return volume


def _hv3d(front: FloatArray, R: FloatArray) -> float:
    order = np.argsort(front[:, 2], kind="stable")
    ordered = front[order]
    volume = 0.0
    for k in range(ordered.shape[0]):
        top = ordered[k + 1, 2] if k + 1 < ordered.shape[0] else R[2]
        height = top - ordered[k, 2]
        if height > 0:
            volume += height * _hv2d(ordered[: k + 1, :2], R[:2])
    return volume


def _dominated_mask(front: FloatArray, samples: FloatArray, chunk: int = 4096) -> npt.NDArray[np.bool_]:
    mask = np.zeros(samples.shape[0], dtype=bool)
    for start in range(0, samples.shape[0], chunk):
        block = samples[start : start + chunk]
        mask[start : start + chunk] = np.any(
            np.all(front[None, :, :] <= block[:, None, :], axis=2), axis=1
        )
    return mask


def _box_fraction(
    front: FloatArray,
    lower: FloatArray,
    upper: FloatArray,
    samples: int,
    seed: int,
) -> tuple[float, float]:
    """
    Monte-Carlo estimate of the dominated volume of a box, with standard error.
    """
    rng = np.random.default_rng(seed)
    box = float(np.prod(upper - lower))
    draws = lower + rng.random((samples, lower.shape[0])) * (upper - lower)
    fraction = float(np.mean(_dominated_mask(front, draws)))
    error = box * math.sqrt(fraction * (1.0 - fraction) / samples)
    return box * fraction, error


def hypervolume_estimate(
    front: Sequence[Sequence[float]] | npt.ArrayLike,
    R: Sequence[float] | FloatArray,
    *,
    samples: int = defaults.hypervolume_mc_samples,
    seed: int = defaults.hypervolume_mc_seed,
) -> tuple[float, float]:
    """
    Hypervolume dominated by ``front`` up to ``R`` and its standard error.

    Exact (zero error) for up to three objectives, seeded Monte-Carlo beyond.
    """
    ref = np.asarray(R, dtype=float)
    if ref.ndim != 1 or ref.shape[0] == 0:
        raise ValueError("hypervolume needs at least one objective")
    points = _relevant(_as_matrix(front, ref.shape[0]), ref)
    if points.shape[0] == 0:
        return 0.0, 0.0
    n = ref.shape[0]
    if n == 1:
        return float(ref[0] - points[:, 0].min()), 0.0
    if n == 2:
        return _hv2d(points, ref), 0.0
    if n == 3:
        return _hv3d(points, ref), 0.0
    return _box_fraction(points, points.min(axis=0), ref, samples, seed)


def hypervolume(
    front: Sequence[Sequence[float]] | npt.ArrayLike,
    R: Sequence[float] | FloatArray,
) -> float:
    return hypervolume_estimate(front, R)[0]


def hypervolume_improvement(
    front: Sequence[Sequence[float]] | npt.ArrayLike,
    R: Sequence[float] | FloatArray,
    candidate: Sequence[float] | FloatArray,
) -> float:
    ref = np.asarray(R, dtype=float)
    point = np.asarray(candidate, dtype=float)
    points = _relevant(_as_matrix(front, ref.shape[0]), ref)
    if not np.all(point < ref):
        return 0.0
    if points.shape[0] and np.any(np.all(points <= point, axis=1)):
        return 0.0
    if ref.shape[0] <= 3:
        with_candidate = np.vstack([points, point[None, :]])
        gain = hypervolume(with_candidate, ref) - hypervolume(points, ref)
        return max(gain, 0.0)
    # The improvement is the part of [candidate, R] not dominated by the front.
    clipped = np.maximum(points, point) if points.shape[0] else points
    box = float(np.prod(ref - point))
    if clipped.shape[0] == 0:
        return box
    covered, _ = _box_fraction(
        clipped, point, ref, defaults.hypervolume_mc_samples, defaults.hypervolume_mc_seed
    )
    return max(box - covered, 0.0)


def nondominated_boxes(
    front: Sequence[Sequence[float]] | npt.ArrayLike,
    R: Sequence[float] | FloatArray,
) -> tuple[FloatArray, FloatArray]:
    """
    Disjoint boxes covering the region below ``R`` not dominated by ``front``.

    Lower corners may be ``-inf``. Returned as ``(lower, upper)`` arrays of
    shape ``(n_boxes, n)``.
    """
    ref = np.asarray(R, dtype=float)
    n = ref.shape[0]
    points = _relevant(_as_matrix(front, n), ref)
    points = points[np.lexsort(points.T[::-1])] if points.shape[0] else points
    lowers: list[FloatArray] = []
    uppers: list[FloatArray] = []
    stack = [(np.full(n, -np.inf), ref.copy(), points)]
    while stack:
        lower, upper, candidates = stack.pop()
        relevant = (
            candidates[np.all(candidates < upper, axis=1)]
            if candidates.shape[0]
            else candidates
        )
        if relevant.shape[0] == 0:
            lowers.append(lower)
            uppers.append(upper)
            continue
        if np.any(np.all(relevant <= lower, axis=1)):
            continue
        corner = np.maximum(relevant[0], lower)
        rest = relevant[1:]
        for i in range(n):
            if corner[i] <= lower[i]:
                continue
            sub_lower = lower.copy()
            sub_upper = upper.copy()
            sub_lower[:i] = corner[:i]
            sub_upper[i] = corner[i]
            stack.append((sub_lower, sub_upper, rest))
    if not lowers:
        return np.empty((0, n)), np.empty((0, n))
    return np.vstack(lowers), np.vstack(uppers)


def reference_point(objectives: Sequence[Sequence[float]] | npt.ArrayLike) -> FloatArray:
    """
    Live reference point: worst value plus a margin of the observed range.
    """
    F = _as_matrix(objectives)
    worst = F.max(axis=0)
    spread = worst - F.min(axis=0)
    return worst + defaults.reference_margin * spread + defaults.reference_offset


@dataclass(frozen=True)
class ArchiveEntry:
    point: MixedPoint
    objectives: tuple[float, ...]
    constraints: tuple[float, ...]

    @property
    def feasible(self) -> bool:
        return all(value <= 0.0 for value in self.constraints)


@dataclass
class ParetoArchive:
    entries: list[ArchiveEntry] = field(default_factory=list)
    ref_point: FloatArray | None = None

    def add(self, entry: ArchiveEntry) -> None:
        self.entries.append(entry)

    def extend(self, entries: Iterable[ArchiveEntry]) -> None:
        self.entries.extend(entries)

    @property
    def n_objectives(self) -> int:
        return len(self.entries[0].objectives) if self.entries else 0

    def objectives(self) -> FloatArray:
        return _as_matrix([e.objectives for e in self.entries], self.n_objectives)

    def feasible_indices(self) -> list[int]:
        return [i for i, entry in enumerate(self.entries) if entry.feasible]

    @property
    def nondominated(self) -> list[int]:
        """
        Indices (into ``entries``) of the feasible nondominated entries.
        """
        feasible = self.feasible_indices()
        if not feasible:
            return []
        F = self.objectives()[feasible]
        return [feasible[i] for i in nondominated_filter(F)]

    def front(self) -> FloatArray:
        return self.objectives()[self.nondominated] if self.entries else np.empty((0, 0))

    def update_reference(self) -> FloatArray | None:
        feasible = self.feasible_indices()
        pool = feasible if feasible else list(range(len(self.entries)))
        if pool:
            self.ref_point = reference_point(self.objectives()[pool])
        return self.ref_point

    def hypervolume(self, R: Sequence[float] | FloatArray | None = None) -> float:
        ref = self.ref_point if R is None else np.asarray(R, dtype=float)
        if ref is None or not self.nondominated:
            return 0.0
        return hypervolume(self.front(), ref)

    def write_csv(self, handle: IO[str], senses: Sequence[float] | None = None) -> None:
        """
        Write ``point_id, f1..fn, g1..gm, feasible, on_front`` rows.

        ``senses`` holds +1/-1 per objective to report values in user sense.
        """
        n = self.n_objectives
        m = len(self.entries[0].constraints) if self.entries else 0
        signs = np.ones(n) if senses is None else np.asarray(senses, dtype=float)
        on_front = set(self.nondominated)
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["point_id"]
            + [f"f{i + 1}" for i in range(n)]
            + [f"g{j + 1}" for j in range(m)]
            + ["feasible", "on_front"]
        )
        for index, entry in enumerate(self.entries):
            writer.writerow(
                [index]
                + [repr(float(v * s)) for v, s in zip(entry.objectives, signs)]
                + [repr(float(g)) for g in entry.constraints]
                + [int(entry.feasible), int(index in on_front)]
            )
