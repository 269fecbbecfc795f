"""
Mixed continuous / integer / categorical design spaces.

A space is declared as an ordered list of variables and can be loaded from a
JSON document of the form::

    {
        "name": "retrofit",
        "variables": [
            {"name": "bpr", "kind": "continuous", "bounds": [9, 15]},
            {"name": "stages", "kind": "integer", "bounds": [1, 5]},
            {"name": "obs", "kind": "categorical",
             "levels": ["CONV", "MEA1", "MEA2", "AEA"]},
            {"name": "sweep", "kind": "continuous", "bounds": [30, 42],
             "active_when": {"variable": "obs", "levels": ["AEA"]}}
        ]
    }

``active_when`` may only reference a categorical variable declared earlier;
the variable is active when that variable is active and takes one of the
listed levels. Inactive variables are imputed with a fixed placeholder.

Points are relaxed into a continuous vector of dimension
``d + l + sum(L_j)``: continuous and integer values are copied, each
categorical variable becomes a one-hot block.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from segomoe.exceptions import DesignSpaceError

FloatArray = npt.NDArray[np.float64]


class VariableKind(str, Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ActivityRule:
    variable: str
    levels: tuple[str, ...]


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: VariableKind
    bounds: tuple[float, float] | None = None
    levels: tuple[str, ...] | None = None
    active_when: ActivityRule | None = None

    def __post_init__(self) -> None:
        if self.kind is VariableKind.CATEGORICAL:
            if self.bounds is not None:
                raise DesignSpaceError(f"{self.name}: categorical takes no bounds")
            if not self.levels or len(self.levels) < 2:
                raise DesignSpaceError(f"{self.name}: needs at least 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise DesignSpaceError(f"{self.name}: level labels must be unique")
        else:
            if self.levels is not None:
                raise DesignSpaceError(f"{self.name}: only categoricals take levels")
            if self.bounds is None:
                raise DesignSpaceError(f"{self.name}: bounds are required")
            lower, upper = self.bounds
            if not (math.isfinite(lower) and math.isfinite(upper)):
                raise DesignSpaceError(f"{self.name}: bounds must be finite")
            if not lower < upper:
                raise DesignSpaceError(f"{self.name}: lower bound must be < upper")
            if self.kind is VariableKind.INTEGER and math.ceil(lower) > math.floor(
                upper
            ):
                raise DesignSpaceError(f"{self.name}: no integer within bounds")

    @property
    def width(self) -> int:
        if self.kind is VariableKind.CATEGORICAL:
            assert self.levels is not None
            return len(self.levels)
        return 1

    @property
    def integer_range(self) -> tuple[int, int]:
        assert self.bounds is not None
        return math.ceil(self.bounds[0]), math.floor(self.bounds[1])

    @property
    def placeholder(self) -> float | int:
        """
        Value carried by the variable while inactive.
        """
        if self.kind is VariableKind.CATEGORICAL:
            return 0
        assert self.bounds is not None
        midpoint = 0.5 * (self.bounds[0] + self.bounds[1])
        if self.kind is VariableKind.INTEGER:
            low, high = self.integer_range
            return min(max(math.floor(midpoint + 0.5), low), high)
        return midpoint

    def contains(self, value: float | int) -> bool:
        if not math.isfinite(value):
            return False
        if self.kind is VariableKind.CONTINUOUS:
            assert self.bounds is not None
            return self.bounds[0] <= value <= self.bounds[1]
        if int(value) != value:
            return False
        if self.kind is VariableKind.INTEGER:
            low, high = self.integer_range
            return low <= value <= high
        return 0 <= value < self.width

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"name": self.name, "kind": self.kind.value}
        if self.bounds is not None:
            data["bounds"] = list(self.bounds)
        if self.levels is not None:
            data["levels"] = list(self.levels)
        if self.active_when is not None:
            data["active_when"] = {
                "variable": self.active_when.variable,
                "levels": list(self.active_when.levels),
            }
        return data


@dataclass(frozen=True)
class MixedPoint:
    values: tuple[float | int, ...]
    active: tuple[bool, ...]

    def as_dict(self, space: DesignSpace) -> dict[str, float | int | str]:
        named: dict[str, float | int | str] = {}
        for spec, value in zip(space.variables, self.values):
            if spec.kind is VariableKind.CATEGORICAL:
                assert spec.levels is not None
                named[spec.name] = spec.levels[int(value)]
            else:
                named[spec.name] = value
        return named


@dataclass(frozen=True, eq=False)
class RelaxedVector:
    coords: FloatArray
    layout: tuple[slice, ...]


@dataclass(frozen=True)
class DesignSpace:
    variables: tuple[VariableSpec, ...]
    name: str = "design-space"
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        errors: list[str] = []
        index: dict[str, int] = {}
        if not self.variables:
            errors.append("variables: at least one variable is required")
        for position, spec in enumerate(self.variables):
            if spec.name in index:
                errors.append(f"variables[{position}]: duplicate name {spec.name!r}")
                continue
            rule = spec.active_when
            if rule is not None:
                parent = index.get(rule.variable)
                if parent is None:
                    errors.append(
                        f"variables[{position}].active_when: {rule.variable!r} "
                        + "must be a categorical variable declared earlier"
                    )
                else:
                    parent_spec = self.variables[parent]
                    if parent_spec.kind is not VariableKind.CATEGORICAL:
                        errors.append(
                            f"variables[{position}].active_when: {rule.variable!r} "
                            + "is not categorical"
                        )
                    else:
                        assert parent_spec.levels is not None
                        unknown = set(rule.levels) - set(parent_spec.levels)
                        if unknown or not rule.levels:
                            errors.append(
                                f"variables[{position}].active_when: unknown levels "
                                + f"{sorted(unknown)!r}"
                            )
            index[spec.name] = position
        if errors:
            raise DesignSpaceError(errors)
        object.__setattr__(self, "_index", index)

    @property
    def n_continuous(self) -> int:
        return sum(v.kind is VariableKind.CONTINUOUS for v in self.variables)

    @property
    def n_integer(self) -> int:
        return sum(v.kind is VariableKind.INTEGER for v in self.variables)

    @property
    def n_categorical(self) -> int:
        return sum(v.kind is VariableKind.CATEGORICAL for v in self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def layout(self) -> tuple[slice, ...]:
        spans = []
        start = 0
        for spec in self.variables:
            spans.append(slice(start, start + spec.width))
            start += spec.width
        return tuple(spans)

    @property
    def relaxed_bounds(self) -> tuple[FloatArray, FloatArray]:
        lower: list[float] = []
        upper: list[float] = []
        for spec in self.variables:
            if spec.kind is VariableKind.CATEGORICAL:
                lower.extend([0.0] * spec.width)
                upper.extend([1.0] * spec.width)
            elif spec.kind is VariableKind.INTEGER:
                low, high = spec.integer_range
                lower.append(float(low))
                upper.append(float(high))
            else:
                assert spec.bounds is not None
                lower.append(float(spec.bounds[0]))
                upper.append(float(spec.bounds[1]))
        return np.array(lower), np.array(upper)

    def activity(self, values: Sequence[float | int]) -> tuple[bool, ...]:
        flags: list[bool] = []
        for spec in self.variables:
            rule = spec.active_when
            if rule is None:
                flags.append(True)
                continue
            parent = self._index[rule.variable]
            parent_levels = self.variables[parent].levels
            assert parent_levels is not None
            flags.append(
                flags[parent] and parent_levels[int(values[parent])] in rule.levels
            )
        return tuple(flags)

    def point(self, values: Sequence[float | int | str]) -> MixedPoint:
        """
        Build a validated, imputed point from native values.

        Categorical values may be given as level index or level label.
        """
        if len(values) != len(self.variables):
            raise DesignSpaceError(
                f"expected {len(self.variables)} values, got {len(values)}"
            )
        native: list[float | int] = []
        for spec, value in zip(self.variables, values):
            if spec.kind is VariableKind.CATEGORICAL:
                assert spec.levels is not None
                if isinstance(value, str):
                    if value not in spec.levels:
                        raise DesignSpaceError(
                            f"{spec.name}: unknown level {value!r}"
                        )
                    value = spec.levels.index(value)
            elif isinstance(value, str):
                raise DesignSpaceError(f"{spec.name}: expected a number")
            if not spec.contains(value):
                raise DesignSpaceError(f"{spec.name}: value {value!r} out of range")
            native.append(
                float(value) if spec.kind is VariableKind.CONTINUOUS else int(value)
            )
        return impute(self, MixedPoint(tuple(native), self.activity(native)))

    def point_from_dict(self, named: Mapping[str, float | int | str]) -> MixedPoint:
        missing = [name for name in self.names if name not in named]
        extra = [name for name in named if name not in self._index]
        if missing or extra:
            raise DesignSpaceError(
                f"missing variables {missing!r}, unknown variables {extra!r}"
            )
        return self.point([named[name] for name in self.names])

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "variables": [spec.to_dict() for spec in self.variables],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> DesignSpace:
        errors = check_space_document(data)
        if errors:
            raise DesignSpaceError(errors)
        return _build(data)


_VARIABLE_FIELDS = {"name", "kind", "bounds", "levels", "active_when"}


def check_space_document(data: Any) -> list[str]:
    """
    Collect every structural problem in a JSON-shaped space declaration.
    """
    if not isinstance(data, Mapping):
        return ["space: should be an object"]
    errors: list[str] = []
    unknown = set(data) - {"name", "variables"}
    if unknown:
        errors.append(f"space: unknown fields {sorted(unknown)!r}")
    if "name" in data and not isinstance(data["name"], str):
        errors.append("name: should be a string")
    variables = data.get("variables")
    if not isinstance(variables, list) or not variables:
        errors.append("variables: should be a nonempty list")
        return errors
    seen: set[str] = set()
    for position, item in enumerate(variables):
        where = f"variables[{position}]"
        if not isinstance(item, Mapping):
            errors.append(f"{where}: should be an object")
            continue
        unknown = set(item) - _VARIABLE_FIELDS
        if unknown:
            errors.append(f"{where}: unknown fields {sorted(unknown)!r}")
        name = item.get("name")
        if not isinstance(name, str) or not name:
            errors.append(f"{where}.name: should be a nonempty string")
        elif name in seen:
            errors.append(f"{where}.name: duplicate name {name!r}")
        else:
            seen.add(name)
        kind = item.get("kind")
        if kind not in {k.value for k in VariableKind}:
            errors.append(f"{where}.kind: unknown kind {kind!r}")
        elif kind == VariableKind.CATEGORICAL.value:
            levels = item.get("levels")
            if "bounds" in item:
                errors.append(f"{where}.bounds: not allowed for categorical")
            if (
                not isinstance(levels, list)
                or not levels
                or not all(isinstance(level, str) for level in levels)
            ):
                errors.append(f"{where}.levels: should be a nonempty list of strings")
            elif len(levels) < 2:
                errors.append(f"{where}.levels: should have at least 2 levels")
            elif len(set(levels)) != len(levels):
                errors.append(f"{where}.levels: labels should be unique")
        else:
            bounds = item.get("bounds")
            if "levels" in item:
                errors.append(f"{where}.levels: only allowed for categorical")
            if (
                not isinstance(bounds, list)
                or len(bounds) != 2
                or not all(
                    isinstance(b, (int, float)) and not isinstance(b, bool)
                    for b in bounds
                )
            ):
                errors.append(f"{where}.bounds: should be a [lower, upper] pair")
            elif not bounds[0] < bounds[1]:
                errors.append(f"{where}.bounds: lower should be < upper")
        rule = item.get("active_when")
        if rule is not None and (
            not isinstance(rule, Mapping)
            or set(rule) != {"variable", "levels"}
            or not isinstance(rule["variable"], str)
            or not isinstance(rule["levels"], list)
        ):
            errors.append(
                f"{where}.active_when: should be {{'variable': str, 'levels': [str]}}"
            )
    if errors:
        return errors
    try:
        _build(data)
    except DesignSpaceError as exc:
        errors.extend(exc.messages)
    return errors


def _build(data: Mapping[str, Any]) -> DesignSpace:
    specs = []
    for item in data["variables"]:
        rule = item.get("active_when")
        specs.append(
            VariableSpec(
                name=item["name"],
                kind=VariableKind(item["kind"]),
                bounds=(
                    (float(item["bounds"][0]), float(item["bounds"][1]))
                    if "bounds" in item
                    else None
                ),
                levels=tuple(item["levels"]) if "levels" in item else None,
                active_when=(
                    ActivityRule(rule["variable"], tuple(rule["levels"]))
                    if rule
                    else None
                ),
            )
        )
    return DesignSpace(tuple(specs), name=data.get("name", "design-space"))


def load_design_space(path: str | Path) -> DesignSpace:
    return DesignSpace.from_dict(json.loads(Path(path).read_text()))


def relaxed_dimension(space: DesignSpace) -> int:
    return space.n_continuous + space.n_integer + sum(
        v.width for v in space.variables if v.kind is VariableKind.CATEGORICAL
    )


def encode(space: DesignSpace, p: MixedPoint) -> RelaxedVector:
    if len(p.values) != len(space.variables):
        raise DesignSpaceError(
            f"expected {len(space.variables)} values, got {len(p.values)}"
        )
    layout = space.layout
    coords = np.zeros(relaxed_dimension(space))
    for spec, span, value in zip(space.variables, layout, p.values):
        if not spec.contains(value):
            raise DesignSpaceError(f"{spec.name}: value {value!r} out of range")
        if spec.kind is VariableKind.CATEGORICAL:
            coords[span.start + int(value)] = 1.0
        else:
            coords[span.start] = float(value)
    return RelaxedVector(coords, layout)


def encode_many(space: DesignSpace, points: Iterable[MixedPoint]) -> FloatArray:
    rows = [encode(space, p).coords for p in points]
    if not rows:
        return np.empty((0, relaxed_dimension(space)))
    return np.vstack(rows)


def decode(space: DesignSpace, v: RelaxedVector | npt.ArrayLike) -> MixedPoint:
    coords = np.asarray(v.coords if isinstance(v, RelaxedVector) else v, dtype=float)
    if coords.shape != (relaxed_dimension(space),):
        raise DesignSpaceError(
            f"expected {relaxed_dimension(space)} coordinates, got {coords.shape}"
        )
    coords = np.nan_to_num(coords, nan=0.0)
    values: list[float | int] = []
    for spec, span in zip(space.variables, space.layout):
        block = coords[span]
        if spec.kind is VariableKind.CATEGORICAL:
            # argmax returns the first maximum, i.e. the lowest level index
            values.append(int(np.argmax(block)))
        elif spec.kind is VariableKind.INTEGER:
            low, high = spec.integer_range
            values.append(int(min(max(math.floor(block[0] + 0.5), low), high)))
        else:
            assert spec.bounds is not None
            values.append(float(np.clip(block[0], spec.bounds[0], spec.bounds[1])))
    return impute(space, MixedPoint(tuple(values), space.activity(values)))


def impute(space: DesignSpace, p: MixedPoint) -> MixedPoint:
    values = tuple(
        value if active else spec.placeholder
        for spec, value, active in zip(space.variables, p.values, p.active)
    )
    return MixedPoint(values, p.active)


def lhs_unit(n_dims: int, n: int, rng: np.random.Generator) -> FloatArray:
    """
    Latin hypercube in [0, 1)^n_dims: one sample per bin along every axis.
    """
    cube = np.empty((n, n_dims))
    for column in range(n_dims):
        cube[:, column] = (rng.permutation(n) + rng.random(n)) / n
    return cube


def lhs_sample(space: DesignSpace, n: int, seed: int) -> list[MixedPoint]:
    if n < 1:
        raise DesignSpaceError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    cube = lhs_unit(len(space.variables), n, rng)
    points = []
    for row in cube:
        values: list[float | int] = []
        for spec, u in zip(space.variables, row):
            if spec.kind is VariableKind.CONTINUOUS:
                assert spec.bounds is not None
                lower, upper = spec.bounds
                values.append(float(lower + u * (upper - lower)))
            elif spec.kind is VariableKind.INTEGER:
                low, high = spec.integer_range
                values.append(min(low + int(u * (high - low + 1)), high))
            else:
                values.append(min(int(u * spec.width), spec.width - 1))
        points.append(impute(space, MixedPoint(tuple(values), space.activity(values))))
    return points
