"""
Hypervolume-based acquisition criteria and their regularized form.

``gamma * alpha(x) - psi(mu(x))`` where ``alpha`` is EHVI, PI or MPI and
``psi`` is the max or the sum of the standardized predicted objective means.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

import numpy as np
import numpy.typing as npt
from scipy.stats import norm

from segomoe import defaults
from segomoe.exceptions import ConfigurationError
from segomoe.pareto import nondominated_boxes

FloatArray = npt.NDArray[np.float64]
Method = Literal["auto", "exact", "mc"]


class Criterion(str, Enum):
    EHVI = "ehvi"
    PI = "pi"
    MPI = "mpi"


class Regularization(str, Enum):
    NONE = "none"
    MAX = "max"
    SUM = "sum"


@dataclass(frozen=True)
class AcquisitionConfig:
    criterion: Criterion = Criterion.EHVI
    reg: Regularization = Regularization.NONE
    gamma: float = defaults.gamma
    # None selects the live reference point policy of the archive.
    ref_point: tuple[float, ...] | None = None
    method: Method = "auto"
    mc_samples: int = defaults.criterion_mc_samples
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.criterion, Criterion):
            object.__setattr__(self, "criterion", Criterion(self.criterion))
        if not isinstance(self.reg, Regularization):
            object.__setattr__(self, "reg", Regularization(self.reg))
        if not self.gamma > 0:
            raise ConfigurationError("gamma should be > 0")
        if self.method not in ("auto", "exact", "mc"):
            raise ConfigurationError(f"unknown criterion method {self.method!r}")
        if self.mc_samples < 1:
            raise ConfigurationError("mc_samples should be >= 1")

    def with_seed(self, seed: int) -> AcquisitionConfig:
        return AcquisitionConfig(
            criterion=self.criterion,
            reg=self.reg,
            gamma=self.gamma,
            ref_point=self.ref_point,
            method=self.method,
            mc_samples=self.mc_samples,
            seed=seed,
        )

    def to_dict(self) -> dict[str, object]:
        return {
            "criterion": self.criterion.value,
            "reg": self.reg.value,
            "gamma": self.gamma,
            "ref_point": None if self.ref_point is None else list(self.ref_point),
            "method": self.method,
            "mc_samples": self.mc_samples,
            "seed": self.seed,
            # psi is applied to standardized means
            "standardized_scalarization": True,
        }


@dataclass(frozen=True)
class ObjectiveScaling:
    mean: FloatArray
    std: FloatArray

    @classmethod
    def from_objectives(cls, F: npt.ArrayLike) -> ObjectiveScaling:
        values = np.atleast_2d(np.asarray(F, dtype=float))
        std = values.std(axis=0)
        std[std == 0.0] = 1.0
        return cls(values.mean(axis=0), std)

    def standardize(self, values: npt.ArrayLike) -> FloatArray:
        return (np.asarray(values, dtype=float) - self.mean) / self.std


def _matrix(front: npt.ArrayLike | None, n: int) -> FloatArray:
    if front is None:
        return np.empty((0, n))
    values = np.asarray(front, dtype=float)
    return values.reshape(-1, n) if values.size else np.empty((0, n))


def _expected_shortfall(t: FloatArray, mu: FloatArray, sigma: FloatArray) -> FloatArray:
    """
    E[(t - Y)+] for Y ~ N(mu, sigma^2), elementwise; t may be -inf.
    """
    t, mu, sigma = np.broadcast_arrays(t, mu, sigma)
    out = np.zeros(t.shape)
    finite = np.isfinite(t)
    flat = finite & (sigma <= 0)
    out[flat] = np.maximum(t[flat] - mu[flat], 0.0)
    spread = finite & (sigma > 0)
    z = (t[spread] - mu[spread]) / sigma[spread]
    out[spread] = (t[spread] - mu[spread]) * norm.cdf(z) + sigma[spread] * norm.pdf(z)
    return out


def _step_cdf(numerator: FloatArray, sigma: FloatArray) -> FloatArray:
    """
    Phi(numerator / sigma), with the sigma = 0 limit (Phi(0) = 0.5 at a tie).
    """
    numerator, sigma = np.broadcast_arrays(numerator, sigma)
    out = np.where(numerator > 0, 1.0, np.where(numerator < 0, 0.0, 0.5))
    spread = sigma > 0
    out[spread] = norm.cdf(numerator[spread] / sigma[spread])
    return out


def _draws(means: FloatArray, sigmas: FloatArray, samples: int, seed: int) -> FloatArray:
    rng = np.random.default_rng(seed)
    return means + sigmas * rng.standard_normal((samples, means.shape[0]))


def _improvements(samples: FloatArray, lower: FloatArray, upper: FloatArray, chunk: int = 2048) -> FloatArray:
    """
    Hypervolume improvement of each sample given the nondominated boxes.
    """
    out = np.zeros(samples.shape[0])
    if lower.shape[0] == 0:
        return out
    for start in range(0, samples.shape[0], chunk):
        block = samples[start : start + chunk]
        sides = np.clip(
            upper[None, :, :] - np.maximum(lower[None, :, :], block[:, None, :]),
            0.0,
            None,
        )
        out[start : start + chunk] = np.prod(sides, axis=2).sum(axis=1)
    return out


def _ehvi_boxes(lower: FloatArray, upper: FloatArray, means: FloatArray, sigmas: FloatArray) -> float:
    if lower.shape[0] == 0:
        return 0.0
    # E[(u - max(l, Y))+] = E[(u - Y)+] - E[(l - Y)+] for l <= u
    sides = _expected_shortfall(upper, means, sigmas) - _expected_shortfall(
        lower, means, sigmas
    )
    return float(np.sum(np.prod(np.clip(sides, 0.0, None), axis=1)))


def ehvi(
    means: Sequence[float] | FloatArray,
    sigmas: Sequence[float] | FloatArray,
    front: npt.ArrayLike | None,
    R: Sequence[float] | FloatArray,
    *,
    method: Method = "auto",
    samples: int = defaults.criterion_mc_samples,
    seed: int = 0,
    boxes: tuple[FloatArray, FloatArray] | None = None,
) -> float:
    """
    Expected hypervolume improvement under independent Gaussian predictions.

    ``auto`` integrates over the nondominated boxes for up to three objectives
    and uses seeded Monte-Carlo beyond; ``exact`` integrates for any dimension.
    """
    mu = np.asarray(means, dtype=float)
    sd = np.maximum(np.asarray(sigmas, dtype=float), 0.0)
    ref = np.asarray(R, dtype=float)
    if boxes is None:
        boxes = nondominated_boxes(_matrix(front, mu.shape[0]), ref)
    lower, upper = boxes
    use_exact = method == "exact" or (method == "auto" and mu.shape[0] <= 3)
    # With zero spread the box sum is the plain hypervolume improvement.
    if use_exact or not np.any(sd > 0):
        return _ehvi_boxes(lower, upper, mu, sd)
    return float(np.mean(_improvements(_draws(mu, sd, samples, seed), lower, upper)))


def pi(
    means: Sequence[float] | FloatArray,
    sigmas: Sequence[float] | FloatArray,
    front: npt.ArrayLike | None,
    *,
    method: Method = "auto",
    samples: int = defaults.criterion_mc_samples,
    seed: int = 0,
) -> float:
    """
    Probability that the candidate is not weakly dominated by the front.
    """
    mu = np.asarray(means, dtype=float)
    sd = np.maximum(np.asarray(sigmas, dtype=float), 0.0)
    points = _matrix(front, mu.shape[0])
    if points.shape[0] == 0:
        return 1.0
    if points.shape[0] == 1:
        # dominated iff Y_i >= p_i for every objective
        gap = mu - points[0]
        marginals = np.where(sd > 0, _step_cdf(gap, sd), (gap >= 0).astype(float))
        dominated = np.prod(marginals)
        return float(1.0 - dominated)
    if method == "exact" or (method == "auto" and mu.shape[0] <= 3):
        lower, upper = nondominated_boxes(points, np.full(mu.shape[0], np.inf))
        probabilities = np.prod(
            _step_cdf(upper - mu, sd) - _step_cdf(lower - mu, sd), axis=1
        )
        return float(np.clip(probabilities.sum(), 0.0, 1.0))
    draws = _draws(mu, sd, samples, seed)
    dominated = np.any(np.all(points[None, :, :] <= draws[:, None, :], axis=2), axis=1)
    return float(1.0 - dominated.mean())


def mpi(
    means: Sequence[float] | FloatArray,
    sigmas: Sequence[float] | FloatArray,
    front: npt.ArrayLike | None,
) -> float:
    """
    Minimum over front members of the probability of improving on all objectives.
    """
    mu = np.asarray(means, dtype=float)
    sd = np.maximum(np.asarray(sigmas, dtype=float), 0.0)
    points = _matrix(front, mu.shape[0])
    if points.shape[0] == 0:
        return 1.0
    return float(np.min(np.prod(_step_cdf(points - mu, sd), axis=1)))


def scalarize(reg: Regularization, standardized_means: FloatArray) -> float:
    if reg is Regularization.MAX:
        return float(np.max(standardized_means))
    if reg is Regularization.SUM:
        return float(np.sum(standardized_means))
    return 0.0


@dataclass
class AcquisitionFunction:
    """
    A criterion bound to one archive snapshot; boxes are computed once.
    """

    config: AcquisitionConfig
    front: FloatArray
    R: FloatArray
    scaling: ObjectiveScaling | None = None
    _boxes: tuple[FloatArray, FloatArray] | None = field(default=None, repr=False)

    def criterion(self, means: FloatArray, sigmas: FloatArray) -> float:
        config = self.config
        if config.criterion is Criterion.EHVI:
            if self._boxes is None:
                self._boxes = nondominated_boxes(self.front, self.R)
            return ehvi(
                means,
                sigmas,
                self.front,
                self.R,
                method=config.method,
                samples=config.mc_samples,
                seed=config.seed,
                boxes=self._boxes,
            )
        if config.criterion is Criterion.PI:
            return pi(
                means,
                sigmas,
                self.front,
                method=config.method,
                samples=config.mc_samples,
                seed=config.seed,
            )
        return mpi(means, sigmas, self.front)

    def __call__(self, means: FloatArray, sigmas: FloatArray) -> float:
        alpha = self.criterion(means, sigmas)
        standardized = (
            self.scaling.standardize(means) if self.scaling is not None else means
        )
        return self.config.gamma * alpha - scalarize(self.config.reg, standardized)


def regularized(
    config: AcquisitionConfig,
    means: Sequence[float] | FloatArray,
    sigmas: Sequence[float] | FloatArray,
    front: npt.ArrayLike | None,
    R: Sequence[float] | FloatArray,
    scaling: ObjectiveScaling | None = None,
) -> float:
    mu = np.asarray(means, dtype=float)
    function = AcquisitionFunction(
        config, _matrix(front, mu.shape[0]), np.asarray(R, dtype=float), scaling
    )
    return function(mu, np.asarray(sigmas, dtype=float))
