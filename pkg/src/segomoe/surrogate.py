"""
Gaussian-process (ordinary kriging) surrogates over the relaxed space.

With ``n_pls_components = h > 0`` the per-dimension inverse length-scales are
generated from the first ``h`` PLS weight vectors of the training data,
``theta_eff[i] = sum_k theta[k] * w[i, k] ** 2``, so only ``h`` hyperparameters
are optimized whatever the relaxed dimension.

Inputs and outputs are standardized internally. The nugget only regularizes
the diagonal of the training correlation matrix; predictions use the plain
kernel. The mean weights get a few steps of iterative refinement against the
correlation without nugget, so the mean is continuous and still interpolates
the training outputs.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy import linalg
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from sklearn.cross_decomposition import PLSRegression

from segomoe import defaults
from segomoe.design_space import RelaxedVector, lhs_unit
from segomoe.exceptions import (
    ConfigurationError,
    DegenerateDataError,
    SurrogateFitError,
)

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

MODEL_FORMAT_VERSION = 1


class KernelFamily(str, Enum):
    SQUARED_EXPONENTIAL = "squared-exponential"
    MATERN52 = "matern-5/2"


@dataclass(frozen=True)
class KernelConfig:
    family: KernelFamily = KernelFamily.SQUARED_EXPONENTIAL
    n_pls_components: int = 0
    nugget: float = defaults.nugget_start
    n_starts: int = defaults.theta_starts
    polish_iterations: int = defaults.theta_polish_iterations
    # Second-stage KPLS-K re-expansion; reserved, not implemented.
    kpls_k: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.family, KernelFamily):
            object.__setattr__(self, "family", KernelFamily(self.family))
        if self.n_pls_components < 0:
            raise ConfigurationError("n_pls_components should be >= 0")
        if not self.nugget > 0:
            raise ConfigurationError("nugget should be > 0")
        if self.n_starts < 1:
            raise ConfigurationError("n_starts should be >= 1")
        if self.kpls_k:
            raise ConfigurationError("KPLS-K refinement is not implemented")

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["family"] = self.family.value
        return data


def fit_pls(X: npt.ArrayLike, y: npt.ArrayLike, h: int) -> FloatArray:
    """
    First ``h`` PLS weight vectors (unit columns) of the regression of y on X.
    """
    inputs = np.asarray(X, dtype=float)
    outputs = np.asarray(y, dtype=float).ravel()
    n, d = inputs.shape
    if h == 0:
        return np.empty((d, 0))
    if h > d or n < h + 1:
        raise ConfigurationError(
            f"{h} PLS components need at least {h + 1} samples and {h} inputs"
        )
    if np.ptp(outputs) == 0.0:
        raise DegenerateDataError("outputs have zero variance")
    if np.all(np.ptp(inputs, axis=0) == 0.0):
        raise DegenerateDataError("all input columns are constant")
    pls = PLSRegression(n_components=h, scale=False)
    pls.fit(inputs, outputs)
    weights = np.nan_to_num(np.asarray(pls.x_weights_, dtype=float))
    return weights


def _correlation(
    family: KernelFamily, A: FloatArray, B: FloatArray, theta_eff: FloatArray
) -> FloatArray:
    scale = np.sqrt(theta_eff)
    if family is KernelFamily.SQUARED_EXPONENTIAL:
        return np.exp(-cdist(A * scale, B * scale, "sqeuclidean"))
    r = cdist(A * scale, B * scale, "euclidean")
    root5r = math.sqrt(5.0) * r
    return (1.0 + root5r + (5.0 / 3.0) * r**2) * np.exp(-root5r)


def _dedup(X: FloatArray, tolerance: float) -> list[int]:
    keep: list[int] = []
    for i in range(X.shape[0]):
        if keep and np.min(np.linalg.norm(X[keep] - X[i], axis=1)) <= tolerance:
            continue
        keep.append(i)
    return keep


@dataclass
class _Factor:
    chol: FloatArray
    nugget: float
    mu: float
    sigma2: float
    alpha: FloatArray
    ri_ones: FloatArray
    ones_ri_ones: float
    log_likelihood: float


@dataclass
class SurrogateModel:
    X: FloatArray
    y: FloatArray
    config: KernelConfig
    theta: FloatArray
    pls_weights: FloatArray
    x_mean: FloatArray
    x_scale: FloatArray
    y_mean: float
    y_scale: float
    degenerate: bool = False
    nugget: float = defaults.nugget_start
    _factor: _Factor | None = field(default=None, repr=False)

    @property
    def theta_eff(self) -> FloatArray:
        if self.pls_weights.shape[1] == 0:
            return self.theta
        return (self.pls_weights**2) @ self.theta

    @property
    def n_hyperparameters(self) -> int:
        return int(self.theta.shape[0])

    @property
    def process_variance(self) -> float:
        if self.degenerate or self._factor is None:
            return 0.0
        return self._factor.sigma2 * self.y_scale**2

    def _normalize(self, V: FloatArray) -> FloatArray:
        return (V - self.x_mean) / self.x_scale

    def predict_many(self, V: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
        points = np.atleast_2d(np.asarray(V, dtype=float))
        if self.degenerate or self._factor is None:
            count = points.shape[0]
            return np.full(count, self.y_mean), np.zeros(count)
        factor = self._factor
        Xn = self._normalize(self.X)
        Vn = self._normalize(points)
        r = _correlation(self.config.family, Vn, Xn, self.theta_eff)
        mean_n = factor.mu + r @ factor.alpha
        ri_r = linalg.cho_solve((factor.chol, True), r.T)
        u = 1.0 - r @ factor.ri_ones
        var_n = factor.sigma2 * (
            1.0 - np.sum(r.T * ri_r, axis=0) + u**2 / factor.ones_ri_ones
        )
        floor = max(1e-12, factor.nugget) * factor.sigma2
        variance = np.where(var_n < floor, 0.0, var_n)
        return self.y_mean + self.y_scale * mean_n, self.y_scale**2 * variance

    def predict_gradient_many(self, V: npt.ArrayLike) -> FloatArray:
        points = np.atleast_2d(np.asarray(V, dtype=float))
        if self.degenerate or self._factor is None:
            return np.zeros_like(points)
        Xn = self._normalize(self.X)
        Vn = self._normalize(points)
        theta = self.theta_eff
        diff = Vn[:, None, :] - Xn[None, :, :]
        if self.config.family is KernelFamily.SQUARED_EXPONENTIAL:
            r = _correlation(self.config.family, Vn, Xn, theta)
            dk = -2.0 * theta * diff * r[:, :, None]
        else:
            dist = cdist(Vn * np.sqrt(theta), Xn * np.sqrt(theta), "euclidean")
            root5r = math.sqrt(5.0) * dist
            radial = -(5.0 / 3.0) * (1.0 + root5r) * np.exp(-root5r)
            dk = radial[:, :, None] * theta * diff
        grad_n = np.einsum("pjd,j->pd", dk, self._factor.alpha)
        return self.y_scale * grad_n / self.x_scale

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": MODEL_FORMAT_VERSION,
            "config": self.config.to_dict(),
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "theta": self.theta.tolist(),
            "pls_weights": self.pls_weights.tolist(),
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_mean": self.y_mean,
            "y_scale": self.y_scale,
            "degenerate": self.degenerate,
            "nugget": self.nugget,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SurrogateModel:
        if data.get("version") != MODEL_FORMAT_VERSION:
            raise ConfigurationError(
                f"unsupported model format version {data.get('version')!r}"
            )
        X = np.asarray(data["X"], dtype=float)
        model = cls(
            X=X,
            y=np.asarray(data["y"], dtype=float),
            config=KernelConfig(**data["config"]),
            theta=np.asarray(data["theta"], dtype=float),
            pls_weights=np.asarray(data["pls_weights"], dtype=float).reshape(
                X.shape[1], -1
            ),
            x_mean=np.asarray(data["x_mean"], dtype=float),
            x_scale=np.asarray(data["x_scale"], dtype=float),
            y_mean=float(data["y_mean"]),
            y_scale=float(data["y_scale"]),
            degenerate=bool(data["degenerate"]),
            nugget=float(data["nugget"]),
        )
        if not model.degenerate:
            factor = _factorize(model, np.log10(model.theta), [model.nugget])
            if factor is None:
                raise SurrogateFitError("stored model is not positive definite")
            model._factor = factor
        return model


def _factorize(
    model: SurrogateModel, log_theta: FloatArray, nuggets: Sequence[float]
) -> _Factor | None:
    Xn = model._normalize(model.X)
    yn = (model.y - model.y_mean) / model.y_scale
    n = Xn.shape[0]
    theta = 10.0**log_theta
    theta_eff = theta if model.pls_weights.shape[1] == 0 else (model.pls_weights**2) @ theta
    base = _correlation(model.config.family, Xn, Xn, theta_eff)
    ones = np.ones(n)
    for nugget in nuggets:
        try:
            chol = linalg.cholesky(base + nugget * np.eye(n), lower=True)
        except linalg.LinAlgError:
            continue
        ri_ones = linalg.cho_solve((chol, True), ones)
        ri_y = linalg.cho_solve((chol, True), yn)
        ones_ri_ones = float(ones @ ri_ones)
        mu = float(ones @ ri_y) / ones_ri_ones
        alpha = ri_y - mu * ri_ones
        sigma2 = max(float((yn - mu) @ alpha) / n, 1e-300)
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        exact_y, exact_ones = ri_y, ri_ones
        for _ in range(defaults.refinement_steps):
            exact_y = exact_y + linalg.cho_solve((chol, True), yn - base @ exact_y)
            exact_ones = exact_ones + linalg.cho_solve(
                (chol, True), ones - base @ exact_ones
            )
        exact_mu = float(ones @ exact_y) / float(ones @ exact_ones)
        return _Factor(
            chol=chol,
            nugget=nugget,
            mu=exact_mu,
            sigma2=sigma2,
            alpha=exact_y - exact_mu * exact_ones,
            ri_ones=ri_ones,
            ones_ri_ones=ones_ri_ones,
            log_likelihood=-0.5 * (n * math.log(sigma2) + log_det),
        )
    return None


def _nugget_ladder(start: float) -> list[float]:
    ladder = [start]
    while ladder[-1] * defaults.nugget_factor <= defaults.nugget_max * (1 + 1e-9):
        ladder.append(ladder[-1] * defaults.nugget_factor)
    return ladder


def theta_starts(n_theta: int, n_starts: int, seed: int = 0) -> FloatArray:
    """
    Latin hypercube of multistart points in log10 theta used by ``fit``.
    """
    low, high = defaults.log10_theta_bounds
    rng = np.random.default_rng(seed)
    return low + lhs_unit(n_theta, n_starts, rng) * (high - low)


def fit(
    X: npt.ArrayLike,
    y: npt.ArrayLike,
    config: KernelConfig | None = None,
    seed: int = 0,
) -> SurrogateModel:
    config = config or KernelConfig()
    inputs = np.atleast_2d(np.asarray(X, dtype=float))
    outputs = np.asarray(y, dtype=float).ravel()
    if inputs.shape[0] != outputs.shape[0]:
        raise ConfigurationError("X and y have different numbers of rows")
    keep = _dedup(inputs, defaults.duplicate_tolerance)
    inputs, outputs = inputs[keep], outputs[keep]
    n, d = inputs.shape
    if n < 2:
        raise DegenerateDataError("at least two distinct training points are needed")

    x_mean = inputs.mean(axis=0)
    x_scale = inputs.std(axis=0)
    x_scale[x_scale == 0.0] = 1.0
    y_mean = float(outputs.mean())
    y_scale = float(outputs.std())

    if y_scale == 0.0:
        logger.warning("Constant training outputs, using a degenerate model")
        return SurrogateModel(
            X=inputs,
            y=outputs,
            config=config,
            theta=np.empty(0),
            pls_weights=np.empty((d, 0)),
            x_mean=x_mean,
            x_scale=x_scale,
            y_mean=y_mean,
            y_scale=1.0,
            degenerate=True,
        )

    h = min(config.n_pls_components, d, n - 1)
    if h != config.n_pls_components:
        logger.debug("Reducing PLS components from %d to %d", config.n_pls_components, h)
    try:
        weights = fit_pls((inputs - x_mean) / x_scale, (outputs - y_mean) / y_scale, h)
    except DegenerateDataError:
        weights = np.empty((d, 0))
    n_theta = weights.shape[1] if weights.shape[1] else d

    model = SurrogateModel(
        X=inputs,
        y=outputs,
        config=config,
        theta=np.ones(n_theta),
        pls_weights=weights,
        x_mean=x_mean,
        x_scale=x_scale,
        y_mean=y_mean,
        y_scale=y_scale,
    )
    ladder = _nugget_ladder(config.nugget)

    def negative_likelihood(log_theta: FloatArray) -> float:
        factor = _factorize(model, np.asarray(log_theta), ladder)
        return math.inf if factor is None else -factor.log_likelihood

    low, high = defaults.log10_theta_bounds
    starts = theta_starts(n_theta, config.n_starts, seed)
    best_x: FloatArray | None = None
    best_value = math.inf
    for start in starts:
        start_value = negative_likelihood(start)
        result = minimize(
            negative_likelihood,
            start,
            method="Nelder-Mead",
            bounds=[(low, high)] * n_theta,
            options={
                "maxiter": config.polish_iterations,
                "xatol": 1e-4,
                "fatol": 1e-10,
            },
        )
        candidate, value = np.clip(result.x, low, high), float(result.fun)
        if not value <= start_value:
            candidate, value = start, start_value
        if value < best_value:
            best_x, best_value = candidate, value
    if best_x is None:
        raise SurrogateFitError(
            f"covariance not positive definite for any start (n={n}, d={d}, "
            + f"nugget up to {ladder[-1]:g})"
        )
    factor = _factorize(model, best_x, ladder)
    assert factor is not None
    if factor.nugget > config.nugget:
        logger.warning("Nugget escalated to %g to factorize the covariance", factor.nugget)
    model.theta = 10.0**best_x
    model.nugget = factor.nugget
    model._factor = factor
    return model


def log_likelihood(model: SurrogateModel, theta: npt.ArrayLike | None = None) -> float:
    """
    Concentrated log marginal likelihood at ``theta`` (default: fitted).
    """
    if model.degenerate:
        return 0.0
    values = model.theta if theta is None else np.asarray(theta, dtype=float)
    factor = _factorize(model, np.log10(values), _nugget_ladder(model.config.nugget))
    return -math.inf if factor is None else factor.log_likelihood


def predict(model: SurrogateModel, v: RelaxedVector | npt.ArrayLike) -> tuple[float, float]:
    coords = v.coords if isinstance(v, RelaxedVector) else v
    means, variances = model.predict_many(np.asarray(coords, dtype=float)[None, :])
    return float(means[0]), float(variances[0])


def predict_gradient(model: SurrogateModel, v: RelaxedVector | npt.ArrayLike) -> FloatArray:
    coords = v.coords if isinstance(v, RelaxedVector) else v
    return model.predict_gradient_many(np.asarray(coords, dtype=float)[None, :])[0]


def dump_model(model: SurrogateModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()))


def load_model(path: str | Path) -> SurrogateModel:
    return SurrogateModel.from_dict(json.loads(Path(path).read_text()))


@dataclass
class MultiOutputSurrogate:
    objectives: list[SurrogateModel]
    constraints: list[SurrogateModel]

    @property
    def n_objectives(self) -> int:
        return len(self.objectives)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def predict_objectives(self, V: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
        """
        Means and standard deviations, each of shape ``(n_points, n)``.
        """
        points = np.atleast_2d(np.asarray(V, dtype=float))
        means = np.empty((points.shape[0], self.n_objectives))
        sigmas = np.empty_like(means)
        for i, model in enumerate(self.objectives):
            mean, variance = model.predict_many(points)
            means[:, i] = mean
            sigmas[:, i] = np.sqrt(variance)
        return means, sigmas

    def constraint_means(self, V: npt.ArrayLike) -> FloatArray:
        points = np.atleast_2d(np.asarray(V, dtype=float))
        values = np.empty((points.shape[0], self.n_constraints))
        for j, model in enumerate(self.constraints):
            values[:, j] = model.predict_many(points)[0]
        return values


def fit_multi(
    X: npt.ArrayLike,
    F: npt.ArrayLike,
    G: npt.ArrayLike | None,
    config: KernelConfig | None = None,
    seed: int = 0,
) -> MultiOutputSurrogate:
    """
    One independent model per objective column of F and constraint column of G.
    """
    objectives = np.atleast_2d(np.asarray(F, dtype=float))
    constraints = (
        np.empty((objectives.shape[0], 0))
        if G is None
        else np.asarray(G, dtype=float).reshape(objectives.shape[0], -1)
    )
    models = [
        fit(X, column, config, seed + k)
        for k, column in enumerate(np.hstack([objectives, constraints]).T)
    ]
    n = objectives.shape[1]
    return MultiOutputSurrogate(objectives=models[:n], constraints=models[n:])
