"""Scale hand-tuned clustering parameters to every route group.

A small set of groups gets manually chosen (eps, min_samples, r); one
ordinary-least-squares fit per target then predicts those parameters for
all remaining groups from their aggregate features. Features are
standardized before fitting because their magnitudes span many orders
(seconds vs counts), which makes raw normal equations numerically
hostile. Three independent regressions, not one multi-output model: the
targets have incompatible units.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aggregation import FEATURE_NAMES, AggregateFeatures, GroupKey
from .routes import ExtractionParams

logger = logging.getLogger(__name__)

TARGETS = ("eps_m", "min_samples", "r_m")

EPS_CLAMP = (100.0, 20_000.0)
R_CLAMP = (500.0, 50_000.0)
MIN_SAMPLES_CLAMP = (2, 20)


@dataclass(frozen=True)
class LabeledGroup:
    key: GroupKey
    features: AggregateFeatures
    eps_m: float
    min_samples: int
    r_m: float

    def __post_init__(self) -> None:
        if self.r_m < self.eps_m:
            raise ValueError(f"label for {self.key}: r={self.r_m} < eps={self.eps_m}")


@dataclass
class RegressionModel:
    feature_names: list[str]
    mean: list[float]
    std: list[float]  # 0.0 marks a dropped zero-variance feature
    coefficients: dict[str, list[float]]  # target -> [intercept, *slopes]
    residual_rms: dict[str, float]

    def to_json(self) -> str:
        return json.dumps(vars(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RegressionModel":
        return cls(**json.loads(text))


def gaussian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Solve a x = b by Gaussian elimination with partial pivoting.

    Returns None when the matrix is singular to machine precision.
    """
    n = len(b)
    m = np.column_stack((a.astype(float).copy(), b.astype(float).copy()))
    scale = max(1.0, float(np.max(np.abs(a))))
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(m[col:, col])))
        if abs(m[pivot_row, col]) < 1e-12 * scale:
            return None
        if pivot_row != col:
            m[[col, pivot_row]] = m[[pivot_row, col]]
        for row in range(col + 1, n):
            factor = m[row, col] / m[col, col]
            if factor != 0.0:
                m[row, col:] -= factor * m[col, col:]
    x = np.zeros(n)
    for col in range(n - 1, -1, -1):
        x[col] = (m[col, n] - float(m[col, col + 1 : n] @ x[col + 1 : n])) / m[col, col]
    return x


def _standardize(features: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    z = np.zeros_like(features)
    keep = std > 0
    z[:, keep] = (features[:, keep] - mean[keep]) / std[keep]
    std = np.where(keep, std, 0.0)  # zero marks a dropped feature
    return z, mean, std


def fit(labeled: list[LabeledGroup], ridge: float = 1e-6) -> RegressionModel:
    """Fit one OLS model per target on standardized features.

    Needs more rows than coefficients (>= 8). A Gram matrix singular to
    machine precision gets a small ridge term, and the fallback is logged.
    """
    if len(labeled) < 8:
        raise ValueError(f"need at least 8 labeled groups, got {len(labeled)}")
    features = np.array([lg.features.as_vector() for lg in labeled], dtype=float)
    if not np.isfinite(features).all():
        raise ValueError("non-finite feature value in labeled groups")
    z, mean, std = _standardize(features)
    design = np.column_stack((np.ones(len(labeled)), z))

    coefficients: dict[str, list[float]] = {}
    residual_rms: dict[str, float] = {}
    targets = {
        "eps_m": np.array([lg.eps_m for lg in labeled], dtype=float),
        "min_samples": np.array([float(lg.min_samples) for lg in labeled]),
        "r_m": np.array([lg.r_m for lg in labeled], dtype=float),
    }
    gram = design.T @ design
    for name, y in targets.items():
        rhs = design.T @ y
        w = gaussian_solve(gram, rhs)
        if w is None:
            logger.warning("singular normal equations for %s; adding ridge %.1e", name, ridge)
            w = gaussian_solve(gram + ridge * np.eye(len(gram)), rhs)
            if w is None:
                raise ValueError(f"normal equations unsolvable for target {name}")
        dropped = np.concatenate(([False], std == 0.0))
        w[dropped] = 0.0
        coefficients[name] = [float(v) for v in w]
        residual_rms[name] = float(np.sqrt(np.mean((design @ w - y) ** 2)))

    return RegressionModel(
        feature_names=list(FEATURE_NAMES),
        mean=[float(v) for v in mean],
        std=[float(v) for v in std],
        coefficients=coefficients,
        residual_rms=residual_rms,
    )


def predict_raw(model: RegressionModel, features: AggregateFeatures) -> dict[str, float]:
    """Unclamped per-target predictions; exposed for oracle comparison."""
    x = np.array(features.as_vector(), dtype=float)
    mean = np.array(model.mean)
    std = np.array(model.std)
    z = np.where(std > 0, (x - mean) / np.where(std > 0, std, 1.0), 0.0)
    out = {}
    for name, w in model.coefficients.items():
        wv = np.array(w)
        out[name] = float(wv[0] + wv[1:] @ z)
    return out


def predict(
    model: RegressionModel,
    features: AggregateFeatures,
    expansion_factor: float = 1.5,
    max_expansions: int = 3,
    max_iterations: int = 10000,
) -> ExtractionParams:
    """Clamped extraction parameters for one group.

    eps and r clamp to sane spatial ranges, min_samples rounds to the
    nearest integer then clamps; if the clamped radius falls under eps it
    is raised to eps so the search ball can always hold a cluster.
    """
    raw = predict_raw(model, features)
    eps = min(EPS_CLAMP[1], max(EPS_CLAMP[0], raw["eps_m"]))
    r = min(R_CLAMP[1], max(R_CLAMP[0], raw["r_m"]))
    min_samples = int(math.floor(raw["min_samples"] + 0.5))
    min_samples = min(MIN_SAMPLES_CLAMP[1], max(MIN_SAMPLES_CLAMP[0], min_samples))
    if r < eps:
        r = eps
    return ExtractionParams(
        eps=eps,
        min_samples=min_samples,
        r=r,
        expansion_factor=expansion_factor,
        max_expansions=max_expansions,
        max_iterations=max_iterations,
    )


def load_labels(path: Path) -> list[tuple[GroupKey, float, int, float]]:
    """Manual labels from a group_key,eps_m,min_samples,r_m CSV."""
    rows = []
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                (
                    GroupKey.parse(row["group_key"]),
                    float(row["eps_m"]),
                    int(row["min_samples"]),
                    float(row["r_m"]),
                )
            )
    return rows


def save_model(model: RegressionModel, path: Path) -> None:
    path.write_text(model.to_json() + "\n")


def load_model(path: Path) -> RegressionModel:
    return RegressionModel.from_json(path.read_text())
