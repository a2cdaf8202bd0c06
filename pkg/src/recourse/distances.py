"""Distance functions between an original point and a candidate counterfactual.

Three metrics are supported, all evaluated on original (unstandardized)
feature values:

* ``unnormalized_sq_euclidean`` - plain squared Euclidean distance.
* ``std_normalized_sq_euclidean`` - squared differences divided by the
  per-feature variance, i.e. squared Euclidean distance between z-scored
  points; invariant to rescaling any feature column.
* ``mad_weighted_l1`` - L1 distance weighted by the inverse median absolute
  deviation; robust to outliers and sparsity-inducing.

The weighted metrics need per-feature statistics fitted on a training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DISTANCE_KINDS = (
    "unnormalized_sq_euclidean",
    "std_normalized_sq_euclidean",
    "mad_weighted_l1",
)

# aliases accepted on the CLI / service surface
KIND_ALIASES = {
    "l2": "unnormalized_sq_euclidean",
    "l2norm": "std_normalized_sq_euclidean",
    "l1mad": "mad_weighted_l1",
}


@dataclass
class FeatureStats:
    """Per-feature median, MAD, population std and observed range."""

    median: np.ndarray
    mad: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray
    fitted_on: int

    def __post_init__(self):
        for name in ("median", "mad", "std", "min", "max"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.mad < 0) or np.any(self.std < 0):
            raise ValueError("mad and std must be nonnegative")
        if np.any(self.min > self.median) or np.any(self.median > self.max):
            raise ValueError("expected min <= median <= max per feature")

    @property
    def n_features(self) -> int:
        return self.median.shape[0]

    def to_doc(self) -> dict:
        return {
            "median": self.median.tolist(),
            "mad": self.mad.tolist(),
            "std": self.std.tolist(),
            "min": self.min.tolist(),
            "max": self.max.tolist(),
            "fitted_on": self.fitted_on,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FeatureStats":
        return cls(
            doc["median"], doc["mad"], doc["std"], doc["min"], doc["max"],
            int(doc["fitted_on"]),
        )


def fit_stats(X) -> FeatureStats:
    """Fit per-feature statistics on a (rows, features) array.

    Medians use the mean-of-middle-order-statistics convention for even
    lengths; std is the population standard deviation.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    med = np.median(X, axis=0)
    mad = np.median(np.abs(X - med), axis=0)
    return FeatureStats(
        median=med,
        mad=mad,
        std=np.std(X, axis=0),
        min=X.min(axis=0),
        max=X.max(axis=0),
        fitted_on=X.shape[0],
    )


@dataclass
class DistanceSpec:
    """A distance kind plus the statistics it needs.

    ``mad_floor`` keeps constant or binary-majority columns usable: a zero
    MAD (or std) divisor is floored at
    ``max(mad, 1e-6 * (max - min), 1e-9)`` so weights stay finite and the
    identity-of-indiscernibles property holds.
    """

    kind: str
    stats: FeatureStats | None = None
    mad_floor_rel: float = 1e-6
    mad_floor_abs: float = 1e-9

    def __post_init__(self):
        self.kind = KIND_ALIASES.get(self.kind, self.kind)
        if self.kind not in DISTANCE_KINDS:
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if self.kind != "unnormalized_sq_euclidean" and self.stats is None:
            raise ValueError(f"{self.kind} requires fitted FeatureStats")

    def _floored(self, scale: np.ndarray) -> np.ndarray:
        span = self.stats.max - self.stats.min
        return np.maximum(scale, np.maximum(self.mad_floor_rel * span, self.mad_floor_abs))

    def weights(self, n_features: int) -> np.ndarray:
        """Per-feature divisor applied to the (squared or absolute) difference."""
        if self.kind == "unnormalized_sq_euclidean":
            return np.ones(n_features)
        if self.stats.n_features != n_features:
            raise ValueError(
                f"stats fitted for {self.stats.n_features} features, point has {n_features}"
            )
        if self.kind == "std_normalized_sq_euclidean":
            return self._floored(self.stats.std) ** 2
        return self._floored(self.stats.mad)

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "stats": self.stats.to_doc() if self.stats is not None else None,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DistanceSpec":
        stats = FeatureStats.from_doc(doc["stats"]) if doc.get("stats") else None
        return cls(doc["kind"], stats)


def distance(spec: DistanceSpec, x, x_prime) -> float:
    """Distance between two original-unit points under ``spec``."""
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != x_prime.shape or x.ndim != 1:
        raise ValueError(f"point shapes differ: {x.shape} vs {x_prime.shape}")
    diff = x - x_prime
    w = spec.weights(x.shape[0])
    if spec.kind == "mad_weighted_l1":
        return float(np.sum(np.abs(diff) / w))
    return float(np.sum(diff * diff / w))
