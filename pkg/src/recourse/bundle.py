"""A trained model packaged with everything needed to answer queries later.

The bundle is the unit the audit service archives: network weights, feature
schema, the standardization fitted at training time, distance statistics and
the dataset manifest, all under one content hash. Archiving the whole bundle
is what lets a counterfactual be computed later against the exact model state
that produced the original decision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import FeatureSchema, FeatureSpace, Standardizer
from .distances import DistanceSpec, FeatureStats
from .model import MlpModel, content_hash

BUNDLE_FORMAT_VERSION = 1


@dataclass
class ModelBundle:
    model: MlpModel
    schema: FeatureSchema
    standardizer: Standardizer
    stats: FeatureStats
    dataset_manifest: dict | None = None
    training_meta: dict | None = None

    def __post_init__(self):
        if self.stats.n_features != self.schema.n_features:
            raise ValueError(
                f"stats cover {self.stats.n_features} features, "
                f"schema declares {self.schema.n_features}"
            )
        if self.model.input_dim != self.schema.n_features:
            raise ValueError(
                f"model expects {self.model.input_dim} inputs, "
                f"schema declares {self.schema.n_features}"
            )

    def space(self) -> FeatureSpace:
        return FeatureSpace(
            n_features=self.schema.n_features,
            schema=self.schema,
            standardizer=self.standardizer,
            stats=self.stats,
        )

    def predict(self, x_original) -> float:
        return self.model.forward(self.standardizer.transform(x_original))

    def distance_spec(self, kind: str) -> DistanceSpec:
        return DistanceSpec(kind, stats=self.stats)

    def validate_point(self, x) -> np.ndarray:
        """Original-unit vector checked against the schema."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.schema.n_features,):
            raise ValueError(
                f"expected {self.schema.n_features} feature values, got shape {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("feature values must be finite")
        for i in self.schema.categorical_indices():
            feat = self.schema.features[i]
            if x[i] != round(x[i]) or not (0 <= x[i] < feat.n_categories):
                raise ValueError(
                    f"feature {feat.name!r}: invalid category code {x[i]!r}"
                )
        return x

    def to_doc(self) -> dict:
        doc = {
            "format_version": BUNDLE_FORMAT_VERSION,
            "model": self.model.to_doc(),
            "schema": self.schema.to_doc(),
            "standardization": self.standardizer.to_doc(),
            "stats": self.stats.to_doc(),
            "dataset_manifest": self.dataset_manifest,
            "training": self.training_meta or {},
        }
        doc["content_hash"] = content_hash(doc)
        return doc

    @classmethod
    def from_doc(cls, doc: dict, verify_hash: bool = True) -> "ModelBundle":
        if verify_hash and doc.get("content_hash") != content_hash(doc):
            raise ValueError("bundle content hash does not verify")
        return cls(
            model=MlpModel.from_doc(doc["model"]),
            schema=FeatureSchema.from_doc(doc["schema"]),
            standardizer=Standardizer.from_doc(doc["standardization"]),
            stats=FeatureStats.from_doc(doc["stats"]),
            dataset_manifest=doc.get("dataset_manifest"),
            training_meta=doc.get("training") or {},
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_doc(), indent=2))

    @classmethod
    def load(cls, path) -> "ModelBundle":
        return cls.from_doc(json.loads(Path(path).read_text()))
