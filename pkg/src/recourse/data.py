"""Schema-validated tabular datasets and standardization.

CSV files use a header row, UTF-8, '.' decimal separator; the feature columns
come first and the target column is last. Loading is all-or-nothing: any
malformed cell fails with an error naming the row and column.

The bundled ``lsat`` and ``pima`` datasets are deterministic synthetic
stand-ins that match the published schemas and exhibit the same qualitative
structure (range disparities, a protected binary attribute whose value the
label depends on); see ``tools/generate_bundled_data.py`` to regenerate them,
or pass your own CSV matching the schema.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .distances import FeatureStats, fit_stats

BUILTIN_NAMES = ("lsat", "pima", "xor", "two_moons_like")

# continuous columns with zero variance would make z-scoring degenerate;
# they are passed through unscaled instead
_STD_FLOOR = 1e-12


class DatasetError(ValueError):
    """Structured loading / validation failure."""


@dataclass
class Feature:
    name: str
    kind: str = "continuous"  # or "categorical"
    categories: list[str] | None = None  # labels indexed by code, categorical only
    protected: bool = False
    label: str | None = None  # display name; defaults to ``name``
    unit: str = ""

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise DatasetError(f"feature {self.name}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.categories:
                raise DatasetError(f"feature {self.name}: categorical needs categories")
        elif self.categories:
            raise DatasetError(f"feature {self.name}: categories on a continuous feature")
        if self.label is None:
            self.label = self.name

    @property
    def n_categories(self) -> int:
        return len(self.categories) if self.categories else 0

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "categories": self.categories,
            "protected": self.protected,
            "label": self.label,
            "unit": self.unit,
        }


@dataclass
class FeatureSchema:
    """Ordered feature declarations plus the prediction target."""

    features: list[Feature]
    target_name: str = "target"
    target_kind: str = "score"  # or "probability"

    def __post_init__(self):
        if not self.features:
            raise DatasetError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names) or self.target_name in names:
            raise DatasetError("feature / target names must be unique")
        if self.target_kind not in ("score", "probability"):
            raise DatasetError(f"unknown target kind {self.target_kind!r}")

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(f"unknown feature {name!r}")

    def categorical_indices(self) -> list[int]:
        return [i for i, f in enumerate(self.features) if f.kind == "categorical"]

    def protected_names(self) -> list[str]:
        return [f.name for f in self.features if f.protected]

    def to_doc(self) -> dict:
        return {
            "features": [f.to_doc() for f in self.features],
            "target": {"name": self.target_name, "kind": self.target_kind},
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FeatureSchema":
        feats = [
            Feature(
                name=f["name"],
                kind=f["kind"],
                categories=f.get("categories"),
                protected=bool(f.get("protected", False)),
                label=f.get("label"),
                unit=f.get("unit", ""),
            )
            for f in doc["features"]
        ]
        return cls(feats, doc["target"]["name"], doc["target"]["kind"])


@dataclass
class Standardizer:
    """Affine transform between original units and the model's input space.

    Continuous features are z-scored; categorical features pass through as
    codes. Score targets are normalized to mean 0 / unit scale; probability
    targets are left alone.
    """

    mean: np.ndarray
    scale: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0

    @classmethod
    def fit(cls, schema: FeatureSchema, X: np.ndarray, y: np.ndarray) -> "Standardizer":
        mean = np.zeros(schema.n_features)
        scale = np.ones(schema.n_features)
        for i, feat in enumerate(schema.features):
            if feat.kind == "continuous":
                mean[i] = X[:, i].mean()
                s = X[:, i].std()
                scale[i] = s if s > _STD_FLOOR else 1.0
        if schema.target_kind == "score":
            ys = y.std()
            return cls(mean, scale, float(y.mean()), float(ys) if ys > _STD_FLOOR else 1.0)
        return cls(mean, scale, 0.0, 1.0)

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def inverse(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.scale + self.mean

    def transform_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_scale

    def inverse_y(self, y):
        return np.asarray(y, dtype=float) * self.y_scale + self.y_mean

    def to_doc(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "y_mean": self.y_mean,
            "y_scale": self.y_scale,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Standardizer":
        return cls(
            np.asarray(doc["mean"], dtype=float),
            np.asarray(doc["scale"], dtype=float),
            float(doc["y_mean"]),
            float(doc["y_scale"]),
        )


@dataclass
class FeatureSpace:
    """Bridges model-input coordinates and original units for the search.

    ``standardizer`` may be None for models that consume raw coordinates
    (synthetic fixtures, 1-D demos); bounds come from the fitted stats.
    """

    n_features: int
    schema: FeatureSchema | None = None
    standardizer: Standardizer | None = None
    stats: FeatureStats | None = None

    @classmethod
    def identity(cls, n_features: int, stats: FeatureStats | None = None) -> "FeatureSpace":
        return cls(n_features=n_features, stats=stats)

    def to_model(self, x_original) -> np.ndarray:
        x = np.asarray(x_original, dtype=float)
        return self.standardizer.transform(x) if self.standardizer else x.copy()

    def to_original(self, x_model) -> np.ndarray:
        x = np.asarray(x_model, dtype=float)
        return self.standardizer.inverse(x) if self.standardizer else x.copy()

    def unit_scale(self) -> np.ndarray:
        """d(original) / d(model coordinate), per feature."""
        if self.standardizer is None:
            return np.ones(self.n_features)
        return self.standardizer.scale.copy()

    def model_bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Training [min, max] per feature, mapped into model coordinates."""
        if self.stats is None:
            return None
        lo = self.to_model(self.stats.min)
        hi = self.to_model(self.stats.max)
        return lo, hi

    def categorical_info(self) -> list[tuple[int, int]]:
        """(feature index, category count) pairs."""
        if self.schema is None:
            return []
        return [(i, self.schema.features[i].n_categories) for i in self.schema.categorical_indices()]

    def feature_names(self) -> list[str]:
        if self.schema is not None:
            return self.schema.names
        return [f"x{i + 1}" for i in range(self.n_features)]


@dataclass
class Dataset:
    """Immutable rows in original units plus everything fitted on them."""

    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray
    standardizer: Standardizer
    stats: FeatureStats
    manifest: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(
        cls, schema: FeatureSchema, X, y, source_hash: str | None = None,
        extra_manifest: dict | None = None,
    ) -> "Dataset":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        if X.shape[0] == 0:
            raise DatasetError("no rows")
        if X.shape[0] != y.shape[0]:
            raise DatasetError("feature/label row counts differ")
        _validate_rows(schema, X, y)
        std = Standardizer.fit(schema, X, y)
        stats = fit_stats(X)
        manifest = {
            "schema": schema.to_doc(),
            "row_count": int(X.shape[0]),
            "standardization": std.to_doc(),
            "sha256": source_hash or _rows_hash(X, y),
        }
        if extra_manifest:
            manifest.update(extra_manifest)
        return cls(schema, X, y, std, stats, manifest)

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])

    def standardized_xy(self) -> tuple[np.ndarray, np.ndarray]:
        Z = (self.X - self.standardizer.mean) / self.standardizer.scale
        return Z, self.standardizer.transform_y(self.y)

    def space(self) -> FeatureSpace:
        return FeatureSpace(
            n_features=self.schema.n_features,
            schema=self.schema,
            standardizer=self.standardizer,
            stats=self.stats,
        )

    def split(self, eval_fraction: float = 0.2, seed: int = 0):
        """Seeded train/eval split; all statistics refit on the train rows only.

        Returns (train Dataset, eval X, eval y) - the eval rows stay in
        original units and are standardized with the train-side fit.
        """
        if not 0 < eval_fraction < 1:
            raise ValueError("eval_fraction must be in (0, 1)")
        rng = np.random.default_rng(seed)
        order = rng.permutation(self.n_rows)
        n_eval = max(1, int(round(self.n_rows * eval_fraction)))
        eval_idx, train_idx = order[:n_eval], order[n_eval:]
        if train_idx.size == 0:
            raise DatasetError("split leaves no training rows")
        train = Dataset.from_arrays(
            self.schema, self.X[train_idx], self.y[train_idx],
            source_hash=self.manifest.get("sha256"),
            extra_manifest={"split": {"seed": seed, "eval_fraction": eval_fraction,
                                      "role": "train"}},
        )
        return train, self.X[eval_idx].copy(), self.y[eval_idx].copy()


def _validate_rows(schema: FeatureSchema, X: np.ndarray, y: np.ndarray):
    if X.shape[1] != schema.n_features:
        raise DatasetError(
            f"expected {schema.n_features} feature columns, found {X.shape[1]}"
        )
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        bad = np.argwhere(~np.isfinite(X))
        where = f" at row {bad[0][0] + 1}" if bad.size else ""
        raise DatasetError(f"non-finite value{where}")
    for i in schema.categorical_indices():
        feat = schema.features[i]
        col = X[:, i]
        valid = (col == np.round(col)) & (col >= 0) & (col < feat.n_categories)
        if not np.all(valid):
            row = int(np.argwhere(~valid)[0][0])
            raise DatasetError(
                f"row {row + 1}, column {feat.name!r}: invalid category code {col[row]!r}"
            )


def _rows_hash(X: np.ndarray, y: np.ndarray) -> str:
    buf = io.StringIO()
    for row, label in zip(X, y):
        buf.write(",".join(repr(v) for v in row) + f",{label!r}\n")
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Load and validate a CSV whose header matches the schema."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    raw = path.read_bytes()
    return _parse_csv(raw, schema, source=str(path))


def _parse_csv(raw: bytes, schema: FeatureSchema, source: str = "<memory>") -> Dataset:
    reader = csv.reader(io.StringIO(raw.decode("utf-8")))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError(f"{source}: empty file") from None
    expected = schema.names + [schema.target_name]
    if [h.strip() for h in header] != expected:
        raise DatasetError(f"{source}: header {header} does not match schema {expected}")
    rows, labels = [], []
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(expected):
            raise DatasetError(f"{source}: row {lineno} has {len(row)} cells, expected {len(expected)}")
        vals = []
        for col_name, cell in zip(expected, row):
            try:
                vals.append(float(cell))
            except ValueError:
                raise DatasetError(
                    f"{source}: row {lineno}, column {col_name!r}: non-numeric cell {cell!r}"
                ) from None
        rows.append(vals[:-1])
        labels.append(vals[-1])
    if not rows:
        raise DatasetError(f"{source}: no rows")
    X = np.asarray(rows, dtype=float)
    y = np.asarray(labels, dtype=float)
    try:
        return Dataset.from_arrays(
            schema, X, y, source_hash=hashlib.sha256(raw).hexdigest()
        )
    except DatasetError as e:
        raise DatasetError(f"{source}: {e}") from None


def write_csv(path, schema: FeatureSchema, X: np.ndarray, y: np.ndarray,
              decimals: list[int] | None = None, y_decimals: int = 3):
    """Write rows in the canonical CSV layout (features then target)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.names + [schema.target_name])
        for row, label in zip(X, y):
            cells = []
            for i, v in enumerate(row):
                d = decimals[i] if decimals else 3
                cells.append(f"{v:.{d}f}" if d > 0 else f"{v:.0f}")
            cells.append(f"{label:.{y_decimals}f}")
            writer.writerow(cells)


# -- builtin schemas & datasets ----------------------------------------------


def lsat_schema() -> FeatureSchema:
    return FeatureSchema(
        features=[
            Feature("gpa", "continuous", label="GPA", unit="grade points"),
            Feature("lsat", "continuous", label="LSAT", unit="points"),
            Feature("race", "categorical", categories=["white", "black"], protected=True),
        ],
        target_name="first_year_average",
        target_kind="score",
    )


def pima_schema() -> FeatureSchema:
    return FeatureSchema(
        features=[
            Feature("pregnancies", "continuous", label="Number of times pregnant"),
            Feature("glucose", "continuous", label="Plasma glucose concentration", unit="mg/dL"),
            Feature("blood_pressure", "continuous", label="Diastolic blood pressure", unit="mm Hg"),
            Feature("skin_thickness", "continuous", label="Triceps skin fold thickness", unit="mm"),
            Feature("insulin", "continuous", label="2-Hour serum insulin level", unit="mu U/ml"),
            Feature("bmi", "continuous", label="Body mass index"),
            Feature("pedigree", "continuous", label="Diabetes pedigree function"),
            Feature("age", "continuous", label="Age", unit="years"),
        ],
        target_name="diabetes_risk",
        target_kind="probability",
    )


def xor_schema() -> FeatureSchema:
    return FeatureSchema(
        features=[Feature("x1"), Feature("x2")],
        target_name="parity",
        target_kind="probability",
    )


def synthesize_lsat(seed: int = 0, n: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic synthetic law-school table: GPA, LSAT, race -> grade.

    Race is exactly balanced so the binary column keeps a nonzero median
    absolute deviation; the label carries a direct race penalty so trained
    classifiers exhibit the dependence the protected-attribute flag detects.
    """
    rng = np.random.default_rng(seed)
    half = n // 2
    race = np.array([0.0] * half + [1.0] * (n - half))
    rng.shuffle(race)
    gpa = np.clip(rng.normal(3.2, 0.38, n) - 0.35 * race, 1.0, 4.0).round(2)
    lsat = np.clip(rng.normal(38.0, 5.5, n) - 4.0 * race, 12.0, 50.0).round(1)
    z = lambda v: (v - v.mean()) / v.std()
    fya = 0.45 * z(gpa) + 0.65 * z(lsat) - 0.55 * race + rng.normal(0, 0.35, n)
    fya = (fya - fya.mean()).round(3)
    return np.column_stack([gpa, lsat, race]), fya


def synthesize_pima(seed: int = 0, n: int = 768) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic synthetic diabetes-risk table with 8 predictors.

    Glucose and 2-hour insulin carry the strongest weight in the risk logit,
    mirroring which variables counterfactual searches tend to move.
    """
    rng = np.random.default_rng(seed)
    pregnancies = np.clip(rng.poisson(3.0, n), 0, 15).astype(float)
    glucose = np.clip(rng.normal(122.0, 30.0, n), 55.0, 200.0).round(1)
    blood_pressure = np.clip(rng.normal(70.0, 12.0, n), 40.0, 110.0).round(1)
    skin = np.clip(rng.normal(26.0, 9.0, n), 5.0, 60.0).round(1)
    insulin = np.clip(rng.lognormal(4.4, 0.65, n), 15.0, 600.0).round(1)
    bmi = np.clip(rng.normal(32.5, 6.5, n), 18.0, 55.0).round(1)
    pedigree = np.clip(rng.lognormal(-0.85, 0.55, n), 0.05, 2.5).round(3)
    age = np.clip(21.0 + rng.gamma(2.0, 8.0, n), 21.0, 81.0).round(0)
    X = np.column_stack([pregnancies, glucose, blood_pressure, skin, insulin, bmi, pedigree, age])
    z = lambda v: (v - v.mean()) / v.std()
    logit = (
        -0.4 + 1.25 * z(glucose) + 0.75 * z(insulin) + 0.55 * z(bmi)
        + 0.35 * z(age) + 0.30 * z(pregnancies) + 0.25 * z(pedigree)
        + 0.10 * z(skin) + 0.05 * z(blood_pressure)
        + rng.normal(0, 0.25, n)
    )
    y = rng.binomial(1, 1.0 / (1.0 + np.exp(-logit))).astype(float)
    return X, y


def xor_dataset() -> Dataset:
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0.0, 1.0, 1.0, 0.0])
    return Dataset.from_arrays(xor_schema(), X, y)


def two_moons_like_dataset(seed: int = 0, n: int = 240) -> Dataset:
    rng = np.random.default_rng(seed)
    half = n // 2
    t = rng.uniform(0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1 - np.cos(t), 0.5 - np.sin(t)])
    X = np.vstack([upper, lower]) + rng.normal(0, 0.08, (2 * half, 2))
    y = np.array([0.0] * half + [1.0] * half)
    schema = FeatureSchema(
        features=[Feature("u"), Feature("v")],
        target_name="cluster",
        target_kind="probability",
    )
    return Dataset.from_arrays(schema, X, y)


def _bundled_path(filename: str) -> Path:
    return Path(resources.files("recourse").joinpath("data_files", filename))


def builtin(name: str, path=None) -> Dataset:
    """Load a named bundled dataset, or a user CSV matching its schema."""
    if name not in BUILTIN_NAMES:
        raise DatasetError(f"unknown builtin {name!r}; choose from {BUILTIN_NAMES}")
    if name == "xor":
        return xor_dataset()
    if name == "two_moons_like":
        return two_moons_like_dataset()
    schema = lsat_schema() if name == "lsat" else pima_schema()
    csv_path = Path(path) if path else _bundled_path(f"{name}.csv")
    if not csv_path.exists():
        raise DatasetError(
            f"data file for {name!r} not found at {csv_path}; regenerate the bundled "
            f"copy with `python tools/generate_bundled_data.py` or pass path= to a "
            f"CSV with columns {schema.names + [schema.target_name]}"
        )
    return load_csv(csv_path, schema)
