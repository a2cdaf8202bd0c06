"""Render counterfactuals as short natural-language statements.

The sentence form follows the pattern "If your <feature> was <value>, you
would have <outcome>", listing only the features that actually changed.
Continuous clauses are joined with a bare " and "; a clause about a
categorical feature reads "you were '<category>'" and is set off with a
comma. Values are shown in original units, one decimal place.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import FeatureSchema
from .search import Counterfactual


@dataclass
class Explanation:
    statement: str
    deltas: list[tuple[str, float, float, str]]  # (label, old, new, unit)
    outcome_phrase: str
    distance_value: float
    metric: str
    subject_id: int | None = None

    def to_doc(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "statement": self.statement,
            "deltas": [
                {"label": label, "old": old, "new": new, "unit": unit}
                for label, old, new, unit in self.deltas
            ],
            "outcome_phrase": self.outcome_phrase,
            "distance": self.distance_value,
            "metric": self.metric,
        }


def _format_value(value: float) -> str:
    return f"{value:.1f}"


def _category_text(feature, value: float) -> str:
    code = int(round(value))
    if abs(value - code) < 1e-9 and 0 <= code < feature.n_categories:
        return feature.categories[code]
    # relaxed searches can leave meaningless fractional codes; shown as-is
    return _format_value(value)


def render(cf: Counterfactual, schema: FeatureSchema, outcome_phrase: str,
           subject_id: int | None = None) -> Explanation:
    """One statement for one counterfactual."""
    clauses: list[tuple[str, bool]] = []  # (text, is_categorical)
    deltas = []
    for name, old, new in cf.changed:
        try:
            feature = schema.features[schema.index_of(name)]
        except KeyError:
            raise ValueError(f"counterfactual changes unknown feature {name!r}") from None
        if feature.kind == "categorical":
            clauses.append((f"you were '{_category_text(feature, new)}'", True))
        else:
            clauses.append((f"your {feature.label} was {_format_value(new)}", False))
        deltas.append((feature.label, float(old), float(new), feature.unit))

    if not clauses:
        statement = f"No change needed: the current data already yields {outcome_phrase}."
    else:
        body = clauses[0][0]
        for text, is_categorical in clauses[1:]:
            body += (", and " if is_categorical else " and ") + text
        statement = f"If {body}, you would have {outcome_phrase}."
    return Explanation(
        statement=statement,
        deltas=deltas,
        outcome_phrase=outcome_phrase,
        distance_value=float(cf.distance_value),
        metric=cf.diagnostics.get("metric", ""),
        subject_id=subject_id,
    )


def render_set(cfs, schema: FeatureSchema, outcome_phrase: str) -> list[Explanation]:
    """One explanation per counterfactual, closest first, numbered from 1."""
    ordered = sorted(cfs, key=lambda c: c.distance_value)
    return [
        render(cf, schema, outcome_phrase, subject_id=i)
        for i, cf in enumerate(ordered, start=1)
    ]
