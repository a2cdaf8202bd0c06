"""Capture real audit-service responses as frozen JSON fixtures.

The frontend test suite replays these against an in-memory fixture service,
so the UI is tested against the genuine wire format. The scenario is a tiny
deterministic loan-score model: score = income/30 + 0.2*sex - 1, with sex a
protected binary attribute. Analytic outcomes:

* target 0.5 from (income 30, sex female): raise income to ~44.7
* target 0.2 with income locked, clamped: flip sex to 'male'
* target 0.5 with everything locked: no counterfactual exists
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from recourse.bundle import ModelBundle
from recourse.data import Feature, FeatureSchema, Standardizer
from recourse.distances import fit_stats
from recourse.model import MlpModel
from recourse.service import create_app

OUT = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def loan_bundle() -> ModelBundle:
    schema = FeatureSchema(
        features=[
            Feature("income", "continuous", label="annual income", unit="k"),
            Feature("sex", "categorical", categories=["female", "male"],
                    protected=True),
        ],
        target_name="loan_score",
        target_kind="score",
    )
    model = MlpModel((2, 1), [np.array([[1.0 / 30.0], [0.2]])], [np.array([-1.0])])
    train_rows = np.array([
        [18.0, 0.0], [24.0, 1.0], [30.0, 0.0], [36.0, 1.0], [42.0, 0.0], [60.0, 1.0],
    ])
    return ModelBundle(
        model=model,
        schema=schema,
        standardizer=Standardizer(mean=np.zeros(2), scale=np.ones(2)),
        stats=fit_stats(train_rows),
        training_meta={"fixture": "loan-score"},
    )


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    bundle = loan_bundle()
    with tempfile.TemporaryDirectory() as data_dir:
        client = TestClient(create_app(data_dir))
        reg = client.post("/models", json={"bundle": bundle.to_doc(),
                                           "model_id": "loan"})
        assert reg.status_code == 201, reg.text
        version = reg.json()["version"]

        fixtures = {"register.json": reg.json()}
        fixtures["models.json"] = client.get("/models").json()
        fixtures["model_record.json"] = client.get(f"/models/loan/{version}").json()

        base_point = [30.0, 0.0]
        r = client.post(f"/models/loan/{version}/counterfactuals", json={
            "x_original": base_point, "target_score": 0.5, "distance": "l1mad",
            "n_restarts": 4, "n_diverse": 2, "rng_seed": 0,
            "outcome_phrase": "been offered a loan",
        })
        assert r.json()["converged"], r.text
        fixtures["cf_income.json"] = r.json()

        r = client.post(f"/models/loan/{version}/counterfactuals", json={
            "x_original": base_point, "target_score": 0.2, "distance": "l1mad",
            "locked_features": ["income"], "clamp_categoricals": True,
            "rng_seed": 0, "outcome_phrase": "a provisional offer",
        })
        assert r.json()["converged"], r.text
        changed = r.json()["counterfactuals"][0]["changed"]
        assert [c["feature"] for c in changed] == ["sex"], changed
        fixtures["cf_sex_flip.json"] = r.json()

        r = client.post(f"/models/loan/{version}/counterfactuals", json={
            "x_original": base_point, "target_score": 0.5, "distance": "l1mad",
            "locked_features": ["income", "sex"], "rng_seed": 0,
        })
        assert r.json()["converged"] is False
        fixtures["cf_not_converged.json"] = r.json()

        income_cf = fixtures["cf_income.json"]["counterfactuals"][0]
        new_income = income_cf["changed"][0]["new"]
        r = client.post(f"/models/loan/{version}/predict",
                        json={"x": [new_income, 0.0]})
        fixtures["predict_after_delta.json"] = r.json()
        r = client.post(f"/models/loan/{version}/predict", json={"x": base_point})
        fixtures["predict_base.json"] = r.json()

    for name, payload in fixtures.items():
        (OUT / name).write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {OUT / name}")


if __name__ == "__main__":
    main()
