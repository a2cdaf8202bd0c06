"""The auditing API, end to end, against a temporary data directory.

A decision-maker archives the exact model that made a decision; the data
subject (or an auditor) later asks that same version for predictions and
counterfactual explanations, and every exchange lands in an append-only
audit log that can be replayed.
"""

import tempfile

from fastapi.testclient import TestClient

from recourse import builtin, init_model, train
from recourse.bundle import ModelBundle
from recourse.profiles import training_profile
from recourse.service import create_app, replay_audit

ds = builtin("lsat")
train_ds, eval_X, _ = ds.split(eval_fraction=0.2, seed=0)
prof = training_profile("lsat", seed=7)
model, _ = train(
    init_model(prof.layer_dims, prof.hidden_activation, prof.output_head, seed=7),
    *train_ds.standardized_xy(), prof.config,
)
bundle = ModelBundle(model=model, schema=train_ds.schema,
                     standardizer=train_ds.standardizer, stats=train_ds.stats,
                     dataset_manifest=train_ds.manifest)

with tempfile.TemporaryDirectory() as data_dir:
    client = TestClient(create_app(data_dir))

    reg = client.post("/models", json={"bundle": bundle.to_doc(),
                                       "model_id": "grades"}).json()
    print(f"registered model {reg['model_id']} version {reg['version']}")

    row = eval_X[0].tolist()
    score = client.post(f"/models/grades/1/predict", json={"x": row}).json()
    print(f"archived model predicts {score['score']:+.3f} for {row}")

    cf = client.post(f"/models/grades/1/counterfactuals", json={
        "x_original": row, "target_score": 0.0, "distance": "l1mad",
        "clamp_categoricals": True, "rng_seed": 0,
        "outcome_phrase": "an average predicted score (0)",
    }).json()
    for e in cf["explanations"]:
        print(f"explanation: {e['statement']}")
    print(f"dependence flags: {cf['dependence']['flags']}")

    # registering a new version never touches version 1's answers
    reg2 = client.post("/models", json={"bundle": bundle.to_doc(),
                                        "model_id": "grades"}).json()
    print(f"second registration created version {reg2['version']}; "
          f"version 1 still answers as archived")

    records = client.get("/models/grades/1/audit").json()["records"]
    print(f"audit log holds {len(records)} records: "
          f"{[(r['record_id'], r['kind']) for r in records]}")
    checked, mismatched = replay_audit(data_dir, "grades")
    print(f"replaying the log against the archive: {checked} records, "
          f"{len(mismatched)} mismatches")
