import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from recourse.bundle import ModelBundle
from recourse.data import Feature, FeatureSchema, Standardizer
from recourse.distances import fit_stats
from recourse.model import MlpModel
from recourse.search import CfQuery, solve_diverse
from recourse.service import answer_counterfactual, create_app, replay_audit
from recourse.text import render


def linear_fixture_bundle() -> ModelBundle:
    """f(a, b) = a with an identity standardizer, so scores are raw inputs."""
    schema = FeatureSchema([Feature("a"), Feature("b")], target_name="t")
    model = MlpModel((2, 1), [np.array([[1.0], [0.0]])], [np.zeros(1)])
    X = np.array([[-10.0, -10.0], [0.0, 0.0], [5.0, 5.0], [10.0, 10.0]])
    return ModelBundle(
        model=model,
        schema=schema,
        standardizer=Standardizer(mean=np.zeros(2), scale=np.ones(2)),
        stats=fit_stats(X),
        training_meta={"fixture": "identity-row"},
    )


@pytest.fixture
def client(tmp_path):
    return TestClient(create_app(tmp_path))


def register(client, bundle=None, model_id=None):
    bundle = bundle or linear_fixture_bundle()
    body = {"bundle": bundle.to_doc()}
    if model_id:
        body["model_id"] = model_id
    r = client.post("/models", json=body)
    assert r.status_code == 201, r.text
    return r.json()["model_id"], r.json()["version"]


class TestRegistry:
    def test_register_same_bytes_twice_gives_two_versions(self, client):
        doc_hash = linear_fixture_bundle().to_doc()["content_hash"]
        mid1, v1 = register(client)
        mid2, v2 = register(client)
        assert mid1 == mid2 and (v1, v2) == (1, 2)
        for v in (1, 2):
            rec = client.get(f"/models/{mid1}/{v}").json()
            assert rec["bundle"]["content_hash"] == doc_hash

    def test_corrupted_payload_rejected(self, client):
        doc = linear_fixture_bundle().to_doc()
        doc["model"]["layers"][0]["weights"][0] = 999.0
        r = client.post("/models", json={"bundle": doc})
        assert r.status_code == 400
        assert r.json()["code"] == "hash_mismatch"

    def test_registry_survives_restart(self, tmp_path):
        app1 = TestClient(create_app(tmp_path))
        mid, v = register(app1, model_id="fixture")
        before = app1.get(f"/models/{mid}/{v}").json()
        app2 = TestClient(create_app(tmp_path))  # fresh process over same dir
        after = app2.get(f"/models/{mid}/{v}").json()
        assert after == before
        r = app2.post(f"/models/{mid}/{v}/predict", json={"x": [3.5, 9.9]})
        assert r.json()["score"] == pytest.approx(3.5)

    def test_list_models(self, client):
        assert client.get("/models").json() == {"models": []}
        mid, _ = register(client, model_id="demo")
        models = client.get("/models").json()["models"]
        assert len(models) == 1
        assert models[0]["model_id"] == "demo"
        assert models[0]["features"] == ["a", "b"]


class TestPredict:
    def test_identity_row_fixture(self, client):
        mid, v = register(client)
        r = client.post(f"/models/{mid}/{v}/predict", json={"x": [3.5, 9.9]})
        assert r.status_code == 200
        assert r.json()["score"] == pytest.approx(3.5)

    def test_unknown_version_404(self, client):
        mid, _ = register(client)
        r = client.post(f"/models/{mid}/99/predict", json={"x": [1.0, 2.0]})
        assert r.status_code == 404
        assert r.json()["code"] == "not_found"

    def test_same_request_twice_two_audit_records(self, client):
        mid, v = register(client)
        s1 = client.post(f"/models/{mid}/{v}/predict", json={"x": [1.0, 0.0]}).json()
        s2 = client.post(f"/models/{mid}/{v}/predict", json={"x": [1.0, 0.0]}).json()
        assert s1["score"] == s2["score"]
        assert s1["record_id"] != s2["record_id"]
        records = client.get(f"/models/{mid}/{v}/audit").json()["records"]
        assert len(records) == 2

    def test_validation_failure(self, client):
        mid, v = register(client)
        r = client.post(f"/models/{mid}/{v}/predict", json={"x": [1.0]})
        assert r.status_code == 400
        assert r.json()["code"] == "invalid_request"


class TestCounterfactuals:
    def test_identity_target_needs_no_change(self, client):
        mid, v = register(client)
        r = client.post(f"/models/{mid}/{v}/counterfactuals", json={
            "x_original": [1.0, 2.0], "target_score": 1.0, "distance": "l2",
        })
        body = r.json()
        assert body["converged"]
        assert body["counterfactuals"][0]["changed"] == []
        assert body["explanations"][0]["statement"].startswith("No change needed")

    def test_parity_with_direct_library_call(self, client):
        bundle = linear_fixture_bundle()
        mid, v = register(client, bundle)
        request = {
            "x_original": [0.0, 0.0], "target_score": 0.5, "distance": "l2",
            "n_restarts": 4, "n_diverse": 2, "rng_seed": 11,
        }
        http = client.post(f"/models/{mid}/{v}/counterfactuals", json=request).json()

        query = CfQuery(
            x_original=np.array([0.0, 0.0]), target_score=0.5,
            distance=bundle.distance_spec("l2"), n_restarts=4, n_diverse=2,
            rng_seed=11,
        )
        direct = solve_diverse(bundle.model, query, bundle.space())
        assert http["converged"]
        assert http["counterfactuals"] == json.loads(
            json.dumps([cf.to_doc() for cf in direct]))
        phrases = [f"a score of {cf.achieved_score:.2f}" for cf in direct]
        direct_expl = [render(cf, bundle.schema, p, subject_id=i)
                       for i, (cf, p) in enumerate(zip(direct, phrases), start=1)]
        assert [e["statement"] for e in http["explanations"]] == [
            e.statement for e in direct_expl]

    def test_not_converged_is_structured_not_transport_error(self, client):
        bundle = linear_fixture_bundle()
        mid, v = register(client, bundle)
        r = client.post(f"/models/{mid}/{v}/counterfactuals", json={
            "x_original": [0.0, 0.0], "target_score": 0.5, "distance": "l2",
            "cap_to_training_range": True, "tolerance_eps": 0.000001,
            "n_restarts": 1,
        })
        # tolerance this tight may converge anyway; force a truly impossible one
        r = client.post(f"/models/{mid}/{v}/counterfactuals", json={
            "x_original": [0.0, 0.0], "target_score": 99.0, "distance": "l2",
            "cap_to_training_range": True,
        })
        assert r.status_code == 200
        body = r.json()
        assert body["converged"] is False
        assert "failure" in body and body["failure"]["rounds"] > 0

    def test_version_pinning(self, client):
        bundle_v1 = linear_fixture_bundle()
        mid, v1 = register(client, bundle_v1, model_id="pin")
        # version 2 predicts b instead of a
        m2 = MlpModel((2, 1), [np.array([[0.0], [1.0]])], [np.zeros(1)])
        bundle_v2 = ModelBundle(
            model=m2, schema=bundle_v1.schema, standardizer=bundle_v1.standardizer,
            stats=bundle_v1.stats,
        )
        _, v2 = register(client, bundle_v2, model_id="pin")
        s1 = client.post(f"/models/pin/{v1}/predict", json={"x": [1.0, 5.0]}).json()
        s2 = client.post(f"/models/pin/{v2}/predict", json={"x": [1.0, 5.0]}).json()
        assert s1["score"] == pytest.approx(1.0)
        assert s2["score"] == pytest.approx(5.0)

    def test_restart_cap_enforced(self, client):
        mid, v = register(client)
        r = client.post(f"/models/{mid}/{v}/counterfactuals", json={
            "x_original": [0.0, 0.0], "target_score": 0.5, "distance": "l2",
            "n_restarts": 1000,
        })
        assert r.status_code == 400


class TestAudit:
    def test_append_only_and_monotone(self, client, tmp_path):
        mid, v = register(client)
        ids = []
        for k in range(3):
            r = client.post(f"/models/{mid}/{v}/predict", json={"x": [float(k), 0.0]})
            ids.append(r.json()["record_id"])
        assert ids == [1, 2, 3]
        records = client.get(f"/models/{mid}/{v}/audit", params={"after": 1}).json()
        assert [r["record_id"] for r in records["records"]] == [2, 3]

    def test_replay_reproduces_all_responses(self, tmp_path):
        client = TestClient(create_app(tmp_path))
        bundle = linear_fixture_bundle()
        mid, v = register(client, bundle, model_id="replayme")
        client.post(f"/models/{mid}/{v}/predict", json={"x": [2.0, 3.0]})
        client.post(f"/models/{mid}/{v}/counterfactuals", json={
            "x_original": [0.0, 0.0], "target_score": 0.5, "distance": "l2",
            "rng_seed": 7,
        })
        client.post(f"/models/{mid}/{v}/counterfactuals", json={
            "x_original": [1.0, 1.0], "target_score": 0.9, "distance": "l1mad",
            "n_restarts": 3, "rng_seed": 1,
        })
        checked, mismatched = replay_audit(tmp_path, mid)
        assert checked == 3
        assert mismatched == []

    def test_lsat_service_answers_match_library(self, tmp_path, lsat_bundle):
        b = lsat_bundle
        bundle = ModelBundle(
            model=b.model, schema=b.train_ds.schema,
            standardizer=b.train_ds.standardizer, stats=b.train_ds.stats,
            dataset_manifest=b.train_ds.manifest,
        )
        client = TestClient(create_app(tmp_path))
        mid, v = register(client, bundle, model_id="lsat")
        row = b.eval_X[0].tolist()
        request = {
            "x_original": row, "target_score": 0.0, "distance": "l1mad",
            "n_restarts": 4, "rng_seed": 5,
            "outcome_phrase": "an average predicted score (0)",
        }
        http = client.post(f"/models/lsat/{v}/counterfactuals", json=request).json()
        direct = answer_counterfactual(bundle, request)
        assert http["converged"] == direct["converged"]
        assert http["counterfactuals"] == json.loads(json.dumps(direct["counterfactuals"]))
        checked, mismatched = replay_audit(tmp_path, "lsat")
        assert checked == 1 and mismatched == []
