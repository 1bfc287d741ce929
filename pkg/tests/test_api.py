"""HTTP service contracts, exercised through the in-process test client."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from evolvex.api import build_state, create_app, _cumulative_adjacency
from evolvex.graphgen import GeneratorConfig, generate, split_dataset
from evolvex.predict import rank_candidates
from evolvex.train import LossWeights, TrainConfig, train


@pytest.fixture(scope="module")
def served():
    ds = generate(GeneratorConfig(n_users=10, n_steps=7, post_rate=5.0), seed=2)
    cond, _ = split_dataset(ds, 4)
    model, _ = train(cond, TrainConfig(epochs=15, learning_rate=3e-3, seed=2,
                                       strategy="crossmodal", d=8, d_h=8, d_y=8,
                                       weights=LossWeights(0.5, 0.5)))
    state = build_state(ds, model)
    return state, TestClient(create_app(state))


class TestUsers:
    def test_profile_summaries(self, served):
        _, client = served
        resp = client.get("/api/users")
        assert resp.status_code == 200
        users = resp.json()
        assert len(users) == 10
        assert {"id", "age", "gender", "occupation", "country"} <= set(users[0])

    def test_unknown_user_404(self, served):
        _, client = served
        resp = client.get("/api/users/99/suggestions")
        assert resp.status_code == 404
        assert "unknown user" in resp.json()["detail"]


class TestSuggestions:
    def test_default_stage_is_one(self, served):
        _, client = served
        default = client.get("/api/users/0/suggestions").json()
        explicit = client.get("/api/users/0/suggestions?stage=1").json()
        assert default == explicit

    def test_matches_rank_candidates(self, served):
        state, client = served
        for stage in (1, 3):
            got = [s["id"] for s in
                   client.get(f"/api/users/2/suggestions?stage={stage}").json()]
            known = _cumulative_adjacency(state, stage)
            expected = rank_candidates(2, state.forecast.stage(stage).edge_probs, 10,
                                       exclude_existing=True, adjacency=known)
            assert got == expected

    @pytest.mark.parametrize("stage", ["0", "5", "abc"])
    def test_bad_stage_400(self, served, stage):
        _, client = served
        resp = client.get(f"/api/users/0/suggestions?stage={stage}")
        assert resp.status_code == 400

    def test_confidences_sorted_descending(self, served):
        _, client = served
        suggestions = client.get("/api/users/1/suggestions").json()
        confs = [s["confidence"] for s in suggestions]
        assert confs == sorted(confs, reverse=True)


class TestMap:
    def test_current_equals_neighbors(self, served):
        state, client = served
        body = client.get("/api/users/0/map").json()
        adj = state.conditioning.snapshots[-1].adjacency
        assert {c["id"] for c in body["current"]} == set(np.flatnonzero(adj[0]))

    def test_predicted_carry_country_and_confidence(self, served):
        _, client = served
        body = client.get("/api/users/0/map?stage=2").json()
        for item in body["predicted"]:
            assert {"id", "country", "confidence"} <= set(item)
            assert 0.0 <= item["confidence"] <= 1.0


class TestActivities:
    def test_shapes(self, served):
        state, client = served
        body = client.get("/api/users/3/activities").json()
        assert len(body["categories"]) == 8
        assert len(body["history"]) == state.conditioning.n_steps
        assert all(len(row) == 8 for row in body["history"])
        assert [p["stage"] for p in body["predicted"]] == [1, 2, 3, 4]
        for p in body["predicted"]:
            assert abs(sum(p["probs"]) - 1.0) < 1e-6


class TestServiceContracts:
    def test_before_startup_503(self):
        client = TestClient(create_app(None))
        assert client.get("/api/users").status_code == 503

    def test_repeated_calls_identical(self, served):
        _, client = served
        a = client.get("/api/users/4/suggestions?stage=2").content
        b = client.get("/api/users/4/suggestions?stage=2").content
        assert a == b

    def test_openapi_document_lists_endpoints(self, served):
        _, client = served
        doc = client.get("/openapi.json").json()
        for path in ("/api/users", "/api/users/{user}/suggestions",
                     "/api/users/{user}/map", "/api/users/{user}/activities"):
            assert path in doc["paths"]
