import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from prefalign.core import LinearRewardModel
from prefalign.datalab import SyntheticSpec, generate_synthetic, toy_fixture
from prefalign.httpapi import create_app
from prefalign.service import (
    Condition,
    SessionStore,
    UnknownSessionError,
    dataset_from_payload,
    dataset_to_payload,
)
from prefalign.trainer import LossKind, OptimizerKind, TrainConfig


@pytest.fixture
def synthetic():
    spec = SyntheticSpec(
        dim=2,
        num_trajectories=12,
        num_preferences=20,
        true_weights=np.array([1.5, -1.0]),
        tie_epsilon=0.1,
        resample_ties=True,
        seed=3,
    )
    return generate_synthetic(spec), spec


class TestStore:
    def test_create_and_get(self, synthetic):
        data, _ = synthetic
        store = SessionStore()
        session = store.create_session(data, Condition.ALIGNMENT, gamma=1.0)
        assert store.get(session.id) is session
        with pytest.raises(UnknownSessionError):
            store.get("nope")

    def test_expert_weights_reach_full_alignment(self, synthetic):
        data, spec = synthetic
        store = SessionStore()
        session = store.create_session(data, Condition.ALIGNMENT)
        it = store.evaluate(session.id, spec.true_weights)
        assert it.tac == 1.0
        assert all(p.agreement for p in it.per_pair)
        assert it.accuracy == 1.0

    def test_zero_weights_degenerate_warning(self, synthetic):
        data, _ = synthetic
        store = SessionStore()
        session = store.create_session(data, Condition.ALIGNMENT)
        it = store.evaluate(session.id, [0.0, 0.0])
        assert it.tac is None
        assert "undefined" in it.warning
        assert all(p.induced == 0 for p in it.per_pair)

    def test_control_condition_never_scores(self, synthetic):
        data, spec = synthetic
        store = SessionStore()
        session = store.create_session(data, Condition.CONTROL)
        it = store.evaluate(session.id, spec.true_weights)
        assert it.tac is None and it.warning is None
        assert all("tac" not in s for s in store.history(session.id))

    def test_iterations_append_only_with_identical_metrics(self, synthetic):
        data, spec = synthetic
        store = SessionStore()
        session = store.create_session(data, Condition.ALIGNMENT)
        a = store.evaluate(session.id, spec.true_weights)
        b = store.evaluate(session.id, spec.true_weights)
        assert (a.index, b.index) == (0, 1)
        assert a.tac == b.tac and a.accuracy == b.accuracy
        assert a.per_pair == b.per_pair
        assert len(store.history(session.id)) == 2

    def test_dimension_mismatch(self, synthetic):
        data, _ = synthetic
        store = SessionStore()
        session = store.create_session(data, Condition.ALIGNMENT)
        with pytest.raises(ValueError, match="expected 2 weights"):
            store.evaluate(session.id, [1.0])

    def test_persistence_round_trip(self, synthetic, tmp_path):
        data, spec = synthetic
        store = SessionStore(tmp_path)
        session = store.create_session(data, Condition.ALIGNMENT, gamma=0.9)
        store.evaluate(session.id, spec.true_weights)
        store.evaluate(session.id, [0.5, 0.5])

        reloaded = SessionStore(tmp_path)
        copy = reloaded.get(session.id)
        assert copy.condition is Condition.ALIGNMENT
        assert copy.gamma == 0.9
        assert len(copy.iterations) == 2
        assert copy.iterations[0].tac == 1.0
        assert copy.dataset.records == data.records
        # appends continue with gap-free indices
        it = reloaded.evaluate(session.id, spec.true_weights)
        assert it.index == 2

    def test_auto_train_toy_contrast(self):
        store = SessionStore()
        session = store.create_session(toy_fixture(noisy=True), Condition.ALIGNMENT)
        base = dict(learning_rate=0.1, batch_size=1, max_epochs=40,
                    optimizer=OptimizerKind.SGD, seed=0)
        soft = store.auto_train(session.id, TrainConfig(loss_kind=LossKind.SOFT_TAC, **base))
        ce = store.auto_train(session.id, TrainConfig(loss_kind=LossKind.CROSS_ENTROPY, **base))
        assert soft.weights[0] > ce.weights[0]
        assert soft.machine_generated and ce.machine_generated
        assert [t.index for t in store.get(session.id).train_results] == [0, 1]

    def test_auto_train_zero_epochs_returns_init(self, synthetic):
        data, _ = synthetic
        store = SessionStore()
        session = store.create_session(data, Condition.ALIGNMENT)
        result = store.auto_train(session.id, TrainConfig(max_epochs=0, seed=8))
        from prefalign.trainer import init_weights

        np.testing.assert_allclose(result.weights, init_weights(2, 8))

    def test_pair_summaries(self, synthetic):
        data, spec = synthetic
        store = SessionStore()
        session = store.create_session(data, Condition.CONTROL)
        rows = store.pair_summaries(session.id)
        assert len(rows) == len(data.records)
        assert "left_feature_totals" in rows[0] and "left_sparkline" not in rows[0]
        rows = store.pair_summaries(session.id, weights=spec.true_weights)
        sparkline = rows[0]["left_sparkline"]
        assert len(sparkline) == rows[0]["left_length"]
        left_return = sparkline[-1]
        model = LinearRewardModel(weights=spec.true_weights, gamma=session.gamma)
        from prefalign.core import discounted_return

        assert left_return == pytest.approx(
            discounted_return(model, data.trajectories[rows[0]["left"]])
        )

    def test_display_and_scoring_subsets(self, synthetic):
        data, spec = synthetic
        store = SessionStore()
        session = store.create_session(
            data, Condition.ALIGNMENT, display_limit=5, scoring_limit=10
        )
        assert len(session.display_indices) == 5
        assert len(session.scoring_indices) == 10
        rows = store.pair_summaries(session.id)
        assert len(rows) == 5
        assert len(store.pair_summaries(session.id, all_pairs=True)) == len(data.records)
        it = store.evaluate(session.id, spec.true_weights)
        assert len(it.per_pair) == 10  # metrics come from the scoring subset
        assert it.tac == 1.0

    def test_concurrent_evaluates_gap_free(self, synthetic):
        from concurrent.futures import ThreadPoolExecutor

        data, spec = synthetic
        store = SessionStore()
        session = store.create_session(data, Condition.ALIGNMENT)
        with ThreadPoolExecutor(max_workers=8) as pool:
            futures = [
                pool.submit(store.evaluate, session.id, spec.true_weights * (1 + k % 3))
                for k in range(64)
            ]
            indices = sorted(f.result().index for f in futures)
        assert indices == list(range(64))
        assert len(store.history(session.id)) == 64

    def test_dataset_payload_round_trip(self, synthetic):
        data, _ = synthetic
        back = dataset_from_payload(dataset_to_payload(data))
        assert back.records == data.records
        for tid in data.trajectories:
            np.testing.assert_array_equal(
                back.trajectories[tid].steps, data.trajectories[tid].steps
            )


@pytest.fixture
def client(synthetic):
    data, spec = synthetic
    store = SessionStore()
    app = create_app(store)
    return TestClient(app), data, spec


class TestHttpApi:
    def create(self, client, data, condition="alignment", gamma=1.0):
        resp = client.post(
            "/sessions",
            json={
                "condition": condition,
                "gamma": gamma,
                "dataset": dataset_to_payload(data),
            },
        )
        return resp

    def test_create_returns_201(self, client):
        http, data, _ = client
        resp = self.create(http, data)
        assert resp.status_code == 201
        body = resp.json()
        assert body["num_pairs"] == 20 and body["dim"] == 2

    def test_create_with_missing_trajectory_lists_offender(self, client):
        http, data, _ = client
        payload = dataset_to_payload(data)
        payload["records"].append({"left": "ghost", "right": payload["records"][0]["right"], "label": 1})
        resp = http.post("/sessions", json={"condition": "alignment", "dataset": payload})
        assert resp.status_code == 400
        assert "ghost" in resp.json()["message"]

    def test_unknown_condition(self, client):
        http, data, _ = client
        resp = http.post("/sessions", json={"condition": "mystery", "dataset": dataset_to_payload(data)})
        assert resp.status_code == 400
        assert resp.json()["code"] == "unknown-condition"

    def test_evaluate_and_history_flow(self, client):
        http, data, spec = client
        sid = self.create(http, data).json()["id"]
        resp = http.post(f"/sessions/{sid}/evaluate", json={"weights": list(spec.true_weights)})
        assert resp.status_code == 200
        body = resp.json()
        assert body["tac"] == 1.0
        assert len(body["per_pair"]) == 20
        hist = http.get(f"/sessions/{sid}/history").json()
        assert [h["index"] for h in hist] == [0]
        assert hist[0]["tac"] == 1.0

    def test_control_sessions_never_expose_scores(self, client):
        http, data, spec = client
        sid = self.create(http, data, condition="control").json()["id"]
        rng = np.random.default_rng(0)
        for _ in range(10):
            w = rng.standard_normal(2)
            body = http.post(f"/sessions/{sid}/evaluate", json={"weights": list(w)}).json()
            assert "tac" not in json.dumps(body)
        for h in http.get(f"/sessions/{sid}/history").json():
            assert "tac" not in h

    def test_degenerate_alignment_warning_without_score(self, client):
        http, data, _ = client
        sid = self.create(http, data).json()["id"]
        body = http.post(f"/sessions/{sid}/evaluate", json={"weights": [0.0, 0.0]}).json()
        assert "tac" not in body
        assert "warning" in body

    def test_unknown_session_404(self, client):
        http, _, _ = client
        resp = http.get("/sessions/missing")
        assert resp.status_code == 404
        assert resp.json()["code"] == "unknown-session"

    def test_dimension_mismatch_400(self, client):
        http, data, _ = client
        sid = self.create(http, data).json()["id"]
        resp = http.post(f"/sessions/{sid}/evaluate", json={"weights": [1.0]})
        assert resp.status_code == 400

    def test_non_finite_weights_rejected(self, client):
        http, data, _ = client
        sid = self.create(http, data).json()["id"]
        resp = http.post(
            f"/sessions/{sid}/evaluate",
            content=json.dumps({"weights": [1.0, 1e400]}).replace("Infinity", "1e999"),
            headers={"content-type": "application/json"},
        )
        assert resp.status_code in (400, 422)

    def test_train_endpoint(self, client):
        http, data, spec = client
        sid = self.create(http, data).json()["id"]
        resp = http.post(
            f"/sessions/{sid}/train",
            json={"config": {"loss_kind": "soft-tac", "max_epochs": 150, "seed": 2}},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["tac"] == 1.0
        assert body["machine_generated"] is True

    def test_train_with_grid(self, client):
        http, data, _ = client
        sid = self.create(http, data).json()["id"]
        resp = http.post(
            f"/sessions/{sid}/train",
            json={
                "config": {"max_epochs": 60, "seed": 2},
                "grid_learning_rates": [0.05, 0.01],
                "grid_batch_sizes": [8],
            },
        )
        assert resp.status_code == 200
        assert resp.json()["grid_cell"] is not None

    def test_pairs_endpoint_with_weights(self, client):
        http, data, spec = client
        sid = self.create(http, data).json()["id"]
        rows = http.get(f"/sessions/{sid}/pairs").json()
        assert len(rows) == 20 and "left_sparkline" not in rows[0]
        weights = ",".join(str(x) for x in spec.true_weights)
        rows = http.get(f"/sessions/{sid}/pairs", params={"weights": weights}).json()
        assert "left_sparkline" in rows[0]

    def test_bad_weights_query(self, client):
        http, data, _ = client
        sid = self.create(http, data).json()["id"]
        resp = http.get(f"/sessions/{sid}/pairs", params={"weights": "a,b"})
        assert resp.status_code == 400
