import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from dive.designer import DesignSpec, FallbackEngine, run_design
from dive.evaluate import score_extraction
from dive.formula import parse_formula
from dive.predictor import TrainConfig, predict, train
from dive.records import record_to_dict, validate_record
from dive.service import ApiConfig, StoreOpenFailure, create_app
from dive.store import QueryFilter, RecordStore
from tests.conftest import build_record
from tests.test_predictor import mini_config, synthetic_dataset


@pytest.fixture(scope="module")
def tiny_model():
    model, _ = train(synthetic_dataset(), mini_config())
    return model


def fixture_records():
    return [
        build_record("MgH2", doi="10.1/a", material_class="ionic", capacity_wt_pct=7.6,
                     measurement_temperature_K=573.15),
        build_record("Mg2Ni", doi="10.1/a", material_class="interstitial", capacity_wt_pct=3.6),
        build_record("LaNi5", doi="10.1/b", material_class="interstitial", capacity_wt_pct=1.4),
        build_record("LaNi4.8Mg0.2", doi="10.1/b", material_class="interstitial",
                     capacity_wt_pct=5.1),
        build_record("LiBH4", doi="10.1/c", material_class="complex", capacity_wt_pct=13.0),
    ]


@pytest.fixture
def service(tmp_path, tiny_model):
    store = RecordStore(tmp_path / "db")
    store.append(fixture_records())
    config = ApiConfig(store_path=str(tmp_path / "db"))
    app = create_app(config, store=store, model=tiny_model)
    client = TestClient(app)
    return client, store, tiny_model


def test_records_endpoint_equals_query(service):
    client, store, _ = service
    response = client.get("/records", params={"element": "Mg", "cap_min": 4, "cap_max": 8})
    assert response.status_code == 200
    expected = [
        {"id": rid, **record_to_dict(r)}
        for rid, r in store.query(QueryFilter(element_contains={"Mg"},
                                              capacity_lo=4, capacity_hi=8))
    ]
    assert response.json() == expected
    assert {e["formula"] for e in response.json()} == {"MgH2", "LaNi4.8Mg0.2"}


def test_records_all_and_single(service):
    client, store, _ = service
    assert len(client.get("/records").json()) == len(store)
    one = client.get("/records/1").json()
    assert one == {"id": 1, **record_to_dict(store.get(1))}
    missing = client.get("/records/999")
    assert missing.status_code == 404
    assert missing.json()["code"] == "unknown_id"


def test_review_queue_matches_store(service):
    client, store, _ = service
    payload = client.get("/review/queue").json()
    assert payload["total_pending"] == len(store.pending())
    assert [item["id"] for item in payload["items"]] == [rid for rid, _ in store.pending()]


def test_review_accept_and_conflict(service):
    client, store, _ = service
    first = client.post("/review/1", json={"action": "accept", "reviewer": "kay"})
    assert first.status_code == 200
    assert first.json()["review_status"] == "accepted"
    assert store.get(1).review_status == "accepted"
    second = client.post("/review/1", json={"action": "accept", "reviewer": "lee"})
    assert second.status_code == 409
    assert second.json()["code"] == "review_conflict"


def test_concurrent_double_accept_one_wins(service):
    client, store, _ = service
    results = []

    def worker():
        r = client.post("/review/2", json={"action": "accept", "reviewer": "t"})
        results.append(r.status_code)

    threads = [threading.Thread(target=worker) for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(results) == [200, 409]
    assert len(store.audit(2)) == 1


def test_review_correction_round_trip(service):
    client, store, _ = service
    corrected = {"formula": "LiBH4", "material_class": "complex", "capacity_wt_pct": "12.5 wt%"}
    response = client.post("/review/5", json={"action": "correct", "reviewer": "kay",
                                              "record": corrected})
    assert response.status_code == 200
    assert response.json()["capacity_wt_pct"] == 12.5
    assert response.json()["review_status"] == "corrected"


def test_review_bad_correction_rejected(service):
    client, _, _ = service
    response = client.post("/review/5", json={
        "action": "correct", "reviewer": "kay",
        "record": {"formula": "LiBH4", "capacity_wt_pct": "120 wt%"},
    })
    assert response.status_code == 400
    assert response.json()["code"] == "validation_failure"
    assert response.json()["details"][0]["field"] == "capacity_wt_pct"


def test_review_bad_action(service):
    client, _, _ = service
    assert client.post("/review/1", json={"action": "bless"}).status_code == 400


def test_histogram_endpoint_equals_library(service):
    client, store, _ = service
    response = client.get("/stats/histogram", params={"edges": "0,4,8,12"})
    assert response.status_code == 200
    assert response.json()["counts"] == store.capacity_histogram([0, 4, 8, 12])
    assert client.get("/stats/histogram", params={"edges": "4,4"}).status_code == 400


def test_elements_endpoint_equals_library(service):
    client, store, _ = service
    response = client.get("/stats/elements", params={"lo": 0, "hi": 8})
    expected = [{"element": e, "count": c} for e, c in store.element_frequency(0, 8)]
    assert response.json()["elements"] == expected


def test_dopants_endpoint_equals_library(service):
    client, store, _ = service
    response = client.get("/stats/dopants", params={"base": "LaNi5", "k": 3})
    assert response.json()["dopants"] == store.dopant_analysis("LaNi5", 3)
    assert client.get("/stats/dopants", params={"base": "Xx9"}).status_code == 400


def test_predict_endpoint_equals_library(service):
    client, _, model = service
    response = client.post("/predict", json={"formula": "Mg2Fe"})
    assert response.status_code == 200
    assert response.json()["predicted_capacity_wt_pct"] == predict(model, parse_formula("Mg2Fe"))
    assert client.post("/predict", json={"formula": "Xx"}).status_code == 400


def test_predict_without_model_is_503(tmp_path):
    store = RecordStore(tmp_path / "db2")
    app = create_app(ApiConfig(store_path=str(tmp_path / "db2")), store=store, model=None)
    client = TestClient(app)
    response = client.post("/predict", json={"formula": "Mg2Fe"})
    assert response.status_code == 503
    assert response.json()["code"] == "model_unavailable"
    assert client.post("/design", json={"spec": {}}).status_code == 503


def test_design_endpoint_equals_library(service):
    client, store, model = service
    spec_dict = {"element_pool": ["Mg", "Ni"], "min_capacity": 1.0,
                 "max_iterations": 2, "candidates_per_round": 3}
    response = client.post("/design", json={"spec": spec_dict})
    assert response.status_code == 200
    spec = DesignSpec.from_dict(spec_dict)
    expected = run_design(spec, FallbackEngine(spec), model, store).to_dict()
    assert response.json() == json.loads(json.dumps(expected))
    assert client.post("/design", json={"spec": {"element_pool": []}}).status_code == 400


def test_score_endpoint_equals_library(service):
    client, _, _ = service
    gold = [{"formula": "MgH2", "capacity_wt_pct": 7.6},
            {"formula": "LaNi5", "capacity_wt_pct": 1.4}]
    pred = [{"formula": "MgH2", "capacity_wt_pct": 7.0}]
    response = client.post("/score", json={"gold": gold, "pred": pred})
    assert response.status_code == 200
    expected = score_extraction(
        [validate_record(r) for r in gold],
        [validate_record(r) for r in pred],
    ).to_dict()
    assert response.json() == json.loads(json.dumps(expected))


def test_score_endpoint_rejects_invalid(service):
    client, _, _ = service
    response = client.post("/score", json={
        "gold": [{"formula": "MgH2", "capacity_wt_pct": "120 wt%"}],
        "pred": [],
    })
    assert response.status_code == 400
    assert response.json()["details"][0]["side"] == "gold"


def test_auth_token_enforced(tmp_path, tiny_model):
    store = RecordStore(tmp_path / "db3")
    store.append(fixture_records())
    app = create_app(ApiConfig(store_path=str(tmp_path / "db3"), auth_token="sesame"),
                     store=store, model=tiny_model)
    client = TestClient(app)
    assert client.get("/records").status_code == 401
    ok = client.get("/records", headers={"Authorization": "Bearer sesame"})
    assert ok.status_code == 200


def test_review_queue_includes_manifest_context(tmp_path, tiny_model):
    store = RecordStore(tmp_path / "db4")
    store.append([build_record("LaNi5", doi="10.7/ctx", capacity_wt_pct=1.4)])
    manifest_dir = tmp_path / "manifests"
    manifest_dir.mkdir()
    (manifest_dir / "run1.json").write_text(json.dumps({
        "doi": "10.7/ctx",
        "descriptive_blocks": [{"figure_id": "fig1", "class": "pct",
                                "confidence": 0.9, "text": "plateau 2.1 bar"}],
    }), "utf-8")
    app = create_app(ApiConfig(store_path=str(tmp_path / "db4"),
                               manifest_dir=str(manifest_dir)), store=store)
    client = TestClient(app)
    items = client.get("/review/queue").json()["items"]
    assert items[0]["context"][0]["text"] == "plateau 2.1 bar"


def test_store_open_failure(tmp_path):
    with pytest.raises(StoreOpenFailure):
        create_app(ApiConfig(store_path=str(tmp_path / "missing")))
