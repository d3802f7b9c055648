"""Prediction semantics, export formats, and the HTTP API contract."""

import json
import urllib.error
import urllib.request

import numpy as np
import pytest

from techinfer.dataset import to_matrix
from techinfer.errors import (
    EmptyInputError,
    EmptyObservationError,
    InvalidRequestError,
    InvalidTechniqueIdError,
)
from techinfer.model import load_model, save_model
from techinfer.serve import (
    PredictRequest,
    PredictResponse,
    Prediction,
    ServiceState,
    export_csv,
    export_navigator_layer,
    parse_predict_request,
    predict,
    response_to_json,
    start_background_server,
)
from techinfer.wmf import WmfHyperparams, train_wmf

from helpers import dataset_from_dense, technique_ids
from oracles import random_binary_matrix


def _trained_model(seed=0, m=12, n=9):
    dense = random_binary_matrix(np.random.default_rng(seed), m, n, 0.35)
    ds = dataset_from_dense(dense)
    A = to_matrix(ds)
    h = WmfHyperparams(embedding_dim=3, epochs=5, seed=seed)
    return train_wmf(A, h, ds.entities, ds.items)


class TestPredict:
    def test_observed_never_predicted(self):
        model = _trained_model()
        observed = model.item_catalog[:3]
        resp = predict(model, PredictRequest(observed=tuple(observed), k=20))
        predicted = {p.technique_id for p in resp.predictions}
        assert not predicted & set(observed)
        assert len(resp.predictions) == model.n - 3

    def test_scores_non_increasing_and_ranks_consecutive(self):
        model = _trained_model(seed=1)
        resp = predict(model, PredictRequest(observed=(model.item_catalog[0],), k=5))
        scores = [p.score for p in resp.predictions]
        assert scores == sorted(scores, reverse=True)
        assert [p.rank for p in resp.predictions] == list(range(1, len(scores) + 1))

    def test_all_items_observed_gives_empty_predictions(self):
        model = _trained_model(seed=2)
        resp = predict(model, PredictRequest(observed=tuple(model.item_catalog), k=20))
        assert resp.predictions == ()

    def test_unknown_ids_collected(self):
        model = _trained_model(seed=3)
        resp = predict(
            model, PredictRequest(observed=(model.item_catalog[0], "T9999"), k=5)
        )
        assert resp.unknown_ids == ("T9999",)
        assert len(resp.predictions) == 5

    def test_all_unknown_rejected(self):
        model = _trained_model(seed=4)
        with pytest.raises(EmptyObservationError):
            predict(model, PredictRequest(observed=("T9999",), k=5))

    def test_pure_function_of_inputs(self):
        model = _trained_model(seed=5)
        req = PredictRequest(observed=(model.item_catalog[1],), k=7)
        a = predict(model, req)
        b = predict(model, req)
        assert a == b

    def test_names_attached_when_catalog_known(self):
        model = _trained_model(seed=6)
        tid = model.item_catalog[0]
        other = model.item_catalog[1]
        resp = predict(
            model,
            PredictRequest(observed=(other,), k=model.n),
            names={tid: "Some Behavior"},
        )
        by_id = {p.technique_id: p for p in resp.predictions}
        assert by_id[tid].technique_name == "Some Behavior"
        assert all(
            p.technique_name is None for p in resp.predictions if p.technique_id != tid
        )


class TestParseRequest:
    def test_defaults(self):
        req = parse_predict_request({"observed": ["T1059"]})
        assert req.k == 20
        assert req.similarity is None

    def test_empty_observed(self):
        with pytest.raises(EmptyObservationError):
            parse_predict_request({"observed": []})

    def test_invalid_id_pattern(self):
        with pytest.raises(InvalidTechniqueIdError):
            parse_predict_request({"observed": ["X999"]})

    def test_bad_k(self):
        with pytest.raises(InvalidRequestError):
            parse_predict_request({"observed": ["T1059"], "k": 0})
        with pytest.raises(InvalidRequestError):
            parse_predict_request({"observed": ["T1059"], "k": "five"})

    def test_bad_similarity(self):
        with pytest.raises(InvalidRequestError):
            parse_predict_request({"observed": ["T1059"], "similarity": "manhattan"})


class TestSerializationRoundTrip:
    def test_save_load_identical_predictions(self):
        model = _trained_model(seed=7)
        again = load_model(save_model(model))
        req = PredictRequest(observed=(model.item_catalog[2],), k=6)
        assert predict(model, req) == predict(again, req)

    def test_save_load_bitwise_factors(self):
        model = _trained_model(seed=8)
        again = load_model(save_model(model))
        assert np.array_equal(model.U, again.U)
        assert np.array_equal(model.V, again.V)
        assert again.trained_by == "wmf"
        assert again.similarity == model.similarity

    def test_format_keys_pinned(self):
        doc = json.loads(save_model(_trained_model(seed=9)).decode())
        assert list(doc.keys()) == [
            "format_version", "trained_by", "d", "similarity", "entities", "items", "U", "V",
        ]
        assert doc["format_version"] == 1


class TestExports:
    def _response(self, scores):
        return PredictResponse(
            predictions=tuple(
                Prediction(technique_id=t, score=s, rank=r + 1)
                for r, (t, s) in enumerate(zip(technique_ids(len(scores)), scores))
            ),
            unknown_ids=(),
        )

    def test_navigator_min_max_normalization(self):
        doc = json.loads(export_navigator_layer(self._response([2.0, 1.0]), "layer").decode())
        assert [t["score"] for t in doc["techniques"]] == [100.0, 0.0]

    def test_navigator_constant_scores_all_100(self):
        doc = json.loads(export_navigator_layer(self._response([1.5]), "layer").decode())
        assert [t["score"] for t in doc["techniques"]] == [100.0]

    def test_navigator_structure(self):
        resp = self._response([3.0, 2.0, 1.0])
        doc = json.loads(export_navigator_layer(resp, "my-layer").decode())
        assert doc["name"] == "my-layer"
        assert doc["versions"] == {"layer": "4.5"}
        assert doc["domain"] == "enterprise-attack"
        assert len(doc["techniques"]) == len(resp.predictions)
        assert list(doc.keys()) == ["name", "versions", "domain", "techniques"]

    def test_navigator_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            export_navigator_layer(PredictResponse((), ()), "layer")

    def test_csv_shape_and_round_trip(self):
        resp = self._response([2.5, 1.25, 0.5])
        text = export_csv(resp).decode()
        lines = text.strip().split("\n")
        assert lines[0] == "rank,technique_id,score"
        assert len(lines) == 4
        ranks = [int(line.split(",")[0]) for line in lines[1:]]
        assert ranks == [1, 2, 3]
        scores = [float(line.split(",")[2]) for line in lines[1:]]
        assert scores == [2.5, 1.25, 0.5]


@pytest.fixture(scope="module")
def http_service():
    model = _trained_model(seed=10)
    names = {model.item_catalog[0]: "First Behavior"}
    state = ServiceState(model=model, names=names)
    server, thread = start_background_server(state, "127.0.0.1:0")
    host, port = server.server_address[:2]
    yield f"http://{host}:{port}", model
    server.shutdown()
    server.server_close()


def _get(url):
    with urllib.request.urlopen(url) as resp:
        return resp.status, json.loads(resp.read().decode())


def _post(url, body, raw=False):
    data = body if isinstance(body, bytes) else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            payload = resp.read()
            return resp.status, payload if raw else json.loads(payload.decode())
    except urllib.error.HTTPError as exc:
        payload = exc.read()
        return exc.code, payload if raw else json.loads(payload.decode())


class TestHttpApi:
    def test_health(self, http_service):
        base, _ = http_service
        status, doc = _get(f"{base}/api/health")
        assert status == 200
        assert doc == {"status": "ok"}

    def test_model_info(self, http_service):
        base, model = http_service
        status, doc = _get(f"{base}/api/model")
        assert status == 200
        assert doc == {
            "trained_by": "wmf",
            "d": model.d,
            "m": model.m,
            "n": model.n,
            "similarity": "dot",
        }

    def test_techniques_catalog(self, http_service):
        base, model = http_service
        status, doc = _get(f"{base}/api/techniques")
        assert status == 200
        assert [t["id"] for t in doc] == list(model.item_catalog)
        assert doc[0]["name"] == "First Behavior"
        assert doc[1]["name"] is None

    def test_predict_contract(self, http_service):
        base, model = http_service
        observed = model.item_catalog[0]
        status, doc = _post(f"{base}/api/predict", {"observed": [observed], "k": 5})
        assert status == 200
        assert len(doc["predictions"]) <= 5
        assert observed not in [p["technique_id"] for p in doc["predictions"]]
        assert doc["unknown_ids"] == []

    def test_predict_matches_direct_call(self, http_service):
        base, model = http_service
        observed = model.item_catalog[1]
        _, doc = _post(f"{base}/api/predict", {"observed": [observed], "k": 4})
        direct = predict(
            model,
            PredictRequest(observed=(observed,), k=4),
            names={model.item_catalog[0]: "First Behavior"},
        )
        assert doc == response_to_json(direct)

    def test_empty_observation_422(self, http_service):
        base, _ = http_service
        status, doc = _post(f"{base}/api/predict", {"observed": []})
        assert status == 422
        assert doc["error"]["code"] == "empty-observation"

    def test_invalid_json_400(self, http_service):
        base, _ = http_service
        status, doc = _post(f"{base}/api/predict", b"{not json")
        assert status == 400
        assert doc["error"]["code"] == "invalid-json"

    def test_unknown_route_404(self, http_service):
        base, _ = http_service
        try:
            with urllib.request.urlopen(f"{base}/api/nothing") as resp:
                status = resp.status
        except urllib.error.HTTPError as exc:
            status = exc.code
            doc = json.loads(exc.read().decode())
            assert doc["error"]["code"] == "not-found"
        assert status == 404

    def test_export_endpoints_match_module_exports(self, http_service):
        base, model = http_service
        observed = model.item_catalog[2]
        body = {"observed": [observed], "k": 5}
        _, csv_bytes = _post(f"{base}/api/export/csv", body, raw=True)
        _, nav_bytes = _post(
            f"{base}/api/export/navigator", {**body, "name": "layer-x"}, raw=True
        )
        direct = predict(
            model,
            PredictRequest(observed=(observed,), k=5),
            names={model.item_catalog[0]: "First Behavior"},
        )
        assert csv_bytes == export_csv(direct)
        assert nav_bytes == export_navigator_layer(direct, "layer-x")
