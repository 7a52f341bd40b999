"""API contract: every endpoint mirrors the module call it fronts."""

import time

import pytest
from fastapi.testclient import TestClient

from odx import cooccur, stats
from odx.cohort import MatchParams, build_matrix, match_cohort
from odx.evaluate import cross_validate, forest_trainer
from odx.forest import ForestConfig, predict_risk
from odx.service import create_app
from odx.stats import TimelineQuery


@pytest.fixture(scope="module")
def client(demo_small, tmp_path_factory):
    app = create_app(
        config=demo_small["config"],
        cases_path=demo_small["cases_csv"],
        emr_dir=demo_small["emr_dir"],
        models_dir=tmp_path_factory.mktemp("models"),
    )
    with TestClient(app) as c:
        c.app_state = app.state.odx
        yield c


def wait_job(client, job_id, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        doc = client.get(f"/api/jobs/{job_id}").json()
        if doc["status"] in ("Done", "Failed"):
            return doc
        time.sleep(0.05)
    raise AssertionError(f"job {job_id} did not finish")


class TestReadEndpoints:
    def test_summary_equals_module(self, client, demo_small):
        doc = client.get("/api/summary").json()
        assert doc == stats.summary(demo_small["snapshot"])

    def test_timeline_equals_module(self, client, demo_small):
        r = client.get("/api/timeline", params={
            "drugs": "FENTANYL,HEROIN", "sexes": "Male",
            "age_min": 20, "age_max": 50, "bucket": "Year"})
        assert r.status_code == 200
        q = TimelineQuery(drugs={"FENTANYL", "HEROIN"}, sexes={"Male"},
                          age_lo=20, age_hi=50, bucket="Year")
        expected = [
            {"bucket_start": b.isoformat(), "count": c}
            for b, c in stats.timeline(demo_small["snapshot"], q)
        ]
        assert r.json()["series"] == expected

    def test_timeline_malformed_query(self, client):
        assert client.get("/api/timeline", params={"age_min": 60, "age_max": 20}
                          ).status_code == 400
        assert client.get("/api/timeline", params={"bucket": "Decade"}
                          ).status_code == 400
        assert client.get("/api/timeline", params={"age_min": "x"}
                          ).status_code == 422  # fails fastapi int parsing

    def test_top_drugs_equals_module(self, client, demo_small):
        doc = client.get("/api/drugs/top", params={"k": 8}).json()
        expected = stats.top_drugs(demo_small["snapshot"], 8)
        assert doc["ranking"] == [
            {"drug": r.drug, "case_count": r.case_count,
             "cumulative_case_share": r.cumulative_case_share}
            for r in expected
        ]

    def test_num_drugs_equals_module(self, client, demo_small):
        doc = client.get("/api/num-drugs").json()
        hist = stats.num_drugs_histogram(demo_small["snapshot"])
        assert doc["mean"] == hist.mean
        assert doc["frequencies"] == {str(k): v for k, v in hist.frequencies.items()}

    def test_zips_equals_module(self, client, demo_small):
        doc = client.get("/api/zips", params={"which": "Residence"}).json()
        zc = stats.zip_counts(demo_small["snapshot"], "Residence")
        assert doc == {"counts": zc.counts, "missing_count": zc.missing_count}
        assert client.get("/api/zips", params={"which": "Nope"}).status_code == 400

    def test_cooccurrence_equals_module(self, client, demo_small):
        doc = client.get("/api/cooccurrence", params={"top": 4, "alpha": 0.05}).json()
        cells = cooccur.cooccurrence_matrix(demo_small["snapshot"], 4, 0.05)
        assert doc["cells"] == [c.to_dict() for c in cells]
        assert client.get("/api/cooccurrence", params={"alpha": 2.0}).status_code == 400

    def test_category_mixing_equals_module(self, client, demo_small):
        doc = client.get("/api/category-mixing").json()
        mix = stats.category_mixing(demo_small["snapshot"],
                                    demo_small["config"].drug_categories)
        assert doc["within_rate"] == mix.within_rate
        assert doc["between_rate"] == mix.between_rate
        assert doc["applicable"] is mix.applicable

    def test_spec_document_served(self, client):
        doc = client.get("/api/spec").json()
        assert "/api/predict" in doc["paths"]
        assert "/api/timeline" in doc["paths"]


class TestNoSnapshot:
    def test_endpoints_409_without_snapshot(self, tmp_path):
        app = create_app(models_dir=tmp_path / "models")
        with TestClient(app) as c:
            assert c.get("/api/summary").status_code == 409
            assert c.get("/api/timeline").status_code == 409
            assert c.post("/api/cohort/build", json={"seed": 1}).status_code == 409

    def test_load_endpoint_then_read(self, tmp_path, demo_small):
        app = create_app(models_dir=tmp_path / "models")
        with TestClient(app) as c:
            r = c.post("/api/dataset/load",
                       json={"cases_path": str(demo_small["cases_csv"])})
            assert r.status_code == 200
            assert c.get("/api/summary").json()["case_count"] == \
                demo_small["snapshot"].case_count


class TestGlmJob:
    def test_fit_job_and_result_columns(self, client, demo_small):
        fit_id = client.post("/api/glm/fit").json()["fit_id"]
        job = wait_job(client, fit_id)
        assert job["status"] == "Done"
        doc = client.get(f"/api/glm/{fit_id}").json()
        assert doc["status"] == "Done"
        assert list(doc["table"][0]) == ["term", "estimate", "std_error", "z", "p"]
        from odx import glm as glm_mod

        design = glm_mod.design_from_snapshot(demo_small["snapshot"])
        fit = glm_mod.fit_poisson(design.matrix, design.response,
                                  terms=design.terms)
        assert doc["table"] == fit.table()
        assert len(doc["diagnostics"]["fitted"]) == len(design.response)

    def test_unknown_fit_404(self, client):
        assert client.get("/api/glm/glm-9999").status_code == 404


class TestCohortAndTraining:
    def test_build_deterministic_contents(self, client, demo_small):
        a = client.post("/api/cohort/build", json={"seed": 42}).json()
        b = client.post("/api/cohort/build", json={"seed": 42}).json()
        assert a["cohort_id"] != b["cohort_id"]
        assert a["n_o"] == b["n_o"]
        state = client.app_state
        ma, mb = state.cohorts[a["cohort_id"]], state.cohorts[b["cohort_id"]]
        assert (ma.X == mb.X).all()
        assert ma.control_ids == mb.control_ids

    def test_build_equals_module(self, client, demo_small):
        doc = client.post("/api/cohort/build", json={"seed": 7}).json()
        snap = demo_small["snapshot"]
        expected = build_matrix(match_cohort(
            list(snap.cases), list(snap.patients),
            MatchParams(age_window=3, seed=7), demo_small["config"]))
        assert doc["n_o"] == expected.n_o
        assert doc["d_prime"] == expected.d_prime
        got = client.app_state.cohorts[doc["cohort_id"]]
        assert (got.X == expected.X).all()

    def test_seed_required(self, client):
        assert client.post("/api/cohort/build", json={}).status_code == 400

    def test_train_eval_schema_predict_flow(self, client, demo_small):
        cohort_id = client.post("/api/cohort/build", json={"seed": 5}).json()["cohort_id"]
        r = client.post("/api/models/train", json={
            "cohort_id": cohort_id, "kind": "forest",
            "config": {"seed": 11, "n_trees": 15}, "cv_folds": 4})
        job = wait_job(client, r.json()["job_id"])
        assert job["status"] == "Done"
        model_id = job["result"]

        matrix = client.app_state.cohorts[cohort_id]
        expected = cross_validate(matrix.X, matrix.y,
                                  forest_trainer(ForestConfig(n_trees=15, seed=11)),
                                  k=4, seed=11)
        assert client.get(f"/api/models/{model_id}/eval").json() == expected.to_dict()

        schema = client.get(f"/api/models/{model_id}/schema").json()
        names = [c["name"] for c in schema["covariates"]]
        assert names[0] == "age"
        assert "sex" in names and "disease_19" in names

        covariates = self._covariates_from_schema(schema)
        p1 = client.post("/api/predict", json={"model_id": model_id,
                                               "covariates": covariates}).json()
        p2 = client.post("/api/predict", json={"model_id": model_id,
                                               "covariates": covariates}).json()
        assert p1 == p2  # bit-exact for identical covariates
        assert 0.0 <= p1["ci_low"] <= p1["risk"] <= p1["ci_high"] <= 1.0

        entry = client.app_state.models[model_id]
        from odx.service import encode_covariates

        x = encode_covariates(covariates, entry.columns, entry.covariate_schema)
        direct = predict_risk(entry.model, x, seed=entry.model.config.seed)
        assert p1["risk"] == direct.risk
        assert p1["ci_low"] == direct.ci_low and p1["ci_high"] == direct.ci_high

    @staticmethod
    def _covariates_from_schema(schema):
        out = {}
        for entry in schema["covariates"]:
            if entry["kind"] == "numeric":
                out[entry["name"]] = 1.0 if not entry["name"].startswith("disease") else 0
            else:
                out[entry["name"]] = entry["levels"][-1]
        out["age"] = 35
        return out

    def test_predict_errors(self, client, demo_small):
        cohort_id = client.post("/api/cohort/build", json={"seed": 6}).json()["cohort_id"]
        r = client.post("/api/models/train", json={
            "cohort_id": cohort_id, "kind": "forest",
            "config": {"seed": 1, "n_trees": 5}, "cv_folds": 2})
        model_id = wait_job(client, r.json()["job_id"])["result"]
        schema = client.get(f"/api/models/{model_id}/schema").json()
        good = self._covariates_from_schema(schema)

        assert client.post("/api/predict", json={
            "model_id": "model-none", "covariates": good}).status_code == 404

        missing = dict(good)
        missing.pop("sickliness")
        r = client.post("/api/predict", json={"model_id": model_id,
                                              "covariates": missing})
        assert r.status_code == 422
        assert "sickliness" in r.json()["detail"]

        unknown = dict(good)
        unknown["shoe_size"] = 9
        r = client.post("/api/predict", json={"model_id": model_id,
                                              "covariates": unknown})
        assert r.status_code == 422
        assert "shoe_size" in r.json()["detail"]

        bad_level = dict(good)
        bad_level["sex"] = "Unknown"
        r = client.post("/api/predict", json={"model_id": model_id,
                                              "covariates": bad_level})
        assert r.status_code == 422
        assert "sex" in r.json()["detail"]

    def test_mlp_predict_is_point_estimate(self, client):
        cohort_id = client.post("/api/cohort/build", json={"seed": 9}).json()["cohort_id"]
        r = client.post("/api/models/train", json={
            "cohort_id": cohort_id, "kind": "mlp",
            "config": {"seed": 2, "epochs": 20}, "cv_folds": 2})
        model_id = wait_job(client, r.json()["job_id"])["result"]
        schema = client.get(f"/api/models/{model_id}/schema").json()
        assert schema["kind"] == "mlp"
        covariates = self._covariates_from_schema(schema)
        doc = client.post("/api/predict", json={"model_id": model_id,
                                                "covariates": covariates}).json()
        assert doc["ci_low"] == doc["risk"] == doc["ci_high"]
        assert doc["importances"] is None

    def test_train_validation(self, client):
        assert client.post("/api/models/train", json={
            "cohort_id": "nope", "kind": "forest", "config": {"seed": 1}}
        ).status_code == 404
        cohort_id = client.post("/api/cohort/build", json={"seed": 8}).json()["cohort_id"]
        assert client.post("/api/models/train", json={
            "cohort_id": cohort_id, "kind": "svm", "config": {"seed": 1}}
        ).status_code == 400
        assert client.post("/api/models/train", json={
            "cohort_id": cohort_id, "kind": "forest", "config": {}}
        ).status_code == 400

    def test_registry_rebuilt_on_startup(self, client, demo_small):
        state = client.app_state
        if not state.models:
            pytest.skip("no trained model from earlier tests")
        model_id, entry = next(iter(state.models.items()))
        fresh = create_app(config=demo_small["config"],
                           models_dir=state.models_dir)
        fresh_state = fresh.state.odx
        assert model_id in fresh_state.models
        reloaded = fresh_state.models[model_id]
        assert reloaded.columns == entry.columns
        assert reloaded.eval_report == entry.eval_report


def test_static_assets_served(tmp_path, demo_small):
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html><body>odx</body></html>")
    app = create_app(config=demo_small["config"],
                     cases_path=demo_small["cases_csv"],
                     models_dir=tmp_path / "models", static_dir=static)
    with TestClient(app) as c:
        r = c.get("/")
        assert r.status_code == 200
        assert "odx" in r.text
        # API still routed ahead of the static mount
        assert c.get("/api/summary").status_code == 200
