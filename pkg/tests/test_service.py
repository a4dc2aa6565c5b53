import pytest
from fastapi.testclient import TestClient

from fleetsim.envserver import ScenarioCatalog
from fleetsim.service.app import create_app


@pytest.fixture(scope="module")
def client(mini_catalog_dir):
    catalog = ScenarioCatalog.from_dir(mini_catalog_dir)
    return TestClient(create_app(catalog))


class TestBasics:
    def test_health(self, client):
        assert client.get("/healthz").json() == {"status": "ok"}

    def test_scenarios(self, client):
        assert client.get("/scenarios").json() == {"scenarios": ["mini"]}


class TestRuns:
    def test_run_by_scenario_name(self, client):
        resp = client.post("/runs", json={"scenario": "mini", "policy": "nr",
                                          "seeds": [0, 1]})
        assert resp.status_code == 200
        data = resp.json()
        assert len(data["rows"]) == 2
        assert data["aggregate"]["e_nr_pct"] == 0.0
        assert data["rows"][0]["policy"] == "nr"

    def test_run_by_inline_config(self, client, canonical_cfg):
        cfg = dict(canonical_cfg)
        cfg.update(total_trips=30, horizon_steps=240,
                   hourly_profile=[1, 1, 1, 1] + [0] * 20)
        resp = client.post("/runs", json={"config": cfg, "policy": "nr",
                                          "seeds": [0]})
        assert resp.status_code == 200
        assert resp.json()["rows"][0]["served"] >= 0

    def test_unknown_scenario_404(self, client):
        resp = client.post("/runs", json={"scenario": "nope", "policy": "nr",
                                          "seeds": [0]})
        assert resp.status_code == 404

    def test_unknown_policy_422(self, client):
        resp = client.post("/runs", json={"scenario": "mini", "policy": "magic",
                                          "seeds": [0]})
        assert resp.status_code == 422

    def test_matches_in_process_run(self, client, mini_catalog_dir):
        from fleetsim import experiments
        from fleetsim.scenario import load_config

        cfg = load_config(mini_catalog_dir / "mini.yaml")
        local = experiments.run_batch(cfg, "rr", [0, 1, 2])
        remote = client.post("/runs", json={"scenario": "mini", "policy": "rr",
                                            "seeds": [0, 1, 2]}).json()
        assert remote["rows"] == local.rows
        assert remote["aggregate"] == local.aggregate


class TestSweepAndRecordings:
    def test_sweep(self, client):
        resp = client.post("/fleet-sweeps", json={
            "scenario": "mini", "sizes": [2, 4], "policies": ["nr"],
            "seeds": [0, 1]})
        assert resp.status_code == 200
        assert len(resp.json()["summary"]) == 2

    def test_recordings(self, client):
        resp = client.post("/sar-recordings", json={"scenario": "mini",
                                                    "seeds": [0]})
        assert resp.status_code == 200
        rec = resp.json()["recordings"]["0"]
        assert rec["n_x"] == 2 and rec["n_y"] == 2
        assert len(rec["matrices"]) == 2


class TestSessions:
    def test_full_episode(self, client):
        resp = client.post("/sessions", json={"scenario": "mini", "seed": 0})
        assert resp.status_code == 200
        state = resp.json()
        sid = state["session_id"]
        assert state["done"] is False
        assert sum(state["V"]) == 4
        done = False
        steps = 0
        while not done:
            resp = client.post(f"/sessions/{sid}/step",
                               json={"action": [0.0, 0.0, 0.0, 0.0]})
            assert resp.status_code == 200
            done = resp.json()["done"]
            steps += 1
        assert steps == 2
        assert client.delete(f"/sessions/{sid}").status_code == 200
        assert client.delete(f"/sessions/{sid}").status_code == 404

    def test_bad_shape_422(self, client):
        sid = client.post("/sessions", json={"scenario": "mini",
                                             "seed": 1}).json()["session_id"]
        resp = client.post(f"/sessions/{sid}/step", json={"action": [0.0]})
        assert resp.status_code == 422

    def test_step_after_done_409(self, client):
        sid = client.post("/sessions", json={"scenario": "mini",
                                             "seed": 2}).json()["session_id"]
        for _ in range(2):
            client.post(f"/sessions/{sid}/step", json={"action": [0.0] * 4})
        resp = client.post(f"/sessions/{sid}/step", json={"action": [0.0] * 4})
        assert resp.status_code == 409

    def test_unknown_scenario_404(self, client):
        resp = client.post("/sessions", json={"scenario": "nope", "seed": 0})
        assert resp.status_code == 404


class TestCliThinClient:
    def test_run_via_http_matches_local(self, client, mini_catalog_dir,
                                        tmp_path, monkeypatch):
        # route the CLI's HTTP calls through the in-process test client
        from fleetsim import cli, experiments

        def fake_post(server, route, payload):
            resp = client.post(route, json=payload)
            assert resp.status_code == 200
            return resp.json()

        monkeypatch.setattr(cli, "_post", fake_post)
        remote_out = tmp_path / "remote"
        local_out = tmp_path / "local"
        config = str(mini_catalog_dir / "mini.yaml")
        cli.main(["run", "--config", config, "--policy", "nr", "--seeds", "0,1",
                  "--out", str(remote_out), "--server", "http://testserver"])
        cli.main(["run", "--config", config, "--policy", "nr", "--seeds", "0,1",
                  "--out", str(local_out)])
        for name in (experiments.RESULTS_FILE, experiments.SUMMARY_FILE,
                     experiments.PER_REQUEST_FILE):
            assert (remote_out / name).read_bytes() == (local_out / name).read_bytes()
