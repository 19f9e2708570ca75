import math

import pytest
from fastapi.testclient import TestClient

from etcsim.server import app

client = TestClient(app)

ETA_SHORT = "[policy]\nkind = eta_threshold\neta0 = 1.0\n[sim]\nt_end = 3.0\n"


class TestHealth:
    def test_health(self):
        r = client.get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"


class TestSimulate:
    def test_trajectory_contract(self):
        r = client.post("/simulate", json={"config": ETA_SHORT})
        assert r.status_code == 200
        body = r.json()
        assert body["executions"] >= 1
        assert body["final_time"] == 3.0
        lines = body["csv"].splitlines()
        echo = [ln for ln in lines if ln.startswith("# ")]
        assert echo
        header_at = len(echo)
        assert lines[header_at] == "t,j,phase,x,e,eta,V,R"
        first = lines[header_at + 1].split(",")
        assert first[2] == "flow"
        assert float(first[0]) == 0.0

    def test_jump_rows_reset_error(self):
        r = client.post("/simulate", json={"config": ETA_SHORT})
        rows = [ln.split(",") for ln in r.json()["csv"].splitlines() if "jump_post" in ln]
        assert rows
        for row in rows:
            assert float(row[4]) == 0.0

    def test_periodic_r_column_is_nan(self):
        cfg = "[policy]\nkind = periodic\nperiod = 0.5\n[sim]\nt_end = 2.0\n"
        r = client.post("/simulate", json={"config": cfg})
        assert r.status_code == 200
        line = r.json()["csv"].splitlines()[-1]
        assert line.rsplit(",", 1)[1] == "nan"

    def test_solver_failure_maps_to_400(self):
        cfg = ETA_SHORT + "max_jumps = 1\n"
        r = client.post("/simulate", json={"config": cfg})
        assert r.status_code == 400
        assert "jump" in r.json()["detail"]

    def test_bad_config_maps_to_400_with_line(self):
        r = client.post("/simulate", json={"config": "[sim]\nh = abc\n"})
        assert r.status_code == 400
        assert "line 2" in r.json()["detail"]


class TestBench:
    def test_summary_contract(self):
        cfg = "[bench]\nn_runs = 3\n"
        r = client.post("/bench", json={"config": cfg})
        assert r.status_code == 200
        body = r.json()
        assert [row["policy"] for row in body["rows"]] == [
            "periodic", "wl", "eta_threshold", "eta_threshold", "eta_threshold",
        ]
        lines = body["csv"].splitlines()
        data = [ln for ln in lines if not ln.startswith("#")]
        assert data[0] == (
            "policy,param,avg_executions,min_dwell,max_flow_violation,"
            "max_jump_violation,max_final_abs_x"
        )
        assert len(data) == 6
        periodic_row = body["rows"][0]
        assert periodic_row["max_flow_violation"] is None
        assert body["rows"][1]["max_flow_violation"] is not None


class TestCertify:
    def test_certificate_passes(self):
        r = client.post("/certify", json={"config": ""})
        assert r.status_code == 200
        body = r.json()
        assert body["passed"] is True
        names = [c["name"] for c in body["checks"]]
        assert "iss_decrease" in names
        for line in body["report"].splitlines():
            if line.startswith("#"):
                continue
            parts = line.split(" ")
            assert len(parts) == 4
            assert parts[1] in ("pass", "fail")


class TestDwell:
    def test_wl_bound(self):
        r = client.post("/dwell", json={"config": "[policy]\nkind = wl\n"})
        assert r.status_code == 200
        body = r.json()
        assert body["tau"] > 0.0
        assert 0.0 < body["tau_inflated"] < body["tau"]
        assert body["l1"] == pytest.approx(8.0)
        assert body["l2"] == pytest.approx(3.55903, abs=1e-5)

    def test_eta_bound(self):
        r = client.post("/dwell", json={"config": "[policy]\nkind = eta_threshold\n"})
        assert r.status_code == 200
        body = r.json()
        assert body["tau"] > 0.0
        assert body["b"] == pytest.approx(1.0 / body["l2"])

    def test_periodic_has_no_bound(self):
        r = client.post("/dwell", json={"config": "[policy]\nkind = periodic\n"})
        assert r.status_code == 400
