"""REST decision service: lifecycle state machine, error envelope,
persistence, and reproducibility."""

import time

import pytest
from fastapi.testclient import TestClient

from epiplan.service import create_app


def _series_rows(region_id, counts, actions):
    return [{"region_id": region_id, "day": d + 1,
             "cumulative_confirmed": c, "action_level": a}
            for d, (c, a) in enumerate(zip(counts, actions))]


def _payload(seed=11, regions=("r1", "r2")):
    counts = [0, 0, 2, 5, 9, 14, 20, 27, 35, 44, 54, 65]
    actions = [1] * 12
    return {
        "config": {
            "horizon": 40,
            "decision_interval": 7,
            "delay_d": 4,
            "start_day": 12,
            "seed": seed,
            "weights": [0.5, 2.0],
            "planner": {
                "rollouts": 5,
                "band_replications": 20,
                "grid_rounds": [
                    {"windows": [[0.0, 100.0, 50.0], [0.0, 400.0, 200.0]]},
                ],
            },
            "tolerance_cap": 500.0,
            "mbs_replications": 20,
        },
        "dataset": {
            "regions": [{"region_id": r, "population": 10000,
                         "gdp_annual": 5.0e7} for r in regions],
            "series": [row for r in regions
                       for row in _series_rows(r, counts, actions)],
        },
    }


@pytest.fixture()
def client(tmp_path):
    app = create_app(state_dir=tmp_path / "state", ui_dir=None)
    with TestClient(app) as c:
        yield c


def _poll_frontier(client, sid, rid, timeout=30.0, headers=None):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        resp = client.get(f"/sessions/{sid}/regions/{rid}/frontier",
                          headers=headers or {})
        if resp.status_code != 202:
            return resp
        time.sleep(0.05)
    raise TimeoutError("frontier never became ready")


def test_healthz(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_create_and_get_session(client):
    resp = client.post("/sessions", json=_payload())
    assert resp.status_code == 201
    body = resp.json()
    assert body["current_day"] == 12
    assert body["is_decision_point"] is True
    assert [r["region_id"] for r in body["regions"]] == ["r1", "r2"]
    assert body["weights"] == [0.5, 2.0]

    got = client.get(f"/sessions/{body['session_id']}")
    assert got.status_code == 200
    assert got.json()["session_id"] == body["session_id"]

    missing = client.get("/sessions/nope")
    assert missing.status_code == 404
    assert missing.json()["code"] == "unknown_session"


def test_invalid_payload_envelope(client):
    resp = client.post("/sessions", json={"config": {}})
    assert resp.status_code == 400
    body = resp.json()
    assert body["code"] == "invalid_payload"
    assert isinstance(body["detail"], list)


def test_invalid_dataset_duplicate_region(client):
    payload = _payload()
    payload["dataset"]["regions"].append(payload["dataset"]["regions"][0])
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 400
    assert resp.json()["code"] == "invalid_dataset"
    assert "duplicate region" in resp.json()["message"]


def test_invalid_dataset_gap_in_days(client):
    payload = _payload(regions=("r1",))
    payload["dataset"]["series"].pop(5)
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 400
    assert "contiguous" in resp.json()["message"]


def test_insufficient_history_rejected(client):
    payload = _payload(regions=("r1",))
    payload["config"]["delay_d"] = 12
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 400
    assert resp.json()["code"] == "invalid_config"


def test_frontier_etag_and_bands(client):
    sid = client.post("/sessions", json=_payload()).json()["session_id"]
    first = client.get(f"/sessions/{sid}/regions/r1/frontier")
    assert first.status_code in (200, 202)
    if first.status_code == 202:
        assert 0.0 <= first.json()["progress"] <= 1.0
    resp = _poll_frontier(client, sid, "r1")
    assert resp.status_code == 200
    etag = resp.headers["ETag"]
    body = resp.json()
    assert body["day"] == 12 and body["region_id"] == "r1"
    assert "session_id" not in body
    assert len(body["entries"]) >= 1
    omegas = [e["weight"] for e in body["entries"]]
    assert omegas == sorted(omegas)

    cached = client.get(f"/sessions/{sid}/regions/r1/frontier",
                        headers={"If-None-Match": etag})
    assert cached.status_code == 304

    bands = client.get(f"/sessions/{sid}/regions/r1/policies/0/bands")
    assert bands.status_code == 200
    bb = bands.json()
    assert bb["entry_index"] == 0
    assert set(bb["bands"]) == {"days", "coverage", "epi", "econ", "action"}

    out_of_range = client.get(
        f"/sessions/{sid}/regions/r1/policies/99/bands")
    assert out_of_range.status_code == 404
    assert out_of_range.json()["code"] == "unknown_policy"


def test_bands_before_frontier_conflict(client):
    sid = client.post("/sessions", json=_payload()).json()["session_id"]
    resp = client.get(f"/sessions/{sid}/regions/r1/policies/0/bands")
    assert resp.status_code == 409
    assert resp.json()["code"] == "frontier_not_ready"


def test_commit_requires_ready_frontier(client):
    sid = client.post("/sessions", json=_payload()).json()["session_id"]
    resp = client.post(f"/sessions/{sid}/regions/r1/action",
                       json={"action": 2})
    assert resp.status_code == 409
    assert resp.json()["code"] == "frontier_not_ready"


def _commit_all(client, sid, action=2, regions=("r1", "r2")):
    for rid in regions:
        _poll_frontier(client, sid, rid)
        resp = client.post(f"/sessions/{sid}/regions/{rid}/action",
                           json={"action": action})
        assert resp.status_code == 200, resp.text
        assert resp.json() == {"region_id": rid, "action": action, "day": 12}


def test_lifecycle_simulate(client):
    sid = client.post("/sessions", json=_payload()).json()["session_id"]
    _poll_frontier(client, sid, "r1")
    client.post(f"/sessions/{sid}/regions/r1/action", json={"action": 2})

    early = client.post(f"/sessions/{sid}/advance", json={"mode": "simulate"})
    assert early.status_code == 409
    assert early.json()["code"] == "uncommitted_regions"
    assert early.json()["detail"] == {"missing": ["r2"]}

    again = client.post(f"/sessions/{sid}/regions/r1/action",
                        json={"action": 3})
    assert again.status_code == 409
    assert again.json()["code"] == "already_committed"

    bad = client.post(f"/sessions/{sid}/regions/r1/action",
                      json={"action": 9})
    assert bad.status_code == 400
    assert bad.json()["code"] == "invalid_action"

    _poll_frontier(client, sid, "r2")
    client.post(f"/sessions/{sid}/regions/r2/action", json={"action": 2})
    adv = client.post(f"/sessions/{sid}/advance", json={"mode": "simulate"})
    assert adv.status_code == 200
    assert adv.json() == {"current_day": 19}

    summary = client.get(f"/sessions/{sid}").json()
    assert summary["current_day"] == 19
    for region in summary["regions"]:
        assert region["series_length"] == 19
        assert region["committed_action"] is None


def test_lifecycle_ingest_validation(client):
    sid = client.post("/sessions", json=_payload()).json()["session_id"]
    _commit_all(client, sid)

    missing = client.post(f"/sessions/{sid}/advance",
                          json={"mode": "ingest",
                                "observations": {"r1": [70] * 7}})
    assert missing.status_code == 422
    assert missing.json()["code"] == "missing_observations"

    short = client.post(f"/sessions/{sid}/advance",
                        json={"mode": "ingest",
                              "observations": {"r1": [70] * 3,
                                               "r2": [70] * 7}})
    assert short.status_code == 422
    assert short.json()["code"] == "bad_observation_length"

    dip = client.post(f"/sessions/{sid}/advance",
                      json={"mode": "ingest",
                            "observations": {"r1": [70, 60] + [70] * 5,
                                             "r2": [70] * 7}})
    assert dip.status_code == 422
    assert dip.json()["code"] == "non_monotone_observations"

    ok = client.post(f"/sessions/{sid}/advance",
                     json={"mode": "ingest",
                           "observations": {"r1": list(range(66, 73)),
                                            "r2": [65] * 7}})
    assert ok.status_code == 200
    summary = client.get(f"/sessions/{sid}").json()
    assert summary["regions"][0]["latest_count"] == 72


def test_bad_advance_mode_rejected(client):
    sid = client.post("/sessions", json=_payload()).json()["session_id"]
    resp = client.post(f"/sessions/{sid}/advance", json={"mode": "teleport"})
    assert resp.status_code == 400
    assert resp.json()["code"] == "invalid_payload"


def test_persistence_across_restart(tmp_path):
    state = tmp_path / "state"
    app = create_app(state_dir=state, ui_dir=None)
    with TestClient(app) as client:
        sid = client.post("/sessions", json=_payload()).json()["session_id"]
        _commit_all(client, sid)
        client.post(f"/sessions/{sid}/advance", json={"mode": "simulate"})

    reborn = create_app(state_dir=state, ui_dir=None)
    with TestClient(reborn) as client:
        summary = client.get(f"/sessions/{sid}")
        assert summary.status_code == 200
        assert summary.json()["current_day"] == 19
        # post-restart the session keeps functioning
        resp = _poll_frontier(client, sid, "r1")
        assert resp.status_code == 200


def test_frontier_reproducible_across_instances(tmp_path):
    bodies = []
    for run in ("a", "b"):
        app = create_app(state_dir=tmp_path / run, ui_dir=None)
        with TestClient(app) as client:
            sid = client.post("/sessions",
                              json=_payload(seed=33)).json()["session_id"]
            resp = _poll_frontier(client, sid, "r1")
            bodies.append((resp.headers["ETag"], resp.content))
    assert bodies[0] == bodies[1]


def test_posterior_identical_for_same_seed(client):
    a = client.post("/sessions", json=_payload(seed=5)).json()
    b = client.post("/sessions", json=_payload(seed=5)).json()
    assert a["session_id"] != b["session_id"]
    assert a["posterior"] == b["posterior"]
