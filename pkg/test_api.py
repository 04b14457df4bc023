"""
HTTP surface of the lab
"""
SQUARES = {"kind": "squares"}
EVENS = {"kind": "progression", "start": 0, "step": 2}


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert "eu-nondense" in body["witnesses"]["available"]
    assert body["settings"]["default_effort"] >= 0


def test_root_lists_endpoints(client):
    body = client.get("/").json()
    assert body["message"] == "ideal-lab API"
    assert body["endpoints"]["member"] == "/api/v1/member"


def test_cache_stats(client):
    assert client.get("/api/v1/cache/stats").status_code == 200


def test_witness_catalog(client):
    body = client.get("/api/v1/witnesses").json()
    assert {spec["name"] for spec in body["witnesses"]} >= {"costar", "gallai2", "c5-refute"}
    assert "default_effort" in body


def test_member(client):
    response = client.post("/api/v1/member", json={"ideal": {"kind": "density"}, "set": SQUARES})
    assert response.status_code == 200
    body = response.json()
    assert body["verdict"]["kind"] == "proven-in"
    assert body["set"] == SQUARES


def test_member_errors_map_to_status_codes(client):
    response = client.post("/api/v1/member", json={"ideal": {"kind": "fin"}, "set": {"kind": "triangle"}})
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "base-space-mismatch"

    response = client.post("/api/v1/member", json={"ideal": {"kind": "nonsense"}, "set": SQUARES})
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "malformed-expression"


def test_detect(client):
    response = client.post("/api/v1/detect/ap", json={"set": EVENS, "window": 100})
    assert response.status_code == 200
    assert response.json()["length"] == 50

    response = client.post("/api/v1/detect/fs", json={"set": EVENS, "window": 100, "size": 3})
    assert response.json()["witness"]["generators"] == [2, 4, 8]


def test_detect_rejects_bad_requests(client):
    assert client.post("/api/v1/detect/bogus", json={"set": EVENS}).status_code == 404
    assert client.post("/api/v1/detect/ap", json={"set": EVENS, "window": 0}).status_code == 400


def test_density(client):
    response = client.post("/api/v1/density", json={"set": EVENS, "window": 10})
    assert response.status_code == 200
    body = response.json()
    assert body["ratio"] == "1/2"
    assert body["count"] == 5


def test_witness_run(client):
    response = client.post("/api/v1/witness/eu-nondense", json={"params": {"n_max": 3}})
    assert response.status_code == 200
    assert response.json()["outcome"] == "pass"

    assert client.post("/api/v1/witness/unknown", json={}).status_code == 400
