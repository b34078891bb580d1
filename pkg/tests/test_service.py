import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient
from hypothesis import given, settings
from hypothesis import strategies as st

from lesionkit.errors import SchemaError
from lesionkit.service import (
    SessionService,
    create_app,
    decode_mask,
    encode_mask,
    served_cases_from,
)

from conftest import make_case


# ---------------------------------------------------------------------------
# RLE codec
# ---------------------------------------------------------------------------

def test_rle_simple_patterns():
    mask = np.array([[0, 0, 1], [1, 0, 0]], dtype=np.uint8)
    payload = encode_mask(mask)
    assert payload["shape"] == [2, 3]
    assert payload["counts"] == [2, 2, 2]
    np.testing.assert_array_equal(decode_mask(payload), mask)

    ones = np.ones((2, 2), dtype=np.uint8)
    payload = encode_mask(ones)
    assert payload["counts"] == [0, 4]  # leading zero-run
    np.testing.assert_array_equal(decode_mask(payload), ones)

    zeros = np.zeros((3,), dtype=np.uint8)
    assert encode_mask(zeros)["counts"] == [3]


@given(st.integers(0, 2**24 - 1))
@settings(max_examples=150, deadline=None)
def test_rle_roundtrip_random_masks(bits):
    mask = np.array([(bits >> i) & 1 for i in range(24)], dtype=np.uint8).reshape(2, 3, 4)
    np.testing.assert_array_equal(decode_mask(encode_mask(mask)), mask)


def test_rle_rejects_malformed():
    with pytest.raises(SchemaError):
        decode_mask({"shape": [2, 2], "counts": [1, 1]})  # sums to 2, needs 4
    with pytest.raises(SchemaError):
        decode_mask({"shape": [2], "counts": [-1, 3]})
    with pytest.raises(SchemaError):
        decode_mask({"counts": [4]})


# ---------------------------------------------------------------------------
# service + API
# ---------------------------------------------------------------------------

class StubModel:
    """Deterministic fake predictor: brightness ball around the last click."""

    def predict(self, volume, clicks, prev_mask=None, seed=0):
        probs = np.zeros(volume.shape, dtype=np.float32)
        if clicks:
            z, y, x = clicks[-1].coord
            zz, yy, xx = np.ogrid[: volume.shape[0], : volume.shape[1], : volume.shape[2]]
            ball = ((zz - z) ** 2 + (yy - y) ** 2 + (xx - x) ** 2) <= (3 + len(clicks)) ** 2
            probs[ball] = 0.9
        report = np.zeros(13)
        report[[0, 4, 6, 9, 11]] = 0.6 + 0.01 * len(clicks)
        return probs, report, 0.5 + 0.05 * len(clicks)


@pytest.fixture
def client():
    cases = served_cases_from([make_case(case_id="demo"), make_case(case_id="other")])
    service = SessionService(StubModel(), cases)
    return TestClient(create_app(service))


def test_case_listing(client):
    cases = client.get("/v1/cases").json()
    assert {c["id"] for c in cases} == {"demo", "other"}
    assert all(c["has_ground_truth"] for c in cases)


def test_create_session_contract(client):
    created = client.post("/v1/sessions", json={"case_id": "demo"})
    assert created.status_code == 200
    body = created.json()
    assert body["n_clicks"] == 0
    assert body["volume_shape"] == [32, 32, 32]
    assert body["mask_rle"]["counts"] == [32 * 32 * 32]  # empty mask
    # uniform probabilities, first category per group
    assert body["probs"]["shape"] == [0.25, 0.25, 0.25, 0.25]
    assert body["report"]["shape"] == "round-like"
    assert body["iou_pred"] is None
    assert body["dsc"] is None


def test_create_session_unknown_case_404(client):
    resp = client.post("/v1/sessions", json={"case_id": "nope"})
    assert resp.status_code == 404
    body = resp.json()
    assert body["code"] == "not_found" and "message" in body


def test_two_sessions_have_distinct_ids(client):
    a = client.post("/v1/sessions", json={"case_id": "demo"}).json()["session_id"]
    b = client.post("/v1/sessions", json={"case_id": "demo"}).json()["session_id"]
    assert a != b


def test_click_updates_mask_report_and_dsc(client):
    sid = client.post("/v1/sessions", json={"case_id": "demo"}).json()["session_id"]
    resp = client.post(f"/v1/sessions/{sid}/clicks",
                       json={"coord": [16, 16, 16], "label": "positive"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["n_clicks"] == 1
    assert sum(body["mask_rle"]["counts"][1::2]) > 0  # nonempty mask
    assert body["iou_pred"] == pytest.approx(0.55)
    assert body["dsc"] is not None  # ground truth known
    assert body["clicks"][0] == {"coord": [16, 16, 16], "label": "positive", "source": "user"}


def test_click_determinism_same_state_same_response(client):
    payloads = []
    for _ in range(2):
        sid = client.post("/v1/sessions", json={"case_id": "demo"}).json()["session_id"]
        body = client.post(f"/v1/sessions/{sid}/clicks",
                           json={"coord": [10, 12, 14], "label": "positive"}).json()
        body.pop("session_id")
        body.pop("created_at")
        body.pop("updated_at")
        payloads.append(body)
    assert payloads[0] == payloads[1]


def test_click_validation_errors(client):
    sid = client.post("/v1/sessions", json={"case_id": "demo"}).json()["session_id"]
    resp = client.post(f"/v1/sessions/{sid}/clicks",
                       json={"coord": [-1, 0, 0], "label": "positive"})
    assert resp.status_code == 400
    assert resp.json()["code"] == "bounds"
    resp = client.post(f"/v1/sessions/{sid}/clicks",
                       json={"coord": [1, 1, 1], "label": "maybe"})
    assert resp.status_code == 400
    resp = client.post(f"/v1/sessions/{sid}/clicks", json={"coord": [1, 1], "label": "positive"})
    assert resp.status_code == 400
    assert resp.json()["code"] == "validation"
    resp = client.post("/v1/sessions/missing/clicks",
                       json={"coord": [1, 1, 1], "label": "positive"})
    assert resp.status_code == 404


def test_undo_restores_previous_state_exactly(client):
    sid = client.post("/v1/sessions", json={"case_id": "demo"}).json()["session_id"]
    state0 = client.get(f"/v1/sessions/{sid}").json()
    state1 = client.post(f"/v1/sessions/{sid}/clicks",
                         json={"coord": [16, 16, 16], "label": "positive"}).json()
    client.post(f"/v1/sessions/{sid}/clicks", json={"coord": [20, 20, 20], "label": "negative"})

    undone = client.post(f"/v1/sessions/{sid}/undo").json()
    assert undone["undone"] is True
    for key in ("mask_rle", "report", "probs", "iou_pred", "clicks", "n_clicks"):
        assert undone[key] == state1[key]

    undone = client.post(f"/v1/sessions/{sid}/undo").json()
    assert undone["undone"] is True
    for key in ("mask_rle", "report", "probs", "clicks", "n_clicks"):
        assert undone[key] == state0[key]

    noop = client.post(f"/v1/sessions/{sid}/undo").json()
    assert noop["undone"] is False and noop["message"] == "nothing to undo"


def test_session_isolation_under_interleaving(client):
    sid_a = client.post("/v1/sessions", json={"case_id": "demo"}).json()["session_id"]
    sid_b = client.post("/v1/sessions", json={"case_id": "other"}).json()["session_id"]
    a1 = client.post(f"/v1/sessions/{sid_a}/clicks",
                     json={"coord": [8, 8, 8], "label": "positive"}).json()
    client.post(f"/v1/sessions/{sid_b}/clicks", json={"coord": [24, 24, 24], "label": "negative"})
    client.post(f"/v1/sessions/{sid_b}/undo")
    a_after = client.get(f"/v1/sessions/{sid_a}").json()
    for key in ("mask_rle", "clicks", "n_clicks", "report"):
        assert a_after[key] == a1[key]
    b_after = client.get(f"/v1/sessions/{sid_b}").json()
    assert b_after["n_clicks"] == 0


def test_slice_payload_geometry(client):
    sid = client.post("/v1/sessions", json={"case_id": "demo"}).json()["session_id"]
    client.post(f"/v1/sessions/{sid}/clicks", json={"coord": [16, 10, 20], "label": "positive"})

    mid = client.get(f"/v1/sessions/{sid}/slices/axial/16").json()
    assert (mid["height"], mid["width"]) == (32, 32)
    intensity = np.frombuffer(base64.b64decode(mid["intensity_b64"]), dtype=np.uint8)
    assert intensity.size == 32 * 32
    mask_slice = decode_mask(mid["mask_rle"])
    assert mask_slice.shape == (32, 32)
    assert mask_slice.any()  # the stub ball crosses its own click slice
    assert [c["coord"] for c in mid["clicks"]] == [[16, 10, 20]]

    other = client.get(f"/v1/sessions/{sid}/slices/axial/17").json()
    assert other["clicks"] == []  # click visible only on its own axial index
    coronal = client.get(f"/v1/sessions/{sid}/slices/coronal/10").json()
    assert [c["coord"] for c in coronal["clicks"]] == [[16, 10, 20]]
    sagittal = client.get(f"/v1/sessions/{sid}/slices/sagittal/20").json()
    assert [c["coord"] for c in sagittal["clicks"]] == [[16, 10, 20]]

    resp = client.get(f"/v1/sessions/{sid}/slices/axial/99")
    assert resp.status_code == 400
    resp = client.get(f"/v1/sessions/{sid}/slices/oblique/3")
    assert resp.status_code == 400


def test_upload_session_and_parse_error(client):
    volume = np.random.default_rng(0).random((8, 8, 8)).astype(np.float32)
    upload = {
        "shape": [8, 8, 8],
        "spacing": [1.0, 1.0, 1.0],
        "volume_b64": base64.b64encode(volume.tobytes()).decode("ascii"),
    }
    body = client.post("/v1/sessions", json={"upload": upload}).json()
    assert body["volume_shape"] == [8, 8, 8]
    assert body["has_ground_truth"] is False

    resp = client.post("/v1/sessions", json={"upload": {"shape": [8, 8, 8], "volume_b64": "xx"}})
    assert resp.status_code == 400
    resp = client.post("/v1/sessions", json={})
    assert resp.status_code == 400
    resp = client.post("/v1/sessions", json={"case_id": "demo", "upload": upload})
    assert resp.status_code == 400


def test_snapshot_persistence_roundtrip(tmp_path):
    cases = served_cases_from([make_case(case_id="demo")])
    service = SessionService(StubModel(), cases)
    created = service.create_session(case_id="demo")
    sid = created["session_id"]
    service.apply_click(sid, (16, 16, 16), "positive")
    before = service.summary(sid)

    path = service.save_snapshot(tmp_path / "sessions.json")
    fresh = SessionService(StubModel(), cases)
    assert fresh.load_snapshot(path) == 1
    after = fresh.summary(sid)
    for key in ("mask_rle", "report", "probs", "iou_pred", "n_clicks"):
        assert after[key] == before[key]


def test_idle_ttl_evicts_sessions(monkeypatch):
    cases = served_cases_from([make_case(case_id="demo")])
    service = SessionService(StubModel(), cases, idle_ttl_seconds=0.0)
    sid = service.create_session(case_id="demo")["session_id"]
    from lesionkit.errors import NotFoundError

    with pytest.raises(NotFoundError):
        service.get_session(sid)  # immediately stale with ttl=0
