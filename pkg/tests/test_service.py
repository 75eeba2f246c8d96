import json
import socket
import threading
import time

import numpy as np
import pytest

from gazecontrol import baselines, controller, features, scene, service
from gazecontrol.service import Session, SessionService, parse_scene_update


def make_controller(m=4):
    w = baselines.HeuristicWeights(
        "product", {**{c: 1.0 for c in baselines.CUE_NAMES}, "waving": 8.0},
        alpha=0.3, sigma_deg=60.0, w_box=0.2)
    def factory():
        return controller.GazeController(
            controller.BaselinePredictor(w, scene.TWO_D, m), scene.TWO_D)
    return factory


def waving_update(idx=1):
    chars = []
    for c, angle in enumerate(scene.STATIONS[scene.TWO_D]):
        chars.append({"present": c in (0, idx), "distance_m": 1.5,
                      "angle_deg": angle, "waving": c == idx,
                      "pointing": False, "talking": False, "movement": 0})
    return {"characters": chars}


class TestSessionCore:
    def test_hello_ready_handshake(self):
        s = Session(make_controller(), scene.TWO_D, 1 / 24)
        replies = s.handle({"type": "hello", "seq": 1, "payload": {}})
        assert len(replies) == 1
        r = replies[0]
        assert r["type"] == "ready" and r["reply_to"] == 1
        assert r["payload"]["variant"] == "2d"
        assert r["payload"]["labels"] == ["P1", "P2", "P3", "P4", "Box"]
        assert r["payload"]["m"] == 4
        assert abs(r["payload"]["tick_s"] - 1 / 24) < 1e-12

    def test_no_tick_before_scene_update(self):
        s = Session(make_controller(), scene.TWO_D, 1 / 24)
        s.handle({"type": "hello", "seq": 1})
        assert s.tick() is None

    def test_gaze_converges_to_waving_character(self):
        s = Session(make_controller(m=4), scene.TWO_D, 1 / 24)
        s.handle({"type": "hello", "seq": 1})
        assert s.handle({"type": "scene_update", "seq": 2,
                         "payload": waving_update()}) == []
        out = None
        for _ in range(40):
            out = s.tick()
        assert out["type"] == "gaze"
        assert out["reply_to"] == 2  # seq of the scene_update in effect
        assert out["payload"]["target"] == 1
        assert abs(out["payload"]["pan_deg"] - (-30.0)) < 1e-6

    def test_unknown_type_is_error_and_connection_survives(self):
        s = Session(make_controller(), scene.TWO_D, 1 / 24)
        s.handle({"type": "hello", "seq": 1})
        replies = s.handle({"type": "bogus", "seq": 2})
        assert replies[0]["type"] == "error"
        assert "bogus" in replies[0]["payload"]["message"]
        # still works afterwards
        assert s.handle({"type": "scene_update", "seq": 3,
                         "payload": waving_update()}) == []

    def test_seq_must_increase(self):
        s = Session(make_controller(), scene.TWO_D, 1 / 24)
        s.handle({"type": "hello", "seq": 5})
        replies = s.handle({"type": "scene_update", "seq": 5,
                            "payload": waving_update()})
        assert replies[0]["type"] == "error"

    def test_server_seq_strictly_increasing(self):
        s = Session(make_controller(), scene.TWO_D, 1 / 24)
        seqs = []
        seqs.append(s.handle({"type": "hello", "seq": 1})[0]["seq"])
        s.handle({"type": "scene_update", "seq": 2, "payload": waving_update()})
        for _ in range(5):
            seqs.append(s.tick()["seq"])
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)

    def test_capacity_enforced(self):
        s = Session(make_controller(), scene.TWO_D, 1 / 24)
        s.handle({"type": "hello", "seq": 1})
        bad = {"characters": [{"present": True}] * 5}
        replies = s.handle({"type": "scene_update", "seq": 2, "payload": bad})
        assert replies[0]["type"] == "error"

    def test_set_policy(self):
        s = Session(make_controller(), scene.TWO_D, 1 / 24)
        s.handle({"type": "hello", "seq": 1})
        s.handle({"type": "set_policy", "seq": 2,
                  "payload": {"max_pan_rate_dps": 90.0}})
        assert s.controller.policy.max_pan_rate_dps == 90.0

    def test_record_round_trip(self, tmp_path):
        s = Session(make_controller(m=4), scene.TWO_D, 1 / 24,
                    record_dir=str(tmp_path))
        s.handle({"type": "hello", "seq": 1})
        s.handle({"type": "scene_update", "seq": 2, "payload": waving_update()})
        path = tmp_path / "rec.jsonl"
        s.handle({"type": "start_record", "seq": 3, "payload": {"path": str(path)}})
        for _ in range(100):
            s.tick()
        replies = s.handle({"type": "stop_record", "seq": 4})
        assert replies[0]["type"] == "record_saved"
        saved = replies[0]["payload"]
        assert saved["path"] == str(path)
        assert saved["examples"] > 0
        assert features.validate_dataset_jsonl(path) == []
        ds = features.read_dataset_jsonl(path)
        assert ds.meta["machine_labels"] is True
        assert len(ds) == saved["examples"]

    def test_stop_without_start_is_error(self):
        s = Session(make_controller(), scene.TWO_D, 1 / 24)
        s.handle({"type": "hello", "seq": 1})
        replies = s.handle({"type": "stop_record", "seq": 2})
        assert replies[0]["type"] == "error"


class TestParseSceneUpdate:
    def test_pads_missing_characters(self):
        frame = parse_scene_update({"characters": []}, scene.TWO_D)
        assert len(frame.characters) == 4
        assert not any(c.present for c in frame.characters)

    def test_3d_fields(self):
        payload = {"characters": [
            {"present": True, "distance_m": 1.5, "angle_deg": -45.0,
             "characteristic": 4, "talking": True, "pointed_at_count": 1}]}
        frame = parse_scene_update(payload, scene.THREE_D)
        s = frame.characters[0]
        assert s.characteristic == scene.Characteristic3D.WAVING
        assert s.talking and s.pointed_at_count == 1


def ndjson_client(port):
    sock = socket.create_connection(("127.0.0.1", port), timeout=5)
    buf = b""

    def send(msg):
        sock.sendall(json.dumps(msg).encode() + b"\n")

    def recv(timeout=5.0):
        nonlocal buf
        sock.settimeout(timeout)
        while b"\n" not in buf:
            chunk = sock.recv(65536)
            if not chunk:
                raise ConnectionError("closed")
            buf += chunk
        line, buf = buf.split(b"\n", 1)
        return json.loads(line)

    return sock, send, recv


@pytest.fixture()
def live_service(tmp_path):
    svc = SessionService(make_controller(m=4), scene.TWO_D, port=0,
                         tick_s=0.01, record_dir=str(tmp_path))
    svc.start()
    yield svc
    svc.stop()


class TestTcpTransport:
    def test_handshake_and_gaze_stream(self, live_service):
        sock, send, recv = ndjson_client(live_service.port)
        try:
            send({"type": "hello", "seq": 1})
            ready = recv()
            assert ready["type"] == "ready"
            send({"type": "scene_update", "seq": 2, "payload": waving_update()})
            gaze = None
            deadline = time.time() + 5
            while time.time() < deadline:
                msg = recv()
                if msg["type"] == "gaze" and msg["payload"]["target"] == 1:
                    gaze = msg
                    break
            assert gaze is not None
            assert gaze["reply_to"] == 2
        finally:
            sock.close()

    def test_invalid_json_yields_error_and_keeps_connection(self, live_service):
        sock, send, recv = ndjson_client(live_service.port)
        try:
            sock.sendall(b"this is not json\n")
            msg = recv()
            assert msg["type"] == "error"
            send({"type": "hello", "seq": 1})
            assert recv()["type"] == "ready"
        finally:
            sock.close()

    def test_sessions_are_isolated(self, live_service):
        sock1, send1, recv1 = ndjson_client(live_service.port)
        sock2, send2, recv2 = ndjson_client(live_service.port)
        try:
            send1({"type": "hello", "seq": 1})
            send2({"type": "hello", "seq": 1})
            assert recv1()["type"] == "ready"
            assert recv2()["type"] == "ready"
            # session 1 drives a scene; session 2 must stay silent
            send1({"type": "scene_update", "seq": 2, "payload": waving_update()})
            assert recv1(timeout=3)["type"] == "gaze"
            sock2.settimeout(0.3)
            with pytest.raises(OSError):
                recv2(timeout=0.3)
        finally:
            sock1.close()
            sock2.close()


class TestWebSocketTransport:
    def test_ws_handshake_and_messages(self, tmp_path):
        svc = SessionService(make_controller(m=4), scene.TWO_D, port=0,
                             ws_port=0, tick_s=0.01, record_dir=str(tmp_path))
        svc.start()
        try:
            sock = socket.create_connection(("127.0.0.1", svc.ws_port), timeout=5)
            key = "dGhlIHNhbXBsZSBub25jZQ=="
            req = (f"GET / HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\n"
                   f"Connection: Upgrade\r\nSec-WebSocket-Key: {key}\r\n"
                   f"Sec-WebSocket-Version: 13\r\n\r\n")
            sock.sendall(req.encode())
            resp = b""
            while b"\r\n\r\n" not in resp:
                resp += sock.recv(4096)
            assert b"101" in resp.split(b"\r\n")[0]
            assert b"s3pPLMBiTxaQ9kYGzzhZRbK+xOo=" in resp  # RFC 6455 sample key

            def ws_send(obj):
                payload = json.dumps(obj).encode()
                mask = b"\x01\x02\x03\x04"
                masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
                frame = bytes([0x81])
                if len(payload) < 126:
                    frame += bytes([0x80 | len(payload)])
                else:
                    frame += bytes([0x80 | 126]) + len(payload).to_bytes(2, "big")
                sock.sendall(frame + mask + masked)

            buf = b""

            def ws_recv():
                nonlocal buf
                while True:
                    while len(buf) < 2:
                        buf += sock.recv(65536)
                    length = buf[1] & 0x7F
                    offset = 2
                    if length == 126:
                        while len(buf) < 4:
                            buf += sock.recv(65536)
                        length = int.from_bytes(buf[2:4], "big")
                        offset = 4
                    while len(buf) < offset + length:
                        buf += sock.recv(65536)
                    payload = buf[offset:offset + length]
                    buf = buf[offset + length:]
                    return json.loads(payload)

            ws_send({"type": "hello", "seq": 1})
            assert ws_recv()["type"] == "ready"
            ws_send({"type": "scene_update", "seq": 2, "payload": waving_update()})
            deadline = time.time() + 5
            got_gaze = False
            while time.time() < deadline:
                msg = ws_recv()
                if msg["type"] == "gaze":
                    got_gaze = True
                    break
            assert got_gaze
            sock.close()
        finally:
            svc.stop()
