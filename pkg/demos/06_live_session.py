"""Drive the session service with a scripted client over TCP.

A stand-in for the browser puppeteer: connects, streams scene updates where
different characters take turns waving, watches the head track them, records
a dataset, and validates the saved file.
"""
import json
import socket
import time

from gazecontrol import baselines, controller, features, scene, service

weights = baselines.HeuristicWeights(
    "product", {**{c: 1.0 for c in baselines.CUE_NAMES}, "waving": 8.0},
    alpha=0.25, sigma_deg=60.0, w_box=0.3)


def make_controller():
    return controller.GazeController(
        controller.BaselinePredictor(weights, scene.TWO_D, m=6), scene.TWO_D)


svc = service.SessionService(make_controller, scene.TWO_D, port=0,
                             tick_s=0.02, record_dir="/tmp")
svc.start()
print(f"service on tcp port {svc.port}")

sock = socket.create_connection(("127.0.0.1", svc.port))
buf = b""


def send(msg):
    sock.sendall(json.dumps(msg).encode() + b"\n")


def recv():
    global buf
    while b"\n" not in buf:
        buf += sock.recv(65536)
    line, buf = buf.split(b"\n", 1)
    return json.loads(line)


def scene_with_waver(waver):
    chars = []
    for c, angle in enumerate(scene.STATIONS[scene.TWO_D]):
        chars.append({"present": c < 3, "distance_m": 1.5, "angle_deg": angle,
                      "waving": c == waver, "pointing": False,
                      "talking": False, "movement": 0})
    return {"characters": chars}


send({"type": "hello", "seq": 1})
ready = recv()
print(f"ready: {ready['payload']}")

send({"type": "start_record", "seq": 2, "payload": {"path": "/tmp/session_demo.jsonl"}})
seq = 3
for waver in (1, 2, 0, 1):
    send({"type": "scene_update", "seq": seq, "payload": scene_with_waver(waver)})
    seq += 1
    deadline = time.time() + 1.0
    last = None
    while time.time() < deadline:
        msg = recv()
        if msg["type"] == "gaze":
            last = msg["payload"]
    print(f"waver P{waver + 1}: head at {last['pan_deg']:7.2f} deg, "
          f"target {last['target']}")

send({"type": "stop_record", "seq": seq})
while True:
    msg = recv()
    if msg["type"] == "record_saved":
        saved = msg["payload"]
        break
print(f"\nrecorded {saved['examples']} examples at {saved['path']}")
errors = features.validate_dataset_jsonl(saved["path"])
print(f"validate -> {'OK' if not errors else errors[:1]}")

sock.close()
svc.stop()
