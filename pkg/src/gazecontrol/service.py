"""Local session service: drives one gaze controller per client connection.

Wire format: newline-delimited JSON over TCP. Client messages carry a
strictly increasing ``seq``; every server message echoes the triggering
client seq as ``reply_to`` and carries its own increasing ``seq``. The
server ticks the controller at the variant frame rate, repeating the last
scene_update between client updates (zero-order hold). An optional WebSocket
endpoint speaks the same JSON messages, one per text frame, for browsers.

Message types (protocol v1, see docs/session_protocol.md):
  client: hello, scene_update, set_policy, start_record, stop_record
  server: ready, gaze, error, record_saved
"""
from __future__ import annotations

import base64
import hashlib
import json
import os
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import features, scene
from .controller import GazeController
from .features import LabeledFrame, NOISE
from .scene import TWO_D, SceneFrame

PROTOCOL_VERSION = 1
WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class PortBusy(OSError):
    pass


def parse_scene_update(payload: dict, variant: str) -> SceneFrame:
    """Build a SceneFrame from a scene_update payload (timeline character schema)."""
    chars = payload.get("characters")
    cap = scene.CAPACITY[variant]
    if not isinstance(chars, list) or len(chars) > cap:
        raise ValueError(f"characters must be a list of at most {cap} entries")
    states = []
    for c in chars:
        if variant == TWO_D:
            states.append(scene.CharacterState2D(
                present=bool(c.get("present", False)),
                distance_m=float(c.get("distance_m", 0.0)),
                waving=bool(c.get("waving", False)),
                pointing=bool(c.get("pointing", False)),
                talking=bool(c.get("talking", False)),
                angle_deg=float(c.get("angle_deg", 0.0)),
                movement=scene.Movement2D(int(c.get("movement", 0))),
            ))
        else:
            states.append(scene.CharacterState3D(
                present=bool(c.get("present", False)),
                distance_m=float(c.get("distance_m", 0.0)),
                characteristic=scene.Characteristic3D(int(c.get("characteristic", 1))),
                talking=bool(c.get("talking", False)),
                pointed_at_count=int(c.get("pointed_at_count", 0)),
                angle_deg=float(c.get("angle_deg", 0.0)),
            ))
    while len(states) < cap:
        states.append(scene.CharacterState2D(False) if variant == TWO_D
                      else scene.CharacterState3D(False))
    return SceneFrame(variant, 0, tuple(states), box_present=variant == TWO_D)


@dataclass
class SessionRecorder:
    active: bool = False
    path: str = ""
    frames: list = field(default_factory=list)   # (SceneFrame, target label or None)

    def capture(self, frame: SceneFrame, target: int | None):
        if self.active:
            self.frames.append((frame, target))


class Session:
    """Protocol state machine for one client; transport-agnostic."""

    def __init__(self, make_controller, variant: str, tick_s: float,
                 record_dir: str = "."):
        self.controller: GazeController = make_controller()
        self.variant = variant
        self.tick_s = tick_s
        self.record_dir = record_dir
        self.recorder = SessionRecorder()
        self.lock = threading.Lock()
        self.started = False
        self.closed = False
        self._last_frame: SceneFrame | None = None
        self._last_client_seq = 0
        self._last_scene_seq = 0
        self._server_seq = 0
        self._tick_index = 0

    def _reply(self, type_: str, reply_to, payload: dict) -> dict:
        self._server_seq += 1
        return {"type": type_, "seq": self._server_seq, "reply_to": reply_to,
                "payload": payload}

    def _error(self, reply_to, message: str) -> dict:
        return self._reply("error", reply_to, {"message": message})

    def handle(self, msg: dict) -> list[dict]:
        """Process one client message; returns server replies in order."""
        with self.lock:
            if not isinstance(msg, dict) or "type" not in msg:
                return [self._error(None, "message must be an object with a type")]
            seq = msg.get("seq")
            if not isinstance(seq, int) or seq <= self._last_client_seq:
                return [self._error(seq, f"seq must be an integer > {self._last_client_seq}")]
            self._last_client_seq = seq
            mtype = msg["type"]
            payload = msg.get("payload") or {}
            if mtype == "hello":
                self.started = True
                return [self._reply("ready", seq, {
                    "protocol_version": PROTOCOL_VERSION,
                    "variant": self.variant,
                    "m": self.controller.m,
                    "labels": list(scene.LABELS[self.variant]),
                    "tick_s": self.tick_s,
                })]
            if not self.started:
                return [self._error(seq, "say hello first")]
            if mtype == "scene_update":
                try:
                    frame = parse_scene_update(payload, self.variant)
                except (ValueError, KeyError) as exc:
                    return [self._error(seq, f"bad scene_update: {exc}")]
                self._last_frame = frame
                self._last_scene_seq = seq
                return []
            if mtype == "set_policy":
                pol = self.controller.policy
                for key in ("min_dwell_s", "switch_margin", "max_pan_rate_dps"):
                    if key in payload:
                        setattr(pol, key, float(payload[key]))
                return []
            if mtype == "start_record":
                self.recorder = SessionRecorder(active=True,
                                                path=str(payload.get("path") or ""))
                return []
            if mtype == "stop_record":
                try:
                    path, count = self._finish_recording()
                except ValueError as exc:
                    return [self._error(seq, str(exc))]
                return [self._reply("record_saved", seq, {"path": path, "examples": count})]
            return [self._error(seq, f"unknown message type {mtype!r}")]

    def tick(self) -> dict | None:
        """Advance one controller tick against the held scene; emits a gaze message."""
        with self.lock:
            if self._last_frame is None:
                return None
            frame = SceneFrame(self.variant, self._tick_index,
                               self._last_frame.characters,
                               box_present=self._last_frame.box_present)
            cmd = self.controller.step(frame, self.tick_s)
            self._tick_index += 1
            self.recorder.capture(frame, cmd.target)
            return self._reply("gaze", self._last_scene_seq, {
                "tick": cmd.tick, "t_s": round(cmd.t_s, 6), "target": cmd.target,
                "pan_deg": round(cmd.pan_deg, 6),
                "pan_rate_dps": round(cmd.pan_rate_dps, 6),
                "probs": cmd.probs,
            })

    def _finish_recording(self) -> tuple[str, int]:
        rec = self.recorder
        self.recorder = SessionRecorder()
        if not rec.active:
            raise ValueError("no recording in progress")
        m = self.controller.m
        if len(rec.frames) < m + 1:
            raise ValueError(f"recording too short: {len(rec.frames)} ticks < {m + 1}")
        fps = 1.0 / self.tick_s
        seg_ticks = max(1, int(round(scene.SEGMENT_S * fps)))
        labeled = []
        for i, (frame, target) in enumerate(rec.frames):
            labeled.append(LabeledFrame(
                tick=i,
                features=features.encode_frame(frame, normalize=True),
                label=NOISE if target is None else int(target),
                situation_id=i // seg_ticks,
                valid=True,
            ))
        ds = features.window_dataset(labeled, m, meta={
            "source": "session", "machine_labels": True, "tick_s": self.tick_s})
        path = rec.path or os.path.join(self.record_dir, f"session-{int(time.time())}.jsonl")
        features.write_dataset_jsonl(ds, path)
        return path, len(ds)


# ---------------------------------------------------------------------------
# transports

def _ndjson_reader(sock: socket.socket):
    buf = b""
    while True:
        try:
            chunk = sock.recv(65536)
        except OSError:
            return
        if not chunk:
            return
        buf += chunk
        while b"\n" in buf:
            line, buf = buf.split(b"\n", 1)
            if line.strip():
                yield line


def _ws_accept_key(key: str) -> str:
    return base64.b64encode(hashlib.sha1((key + WS_GUID).encode()).digest()).decode()


def _ws_handshake(sock: socket.socket) -> bool:
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            return False
        data += chunk
        if len(data) > 65536:
            return False
    headers = {}
    for line in data.split(b"\r\n")[1:]:
        if b":" in line:
            k, v = line.split(b":", 1)
            headers[k.strip().lower().decode()] = v.strip().decode()
    key = headers.get("sec-websocket-key")
    if not key:
        sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        return False
    resp = ("HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\nConnection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {_ws_accept_key(key)}\r\n\r\n")
    sock.sendall(resp.encode())
    return True


def _ws_read_frames(sock: socket.socket):
    """Yield text payloads from masked client frames; handles close and ping."""
    buf = b""

    def need(n):
        nonlocal buf
        while len(buf) < n:
            chunk = sock.recv(65536)
            if not chunk:
                return False
            buf += chunk
        return True

    while True:
        if not need(2):
            return
        b0, b1 = buf[0], buf[1]
        opcode = b0 & 0x0F
        masked = b1 & 0x80
        length = b1 & 0x7F
        offset = 2
        if length == 126:
            if not need(4):
                return
            length = struct.unpack(">H", buf[2:4])[0]
            offset = 4
        elif length == 127:
            if not need(10):
                return
            length = struct.unpack(">Q", buf[2:10])[0]
            offset = 10
        mask = b""
        if masked:
            if not need(offset + 4):
                return
            mask = buf[offset:offset + 4]
            offset += 4
        if not need(offset + length):
            return
        payload = buf[offset:offset + length]
        buf = buf[offset + length:]
        if mask:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        if opcode == 0x8:  # close
            return
        if opcode == 0x9:  # ping -> pong
            sock.sendall(_ws_frame(payload, opcode=0xA))
            continue
        if opcode in (0x1, 0x2):
            yield payload


def _ws_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    header = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header += bytes([n])
    elif n < 65536:
        header += bytes([126]) + struct.pack(">H", n)
    else:
        header += bytes([127]) + struct.pack(">Q", n)
    return header + payload


class SessionService:
    """Accepts TCP (and optionally WebSocket) clients; one isolated session each."""

    def __init__(self, make_controller, variant: str, port: int = 0,
                 ws_port: int | None = None, host: str = "127.0.0.1",
                 tick_s: float | None = None, record_dir: str = "."):
        self.make_controller = make_controller
        self.variant = variant
        self.tick_s = tick_s if tick_s is not None else 1.0 / scene.FPS[variant]
        self.record_dir = record_dir
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()
        self._sockets: list[socket.socket] = []
        self.port = self._bind(host, port)
        self.ws_port = self._bind(host, ws_port) if ws_port is not None else None

    def _bind(self, host: str, port: int) -> int:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as exc:
            sock.close()
            raise PortBusy(f"cannot bind {host}:{port}: {exc}") from exc
        sock.listen(8)
        sock.settimeout(0.25)
        self._sockets.append(sock)
        return sock.getsockname()[1]

    def start(self):
        for sock, ws in zip(self._sockets, (False, True)):
            t = threading.Thread(target=self._accept_loop, args=(sock, ws), daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self):
        self._stopping.set()
        for t in self._threads:
            t.join(timeout=2.0)
        for sock in self._sockets:
            sock.close()

    def serve_forever(self):
        self.start()
        try:
            while not self._stopping.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def _accept_loop(self, listener: socket.socket, websocket: bool):
        while not self._stopping.is_set():
            try:
                conn, _ = listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            t = threading.Thread(target=self._serve_client, args=(conn, websocket),
                                 daemon=True)
            t.start()

    def _serve_client(self, conn: socket.socket, websocket: bool):
        session = Session(self.make_controller, self.variant, self.tick_s,
                          self.record_dir)
        write_lock = threading.Lock()

        def send(msg: dict):
            data = json.dumps(msg).encode()
            with write_lock:
                if websocket:
                    conn.sendall(_ws_frame(data))
                else:
                    conn.sendall(data + b"\n")

        stop_client = threading.Event()

        def ticker():
            next_due = time.monotonic()
            while not stop_client.is_set() and not self._stopping.is_set():
                now = time.monotonic()
                if now < next_due:
                    time.sleep(min(next_due - now, 0.05))
                    continue
                next_due += self.tick_s
                try:
                    out = session.tick()
                    if out is not None:
                        send(out)
                except OSError:
                    return

        tick_thread = threading.Thread(target=ticker, daemon=True)
        tick_thread.start()
        try:
            if websocket and not _ws_handshake(conn):
                return
            reader = _ws_read_frames(conn) if websocket else _ndjson_reader(conn)
            for raw in reader:
                try:
                    msg = json.loads(raw)
                except ValueError:
                    send({"type": "error", "seq": None, "reply_to": None,
                          "payload": {"message": "invalid JSON"}})
                    continue
                for reply in session.handle(msg):
                    send(reply)
        except OSError:
            pass
        finally:
            stop_client.set()
            tick_thread.join(timeout=1.0)
            try:
                conn.close()
            except OSError:
                pass
