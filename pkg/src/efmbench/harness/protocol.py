"""Policy wire protocol: newline-delimited JSON over a byte stream.

Version 1 messages (every message carries protocol_version):

    harness -> policy
      {"protocol_version": 1, "type": "reset", "task": ..., "instruction": ...,
       "view_mode": ..., "seed": ..., "operating_arm": ..., "obs_mode": ...}
      {"protocol_version": 1, "type": "obs", "t": ..., "state": [16],
       "wrench_left": [6], "wrench_right": [6],
       "symbolic": {camera: record} | "images": {camera: base64 PNG}}

    policy -> harness
      {"protocol_version": 1, "type": "action", "chunk": [[16] x 8],
       "force_pred": [[6] x 8]?}

The transport is a child process's standard I/O (cmd endpoints) or a TCP
socket. One reply is expected per obs message, within the timeout.
"""

from __future__ import annotations

import base64
import json
import queue
import shlex
import socket
import subprocess
import threading

import numpy as np

from ..perception.render import encode_png
from .ensemble import ProtocolError

PROTOCOL_VERSION = 1
MESSAGE_TIMEOUT_S = 10.0


def encode_message(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode() + b"\n"


def decode_message(line: bytes) -> dict:
    try:
        msg = json.loads(line.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"malformed message: {e}") from e
    if not isinstance(msg, dict):
        raise ProtocolError("message is not an object")
    if msg.get("protocol_version") != PROTOCOL_VERSION:
        raise ProtocolError(
            f"missing or unsupported protocol_version {msg.get('protocol_version')!r}"
        )
    return msg


def reset_message(task_id, instruction, view_mode, seed, operating_arm, obs_mode) -> dict:
    return {
        "protocol_version": PROTOCOL_VERSION,
        "type": "reset",
        "task": task_id,
        "instruction": instruction,
        "view_mode": view_mode,
        "seed": int(seed),
        "operating_arm": operating_arm,
        "obs_mode": obs_mode,
    }


def obs_message(t, observation) -> dict:
    msg = {
        "protocol_version": PROTOCOL_VERSION,
        "type": "obs",
        "t": int(t),
        "state": [float(x) for x in observation.state],
        "wrench_left": [float(x) for x in observation.wrench_left],
        "wrench_right": [float(x) for x in observation.wrench_right],
    }
    if observation.symbolic is not None:
        msg["symbolic"] = observation.symbolic
    if observation.images is not None:
        msg["images"] = {
            cam: base64.b64encode(encode_png(img)).decode()
            for cam, img in observation.images.items()
        }
    return msg


def parse_action_reply(msg: dict):
    if msg.get("type") == "error":
        raise ProtocolError(f"policy error: {msg.get('message', 'unspecified')}")
    if msg.get("type") != "action":
        raise ProtocolError(f"expected action reply, got {msg.get('type')!r}")
    chunk = np.asarray(msg.get("chunk", []), dtype=np.float64)
    force = msg.get("force_pred")
    force_arr = None
    if force is not None:
        force_arr = np.asarray(force, dtype=np.float64)
        if force_arr.shape != (8, 6) or not np.all(np.isfinite(force_arr)):
            raise ProtocolError(f"force_pred must be 8x6 finite, got {force_arr.shape}")
    return chunk, force_arr


class InProcessEndpoint:
    """Adapter for a Python policy object with reset(msg) and act(msg)."""

    def __init__(self, policy):
        self.policy = policy

    def reset(self, payload: dict) -> None:
        self.policy.reset(payload)

    def query(self, payload: dict) -> dict:
        return self.policy.act(payload)

    def close(self) -> None:
        pass


class CmdEndpoint:
    """Child process speaking the protocol on its standard I/O."""

    def __init__(self, command: str, timeout: float = MESSAGE_TIMEOUT_S):
        self.timeout = timeout
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
        )
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _send(self, payload: dict):
        if self.proc.poll() is not None:
            raise ProtocolError("policy process exited")
        try:
            self.proc.stdin.write(encode_message(payload))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ProtocolError(f"policy pipe broken: {e}") from e

    def reset(self, payload: dict) -> None:
        self._send(payload)

    def query(self, payload: dict) -> dict:
        self._send(payload)
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ProtocolError(f"policy reply timeout after {self.timeout}s")
        if line is None:
            raise ProtocolError("policy closed its output")
        return decode_message(line)

    def close(self) -> None:
        try:
            if self.proc.poll() is None:
                self.proc.stdin.close()
                self.proc.wait(timeout=3)
        except Exception:
            self.proc.kill()


class TcpEndpoint:
    def __init__(self, host: str, port: int, timeout: float = MESSAGE_TIMEOUT_S):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)
        self._file = self.sock.makefile("rb")

    def _send(self, payload: dict):
        try:
            self.sock.sendall(encode_message(payload))
        except OSError as e:
            raise ProtocolError(f"tcp send failed: {e}") from e

    def reset(self, payload: dict) -> None:
        self._send(payload)

    def query(self, payload: dict) -> dict:
        self._send(payload)
        try:
            line = self._file.readline()
        except socket.timeout:
            raise ProtocolError("policy reply timeout")
        if not line:
            raise ProtocolError("policy closed the connection")
        return decode_message(line)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def open_endpoint(spec: str):
    """'expert', 'cmd:<command line>', or 'tcp:<host>:<port>'."""
    if spec == "expert":
        from .expert_policy import ExpertPolicy

        return InProcessEndpoint(ExpertPolicy())
    if spec.startswith("cmd:"):
        return CmdEndpoint(spec[4:])
    if spec.startswith("tcp:"):
        rest = spec[4:]
        host, _, port = rest.rpartition(":")
        if not host:
            raise ValueError(f"bad tcp endpoint {spec!r} (use tcp:host:port)")
        return TcpEndpoint(host, int(port))
    raise ValueError(f"unknown endpoint {spec!r} (use expert, cmd:..., or tcp:host:port)")


def serve_stdio(policy, stdin=None, stdout=None) -> None:
    """Run a policy object as a stdio protocol server (used by policy
    processes launched through cmd endpoints)."""
    import sys

    fin = stdin if stdin is not None else sys.stdin.buffer
    fout = stdout if stdout is not None else sys.stdout.buffer
    for line in fin:
        if not line.strip():
            continue
        try:
            msg = decode_message(line)
            if msg.get("type") == "reset":
                policy.reset(msg)
                continue
            if msg.get("type") == "obs":
                reply = policy.act(msg)
            else:
                reply = {
                    "protocol_version": PROTOCOL_VERSION,
                    "type": "error",
                    "message": f"unknown message type {msg.get('type')!r}",
                }
        except ProtocolError as e:
            reply = {
                "protocol_version": PROTOCOL_VERSION,
                "type": "error",
                "message": str(e),
            }
        fout.write(encode_message(reply))
        fout.flush()
