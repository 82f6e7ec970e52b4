"""WebSocket bridge for browser clients.

Browsers cannot open raw TCP, so the server exposes the same line-oriented
XML traffic over WebSocket: one XML document per text frame, identical
payloads to the TCP framing. This is a minimal RFC 6455 server-side
endpoint (HTTP upgrade handshake, masked client frames, text/ping/close
opcodes) written against the standard library because the environment
provides no WebSocket package.

Each accepted socket is registered in the assembly's connection table
under a fresh tag, so the event server routes responses back through the
bridge exactly as it does for TCP clients.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import socket
import struct
import threading

from .pipeline import AssemblyHandle, Message

log = logging.getLogger(__name__)

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BIN = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


def _accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def encode_frame(opcode: int, payload: bytes) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 65536:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def encode_text(text: str) -> bytes:
    return encode_frame(OP_TEXT, text.encode("utf-8"))


class _FrameReader:
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = b""

    def _need(self, n: int) -> bytes:
        while len(self._buf) < n:
            chunk = self._sock.recv(65536)
            if not chunk:
                raise ConnectionError("socket closed")
            self._buf += chunk
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def read_frame(self) -> tuple[int, bool, bytes]:
        """Returns (opcode, fin, payload) with client masking removed."""
        b0, b1 = self._need(2)
        fin = bool(b0 & 0x80)
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        if length == 126:
            (length,) = struct.unpack(">H", self._need(2))
        elif length == 127:
            (length,) = struct.unpack(">Q", self._need(8))
        mask = self._need(4) if masked else b"\x00" * 4
        payload = self._need(length)
        if masked:
            payload = bytes(c ^ mask[i % 4] for i, c in enumerate(payload))
        return opcode, fin, payload

    def read_message(self) -> tuple[int, bytes]:
        """Assembles fragmented messages; returns (opcode, payload)."""
        opcode, fin, payload = self.read_frame()
        while not fin:
            _, fin, more = self.read_frame()
            payload += more
        return opcode, payload


class _WsWriter:
    """Connection-table adapter: routed lines become text frames."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._lock = threading.Lock()

    def send_line(self, text: str) -> None:
        with self._lock:
            self._sock.sendall(encode_text(text))

    def send_frame(self, frame: bytes) -> None:
        with self._lock:
            self._sock.sendall(frame)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def _read_http_request(sock: socket.socket) -> dict | None:
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            return None
        data += chunk
        if len(data) > 16384:
            return None
    head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = head.split("\r\n")
    headers = {}
    for line in lines[1:]:
        name, _, value = line.partition(":")
        headers[name.strip().lower()] = value.strip()
    return headers


class WebSocketBridge:
    """Bridges WebSocket text frames to an assembly's inbound channel."""

    def __init__(self, handle: AssemblyHandle, env: dict, host: str = "127.0.0.1",
                 port: int = 0, channel: str = "inbound"):
        self.handle = handle
        self.env = env
        self.channel = channel
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind((host, port))
        self._server.listen(16)
        self.host = host
        self.port = self._server.getsockname()[1]
        self._closing = False
        self._thread: threading.Thread | None = None

    def start(self):
        self._thread = threading.Thread(target=self._accept_loop, name="ws-accept", daemon=True)
        self._thread.start()

    def stop(self):
        self._closing = True
        try:
            self._server.close()
        except OSError:
            pass

    def _accept_loop(self):
        while not self._closing:
            try:
                sock, _ = self._server.accept()
            except OSError:
                return
            threading.Thread(target=self._serve, args=(sock,), daemon=True).start()

    def _serve(self, sock: socket.socket):
        connections = self.env["connections"]
        registry = self.env.get("registry")
        tag = None
        try:
            headers = _read_http_request(sock)
            if not headers or headers.get("upgrade", "").lower() != "websocket":
                sock.sendall(b"HTTP/1.1 400 Bad Request\r\nConnection: close\r\n\r\n")
                return
            key = headers.get("sec-websocket-key", "")
            response = (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {_accept_key(key)}\r\n\r\n"
            )
            sock.sendall(response.encode("ascii"))

            writer = _WsWriter(sock)
            tag = connections.new_tag()
            connections.add(tag, writer)
            reader = _FrameReader(sock)
            while True:
                opcode, payload = reader.read_message()
                if opcode == OP_CLOSE:
                    writer.send_frame(encode_frame(OP_CLOSE, b""))
                    return
                if opcode == OP_PING:
                    writer.send_frame(encode_frame(OP_PONG, payload))
                    continue
                if opcode != OP_TEXT:
                    continue
                text = payload.decode("utf-8", errors="replace").strip()
                if text:
                    self.handle.send(self.channel, Message.raw(text, tag=tag))
        except (ConnectionError, OSError):
            pass
        except Exception:
            log.exception("websocket session failed")
        finally:
            if tag is not None:
                connections.remove(tag)
                if registry is not None:
                    registry.drop_tag(tag)
            try:
                sock.close()
            except OSError:
                pass
