"""Simulated thin server: a node process hosting a bundle store and
running machines, driven over a line-based TCP control protocol.

Control verbs (one command per LF-terminated line, one reply line):

    INSTALL <ToDoList xml>      -> REPORT <TaskReport xml>
    RUN <ToDoList xml>          -> REPORT <TaskReport xml>
    WIRE <ToDoList xml>         -> REPORT <TaskReport xml>
    WRITE <machine> <channel> <text>          -> OK | ERR <reason>
    READ <machine> <channel> <timeout-ms>     -> DATA <line> | TIMEOUT | ERR <reason>
    PING                        -> PONG
    SHUTDOWN                    -> OK (then the process exits)

A separate listener speaks the connection-manager protocol used by wirers:

    LISTEN <machine> <channel>                -> PORT <n> | ERR <reason>
    CONNECT <machine> <channel> <host> <port> -> OK | ERR <reason>
    CANCEL <machine> <channel>                -> OK | ERR <reason>

Abstract channels not yet wired have nothing feeding them, so reads block;
once a socket is bound to a channel, lines written on one end arrive in
order at the other.
"""

from __future__ import annotations

import argparse
import logging
import queue
import socket
import sys
import threading

from .. import events as ev
from .. import services  # noqa: F401  (registers server component types for bundles)
from ..pipeline import AssemblyHandle, Message, build_assembly, parse_assembly_spec
from .documents import (
    TaskOutcome,
    TaskReport,
    new_guid,
    parse_todo_list,
    serialize_task_report,
)

log = logging.getLogger(__name__)

CONNECT_TIMEOUT_S = 5.0


class MachineChannel:
    """One abstract channel endpoint of a running machine."""

    def __init__(self, name: str, kind: str, machine: "Machine",
                 free_in: queue.Queue | None = None, free_out: queue.Queue | None = None):
        self.name = name
        self.kind = kind  # "free" | "in" | "out"
        self.machine = machine
        self.free_in = free_in
        self.free_out = free_out
        self.lock = threading.Lock()
        self.state = "unbound"  # unbound | listening | bound
        self._listener: socket.socket | None = None
        self._sock: socket.socket | None = None

    # -- machine-side access (WRITE / READ verbs)

    def write_line(self, text: str) -> str | None:
        if self.kind == "free":
            self.free_out.put(text)
            return None
        if self.kind == "in":
            self.machine.assembly.send(self.name, Message.raw(text))
            return None
        return f"channel {self.name} is component-driven"

    def read_line(self, timeout_s: float) -> str | None:
        if self.kind == "free":
            try:
                return self.free_in.get(timeout=timeout_s)
            except queue.Empty:
                return None
        if self.kind == "out":
            try:
                msg = self.machine.assembly.receive(self.name, timeout=timeout_s)
            except queue.Empty:
                return None
            return _message_text(msg)
        return None

    # -- wiring

    def begin_listen(self, host: str) -> int | str:
        with self.lock:
            if self.state != "unbound":
                return "channel already bound"
            listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind((host, 0))
            listener.listen(1)
            self._listener = listener
            self.state = "listening"
        threading.Thread(target=self._accept_one, daemon=True,
                         name=f"cm-accept-{self.name}").start()
        return listener.getsockname()[1]

    def _accept_one(self):
        try:
            sock, _ = self._listener.accept()
        except OSError:
            return
        with self.lock:
            self._listener.close()
            self._listener = None
            if self.state != "listening":
                sock.close()
                return
            self.state = "bound"
            self._sock = sock
        self._start_pumps(sock)

    def connect(self, host: str, port: int) -> str | None:
        with self.lock:
            if self.state != "unbound":
                return "channel already bound"
            try:
                sock = socket.create_connection((host, port), timeout=CONNECT_TIMEOUT_S)
            except OSError as exc:
                return f"connect failed: {exc}"
            sock.settimeout(None)
            self.state = "bound"
            self._sock = sock
        self._start_pumps(sock)
        return None

    def cancel(self) -> str | None:
        with self.lock:
            if self.state == "listening":
                self.state = "unbound"
                if self._listener is not None:
                    self._listener.close()
                    self._listener = None
                return None
            if self.state == "bound":
                return "channel already bound"
            return None

    def close(self):
        with self.lock:
            for s in (self._listener, self._sock):
                if s is not None:
                    try:
                        s.close()
                    except OSError:
                        pass
            self._listener = self._sock = None

    # -- byte pumps

    def _start_pumps(self, sock: socket.socket):
        threading.Thread(target=self._pump_out, args=(sock,), daemon=True,
                         name=f"pump-out-{self.name}").start()
        threading.Thread(target=self._pump_in, args=(sock,), daemon=True,
                         name=f"pump-in-{self.name}").start()

    def _pump_out(self, sock: socket.socket):
        while True:
            if self.kind == "free":
                text = self.free_out.get()
            else:
                try:
                    msg = self.machine.assembly.receive(self.name, timeout=1.0)
                except queue.Empty:
                    if self.state != "bound":
                        return
                    continue
                except Exception:
                    return
                text = _message_text(msg)
            try:
                sock.sendall(text.encode("utf-8") + b"\n")
            except OSError:
                return

    def _pump_in(self, sock: socket.socket):
        try:
            with sock.makefile("r", encoding="utf-8", errors="replace") as reader:
                for line in reader:
                    line = line.rstrip("\r\n")
                    if not line:
                        continue
                    if self.kind == "free":
                        self.free_in.put(line)
                    else:
                        self.machine.assembly.send(self.name, Message.raw(line))
        except (OSError, ValueError):
            pass


def _message_text(msg: Message) -> str:
    if msg.kind == "event":
        return ev.serialize_event(msg.payload)
    return str(msg.payload)


class Machine:
    """A running bundle instance plus its channel endpoints."""

    def __init__(self, guid: str, assembly: AssemblyHandle):
        self.guid = guid
        self.assembly = assembly
        self.channels: dict[str, MachineChannel] = {}
        for name in assembly.exported_channels():
            binding = assembly._exports[name]
            if binding.direction == "free":
                self.channels[name] = MachineChannel(
                    name, "free", self,
                    free_in=binding.free.inbound, free_out=binding.free.outbound,
                )
            else:
                self.channels[name] = MachineChannel(name, binding.direction, self)

    def stop(self):
        for ch in self.channels.values():
            ch.close()
        self.assembly.stop()


class ThinServer:
    """One node: bundle store, machines, control and CM listeners."""

    def __init__(self, host: str = "127.0.0.1", control_port: int = 0, cm_port: int = 0):
        self.host = host
        self._requested_ports = (control_port, cm_port)
        self.control_port: int | None = None
        self.cm_port: int | None = None
        self.store: dict[str, str] = {}
        self.machines: dict[str, Machine] = {}
        self._command_lock = threading.Lock()
        self._closing = threading.Event()
        self._listeners: list[socket.socket] = []

    # -- lifecycle

    def start(self) -> tuple[int, int]:
        control = self._listen(self._requested_ports[0])
        cm = self._listen(self._requested_ports[1])
        self.control_port = control.getsockname()[1]
        self.cm_port = cm.getsockname()[1]
        threading.Thread(target=self._accept_loop, args=(control, self._handle_control),
                         daemon=True, name="ts-control").start()
        threading.Thread(target=self._accept_loop, args=(cm, self._handle_cm),
                         daemon=True, name="ts-cm").start()
        return self.control_port, self.cm_port

    def _listen(self, port: int) -> socket.socket:
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        s.bind((self.host, port))
        s.listen(16)
        self._listeners.append(s)
        return s

    def stop(self):
        self._closing.set()
        for s in self._listeners:
            try:
                s.close()
            except OSError:
                pass
        for machine in list(self.machines.values()):
            machine.stop()

    def wait(self):
        self._closing.wait()

    # -- accept/dispatch

    def _accept_loop(self, listener: socket.socket, handler):
        while not self._closing.is_set():
            try:
                sock, _ = listener.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_connection, args=(sock, handler),
                             daemon=True).start()

    def _serve_connection(self, sock: socket.socket, handler):
        try:
            reader = sock.makefile("r", encoding="utf-8", errors="replace")
            for line in reader:
                line = line.rstrip("\r\n")
                if not line:
                    continue
                try:
                    reply = handler(line)
                except Exception as exc:  # a command must never kill the server
                    log.exception("command failed: %s", line[:80])
                    reply = f"ERR internal {type(exc).__name__}"
                sock.sendall((reply + "\n").encode("utf-8"))
                if reply == "OK" and line.strip() == "SHUTDOWN":
                    self.stop()
                    return
        except (OSError, ValueError):
            pass
        finally:
            try:
                sock.close()
            except OSError:
                pass

    # -- control protocol

    def _handle_control(self, line: str) -> str:
        with self._command_lock:
            verb, _, rest = line.partition(" ")
            if verb == "PING":
                return "PONG"
            if verb == "SHUTDOWN":
                return "OK"
            if verb == "INSTALL":
                return "REPORT " + serialize_task_report(self._install(rest))
            if verb == "RUN":
                return "REPORT " + serialize_task_report(self._run(rest))
            if verb == "WIRE":
                return "REPORT " + serialize_task_report(self._wire(rest))
            if verb == "WRITE":
                return self._write(rest)
            if verb == "READ":
                return self._read(rest)
            return f"ERR unknown-verb {verb}"

    def _install(self, todo_xml: str) -> TaskReport:
        todo = parse_todo_list(todo_xml)
        report = TaskReport()
        for task in todo.tasks:
            payload = task.datums.get("Payload")
            if not payload:
                report.outcomes.append(TaskOutcome(task.guid, False, {"Error": "404"}))
                continue
            ts_guid = new_guid()
            self.store[ts_guid] = payload
            report.outcomes.append(TaskOutcome(task.guid, True, {"StoreGuid": ts_guid}))
        return report

    def _run(self, todo_xml: str) -> TaskReport:
        todo = parse_todo_list(todo_xml)
        report = TaskReport()
        for task in todo.tasks:
            store_guid = task.datums.get("StoreGuid", "")
            bundle = self.store.get(store_guid)
            if bundle is None:
                report.outcomes.append(
                    TaskOutcome(task.guid, False, {"Error": f"unknown StoreGuid {store_guid}"})
                )
                continue
            try:
                spec = parse_assembly_spec(bundle)
                handle = build_assembly(spec)
                handle.start()
            except Exception as exc:
                report.outcomes.append(TaskOutcome(task.guid, False, {"Error": str(exc)}))
                continue
            machine = Machine(new_guid(), handle)
            self.machines[machine.guid] = machine
            connector = f"{machine.guid}@{self.host}:{self.cm_port}"
            report.outcomes.append(
                TaskOutcome(task.guid, True, {"Connector": connector, "Machine": machine.guid})
            )
        return report

    def _wire(self, todo_xml: str) -> TaskReport:
        """Execute wirer tasks by speaking the CM socket protocol locally."""
        todo = parse_todo_list(todo_xml)
        report = TaskReport()
        for task in todo.tasks:
            role = task.datums.get("Role", "")
            machine = task.datums.get("Machine", "")
            channel = task.datums.get("Channel", "")
            if role == "LISTEN":
                reply = self._cm_request(f"LISTEN {machine} {channel}")
                if reply.startswith("PORT "):
                    report.outcomes.append(
                        TaskOutcome(task.guid, True, {"Port": reply.split()[1]})
                    )
                else:
                    report.outcomes.append(TaskOutcome(task.guid, False, {"Error": reply}))
            elif role == "CONNECT":
                host = task.datums.get("Host", "")
                port = task.datums.get("Port", "")
                reply = self._cm_request(f"CONNECT {machine} {channel} {host} {port}")
                if reply == "OK":
                    report.outcomes.append(TaskOutcome(task.guid, True, {}))
                else:
                    report.outcomes.append(TaskOutcome(task.guid, False, {"Error": reply}))
            elif role == "CANCEL":
                reply = self._cm_request(f"CANCEL {machine} {channel}")
                report.outcomes.append(
                    TaskOutcome(task.guid, reply == "OK", {} if reply == "OK" else {"Error": reply})
                )
            else:
                report.outcomes.append(
                    TaskOutcome(task.guid, False, {"Error": f"unknown wirer role {role!r}"})
                )
        return report

    def _cm_request(self, line: str) -> str:
        with socket.create_connection((self.host, self.cm_port), timeout=CONNECT_TIMEOUT_S + 2) as s:
            s.sendall((line + "\n").encode("utf-8"))
            reply = b""
            while not reply.endswith(b"\n"):
                chunk = s.recv(4096)
                if not chunk:
                    break
                reply += chunk
            return reply.decode("utf-8").strip()

    def _write(self, rest: str) -> str:
        parts = rest.split(" ", 2)
        if len(parts) != 3:
            return "ERR usage WRITE <machine> <channel> <text>"
        channel = self._channel(parts[0], parts[1])
        if isinstance(channel, str):
            return channel
        error = channel.write_line(parts[2])
        return "OK" if error is None else f"ERR {error}"

    def _read(self, rest: str) -> str:
        parts = rest.split(" ")
        if len(parts) != 3:
            return "ERR usage READ <machine> <channel> <timeout-ms>"
        channel = self._channel(parts[0], parts[1])
        if isinstance(channel, str):
            return channel
        try:
            timeout_s = int(parts[2]) / 1000.0
        except ValueError:
            return "ERR bad timeout"
        line = channel.read_line(timeout_s)
        return "TIMEOUT" if line is None else f"DATA {line}"

    def _channel(self, machine_guid: str, channel_name: str):
        machine = self.machines.get(machine_guid)
        if machine is None:
            return "ERR unknown-machine"
        channel = machine.channels.get(channel_name)
        if channel is None:
            return "ERR unknown-channel"
        return channel

    # -- connection manager protocol

    def _handle_cm(self, line: str) -> str:
        parts = line.split(" ")
        verb = parts[0] if parts else ""
        if verb == "LISTEN" and len(parts) == 3:
            channel = self._channel(parts[1], parts[2])
            if isinstance(channel, str):
                return channel
            result = channel.begin_listen(self.host)
            return f"PORT {result}" if isinstance(result, int) else f"ERR {result}"
        if verb == "CONNECT" and len(parts) == 5:
            channel = self._channel(parts[1], parts[2])
            if isinstance(channel, str):
                return channel
            try:
                port = int(parts[4])
            except ValueError:
                return "ERR bad port"
            error = channel.connect(parts[3], port)
            return "OK" if error is None else f"ERR {error}"
        if verb == "CANCEL" and len(parts) == 3:
            channel = self._channel(parts[1], parts[2])
            if isinstance(channel, str):
                return channel
            error = channel.cancel()
            return "OK" if error is None else f"ERR {error}"
        return "ERR unknown-verb"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="thin-server", description="Run a simulated thin server node")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0, help="control port (0 = ephemeral)")
    parser.add_argument("--cm-port", type=int, default=0, help="connection manager port")
    args = parser.parse_args(argv)
    server = ThinServer(args.host, args.port, args.cm_port)
    control, cm = server.start()
    print(f"LISTENING {control} {cm}", flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
