"""Component-pipeline framework.

An assembly is a set of named component instances whose ports are wired
into channels. Components consume their input queue on a dedicated thread;
cross-component sends are asynchronous over bounded FIFO queues, so a slow
consumer exerts backpressure on its producers instead of dropping messages.

Assemblies are described declaratively (:class:`AssemblySpec`, with an XML
file form) and built against a process-wide component-type registry.
Exported channels are ports left unconnected on purpose: they are the
surface through which external code (sockets, the deployment layer, tests)
injects and observes traffic.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .events import NotWellFormed, is_well_formed

log = logging.getLogger(__name__)

DEFAULT_QUEUE_SIZE = 1024

ANY_PORT = "*"  # components accepting/producing on arbitrary port names


class PipelineError(Exception):
    pass


class DuplicateType(PipelineError):
    pass


class UnknownType(PipelineError):
    pass


class BadTopology(PipelineError):
    pass


class NotStarted(PipelineError):
    pass


class UnknownChannel(PipelineError):
    pass


class PortInUse(PipelineError):
    pass


# ---------------------------------------------------------------------------
# Messages


@dataclass
class Message:
    """One unit of traffic: a raw string, a well-formed XML text, or a
    structured event. ``meta`` carries transport attribution (connection
    tags), never anything the XML itself encodes."""

    kind: str  # "raw" | "xml" | "event"
    payload: object
    meta: dict = field(default_factory=dict)

    @classmethod
    def raw(cls, text: str, **meta) -> "Message":
        return cls("raw", text, dict(meta))

    @classmethod
    def xml(cls, text: str, **meta) -> "Message":
        return cls("xml", text, dict(meta))

    @classmethod
    def event(cls, e, **meta) -> "Message":
        return cls("event", e, dict(meta))


# ---------------------------------------------------------------------------
# Components


class Component:
    """Base class for pipeline components.

    Subclasses declare their port names via ``inputs``/``outputs`` (or
    ``ANY_PORT`` to accept arbitrary names) and implement ``on_message``.
    ``emit`` hands a message to whatever the named output port is wired to.
    """

    inputs: tuple = ("in",)
    outputs: tuple = ("out",)

    def __init__(self, name: str, config: dict, env: dict):
        self.name = name
        self.config = config
        self.env = env
        self._assembly: "AssemblyHandle | None" = None
        self.errors = 0

    def on_start(self):
        pass

    def on_message(self, port: str, msg: Message):
        pass

    def on_stop(self):
        pass

    def emit(self, port: str, msg: Message):
        assert self._assembly is not None, "component not attached"
        self._assembly._dispatch(self, port, msg)

    def accepts(self, port: str) -> bool:
        return self.inputs == ANY_PORT or port in self.inputs

    def produces(self, port: str) -> bool:
        return self.outputs == ANY_PORT or port in self.outputs


_registry: dict[str, type] = {}
_registry_lock = threading.Lock()


def register_component_type(name: str, component_cls: type) -> None:
    """Make ``name`` available to assembly specs. Names register once."""
    with _registry_lock:
        if name in _registry:
            raise DuplicateType(name)
        _registry[name] = component_cls


def registered_types() -> tuple:
    return tuple(_registry)


# ---------------------------------------------------------------------------
# Specs


@dataclass
class ComponentSpec:
    type_name: str
    instance_name: str
    config: dict = field(default_factory=dict)


@dataclass
class Connection:
    from_instance: str
    from_port: str
    to_instance: str
    to_port: str


@dataclass
class Export:
    channel: str
    instance: str | None = None  # None: free conduit with no component behind it
    port: str | None = None


@dataclass
class AssemblySpec:
    name: str = "assembly"
    components: list = field(default_factory=list)
    connections: list = field(default_factory=list)
    exports: list = field(default_factory=list)


def _split_endpoint(text: str, what: str) -> tuple[str, str]:
    if "." not in text:
        raise BadTopology(f"{what} endpoint {text!r} must be instance.port")
    inst, port = text.split(".", 1)
    return inst, port


def parse_assembly_spec(xml_text: str) -> AssemblySpec:
    """Parse the ``<assembly>`` document form (also the deploy bundle payload)."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise NotWellFormed(str(exc)) from exc
    if root.tag != "assembly":
        raise BadTopology(f"expected <assembly> root, got <{root.tag}>")
    spec = AssemblySpec(name=root.get("name", "assembly"))
    for el in root:
        if el.tag == "component":
            type_name = el.get("type")
            inst = el.get("name")
            if not type_name or not inst:
                raise BadTopology("<component> requires type and name attributes")
            config = {c.get("key"): c.get("value", "") for c in el.findall("config")}
            spec.components.append(ComponentSpec(type_name, inst, config))
        elif el.tag == "connect":
            src = el.get("from")
            dst = el.get("to")
            if not src or not dst:
                raise BadTopology("<connect> requires from and to attributes")
            fi, fp = _split_endpoint(src, "from")
            ti, tp = _split_endpoint(dst, "to")
            spec.connections.append(Connection(fi, fp, ti, tp))
        elif el.tag == "export":
            channel = el.get("channel")
            if not channel:
                raise BadTopology("<export> requires a channel attribute")
            port_ref = el.get("port")
            if port_ref:
                inst, port = _split_endpoint(port_ref, "export")
                spec.exports.append(Export(channel, inst, port))
            else:
                spec.exports.append(Export(channel))
    return spec


def serialize_assembly_spec(spec: AssemblySpec) -> str:
    parts = [f'<assembly name="{spec.name}">']
    for c in spec.components:
        cfg = "".join(f'<config key="{k}" value="{v}" />' for k, v in c.config.items())
        parts.append(f'<component type="{c.type_name}" name="{c.instance_name}">{cfg}</component>')
    for con in spec.connections:
        parts.append(
            f'<connect from="{con.from_instance}.{con.from_port}" '
            f'to="{con.to_instance}.{con.to_port}" />'
        )
    for ex in spec.exports:
        if ex.instance:
            parts.append(f'<export channel="{ex.channel}" port="{ex.instance}.{ex.port}" />')
        else:
            parts.append(f'<export channel="{ex.channel}" />')
    parts.append("</assembly>")
    return "".join(parts)


# ---------------------------------------------------------------------------
# Channels exposed at the assembly boundary


class FreeChannel:
    """An exported conduit with no component behind it.

    ``inbound`` holds data that arrived from outside for the assembly side
    to read; ``outbound`` holds data written on the assembly side awaiting
    an external consumer (a socket bridge, usually). Reads block until
    something feeds the respective queue, which is exactly the pre-wiring
    blocking contract.
    """

    def __init__(self, name: str, maxsize: int = DEFAULT_QUEUE_SIZE):
        self.name = name
        self.inbound: queue.Queue = queue.Queue(maxsize=maxsize)
        self.outbound: queue.Queue = queue.Queue(maxsize=maxsize)


class _ExportBinding:
    __slots__ = ("export", "component", "direction", "buffer", "free")

    def __init__(self, export: Export, component: Component | None, direction: str,
                 buffer: "queue.Queue | None", free: FreeChannel | None):
        self.export = export
        self.component = component
        self.direction = direction  # "in" | "out" | "free"
        self.buffer = buffer
        self.free = free


# ---------------------------------------------------------------------------
# Assembly


class AssemblyHandle:
    """A built assembly: lifecycle control plus its exported channels."""

    def __init__(self, spec: AssemblySpec, env: dict | None = None,
                 queue_size: int = DEFAULT_QUEUE_SIZE):
        self.spec = spec
        self.env = env if env is not None else {}
        self._queue_size = queue_size
        self._components: dict[str, Component] = {}
        self._queues: dict[str, queue.Queue] = {}
        self._routes: dict[tuple[str, str], list] = {}
        self._exports: dict[str, _ExportBinding] = {}
        self._threads: list[threading.Thread] = []
        self._started = False
        self._stopped = False
        self._lock = threading.Lock()
        self.dropped: dict[tuple[str, str], int] = {}
        self._build()

    # -- construction

    def _build(self):
        spec = self.spec
        for cs in spec.components:
            cls = _registry.get(cs.type_name)
            if cls is None:
                raise UnknownType(cs.type_name)
            if cs.instance_name in self._components:
                raise BadTopology(f"duplicate instance name {cs.instance_name!r}")
            comp = cls(cs.instance_name, dict(cs.config), self.env)
            comp._assembly = self
            self._components[cs.instance_name] = comp
            self._queues[cs.instance_name] = queue.Queue(maxsize=self._queue_size)

        seen_inputs: set = set()
        for con in spec.connections:
            src = self._components.get(con.from_instance)
            dst = self._components.get(con.to_instance)
            if src is None:
                raise BadTopology(f"unknown producer instance {con.from_instance!r}")
            if dst is None:
                raise BadTopology(f"unknown consumer instance {con.to_instance!r}")
            if not src.produces(con.from_port):
                raise BadTopology(f"{con.from_instance} has no output port {con.from_port!r}")
            if not dst.accepts(con.to_port):
                raise BadTopology(f"{con.to_instance} has no input port {con.to_port!r}")
            key = (con.to_instance, con.to_port)
            if key in seen_inputs:
                raise BadTopology(f"input port {key} has more than one producer")
            seen_inputs.add(key)
            self._routes.setdefault((con.from_instance, con.from_port), []).append(
                (dst, con.to_port)
            )

        for ex in spec.exports:
            if ex.channel in self._exports:
                raise BadTopology(f"duplicate exported channel {ex.channel!r}")
            if ex.instance is None:
                self._exports[ex.channel] = _ExportBinding(
                    ex, None, "free", None, FreeChannel(ex.channel, self._queue_size)
                )
                continue
            comp = self._components.get(ex.instance)
            if comp is None:
                raise BadTopology(f"export {ex.channel!r} names unknown instance {ex.instance!r}")
            endpoint_used = (ex.instance, ex.port) in seen_inputs or (
                (ex.instance, ex.port) in self._routes
            )
            if endpoint_used:
                raise BadTopology(
                    f"exported channel {ex.channel!r} is internally connected"
                )
            # explicitly declared ports beat wildcard declarations
            explicit_in = comp.inputs != ANY_PORT and ex.port in comp.inputs
            explicit_out = comp.outputs != ANY_PORT and ex.port in comp.outputs
            if explicit_in or (not explicit_out and comp.accepts(ex.port)):
                self._exports[ex.channel] = _ExportBinding(ex, comp, "in", None, None)
            elif comp.produces(ex.port):
                buf: queue.Queue = queue.Queue(maxsize=self._queue_size)
                self._exports[ex.channel] = _ExportBinding(ex, comp, "out", buf, None)
            else:
                raise BadTopology(
                    f"export {ex.channel!r}: {ex.instance} has no port {ex.port!r}"
                )

    # -- lifecycle

    def start(self):
        with self._lock:
            if self._started:
                return
            if self._stopped:
                raise NotStarted("assembly already stopped")
            started: list[Component] = []
            try:
                for comp in self._components.values():
                    comp.on_start()
                    started.append(comp)
            except Exception:
                for comp in started:
                    try:
                        comp.on_stop()
                    except Exception:
                        log.exception("stopping %s after failed start", comp.name)
                raise
            for name, comp in self._components.items():
                t = threading.Thread(
                    target=self._consume, args=(comp, self._queues[name]),
                    name=f"{self.spec.name}.{name}", daemon=True,
                )
                t.start()
                self._threads.append(t)
            self._started = True

    def stop(self):
        with self._lock:
            if not self._started or self._stopped:
                self._stopped = True
                return
            self._stopped = True
        for q in self._queues.values():
            q.put(_STOP)
        for t in self._threads:
            t.join(timeout=5.0)
        for comp in self._components.values():
            try:
                comp.on_stop()
            except Exception:
                log.exception("error stopping %s", comp.name)

    @property
    def running(self) -> bool:
        return self._started and not self._stopped

    def _consume(self, comp: Component, q: queue.Queue):
        while True:
            item = q.get()
            if item is _STOP:
                return
            port, msg = item
            try:
                comp.on_message(port, msg)
            except Exception:
                comp.errors += 1
                log.exception("%s failed on port %s", comp.name, port)

    # -- traffic

    def _dispatch(self, comp: Component, port: str, msg: Message):
        consumers = self._routes.get((comp.name, port))
        if consumers:
            for dst, to_port in consumers:
                self._queues[dst.name].put((to_port, msg))
            return
        for binding in self._exports.values():
            if binding.direction == "out" and binding.component is comp and binding.export.port == port:
                binding.buffer.put(msg)
                return
        key = (comp.name, port)
        self.dropped[key] = self.dropped.get(key, 0) + 1

    def send(self, channel_name: str, msg: Message):
        """Inject a message into an exported channel from outside."""
        if not self.running:
            raise NotStarted(f"cannot send to {channel_name!r}: assembly not running")
        binding = self._exports.get(channel_name)
        if binding is None:
            raise UnknownChannel(channel_name)
        if binding.direction == "in":
            self._queues[binding.component.name].put((binding.export.port, msg))
        elif binding.direction == "free":
            binding.free.inbound.put(msg)
        else:
            raise UnknownChannel(f"{channel_name!r} is an output channel")

    def receive(self, channel_name: str, timeout: float | None = None) -> Message:
        """Take the next message from an exported output channel."""
        binding = self._exports.get(channel_name)
        if binding is None:
            raise UnknownChannel(channel_name)
        if binding.direction == "out":
            return binding.buffer.get(timeout=timeout)
        if binding.direction == "free":
            return binding.free.outbound.get(timeout=timeout)
        raise UnknownChannel(f"{channel_name!r} is an input channel")

    def free_channel(self, channel_name: str) -> FreeChannel:
        binding = self._exports.get(channel_name)
        if binding is None or binding.direction != "free":
            raise UnknownChannel(channel_name)
        return binding.free

    def exported_channels(self) -> tuple:
        return tuple(self._exports)

    def component(self, name: str) -> Component:
        return self._components[name]


_STOP = object()


def build_assembly(spec: AssemblySpec, env: dict | None = None,
                   queue_size: int = DEFAULT_QUEUE_SIZE) -> AssemblyHandle:
    """Construct all components and wire channels; nothing is started."""
    return AssemblyHandle(spec, env, queue_size)


# ---------------------------------------------------------------------------
# Connection table shared between socket adapters and outbound writers


class ConnectionTable:
    """Live transport connections keyed by tag, safe for concurrent use."""

    def __init__(self):
        self._conns: dict[str, object] = {}
        self._lock = threading.Lock()
        self._next = 0

    def new_tag(self) -> str:
        with self._lock:
            self._next += 1
            return f"conn-{self._next}"

    def add(self, tag: str, writer) -> None:
        with self._lock:
            self._conns[tag] = writer

    def remove(self, tag: str) -> None:
        with self._lock:
            self._conns.pop(tag, None)

    def get(self, tag: str):
        with self._lock:
            return self._conns.get(tag)

    def tags(self) -> tuple:
        with self._lock:
            return tuple(self._conns)


class _SocketWriter:
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._lock = threading.Lock()

    def send_line(self, text: str) -> None:
        data = text.encode("utf-8") + b"\n"
        with self._lock:
            self._sock.sendall(data)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


# ---------------------------------------------------------------------------
# Built-in components


class EventBus(Component):
    """Fans every inbound message out to all consumers wired to ``out``.

    With nobody connected downstream, messages are dropped and counted.
    """

    inputs = ("in",)
    outputs = ("out",)

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.dropped = 0
        self.forwarded = 0

    def on_message(self, port, msg):
        if not self._assembly._routes.get((self.name, "out")):
            self.dropped += 1
            return
        self.forwarded += 1
        self.emit("out", msg)


class XMLFilter(Component):
    """Passes through only well-formed XML; anything else is dropped."""

    inputs = ("in", "inject")
    outputs = ("out",)

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.rejected = 0

    def on_message(self, port, msg):
        if msg.kind == "event":
            self.emit("out", msg)
            return
        text = msg.payload
        if isinstance(text, str) and is_well_formed(text):
            self.emit("out", Message.xml(text, **msg.meta))
        else:
            self.rejected += 1


class Relay(Component):
    """Forwards anything received on any input port to ``out``."""

    inputs = ANY_PORT
    outputs = ("out",)

    def on_message(self, port, msg):
        self.emit("out", msg)


class IPSocketAdapter(Component):
    """TCP listener emitting one raw-string message per LF-terminated line.

    Each accepted connection gets a unique tag carried in message metadata
    so that replies can be routed back; writers are published through the
    ``connections`` table in the assembly environment.
    """

    inputs = ()
    outputs = ("out",)

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.port = int(config.get("port", "0"))
        self.host = config.get("host", "127.0.0.1")
        self.bound_port: int | None = None
        self._server: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._closing = False
        self.connections: ConnectionTable = env.setdefault("connections", ConnectionTable())

    def on_start(self):
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            server.bind((self.host, self.port))
        except OSError as exc:
            server.close()
            raise PortInUse(f"{self.host}:{self.port}: {exc}") from exc
        server.listen(16)
        self.bound_port = server.getsockname()[1]
        self._server = server
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name=f"{self.name}.accept", daemon=True
        )
        self._accept_thread.start()

    def on_stop(self):
        self._closing = True
        if self._server:
            try:
                self._server.close()
            except OSError:
                pass
        for tag in self.connections.tags():
            writer = self.connections.get(tag)
            if writer:
                writer.close()
            self.connections.remove(tag)

    def _accept_loop(self):
        while not self._closing:
            try:
                sock, _addr = self._server.accept()
            except OSError:
                return
            tag = self.connections.new_tag()
            self.connections.add(tag, _SocketWriter(sock))
            threading.Thread(
                target=self._read_loop, args=(sock, tag),
                name=f"{self.name}.{tag}", daemon=True,
            ).start()

    def _read_loop(self, sock: socket.socket, tag: str):
        try:
            with sock.makefile("r", encoding="utf-8", errors="replace") as reader:
                for line in reader:
                    line = line.rstrip("\r\n")
                    if not line:
                        continue
                    self.emit("out", Message.raw(line, tag=tag))
        except (OSError, ValueError):
            pass
        finally:
            self.connections.remove(tag)
            registry = self.env.get("registry")
            if registry is not None:
                registry.drop_tag(tag)


def _register_builtins():
    for name, cls in (
        ("EventBus", EventBus),
        ("XMLFilter", XMLFilter),
        ("Relay", Relay),
        ("IPSocketAdapter", IPSocketAdapter),
    ):
        if name not in _registry:
            register_component_type(name, cls)


_register_builtins()
