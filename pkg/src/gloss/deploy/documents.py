"""Deployment control documents and plan compilation.

Three XML document families drive the engine: the deployment descriptor
(a static graph of bundles, nodes, deployments and channel connections),
to-do lists (the tasks a tool performs on arrival at a thin server), and
task reports (one outcome per task, matched by guid).
"""

from __future__ import annotations

import secrets
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

from ..events import NotWellFormed

_GUID_ALPHABET = "0123456789abcdefghijklmnopqrstuvwxyz"


def new_guid() -> str:
    """Fresh URN-form identifier, e.g. ``urn:gloss:4f9a0c2qkx7m``."""
    return "urn:gloss:" + "".join(secrets.choice(_GUID_ALPHABET) for _ in range(12))


class DocumentError(Exception):
    pass


class DanglingReference(DocumentError):
    def __init__(self, kind: str, name: str):
        super().__init__(f"{kind} reference to undeclared {name!r}")
        self.kind = kind
        self.name = name


# ---------------------------------------------------------------------------
# To Do Lists and Task Reports

INSTALL = "INSTALL"
RUN = "RUN"
WIRE = "WIRE"

_REQUIRED_DATUMS = {
    INSTALL: ("PayloadRef",),
    RUN: ("StoreGuid",),
    WIRE: ("SourceEnd", "DestinationEnd", "PamBinding", "SourceChannel",
           "DestinationChannel", "PrimaryIP", "SecondaryIP"),
}


@dataclass
class Task:
    guid: str
    type: str
    datums: dict = field(default_factory=dict)


@dataclass
class ToDoList:
    tasks: list = field(default_factory=list)

    def validate(self) -> None:
        guids = [t.guid for t in self.tasks]
        if len(set(guids)) != len(guids):
            raise DocumentError("task guids must be unique within a list")
        for t in self.tasks:
            for required in _REQUIRED_DATUMS.get(t.type, ()):
                if required not in t.datums:
                    raise DocumentError(f"{t.type} task {t.guid} missing datum {required!r}")


@dataclass
class TaskOutcome:
    guid: str
    success: bool
    datums: dict = field(default_factory=dict)


@dataclass
class TaskReport:
    outcomes: list = field(default_factory=list)

    def outcome_for(self, guid: str) -> TaskOutcome | None:
        return next((o for o in self.outcomes if o.guid == guid), None)

    @property
    def all_succeeded(self) -> bool:
        return all(o.success for o in self.outcomes)


def _datum_xml(datums: dict) -> str:
    return "".join(
        f"<datum id={quoteattr(k)}>{escape(str(v))}</datum>" for k, v in datums.items()
    )


def serialize_todo_list(todo: ToDoList) -> str:
    tasks = "".join(
        f"<Task guid={quoteattr(t.guid)} type={quoteattr(t.type)}>{_datum_xml(t.datums)}</Task>"
        for t in todo.tasks
    )
    return f"<ToDoList>{tasks}</ToDoList>"


def serialize_task_report(report: TaskReport) -> str:
    outcomes = "".join(
        f"<TaskOutcome guid={quoteattr(o.guid)} "
        f"success={quoteattr('TRUE' if o.success else 'FALSE')}>"
        f"{_datum_xml(o.datums)}</TaskOutcome>"
        for o in report.outcomes
    )
    return f"<TaskReport>{outcomes}</TaskReport>"


def _parse_datums(el: ET.Element) -> dict:
    out = {}
    for d in el.findall("datum"):
        key = d.get("id")
        if key is None:
            raise DocumentError("<datum> requires an id attribute")
        out[key] = (d.text or "").strip()
    return out


def parse_todo_list(xml_text: str) -> ToDoList:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise NotWellFormed(str(exc)) from exc
    if root.tag != "ToDoList":
        raise DocumentError(f"expected <ToDoList>, got <{root.tag}>")
    todo = ToDoList()
    for task_el in root.findall("Task"):
        guid = task_el.get("guid")
        type_ = task_el.get("type")
        if not guid or not type_:
            raise DocumentError("<Task> requires guid and type attributes")
        todo.tasks.append(Task(guid, type_, _parse_datums(task_el)))
    return todo


def parse_task_report(xml_text: str) -> TaskReport:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise NotWellFormed(str(exc)) from exc
    if root.tag != "TaskReport":
        raise DocumentError(f"expected <TaskReport>, got <{root.tag}>")
    report = TaskReport()
    for el in root.findall("TaskOutcome"):
        guid = el.get("guid")
        success = el.get("success", "").upper()
        if not guid or success not in ("TRUE", "FALSE"):
            raise DocumentError("<TaskOutcome> requires guid and success TRUE|FALSE")
        report.outcomes.append(TaskOutcome(guid, success == "TRUE", _parse_datums(el)))
    return report


# ---------------------------------------------------------------------------
# Deployment descriptor documents


@dataclass(frozen=True)
class Deployment:
    name: str
    bundle: str
    target: str


@dataclass(frozen=True)
class DDDConnection:
    source_deployment: str
    source_channel: str
    destination_deployment: str
    destination_channel: str


@dataclass
class DDDGraph:
    name: str
    bundles: dict = field(default_factory=dict)  # bundle name -> code ref
    nodes: dict = field(default_factory=dict)  # node id -> IP address
    deployments: list = field(default_factory=list)
    connections: list = field(default_factory=list)

    def deployment(self, name: str) -> Deployment | None:
        return next((d for d in self.deployments if d.name == name), None)


def parse_ddd(xml_text: str) -> DDDGraph:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise NotWellFormed(str(exc)) from exc
    if root.tag != "DDD":
        raise DocumentError(f"expected <DDD>, got <{root.tag}>")
    graph = DDDGraph(name=root.get("name", ""))

    bundles_el = root.find("bundles")
    if bundles_el is not None:
        for b in bundles_el.findall("bundle"):
            graph.bundles[b.get("name")] = b.get("code", "")
    nodes_el = root.find("nodes")
    if nodes_el is not None:
        for n in nodes_el.findall("node"):
            graph.nodes[n.get("id")] = n.get("address", "")
    deployments_el = root.find("deployments")
    if deployments_el is not None:
        for d in deployments_el.findall("deployment"):
            graph.deployments.append(
                Deployment(d.get("name", ""), d.get("bundle", ""), d.get("target", ""))
            )
    connections_el = root.find("connections")
    if connections_el is not None:
        for c in connections_el.findall("connection"):
            src = c.find("source")
            dst = c.find("destination")
            if src is None or dst is None:
                raise DocumentError("<connection> requires <source> and <destination>")
            graph.connections.append(
                DDDConnection(
                    src.get("deployment", ""), src.get("channel", ""),
                    dst.get("deployment", ""), dst.get("channel", ""),
                )
            )

    names = [d.name for d in graph.deployments]
    if len(set(names)) != len(names):
        raise DocumentError("deployment names must be unique")
    for d in graph.deployments:
        if d.bundle not in graph.bundles:
            raise DanglingReference("bundle", d.bundle)
        if d.target not in graph.nodes:
            raise DanglingReference("node", d.target)
    for c in graph.connections:
        for dep in (c.source_deployment, c.destination_deployment):
            if graph.deployment(dep) is None:
                raise DanglingReference("deployment", dep)
    return graph


def serialize_ddd(graph: DDDGraph) -> str:
    parts = [f"<DDD name={quoteattr(graph.name)}>"]
    parts.append("<bundles>")
    for name, code in graph.bundles.items():
        parts.append(f"<bundle name={quoteattr(name)} code={quoteattr(code)} />")
    parts.append("</bundles><nodes>")
    for node_id, address in graph.nodes.items():
        parts.append(f"<node id={quoteattr(node_id)} address={quoteattr(address)} />")
    parts.append("</nodes><deployments>")
    for d in graph.deployments:
        parts.append(
            f"<deployment name={quoteattr(d.name)} bundle={quoteattr(d.bundle)} "
            f"target={quoteattr(d.target)} />"
        )
    parts.append("</deployments><connections>")
    for c in graph.connections:
        parts.append(
            "<connection>"
            f"<source deployment={quoteattr(c.source_deployment)} channel={quoteattr(c.source_channel)} />"
            f"<destination deployment={quoteattr(c.destination_deployment)} "
            f"channel={quoteattr(c.destination_channel)} />"
            "</connection>"
        )
    parts.append("</connections></DDD>")
    return "".join(parts)


# ---------------------------------------------------------------------------
# Compilation


@dataclass
class WireJob:
    guid: str
    connection: DDDConnection
    datums: dict = field(default_factory=dict)


@dataclass
class Plan:
    install_lists: dict = field(default_factory=dict)  # node id -> ToDoList
    run_lists: dict = field(default_factory=dict)  # node id -> ToDoList
    wire_jobs: list = field(default_factory=list)


def compile_plan(ddd: DDDGraph) -> Plan:
    """One install list per target node (an INSTALL task per deployment on
    it), one run list per node (StoreGuids filled after installation), and
    one wire job per connection carrying the wiring data items."""
    plan = Plan()
    for d in ddd.deployments:
        install = plan.install_lists.setdefault(d.target, ToDoList())
        install.tasks.append(
            Task(new_guid(), INSTALL, {"PayloadRef": ddd.bundles[d.bundle], "Deployment": d.name})
        )
        run = plan.run_lists.setdefault(d.target, ToDoList())
        run.tasks.append(Task(new_guid(), RUN, {"StoreGuid": "", "Deployment": d.name}))
    for c in ddd.connections:
        src = ddd.deployment(c.source_deployment)
        dst = ddd.deployment(c.destination_deployment)
        plan.wire_jobs.append(
            WireJob(
                guid=new_guid(),
                connection=c,
                datums={
                    "SourceEnd": f"{c.source_deployment}/{c.source_channel}",
                    "DestinationEnd": f"{c.destination_deployment}/{c.destination_channel}",
                    "PamBinding": f"{c.source_deployment}:{c.destination_deployment}",
                    "SourceChannel": c.source_channel,
                    "DestinationChannel": c.destination_channel,
                    "PrimaryIP": ddd.nodes[src.target],
                    "SecondaryIP": ddd.nodes[dst.target],
                },
            )
        )
    return plan
