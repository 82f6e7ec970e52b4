"""Drives deployments through install, run and wire phases.

The engine talks to thin servers over their control protocol. Installer
payloads are resolved from a component catalogue (a directory or an HTTP
base URL) and shipped inside the to-do list, so thin servers need no
catalogue access of their own. Wiring preserves the two-step choreography:
the wirer message goes to the primary (source) node whose connection
manager opens a listener, then the offspring message tells the secondary
node's connection manager to connect.
"""

from __future__ import annotations

import logging
import socket
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from .documents import (
    DDDGraph,
    Plan,
    Task,
    TaskOutcome,
    TaskReport,
    ToDoList,
    WireJob,
    compile_plan,
    new_guid,
    parse_task_report,
    serialize_todo_list,
)

log = logging.getLogger(__name__)

CONTROL_TIMEOUT_S = 15.0

STATE_INITIAL = "initial"
STATE_DEPLOYED = "Deployed"
STATE_RUNNING = "Running"
STATE_WIRED = "Wired"


class NodeUnreachable(Exception):
    pass


class Catalogue:
    """PayloadRef -> bundle document, from a directory or an HTTP base URL."""

    def __init__(self, base: str):
        self.base = str(base)
        self._http = self.base.startswith("http://") or self.base.startswith("https://")

    def fetch(self, ref: str) -> str | None:
        if self._http:
            url = self.base.rstrip("/") + "/" + ref
            try:
                with urllib.request.urlopen(url, timeout=10) as resp:
                    return resp.read().decode("utf-8")
            except OSError:
                return None
        path = Path(self.base) / ref
        try:
            return path.read_text(encoding="utf-8")
        except OSError:
            return None


def _control_request(endpoint: tuple, line: str, timeout: float = CONTROL_TIMEOUT_S) -> str:
    try:
        with socket.create_connection(endpoint, timeout=timeout) as s:
            s.sendall((line + "\n").encode("utf-8"))
            reply = b""
            while not reply.endswith(b"\n"):
                chunk = s.recv(65536)
                if not chunk:
                    break
                reply += chunk
    except OSError as exc:
        raise NodeUnreachable(f"{endpoint[0]}:{endpoint[1]}: {exc}") from exc
    return reply.decode("utf-8").strip()


def _request_report(endpoint: tuple, verb: str, todo: ToDoList) -> TaskReport:
    reply = _control_request(endpoint, f"{verb} {serialize_todo_list(todo)}")
    if not reply.startswith("REPORT "):
        raise NodeUnreachable(f"unexpected reply: {reply[:120]}")
    try:
        return parse_task_report(reply[len("REPORT "):])
    except Exception as exc:  # a broken node must fail the list, not the engine
        raise NodeUnreachable(f"unparseable report: {exc}") from exc


def _all_failed(todo: ToDoList, error: str) -> TaskReport:
    return TaskReport(
        outcomes=[TaskOutcome(t.guid, False, {"Error": error}) for t in todo.tasks]
    )


def execute_install(endpoint: tuple, todo: ToDoList, catalogue: Catalogue) -> TaskReport:
    """Resolve each task's payload from the catalogue and fire the installer.
    An unreachable node fails the whole list."""
    enriched = ToDoList()
    for task in todo.tasks:
        datums = dict(task.datums)
        payload = catalogue.fetch(task.datums.get("PayloadRef", ""))
        if payload is not None:
            datums["Payload"] = payload
        enriched.tasks.append(Task(task.guid, task.type, datums))
    try:
        return _request_report(endpoint, "INSTALL", enriched)
    except NodeUnreachable as exc:
        log.warning("install failed: %s", exc)
        return _all_failed(todo, "NodeUnreachable")


def execute_run(endpoint: tuple, todo: ToDoList) -> TaskReport:
    try:
        return _request_report(endpoint, "RUN", todo)
    except NodeUnreachable as exc:
        log.warning("run failed: %s", exc)
        return _all_failed(todo, "NodeUnreachable")


@dataclass(frozen=True)
class MachineRef:
    deployment: str
    node_id: str
    endpoint: tuple  # thin server control (host, port)
    machine_guid: str
    host: str
    cm_port: int


def parse_connector(text: str) -> tuple[str, str, int]:
    """``machine-guid@host:port`` -> (guid, host, port)."""
    guid, _, hostport = text.partition("@")
    host, _, port = hostport.rpartition(":")
    return guid, host, int(port)


def execute_wire(job: WireJob, source: MachineRef, destination: MachineRef) -> TaskReport:
    """Primary listens, offspring connects; on offspring failure the
    primary listener is torn down."""
    primary = Task(
        new_guid(), "WIRE",
        {**job.datums, "Role": "LISTEN", "Machine": source.machine_guid,
         "Channel": job.connection.source_channel},
    )
    try:
        report_p = _request_report(source.endpoint, "WIRE", ToDoList([primary]))
    except NodeUnreachable:
        return _all_failed(ToDoList([primary]), "NodeUnreachable")
    outcome_p = report_p.outcome_for(primary.guid)
    if outcome_p is None or not outcome_p.success:
        return report_p

    offspring = Task(
        new_guid(), "WIRE",
        {**job.datums, "Role": "CONNECT", "Machine": destination.machine_guid,
         "Channel": job.connection.destination_channel,
         "Host": source.host, "Port": outcome_p.datums.get("Port", "")},
    )
    try:
        report_s = _request_report(destination.endpoint, "WIRE", ToDoList([offspring]))
        outcome_s = report_s.outcome_for(offspring.guid)
    except NodeUnreachable:
        outcome_s = TaskOutcome(offspring.guid, False, {"Error": "NodeUnreachable"})
    if outcome_s is None:
        outcome_s = TaskOutcome(offspring.guid, False, {"Error": "no outcome returned"})
    if not outcome_s.success:
        cancel = Task(
            new_guid(), "WIRE",
            {**job.datums, "Role": "CANCEL", "Machine": source.machine_guid,
             "Channel": job.connection.source_channel},
        )
        try:
            _request_report(source.endpoint, "WIRE", ToDoList([cancel]))
        except NodeUnreachable:
            pass
    return TaskReport(outcomes=[outcome_p, outcome_s])


# ---------------------------------------------------------------------------
# Whole-deployment driver


@dataclass
class DeployResult:
    state: str
    reports: list = field(default_factory=list)  # (phase, key, TaskReport)
    machines: dict = field(default_factory=dict)  # deployment name -> MachineRef

    @property
    def wired(self) -> bool:
        return self.state == STATE_WIRED


class DeploymentRun:
    """Phase-by-phase execution over launched thin servers.

    ``nodes`` maps each descriptor node id to the live (host, control-port)
    endpoint standing in for its declared address.
    """

    def __init__(self, ddd: DDDGraph, catalogue: Catalogue, nodes: dict):
        missing = [n for n in ddd.nodes if n not in nodes]
        if missing:
            raise ValueError(f"no endpoint for nodes {missing}")
        self.ddd = ddd
        self.catalogue = catalogue
        self.nodes = dict(nodes)
        self.plan: Plan = compile_plan(ddd)
        self.state = STATE_INITIAL
        self.reports: list = []
        self.machines: dict[str, MachineRef] = {}
        self._store_guids: dict[str, str] = {}  # deployment -> TSGUID

    def install_phase(self) -> bool:
        ok = True
        for node_id, todo in self.plan.install_lists.items():
            report = execute_install(tuple(self.nodes[node_id]), todo, self.catalogue)
            self.reports.append(("install", node_id, report))
            for task in todo.tasks:
                outcome = report.outcome_for(task.guid)
                if outcome is None or not outcome.success:
                    ok = False
                elif "StoreGuid" in outcome.datums:
                    self._store_guids[task.datums["Deployment"]] = outcome.datums["StoreGuid"]
        if ok:
            self.state = STATE_DEPLOYED
        return ok

    def run_phase(self) -> bool:
        if self.state != STATE_DEPLOYED:
            return False
        ok = True
        for node_id, todo in self.plan.run_lists.items():
            for task in todo.tasks:
                task.datums["StoreGuid"] = self._store_guids.get(
                    task.datums.get("Deployment", ""), ""
                )
            report = execute_run(tuple(self.nodes[node_id]), todo)
            self.reports.append(("run", node_id, report))
            for task in todo.tasks:
                outcome = report.outcome_for(task.guid)
                if outcome is None or not outcome.success:
                    ok = False
                    continue
                try:
                    guid, host, cm_port = parse_connector(outcome.datums["Connector"])
                except (KeyError, ValueError):
                    ok = False
                    continue
                self.machines[task.datums["Deployment"]] = MachineRef(
                    deployment=task.datums["Deployment"],
                    node_id=node_id,
                    endpoint=tuple(self.nodes[node_id]),
                    machine_guid=outcome.datums.get("Machine", guid),
                    host=host,
                    cm_port=cm_port,
                )
        if ok:
            self.state = STATE_RUNNING
        return ok

    def wire_phase(self) -> bool:
        if self.state != STATE_RUNNING:
            return False
        ok = True
        for job in self.plan.wire_jobs:
            source = self.machines.get(job.connection.source_deployment)
            destination = self.machines.get(job.connection.destination_deployment)
            if source is None or destination is None:
                ok = False
                continue
            report = execute_wire(job, source, destination)
            key = f"{job.connection.source_deployment}->{job.connection.destination_deployment}"
            self.reports.append(("wire", key, report))
            if not report.all_succeeded or not report.outcomes:
                ok = False
        if ok:
            self.state = STATE_WIRED
        return ok

    def result(self) -> DeployResult:
        return DeployResult(self.state, list(self.reports), dict(self.machines))


def deploy_all(ddd: DDDGraph, catalogue: Catalogue, nodes: dict) -> DeployResult:
    """Install everywhere, then run, then wire; halts after the first phase
    with any failure. Remote failures surface in the reports, never as
    exceptions."""
    run = DeploymentRun(ddd, catalogue, nodes)
    if run.install_phase() and run.run_phase():
        run.wire_phase()
    return run.result()


# ---------------------------------------------------------------------------
# Channel observation over the control protocol


def channel_write(endpoint: tuple, machine_guid: str, channel: str, text: str) -> None:
    reply = _control_request(endpoint, f"WRITE {machine_guid} {channel} {text}")
    if reply != "OK":
        raise NodeUnreachable(f"WRITE failed: {reply}")


def channel_read(endpoint: tuple, machine_guid: str, channel: str,
                 timeout_ms: int) -> str | None:
    reply = _control_request(
        endpoint, f"READ {machine_guid} {channel} {timeout_ms}",
        timeout=CONTROL_TIMEOUT_S + timeout_ms / 1000.0,
    )
    if reply.startswith("DATA "):
        return reply[len("DATA "):]
    if reply == "TIMEOUT":
        return None
    raise NodeUnreachable(f"READ failed: {reply}")
