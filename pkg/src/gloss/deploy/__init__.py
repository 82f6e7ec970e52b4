"""Deployment engine: descriptor documents, plan compilation, thin servers,
and the install/run/wire choreography."""

from .documents import (  # noqa: F401
    DanglingReference,
    DDDConnection,
    DDDGraph,
    Deployment,
    Plan,
    Task,
    TaskOutcome,
    TaskReport,
    ToDoList,
    WireJob,
    compile_plan,
    new_guid,
    parse_ddd,
    parse_task_report,
    parse_todo_list,
    serialize_ddd,
    serialize_task_report,
    serialize_todo_list,
)
from .engine import (  # noqa: F401
    Catalogue,
    DeployResult,
    NodeUnreachable,
    channel_read,
    channel_write,
    deploy_all,
    execute_install,
    execute_run,
    execute_wire,
)
from .thinserver import ThinServer  # noqa: F401
