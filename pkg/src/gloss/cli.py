"""Single launcher exposing every subsystem.

Subcommands: serve, thin-server, deploy, sim-hcs12, sim-ilon, datapull,
broker, replay, feed-nmea, match. Exit codes: 0 success, 1 runtime
failure, 2 usage error. ``GLOSS_LOG`` sets the logging level.
"""

from __future__ import annotations

import argparse
import functools
import http.server
import logging
import os
import signal
import sys
import threading
import urllib.request

from . import collect
from . import events as ev
from . import matching
from . import pipeline
from . import services
from .deploy import Catalogue, deploy_all, parse_ddd
from .deploy import thinserver as ts

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


def _endpoint(text: str) -> tuple:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return (host, int(port))


def _wait_for_interrupt(stop_event: threading.Event | None = None):
    done = stop_event or threading.Event()

    def handler(signum, frame):
        done.set()

    previous = signal.signal(signal.SIGINT, handler)
    try:
        signal.signal(signal.SIGTERM, handler)
    except (ValueError, OSError):
        pass
    try:
        while not done.is_set():
            done.wait(0.2)
    except KeyboardInterrupt:
        pass
    finally:
        signal.signal(signal.SIGINT, previous)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gloss",
        description="Location-aware service infrastructure: server, deployment engine, sensor collection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the generic location-service server")
    serve.add_argument("--port", type=int, default=8300, help="TCP port for XML line traffic")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--catalog", required=True, help="map catalog XML file")
    serve.add_argument("--allowlist", help="file of allowed principal emails, one per line")
    serve.add_argument("--ws-port", type=int, help="WebSocket bridge port for browser clients")
    serve.add_argument("--ui-port", type=int, help="HTTP port for static UI assets")
    serve.add_argument("--ui-dir", default="frontend/dist", help="static asset directory")
    serve.set_defaults(func=cmd_serve)

    thin = sub.add_parser("thin-server", help="run a simulated thin server node")
    thin.add_argument("--host", default="127.0.0.1")
    thin.add_argument("--port", type=int, default=0, help="control port (0 = ephemeral)")
    thin.add_argument("--cm-port", type=int, default=0, help="connection manager port")
    thin.set_defaults(func=cmd_thin_server)

    deploy = sub.add_parser("deploy", help="compile a descriptor and drive install/run/wire")
    deploy.add_argument("--ddd", required=True, help="deployment descriptor XML file")
    deploy.add_argument("--catalogue", required=True, help="bundle catalogue directory or HTTP base URL")
    deploy.add_argument(
        "--node", action="append", default=[], metavar="ID=HOST:PORT",
        help="live control endpoint for a descriptor node id (repeatable)",
    )
    deploy.set_defaults(func=cmd_deploy)

    hcs12 = sub.add_parser("sim-hcs12", help="simulate a push-style UDP sensor device")
    hcs12.add_argument("--sensors", type=int, default=8)
    hcs12.add_argument("--period-ms", type=int, default=100)
    hcs12.add_argument("--flip-prob", type=float, default=0.1)
    hcs12.add_argument("--dest", type=_endpoint, required=True, help="collector host:port")
    hcs12.add_argument("--bind", type=_endpoint, default=("127.0.0.1", 0), help="source host:port")
    hcs12.add_argument("--seed", type=int)
    hcs12.set_defaults(func=cmd_sim_hcs12)

    ilon = sub.add_parser("sim-ilon", help="simulate a poll-style HTTP sensor gateway")
    ilon.add_argument("--sensors", type=int, default=8)
    ilon.add_argument("--period-ms", type=int, default=100)
    ilon.add_argument("--flip-prob", type=float, default=0.1)
    ilon.add_argument("--port", type=int, default=0)
    ilon.add_argument("--host", default="127.0.0.1")
    ilon.add_argument("--names", help="comma-separated sensor names (default S0..Sn-1)")
    ilon.add_argument("--seed", type=int)
    ilon.set_defaults(func=cmd_sim_ilon)

    datapull = sub.add_parser("datapull", help="run the sensor collector")
    datapull.add_argument("--config", required=True, help="sensor configuration XML file")
    datapull.add_argument("--broker", required=True, help="broker base URL")
    datapull.add_argument("--port", type=int, default=0, help="UDP listen port")
    datapull.add_argument("--host", default="127.0.0.1")
    datapull.set_defaults(func=cmd_datapull)

    broker = sub.add_parser("broker", help="run the transition store broker")
    broker.add_argument("--port", type=int, default=8380)
    broker.add_argument("--host", default="127.0.0.1")
    broker.add_argument("--log", help="append-only transition log path")
    broker.set_defaults(func=cmd_broker)

    replay = sub.add_parser("replay", help="replay stored transitions through a calendar")
    replay.add_argument("--broker", required=True, help="broker base URL")
    replay.add_argument("--from", dest="from_s", type=int, required=True, metavar="EPOCH-S")
    replay.add_argument("--to", dest="to_s", type=int, required=True, metavar="EPOCH-S")
    replay.add_argument("--speed", type=float, default=1.0)
    replay.set_defaults(func=cmd_replay)

    feed = sub.add_parser("feed-nmea", help="replay GPS sentences to the server as location events")
    feed.add_argument("--file", required=True, help="NMEA sentence file")
    feed.add_argument("--user", required=True, help="user email the fixes belong to")
    feed.add_argument("--server", type=_endpoint, required=True, help="server host:port")
    feed.add_argument("--rate", type=float, default=1.0, help="sentences per second")
    feed.set_defaults(func=cmd_feed_nmea)

    match = sub.add_parser("match", help="run the matching engine over a stream file")
    match.add_argument("--patterns", required=True, help="pattern file, one statement per line")
    match.add_argument("--stream", required=True, help="file of XML documents, one per line ('-' = stdin)")
    match.set_defaults(func=cmd_match)

    return parser


def parse_args(argv) -> argparse.Namespace:
    return build_parser().parse_args(argv)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_serve(args) -> int:
    catalog = services.load_map_catalog(args.catalog)
    allowlist = None
    if args.allowlist:
        with open(args.allowlist, "r", encoding="utf-8") as fh:
            allowlist = {line.strip() for line in fh if line.strip()}
    env = services.make_server_env(catalog, allowlist)
    handle = pipeline.build_assembly(services.build_server_spec(args.port, args.host), env)
    try:
        handle.start()
    except pipeline.PortInUse as exc:
        print(f"PortInUse: {exc}", file=sys.stderr)
        return 1
    bound = handle.component("sock").bound_port
    print(f"serving XML lines on {args.host}:{bound}", flush=True)

    bridge = None
    ui_server = None
    if args.ws_port is not None:
        from .wsbridge import WebSocketBridge

        bridge = WebSocketBridge(handle, env, args.host, args.ws_port)
        bridge.start()
        print(f"websocket bridge on {args.host}:{bridge.port}", flush=True)
    if args.ui_port is not None:
        handler = functools.partial(
            http.server.SimpleHTTPRequestHandler, directory=args.ui_dir
        )
        ui_server = http.server.ThreadingHTTPServer((args.host, args.ui_port), handler)
        threading.Thread(target=ui_server.serve_forever, daemon=True).start()
        print(f"ui assets on http://{args.host}:{ui_server.server_address[1]}/", flush=True)

    _wait_for_interrupt()
    if ui_server:
        ui_server.shutdown()
    if bridge:
        bridge.stop()
    handle.stop()
    return 0


def cmd_thin_server(args) -> int:
    server = ts.ThinServer(args.host, args.port, args.cm_port)
    control, cm = server.start()
    print(f"LISTENING {control} {cm}", flush=True)
    stop = threading.Event()

    def handler(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, handler)
    try:
        signal.signal(signal.SIGTERM, handler)
    except (ValueError, OSError):
        pass
    while not stop.is_set() and not server._closing.is_set():
        stop.wait(0.2)
    server.stop()
    return 0


def cmd_deploy(args) -> int:
    with open(args.ddd, "r", encoding="utf-8") as fh:
        graph = parse_ddd(fh.read())
    nodes = {}
    for item in args.node:
        node_id, _, endpoint = item.rpartition("=")
        if not node_id:
            print(f"bad --node value {item!r}, expected ID=HOST:PORT", file=sys.stderr)
            return 2
        nodes[node_id] = _endpoint(endpoint)
    try:
        result = deploy_all(graph, Catalogue(args.catalogue), nodes)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    for phase, key, report in result.reports:
        for outcome in report.outcomes:
            status = "ok" if outcome.success else f"FAILED {outcome.datums.get('Error', '')}"
            print(f"{phase} {key}: {outcome.guid} {status}")
    print(f"final state: {result.state}")
    return 0 if result.wired else 1


def cmd_sim_hcs12(args) -> int:
    sim = collect.HCS12Simulator(
        dest=args.dest, sensors=args.sensors, period_ms=args.period_ms,
        flip_prob=args.flip_prob, bind=args.bind, seed=args.seed,
    )
    sim.start()
    print(f"hcs12 sim: {args.sensors} sensors from {sim.source[0]}:{sim.source[1]} "
          f"-> {args.dest[0]}:{args.dest[1]}", flush=True)
    _wait_for_interrupt()
    sim.stop()
    return 0


def cmd_sim_ilon(args) -> int:
    names = args.names.split(",") if args.names else [f"S{i}" for i in range(args.sensors)]
    sim = collect.ILonSimulator(
        names, flip_prob=args.flip_prob, host=args.host, port=args.port,
        period_ms=args.period_ms, seed=args.seed,
    )
    sim.start()
    print(f"ilon sim at {sim.url}", flush=True)
    _wait_for_interrupt()
    sim.stop()
    return 0


def cmd_datapull(args) -> int:
    config = collect.config.load_sensor_config(args.config)
    pull = collect.DataPull(config, args.broker, listen_host=args.host, listen_port=args.port)
    pull.start()
    if pull.listen_port:
        print(f"datapull listening on udp {args.host}:{pull.listen_port}", flush=True)
    else:
        print("datapull polling (no UDP devices configured)", flush=True)
    _wait_for_interrupt()
    pull.stop(flush=True)  # buffered acknowledged transitions are not lost
    if pull.pending_batches:
        print(f"warning: {pull.pending_batches} batches still unflushed (broker down)",
              file=sys.stderr)
    return 0


def cmd_broker(args) -> int:
    store = collect.TransitionStore(args.log)
    broker = collect.Broker(store, host=args.host, port=args.port)
    broker.start()
    print(f"broker at {broker.url}", flush=True)
    _wait_for_interrupt()
    broker.stop()
    return 0


def cmd_replay(args) -> int:
    url = f"{args.broker.rstrip('/')}/query?from={args.from_s}&to={args.to_s}"
    with urllib.request.urlopen(url, timeout=10) as resp:
        records = collect.broker.parse_record_list(resp.read().decode("utf-8"))
    if not records:
        print("no records in range")
        return 0

    def show(note):
        for r in note.records:
            print(f"{r.second} {r.sensor} -> {1 if r.state else 0}", flush=True)

    events = collect.replay(
        records, speed=args.speed, on_event=show,
        from_second=args.from_s, to_second=args.to_s,
    )
    print(f"replayed {events} event seconds at {args.speed}x")
    return 0


def cmd_feed_nmea(args) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    try:
        sent = collect.nmea.replay_sentences(lines, args.user, args.server, rate_hz=args.rate)
    except OSError as exc:
        print(f"cannot reach server: {exc}", file=sys.stderr)
        return 1
    print(f"sent {sent} location events")
    return 0


def cmd_match(args) -> int:
    with open(args.patterns, "r", encoding="utf-8") as fh:
        specs = matching.parse_pattern_file(fh.read())
    engine = matching.Engine()
    for spec in specs:
        engine.add_pattern(spec)
    stream = sys.stdin if args.stream == "-" else open(args.stream, "r", encoding="utf-8")
    try:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            try:
                event = ev.parse_event(line)
            except ev.EventError as exc:
                log.warning("skipping unparseable event: %s", exc)
                continue
            for ce in engine.ingest(event):
                constituents = ",".join(ev.event_kind(c) for c in ce.constituents)
                print(f"{ce.detected_at.isoformat()} {ce.name} [{constituents}]")
    finally:
        if stream is not sys.stdin:
            stream.close()
    stats = engine.stats()
    print(f"ingested={stats.ingested} matched={stats.matched} "
          f"pruned={stats.pruned_partials} dropped={stats.dropped_partials}")
    return 0


# ---------------------------------------------------------------------------


def run(args) -> int:
    return args.func(args)


def main(argv=None) -> int:
    level = os.environ.get("GLOSS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = parse_args(argv if argv is not None else sys.argv[1:])
    try:
        return run(args)
    except FileNotFoundError as exc:
        print(f"{exc.filename}: not found", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
