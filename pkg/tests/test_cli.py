"""Launcher tests: argument parsing, help surfaces, exit codes, and a few
subcommand round-trips."""

import socket
import threading

import pytest

import collect_fixtures as cf
import deploy_fixtures as df
import golden
from gloss import cli
from gloss import collect as cl
from gloss import events as ev

CATALOG_XML = """\
<mapCatalog>
  <map>
    <url>http://maps.example/city.jpg</url>
    <imageWidth>600</imageWidth>
    <imageHeight>600</imageHeight>
    <corners>
      <topLeft><latitude>56.370100</latitude><longitude>-2.842174</longitude></topLeft>
      <bottomRight><latitude>56.316349</latitude><longitude>-2.744143</longitude></bottomRight>
    </corners>
    <zoom>5</zoom>
  </map>
</mapCatalog>"""


class TestParsing:
    def test_serve_command(self, tmp_path):
        args = cli.parse_args(["serve", "--port", "9000", "--catalog", "maps.xml"])
        assert args.command == "serve"
        assert args.port == 9000 and args.catalog == "maps.xml"

    def test_deploy_command(self):
        args = cli.parse_args(["deploy", "--ddd", "fig.xml", "--catalogue", "./bundles"])
        assert args.command == "deploy"
        assert args.ddd == "fig.xml"

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as err:
            cli.parse_args(["serve", "--bogus"])
        assert err.value.code == 2

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as err:
            cli.parse_args(["serve"])
        assert err.value.code == 2

    @pytest.mark.parametrize(
        "command",
        ["serve", "thin-server", "deploy", "sim-hcs12", "sim-ilon",
         "datapull", "broker", "replay", "feed-nmea", "match"],
    )
    def test_every_subcommand_has_help(self, command, capsys):
        with pytest.raises(SystemExit) as err:
            cli.parse_args([command, "--help"])
        assert err.value.code == 0
        out = capsys.readouterr().out
        assert "--help" in out

    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit):
            cli.parse_args(["serve", "--help"])
        out = capsys.readouterr().out
        for flag in ("--port", "--catalog", "--allowlist", "--ws-port"):
            assert flag in out

    def test_endpoint_type(self):
        args = cli.parse_args(["feed-nmea", "--file", "f", "--user", "u@x",
                               "--server", "127.0.0.1:9000"])
        assert args.server == ("127.0.0.1", 9000)
        with pytest.raises(SystemExit):
            cli.parse_args(["feed-nmea", "--file", "f", "--user", "u@x", "--server", "nope"])


class TestServeErrors:
    def test_occupied_port_exits_one(self, tmp_path, capsys):
        catalog = tmp_path / "maps.xml"
        catalog.write_text(CATALOG_XML, encoding="utf-8")
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        try:
            code = cli.main(["serve", "--port", str(port), "--catalog", str(catalog)])
        finally:
            blocker.close()
        assert code == 1
        assert "PortInUse" in capsys.readouterr().err

    def test_missing_catalog_file(self, capsys):
        code = cli.main(["serve", "--catalog", "/no/such/file.xml"])
        assert code == 1


class TestMatchCommand:
    def test_runs_patterns_over_stream(self, tmp_path, capsys):
        patterns = tmp_path / "patterns.epl"
        patterns.write_text(
            'PATTERN seen WHEN locationEvent(id="vangelis@dcs.st-and.ac.uk") EMIT sighting\n',
            encoding="utf-8",
        )
        stream = tmp_path / "stream.xml"
        doc = ev.serialize_event(ev.parse_event(golden.LOCATION_EVENT))
        stream.write_text(doc + "\n" + doc + "\n", encoding="utf-8")
        code = cli.main(["match", "--patterns", str(patterns), "--stream", str(stream)])
        out = capsys.readouterr().out
        assert code == 0
        assert out.count("sighting") == 2
        assert "matched=2" in out


class TestReplayCommand:
    def test_replays_range_from_broker(self, capsys):
        broker = cl.Broker()
        broker.start()
        try:
            cl.submit_update(broker.url, [("door", 100, False)])
            cl.submit_update(broker.url, [("door", 103, True)])
            code = cli.main([
                "replay", "--broker", broker.url,
                "--from", "100", "--to", "103", "--speed", "50",
            ])
        finally:
            broker.stop()
        out = capsys.readouterr().out
        assert code == 0
        assert "door -> 1" in out


class TestFeedNmea:
    def test_sends_events_at_rate(self, tmp_path, capsys):
        sentences = tmp_path / "walk.nmea"
        body = "GPGGA,183159.00,5620.4140,N,00248.4800,W,1,08,0.9,30.0,M,47.0,M,,"
        line = f"${body}*{cl.nmea.nmea_checksum(body):02X}\n"
        sentences.write_text(line * 3, encoding="utf-8")

        received = []
        server = socket.socket()
        server.bind(("127.0.0.1", 0))
        server.listen(1)
        port = server.getsockname()[1]

        def accept():
            conn, _ = server.accept()
            reader = conn.makefile("r", encoding="utf-8")
            for _ in range(3):
                received.append(reader.readline())
            conn.close()

        t = threading.Thread(target=accept, daemon=True)
        t.start()
        code = cli.main(["feed-nmea", "--file", str(sentences), "--user", "walker@test",
                         "--server", f"127.0.0.1:{port}", "--rate", "50"])
        t.join(timeout=5)
        server.close()
        assert code == 0
        assert len(received) == 3
        assert "sent 3 location events" in capsys.readouterr().out

    def test_unreachable_server_nonzero_exit(self, tmp_path, capsys):
        sentences = tmp_path / "walk.nmea"
        sentences.write_text("$GPGGA,junk*00\n", encoding="utf-8")
        code = cli.main(["feed-nmea", "--file", str(sentences), "--user", "w@x",
                         "--server", "127.0.0.1:1"])
        assert code == 1


class TestDeployCommand:
    def test_reference_deploy_prints_wired(self, tmp_path, capsys):
        df.write_catalogue(tmp_path)
        ddd = tmp_path / "infra.xml"
        ddd.write_text(df.FIG_DDD, encoding="utf-8")
        servers = df.spawn_nodes(3)
        try:
            node_args = []
            for node_id, server in zip(
                ["ols machine", "andrews machine", "grahams machine"], servers
            ):
                node_args += ["--node", f"{node_id}={server.control[0]}:{server.control[1]}"]
            code = cli.main(["deploy", "--ddd", str(ddd), "--catalogue", str(tmp_path)]
                            + node_args)
        finally:
            for s in servers:
                s.stop()
        out = capsys.readouterr().out
        assert code == 0
        assert "final state: Wired" in out
