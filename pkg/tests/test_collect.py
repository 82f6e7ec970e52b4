"""Collection stack tests: codecs, aggregation, transition storage, the
broker service, calendars, GPS sentences, and the collector end to end."""

import random
import socket
import threading
import time
import urllib.request

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

import collect_fixtures as cf
from gloss import collect as cl
from gloss import events as ev

GGA_FIX = "$GPGGA,183159.00,5620.4140,N,00248.4800,W,1,08,0.9,30.0,M,47.0,M,,*4A"


class TestFrameCodec:
    def test_lab_fixture_bytes(self):
        bits = [False] * 22
        bits[0] = True  # Desk_Johnny
        bits[4] = True  # Door_Tim
        assert cl.encode_frame(bits) == bytes([0x01, 0x11, 0x00, 0x00])

    def test_all_zero(self):
        assert cl.encode_frame([False] * 22) == bytes([0x01, 0x00, 0x00, 0x00])

    def test_decode_lab_fixture(self):
        table = cl.decode_frame(bytes([0x01, 0x11, 0x00, 0x00]), cf.LAB_MAPPING)
        active = {name for name, state in table.states.items() if state}
        assert active == {"Desk_Johnny", "Door_Tim"}
        assert len(table.states) == 22

    def test_inverted_sensor(self):
        mapping = [cl.MappedSensor("door", 0, inverted=True)]
        table = cl.decode_frame(cl.encode_frame([True]), mapping)
        assert table.states["door"] is False

    def test_roundtrip_all_counts(self):
        rng = random.Random(42)
        for count in range(1, 51):
            mapping = [cl.MappedSensor(f"s{i}", i) for i in range(count)]
            for _ in range(20):
                bits = [rng.random() < 0.5 for _ in range(count)]
                table = cl.decode_frame(cl.encode_frame(bits), mapping)
                assert [table.states[f"s{i}"] for i in range(count)] == bits

    def test_length_mismatch(self):
        with pytest.raises(cl.LengthMismatch):
            cl.decode_frame(bytes([0x01, 0x00]), cf.LAB_MAPPING)

    def test_bad_version(self):
        with pytest.raises(cl.BadVersion):
            cl.decode_frame(bytes([0x02, 0x00, 0x00, 0x00]), cf.LAB_MAPPING)

    def test_too_many_sensors(self):
        with pytest.raises(Exception):
            cl.encode_frame([False] * 51)


class TestIlonPoll:
    MAPPING = [cl.MappedSensor("WB_Paddy", 8), cl.MappedSensor("Door_Paddy", 11)]

    def test_reading_applied(self):
        table = cl.ilon_poll('<sensors><s name="WB_Paddy" value="1"/></sensors>', self.MAPPING)
        assert table.states["WB_Paddy"] is True
        assert table.states["Door_Paddy"] is False  # absent: raw 0 default

    def test_unmapped_ignored(self):
        doc = '<sensors><s name="WB_Paddy" value="1"/><s name="Mystery" value="1"/></sensors>'
        table = cl.ilon_poll(doc, self.MAPPING)
        assert "Mystery" not in table.states

    def test_missing_names_keep_previous(self):
        first = cl.ilon_poll('<sensors><s name="Door_Paddy" value="1"/></sensors>', self.MAPPING)
        second = cl.ilon_poll('<sensors><s name="WB_Paddy" value="1"/></sensors>', self.MAPPING, first)
        assert second.states["Door_Paddy"] is True

    def test_malformed_raises_and_prev_unharmed(self):
        prev = cl.ilon_poll('<sensors><s name="WB_Paddy" value="1"/></sensors>', self.MAPPING)
        with pytest.raises(ev.NotWellFormed):
            cl.ilon_poll("<sensors><s", self.MAPPING, prev)
        assert prev.states["WB_Paddy"] is True


class TestDiff:
    def _table(self, **states):
        return cl.StateTable(states=dict(states))

    def test_identical_empty(self):
        a = self._table(x=True, y=False)
        assert cl.diff(a, a.copy()) == {}

    def test_single_flip(self):
        a = self._table(x=True, y=False)
        b = self._table(x=True, y=True)
        assert cl.diff(a, b) == {"y": True}

    def test_mismatched_sets(self):
        with pytest.raises(cl.SensorSetMismatch):
            cl.diff(self._table(x=True), self._table(y=True))

    def test_duplicate_frame_no_changes(self):
        frame = cl.encode_frame([True, False, True])
        mapping = [cl.MappedSensor(f"s{i}", i) for i in range(3)]
        first = cl.decode_frame(frame, mapping)
        second = cl.decode_frame(frame, mapping)
        assert cl.diff(first, second) == {}


class TestAggregation:
    @pytest.mark.parametrize(
        "samples,prev,expected",
        [([0, 1, 0, 1], 0, True), ([0, 0], 1, False), ([], 1, True), ([], 0, False)],
    )
    def test_cases(self, samples, prev, expected):
        assert cl.aggregate_second([bool(s) for s in samples], bool(prev)) is expected

    @given(st.lists(st.booleans(), max_size=10), st.booleans())
    def test_equals_or_over_samples(self, samples, prev):
        expected = any(samples) if samples else prev
        assert cl.aggregate_second(samples, prev) == expected


class TestTransitionStore:
    def test_reference_sequence_three_records(self):
        store = cl.TransitionStore()
        results = [store.record("s", t, bool(state)) for t, state in enumerate([0, 0, 1, 1, 0])]
        assert results == [True, False, True, False, True]
        records = store.all_records()
        assert [(r.second, r.state) for r in records] == [(0, False), (2, True), (4, False)]

    def test_baseline_zero_stored(self):
        store = cl.TransitionStore()
        assert store.record("s", 10, False) is True
        assert len(store) == 1

    def test_time_regression(self):
        store = cl.TransitionStore()
        store.record("s", 10, True)
        with pytest.raises(cl.TimeRegression):
            store.record("s", 10, False)
        with pytest.raises(cl.TimeRegression):
            store.record("s", 5, False)

    def test_query_range(self):
        store = cl.TransitionStore()
        for t, state in enumerate([0, 0, 1, 1, 0]):
            store.record("s", t, bool(state))
        hits = store.query(0, 4)
        assert [(r.second, r.state) for r in hits] == [(0, False), (2, True), (4, False)]
        assert store.query(1, 1) == []
        with pytest.raises(cl.BadRange):
            store.query(4, 0)

    def test_query_orders_by_time_then_name(self):
        store = cl.TransitionStore()
        store.record("b", 1, True)
        store.record("a", 1, True)
        hits = store.query(0, 5)
        assert [r.sensor for r in hits] == ["a", "b"]

    def test_log_replay(self, tmp_path):
        path = tmp_path / "transitions.log"
        store = cl.TransitionStore(str(path))
        for t, state in enumerate([0, 0, 1, 1, 0]):
            store.record("s", t, bool(state))
        store.close()
        reopened = cl.TransitionStore(str(path))
        assert reopened.all_records() == store.all_records()
        # transition rule still applies across restart
        assert reopened.record("s", 10, False) is False
        reopened.close()

    @given(st.lists(st.booleans(), min_size=1, max_size=30))
    def test_alternation_and_reconstruction(self, per_second):
        store = cl.TransitionStore()
        for t, state in enumerate(per_second):
            store.record("s", t, state)
        records = store.all_records()
        states = [r.state for r in records]
        assert all(a != b for a, b in zip(states, states[1:]))
        rebuilt = cl.calendar.reconstruct_states(records, 0, len(per_second) - 1)["s"]
        assert rebuilt == per_second


@pytest.fixture
def broker():
    b = cl.Broker()
    b.start()
    yield b
    b.stop()


class TestBroker:
    def test_update_and_ack(self, broker):
        stored = cl.submit_update(broker.url, [("a", 1, True), ("b", 1, False)])
        assert stored == 2
        assert cl.submit_update(broker.url, [("a", 2, True), ("b", 2, False)]) == 0

    def test_query_endpoint(self, broker):
        cl.submit_update(broker.url, [("a", 5, True)])
        with urllib.request.urlopen(broker.url + "/query?from=0&to=10") as resp:
            records = cl.broker.parse_record_list(resp.read().decode())
        assert records == [cl.TransitionRecord("a", 5, True)]

    def test_bad_range_is_400(self, broker):
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(broker.url + "/query?from=9&to=1")
        assert err.value.code == 400

    def test_live_stream(self, broker):
        lines = []
        ready = threading.Event()

        def consume():
            req = urllib.request.urlopen(broker.url + "/live")
            ready.set()
            lines.append(req.readline().decode().strip())

        t = threading.Thread(target=consume, daemon=True)
        t.start()
        assert ready.wait(3)
        time.sleep(0.1)
        cl.submit_update(broker.url, [("live-sensor", 3, True)])
        t.join(timeout=3)
        assert lines and 'name="live-sensor"' in lines[0]


class TestDataPullBuffering:
    def test_outage_buffers_and_flush_preserves_order(self, tmp_path):
        config = cl.parse_sensor_config(cf.lab_config_xml("127.0.0.1", 50999))
        dead_url = "http://127.0.0.1:1"
        pull = cl.DataPull(config, dead_url)
        pull._pending.append([("a", 1, True)])
        pull._pending.append([("a", 2, False)])
        assert pull.flush_pending() is False
        assert pull.pending_batches == 2

        broker = cl.Broker()
        broker.start()
        try:
            pull.broker_url = broker.url
            assert pull.flush_pending() is True
            assert pull.pending_batches == 0
            records = broker.store.query(0, 10)
            assert [(r.second, r.state) for r in records] == [(1, True), (2, False)]
        finally:
            broker.stop()


class TestDataPullIntegration:
    def test_udp_and_http_devices_feed_broker(self, tmp_path):
        broker = cl.Broker()
        broker.start()
        ilon = cl.ILonSimulator([name for _, name in cf.LAB_SENSORS[8:12]],
                                flip_prob=0.4, period_ms=50, seed=7)
        ilon.start()
        config = cl.parse_sensor_config(
            cf.lab_config_xml("127.0.0.1", 0, http_address=ilon.url, polls_per_sec=10)
        )
        pull = cl.DataPull(config, broker.url)
        pull.start()
        sim = None
        try:
            udp_dev = config.udp_devices()[0]
            sim = cl.HCS12Simulator(
                dest=("127.0.0.1", pull.listen_port),
                sensors=8, period_ms=40, flip_prob=0.35,
                bind=(udp_dev.ip, 0), seed=3,
            )
            # the collector dispatches by source ip:port, so fix the mapping
            pull._by_source = {sim.source: pull._devices["lab-hcs12"]}
            sim.start()
            deadline = time.monotonic() + 6
            names = set()
            while time.monotonic() < deadline:
                names = {r.sensor for r in broker.store.all_records()}
                if {"Desk_Johnny", "WB_Paddy"} <= names:
                    break
                time.sleep(0.1)
            assert "Desk_Johnny" in names  # UDP device landed records
            assert "WB_Paddy" in names  # HTTP device landed records
        finally:
            if sim:
                sim.stop()
            pull.stop(flush=False)
            ilon.stop()
            broker.stop()

    def test_unknown_udp_source_discarded(self):
        config = cl.parse_sensor_config(cf.lab_config_xml("127.0.0.1", 51000))
        pull = cl.DataPull(config, "http://127.0.0.1:1")
        pull.start()
        try:
            stranger = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            stranger.sendto(cl.encode_frame([True] * 8), ("127.0.0.1", pull.listen_port))
            stranger.close()
            deadline = time.monotonic() + 2
            while time.monotonic() < deadline and pull.unknown_source_count == 0:
                time.sleep(0.02)
            assert pull.unknown_source_count == 1
        finally:
            pull.stop(flush=False)


class TestCalendar:
    def _store_with_record_at(self, second: int):
        store = cl.TransitionStore()
        store.record("s", second, True)
        return store

    def test_step_with_record(self):
        store = self._store_with_record_at(5)
        model = cl.ReplayModel(store.all_records())
        clock = cl.SensorCalendar(model, start_second=4)
        seen = {"time": [], "event": []}
        clock.observe_time(lambda n: seen["time"].append(n.second))
        clock.observe_events(lambda n: seen["event"].append(n.records))
        notes = cl.calendar_step(clock)
        assert seen["time"] == [5]
        assert len(seen["event"]) == 1
        assert seen["event"][0][0].sensor == "s"
        assert len(notes) == 2

    def test_step_without_record(self):
        model = cl.ReplayModel([])
        clock = cl.SensorCalendar(model, start_second=4)
        notes = cl.calendar_step(clock)
        assert len(notes) == 1 and notes[0].second == 5

    def test_realtime_navigation_rejected(self):
        clock = cl.PlayableCalendar(start_second=0, realtime=True)
        with pytest.raises(cl.NavigationUnavailable):
            cl.calendar_step(clock)
        with pytest.raises(cl.NavigationUnavailable):
            clock.seek(10)

    def test_playable_base_ignores_data(self):
        store = self._store_with_record_at(5)
        clock = cl.PlayableCalendar(start_second=4)
        notes = clock.step(cl.ReplayModel(store.all_records()))
        assert len(notes) == 1  # base calendar never checks for events

    def test_replay_speed_timing(self):
        store = cl.TransitionStore()
        store.record("s", 0, False)
        store.record("s", 6, True)
        started = time.monotonic()
        events = cl.replay(store.all_records(), speed=10)
        elapsed = time.monotonic() - started
        assert events == 2
        assert 0.6 * 0.7 <= elapsed <= 0.6 * 1.5


class TestNmea:
    def test_gga_fixture(self):
        coord = cl.parse_nmea(GGA_FIX)
        assert coord.latitude == pytest.approx(56.340233, abs=1e-6)
        assert coord.longitude == pytest.approx(-2.808000, abs=1e-6)

    def test_corrupted_checksum(self):
        with pytest.raises(cl.BadChecksum):
            cl.parse_nmea(GGA_FIX.replace("*4A", "*4B"))
        with pytest.raises(cl.BadChecksum):
            cl.parse_nmea(GGA_FIX.replace("5620.4140", "5620.4141"))

    def test_rmc_void_fix(self):
        body = "GPRMC,183159.00,V,5620.4140,N,00248.4800,W,0.0,0.0,170803,,"
        sentence = f"${body}*{cl.nmea.nmea_checksum(body):02X}"
        with pytest.raises(cl.VoidFix):
            cl.parse_nmea(sentence)

    def test_rmc_active_fix(self):
        body = "GPRMC,183159.00,A,5620.4140,N,00248.4800,W,0.0,0.0,170803,,"
        sentence = f"${body}*{cl.nmea.nmea_checksum(body):02X}"
        coord = cl.parse_nmea(sentence)
        assert coord.latitude == pytest.approx(56.340233, abs=1e-6)

    def test_unsupported_sentence(self):
        body = "GPGSV,3,1,11,03,03,111,00"
        with pytest.raises(cl.UnsupportedSentence):
            cl.parse_nmea(f"${body}*{cl.nmea.nmea_checksum(body):02X}")

    def test_feed_location_delivers_event(self):
        server = socket.socket()
        server.bind(("127.0.0.1", 0))
        server.listen(1)
        port = server.getsockname()[1]
        received = []

        def accept_one():
            conn, _ = server.accept()
            received.append(conn.makefile("r", encoding="utf-8").readline())
            conn.close()

        t = threading.Thread(target=accept_one, daemon=True)
        t.start()
        coord = cl.parse_nmea(GGA_FIX)
        cl.feed_location(coord, "vangelis@dcs.st-and.ac.uk", ("127.0.0.1", port))
        t.join(timeout=3)
        server.close()
        event = ev.parse_event(received[0].strip())
        assert isinstance(event, ev.LocationEvent)
        assert event.id.email == "vangelis@dcs.st-and.ac.uk"
        assert event.where.latitude == pytest.approx(56.340233, abs=1e-6)

    def test_replay_rate_paces_sends(self):
        lines = [GGA_FIX] * 10
        received = []
        server = socket.socket()
        server.bind(("127.0.0.1", 0))
        server.listen(1)
        port = server.getsockname()[1]

        def accept():
            conn, _ = server.accept()
            reader = conn.makefile("r", encoding="utf-8")
            for chunk in reader:
                received.append(chunk)

        t = threading.Thread(target=accept, daemon=True)
        t.start()
        started = time.monotonic()
        sent = cl.nmea.replay_sentences(lines, "w@x", ("127.0.0.1", port), rate_hz=20)
        elapsed = time.monotonic() - started
        server.close()
        t.join(timeout=2)
        assert sent == 10
        assert len(received) == 10
        # 10 sends at 20 Hz pace out to roughly half a second
        assert 9 / 20 * 0.8 <= elapsed <= 10 / 20 * 3


class TestConfig:
    def test_valid_config(self):
        config = cl.parse_sensor_config(cf.lab_config_xml("10.0.0.5", 9999, "http://x/state.xml"))
        assert len(config.devices) == 2
        udp = config.udp_devices()[0]
        assert (udp.ip, udp.port) == ("10.0.0.5", 9999)
        assert udp.mapping[0] == cl.MappedSensor("Desk_Johnny", 0, False)
        http = config.http_devices()[0]
        assert http.polls_per_sec == 5.0

    def test_udp_missing_ip(self):
        doc = ('<SensorConfig><Device name="d"><Mode protocol="UDP" port="1">'
               '<Mapping><Sensor name="s" inputID="S0" inverted="false"/></Mapping>'
               "</Mode></Device></SensorConfig>")
        with pytest.raises(cl.ConfigError):
            cl.parse_sensor_config(doc)

    def test_http_missing_polls(self):
        doc = ('<SensorConfig><Device name="d"><Mode protocol="HTTP" address="http://x">'
               '<Mapping><Sensor name="s" inputID="S0" inverted="false"/></Mapping>'
               "</Mode></Device></SensorConfig>")
        with pytest.raises(cl.ConfigError):
            cl.parse_sensor_config(doc)

    def test_bad_protocol(self):
        doc = ('<SensorConfig><Device name="d"><Mode protocol="SNMP" ip="1" port="2">'
               '<Mapping><Sensor name="s" inputID="S0" inverted="false"/></Mapping>'
               "</Mode></Device></SensorConfig>")
        with pytest.raises(cl.ConfigError):
            cl.parse_sensor_config(doc)

    def test_duplicate_input_ids(self):
        doc = ('<SensorConfig><Device name="d"><Mode protocol="UDP" ip="1" port="2">'
               '<Mapping><Sensor name="a" inputID="S0" inverted="false"/>'
               '<Sensor name="b" inputID="S0" inverted="true"/></Mapping>'
               "</Mode></Device></SensorConfig>")
        with pytest.raises(cl.ConfigError):
            cl.parse_sensor_config(doc)

    def test_bad_inverted_value(self):
        doc = ('<SensorConfig><Device name="d"><Mode protocol="UDP" ip="1" port="2">'
               '<Mapping><Sensor name="a" inputID="S0" inverted="maybe"/></Mapping>'
               "</Mode></Device></SensorConfig>")
        with pytest.raises(cl.ConfigError):
            cl.parse_sensor_config(doc)
