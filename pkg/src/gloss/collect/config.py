"""Collector configuration: devices, their access mode, and sensor mappings.

The file is XML shaped as::

    <SensorConfig>
      <Device name="...">
        <Mode protocol="UDP|HTTP" [ip= port=] [address= pollsPerSec=]>
          <Mapping>
            <Sensor name="..." inputID="S0" inverted="false" />
          </Mapping>
        </Mode>
      </Device>
    </SensorConfig>

UDP devices are recognised by source ip+port; HTTP devices are polled at
``address`` ``pollsPerSec`` times a second. ``inputID`` ends in the input
index the sensor is wired to.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from ..events import NotWellFormed
from .frames import MappedSensor


class ConfigError(Exception):
    pass


@dataclass
class DeviceConfig:
    name: str
    protocol: str  # "UDP" | "HTTP"
    ip: str | None = None
    port: int | None = None
    address: str | None = None
    polls_per_sec: float | None = None
    mapping: list = field(default_factory=list)


@dataclass
class SensorConfig:
    devices: list = field(default_factory=list)

    def udp_devices(self) -> list:
        return [d for d in self.devices if d.protocol == "UDP"]

    def http_devices(self) -> list:
        return [d for d in self.devices if d.protocol == "HTTP"]


_INPUT_ID_RX = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*?(\d+)$")


def _parse_sensor(el: ET.Element, device: str) -> MappedSensor:
    name = el.get("name")
    input_id = el.get("inputID")
    inverted = el.get("inverted")
    if name is None:
        raise ConfigError(f"device {device!r}: Sensor requires a name attribute")
    if input_id is None:
        raise ConfigError(f"device {device!r}: sensor {name!r} requires inputID")
    if inverted not in ("true", "false"):
        raise ConfigError(f"device {device!r}: sensor {name!r} inverted must be true|false")
    m = _INPUT_ID_RX.match(input_id)
    if not m:
        raise ConfigError(
            f"device {device!r}: inputID {input_id!r} must be a name ending in the input index"
        )
    return MappedSensor(name=name, input_index=int(m.group(1)), inverted=inverted == "true")


def parse_sensor_config(xml_text: str) -> SensorConfig:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise NotWellFormed(str(exc)) from exc
    if root.tag != "SensorConfig":
        raise ConfigError(f"expected <SensorConfig> root, got <{root.tag}>")
    devices = root.findall("Device")
    if not devices:
        raise ConfigError("SensorConfig requires at least one Device")
    config = SensorConfig()
    for dev_el in devices:
        name = dev_el.get("name")
        if not name:
            raise ConfigError("Device requires a name attribute")
        modes = dev_el.findall("Mode")
        if len(modes) != 1:
            raise ConfigError(f"device {name!r} must have exactly one Mode")
        mode = modes[0]
        protocol = mode.get("protocol")
        if protocol not in ("UDP", "HTTP"):
            raise ConfigError(f"device {name!r}: protocol must be UDP or HTTP")
        mappings = mode.findall("Mapping")
        if len(mappings) != 1:
            raise ConfigError(f"device {name!r} must have exactly one Mapping")
        sensors = mappings[0].findall("Sensor")
        if not sensors:
            raise ConfigError(f"device {name!r}: Mapping requires at least one Sensor")

        device = DeviceConfig(name=name, protocol=protocol)
        if protocol == "UDP":
            ip, port = mode.get("ip"), mode.get("port")
            if not ip or not port:
                raise ConfigError(f"UDP device {name!r} requires ip and port attributes")
            device.ip = ip
            try:
                device.port = int(port)
            except ValueError:
                raise ConfigError(f"device {name!r}: port must be an integer") from None
        else:
            address, pps = mode.get("address"), mode.get("pollsPerSec")
            if not address or not pps:
                raise ConfigError(
                    f"HTTP device {name!r} requires address and pollsPerSec attributes"
                )
            device.address = address
            try:
                device.polls_per_sec = float(pps)
            except ValueError:
                raise ConfigError(f"device {name!r}: pollsPerSec must be numeric") from None
            if device.polls_per_sec <= 0:
                raise ConfigError(f"device {name!r}: pollsPerSec must be positive")

        seen_ids = set()
        for s_el in sensors:
            sensor = _parse_sensor(s_el, name)
            raw_id = s_el.get("inputID")
            if raw_id in seen_ids:
                raise ConfigError(f"device {name!r}: duplicate inputID {raw_id!r}")
            seen_ids.add(raw_id)
            device.mapping.append(sensor)
        indexes = [s.input_index for s in device.mapping]
        if len(set(indexes)) != len(indexes):
            raise ConfigError(f"device {name!r}: input indexes must be unique")
        config.devices.append(device)
    return config


def load_sensor_config(path: str) -> SensorConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_sensor_config(fh.read())
