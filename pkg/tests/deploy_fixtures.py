"""Deployment fixtures: the reference descriptor document, the two-task
install list, bundle payloads, and a thin-server subprocess harness."""

from __future__ import annotations

import subprocess
import sys
import time

FIG_DDD = """\
<DDD name="gloss infrastructure">
  <bundles>
    <bundle name="MatchingEngine" code="MatchingEngine.xml" />
    <bundle name="HearsayCachingServer" code="CachingBundle.xml" />
  </bundles>
  <nodes>
    <node id="ols machine" address="129.127.8.34"/>
    <node id="andrews machine" address="129.127.8.23"/>
    <node id="grahams machine" address="129.127.8.35"/>
  </nodes>
  <deployments>
    <deployment name="St_Andrews_Hearsay_Engine" bundle="MatchingEngine" target="ols machine"/>
    <deployment name="St_Andrews_Hearsay_Infrastructure" bundle="HearsayCachingServer" target="andrews machine"/>
    <deployment name="Fife_Hearsay_Cache" bundle="HearsayCachingServer" target="grahams machine"/>
  </deployments>
  <connections>
    <connection>
      <source deployment="St_Andrews_Hearsay_Engine" channel="OutGoingMatches"/>
      <destination deployment="St_Andrews_Hearsay_Infrastructure" channel="IncomingMatches"/>
    </connection>
    <connection>
      <source deployment="Fife_Hearsay_Cache" channel="DownstreamCache"/>
      <destination deployment="St_Andrews_Hearsay_Infrastructure" channel="UpstreamCache"/>
    </connection>
  </connections>
</DDD>"""

TWO_TASK_INSTALL = """\
<ToDoList>
  <Task guid="urn:gloss:aEcncdeEe" type="INSTALL">
    <datum id="PayloadRef">urn:gloss:a222jdjd2s</datum>
  </Task>
  <Task guid="urn:gloss:aBcbcdebe" type="INSTALL">
    <datum id="PayloadRef">urn:gloss:b333jdjd2s</datum>
  </Task>
</ToDoList>"""

MATCHING_ENGINE_BUNDLE = '<assembly name="matching-engine"><export channel="OutGoingMatches" /></assembly>'

CACHING_BUNDLE = (
    '<assembly name="caching-server">'
    '<export channel="IncomingMatches" />'
    '<export channel="UpstreamCache" />'
    '<export channel="DownstreamCache" />'
    "</assembly>"
)

MULTI_CHANNEL_BUNDLE = (
    '<assembly name="multi">'
    + "".join(f'<export channel="chan{i}" />' for i in range(6))
    + "</assembly>"
)


def write_catalogue(path, include=("MatchingEngine.xml", "CachingBundle.xml", "MultiChannel.xml")) -> str:
    payloads = {
        "MatchingEngine.xml": MATCHING_ENGINE_BUNDLE,
        "CachingBundle.xml": CACHING_BUNDLE,
        "MultiChannel.xml": MULTI_CHANNEL_BUNDLE,
        "urn:gloss:a222jdjd2s": MATCHING_ENGINE_BUNDLE,
    }
    for name in include:
        (path / name).write_text(payloads[name], encoding="utf-8")
    return str(path)


class ThinServerProcess:
    """Spawns ``python -m gloss.deploy.thinserver`` and tracks its ports."""

    def __init__(self):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "gloss.deploy.thinserver", "--port", "0", "--cm-port", "0"],
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
        )
        line = self.proc.stdout.readline().strip()
        if not line.startswith("LISTENING "):
            raise RuntimeError(f"thin server failed to start: {line!r}")
        _, control, cm = line.split()
        self.control = ("127.0.0.1", int(control))
        self.cm_port = int(cm)

    def stop(self):
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait(timeout=5)


def spawn_nodes(count: int) -> list:
    servers = [ThinServerProcess() for _ in range(count)]
    time.sleep(0.05)
    return servers
