// Browser entry point: wires the client core to the DOM. The map image
// sits under a canvas that draws the radar/hearsay/trails overlays; the
// control strip toggles services, moves the simulated walk, and submits
// hearsay messages.

import { GlossClient, ServiceName } from "./client.js";
import { GeoCoord } from "./geo.js";

const params = new URLSearchParams(location.search);
const myId = params.get("id") ?? `visitor-${Math.floor(Math.random() * 1000)}@web`;
const wsUrl = params.get("ws") ?? `ws://${location.hostname}:${params.get("wsport") ?? "8301"}`;

const client = new GlossClient(myId, wsUrl, (url) => new WebSocket(url));

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const mapImg = $<HTMLImageElement>("map-image");
const canvas = $<HTMLCanvasElement>("overlay");
const status = $<HTMLElement>("status");
const notice = $<HTMLElement>("notice");
const messages = $<HTMLElement>("messages");

function render(): void {
  status.textContent = client.connected ? `connected as ${myId}` : "disconnected";
  notice.textContent = client.noMapNotice ? "no map for that request" : "";

  const view = client.layers.view;
  if (view) {
    if (mapImg.src !== view.url) mapImg.src = view.url;
    mapImg.width = view.imageWidth;
    mapImg.height = view.imageHeight;
    canvas.width = view.imageWidth;
    canvas.height = view.imageHeight;
  }
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!view || !client.layers.visible.map) return;

  if (client.layers.visible.trails) {
    ctx.strokeStyle = "deepskyblue";
    ctx.lineWidth = 2;
    for (const trail of client.layers.trails) {
      ctx.beginPath();
      trail.points.forEach((p, i) =>
        i === 0 ? ctx.moveTo(p.pixel.x, p.pixel.y) : ctx.lineTo(p.pixel.x, p.pixel.y),
      );
      ctx.stroke();
    }
  }
  if (client.layers.visible.radar) {
    for (const marker of client.layers.markers.values()) {
      drawMarker(ctx, marker.pixel.x, marker.pixel.y, marker.color);
      ctx.fillStyle = "black";
      ctx.fillText(marker.userId, marker.pixel.x + 8, marker.pixel.y - 8);
    }
  }
  if (client.layers.selfMarker) {
    drawMarker(ctx, client.layers.selfMarker.pixel.x, client.layers.selfMarker.pixel.y,
      client.layers.selfMarker.color, true);
  }
  if (client.layers.visible.hearsay) {
    ctx.fillStyle = "rgba(255,255,220,0.9)";
    for (const bubble of client.layers.bubbles) {
      const w = Math.min(180, bubble.text.length * 7 + 16);
      ctx.fillRect(bubble.pixel.x, bubble.pixel.y - 22, w, 18);
      ctx.strokeRect(bubble.pixel.x, bubble.pixel.y - 22, w, 18);
      ctx.fillStyle = "black";
      ctx.fillText(`${bubble.from}: ${bubble.text}`, bubble.pixel.x + 4, bubble.pixel.y - 9);
      ctx.fillStyle = "rgba(255,255,220,0.9)";
    }
  }
}

function drawMarker(ctx: CanvasRenderingContext2D, x: number, y: number,
                    color: string, circled = false): void {
  ctx.fillStyle = color;
  ctx.strokeStyle = "black";
  ctx.beginPath();
  ctx.moveTo(x, y - 10);
  ctx.lineTo(x + 6, y + 6);
  ctx.lineTo(x, y + 2);
  ctx.lineTo(x - 6, y + 6);
  ctx.closePath();
  ctx.fill();
  ctx.stroke();
  if (circled) {
    ctx.beginPath();
    ctx.arc(x, y, 13, 0, Math.PI * 2);
    ctx.stroke();
  }
}

client.onUpdate = (changed) => {
  if (changed === "hearsay") {
    messages.textContent = client.layers.bubbles
      .map((b) => `${b.from}: ${b.text}`)
      .join("\n");
  }
  render();
};

function currentCoord(): GeoCoord {
  return {
    latitude: Number(($("lat") as HTMLInputElement).value),
    longitude: Number(($("lon") as HTMLInputElement).value),
  };
}

for (const name of ["radar", "hearsay", "trails"] as ServiceName[]) {
  const box = $<HTMLInputElement>(`toggle-${name}`);
  box.addEventListener("change", () => {
    const result = client.toggleService(name, box.checked);
    box.checked = result; // reverts visually if the send failed
  });
}

$("request-map").addEventListener("click", () => {
  client.requestMap(currentCoord(), Number(($("zoom") as HTMLInputElement).value));
});
$("report-position").addEventListener("click", () => client.reportPosition(currentCoord()));
$("send-hearsay").addEventListener("click", () => {
  const text = ($("hearsay-text") as HTMLInputElement).value;
  const receiver = ($("hearsay-to") as HTMLInputElement).value;
  if (!client.submitHearsay(text, receiver, currentCoord())) {
    notice.textContent = "hearsay needs text and a known own position";
  }
});

// simulated walk: nudge the reported position by ~25 m per click
const STEP = 0.00022;
const walk = (dlat: number, dlon: number) => () => {
  const latBox = $("lat") as HTMLInputElement;
  const lonBox = $("lon") as HTMLInputElement;
  latBox.value = String(Number(latBox.value) + dlat);
  lonBox.value = String(Number(lonBox.value) + dlon);
  client.reportPosition(currentCoord());
};
$("walk-n").addEventListener("click", walk(STEP, 0));
$("walk-s").addEventListener("click", walk(-STEP, 0));
$("walk-e").addEventListener("click", walk(0, STEP));
$("walk-w").addEventListener("click", walk(0, -STEP));

// pan by clicking the overlay; request a recentred map there
canvas.addEventListener("click", (e) => {
  const rect = canvas.getBoundingClientRect();
  client.panBy(e.clientX - rect.left - canvas.width / 2, e.clientY - rect.top - canvas.height / 2);
});

client.connect();
render();
