// Connection/controller core: owns the socket, the layer model and the
// toggle state. Framework-free and transport-injected so the same code
// runs in the browser (native WebSocket) and under node tests (the `ws`
// client). Reconnects with exponential backoff, replays service toggles,
// and flushes messages queued while offline.

import { GeoCoord } from "./geo.js";
import {
  buildHearsayRequest,
  buildHearsaySubmission,
  buildLocationEvent,
  buildMapRequest,
  buildRadarRequest,
  buildTrailRequest,
  parseServerEvent,
  ServerEvent,
  wireTimestamp,
} from "./events.js";
import { LayerModel } from "./layers.js";

// Handler slots are typed loosely so both the browser WebSocket and the
// node `ws` client satisfy the shape structurally.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: any;
  onmessage: any;
  onclose: any;
  onerror: any;
}

export type SocketFactory = (url: string) => SocketLike;

export type ServiceName = "radar" | "hearsay" | "trails";

export interface PendingHearsay {
  text: string;
  receiverId: string;
  receiverCoord: GeoCoord;
  sentAt: string;
  delivered: boolean;
}

const MAP_TIMEOUT_MS = 5000;
const BACKOFF_START_MS = 250;
const BACKOFF_MAX_MS = 8000;

export class GlossClient {
  layers: LayerModel;
  connected = false;
  toggles: Record<ServiceName, boolean> = { radar: false, hearsay: false, trails: false };
  trailsFilter: string[] = [];
  myCoord: GeoCoord | null = null;
  noMapNotice = false;
  localEcho: PendingHearsay[] = [];
  onUpdate: ((changed: string) => void) | null = null;

  private socket: SocketLike | null = null;
  private queue: string[] = [];
  private backoffMs = BACKOFF_START_MS;
  private mapTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(
    readonly myId: string,
    readonly url: string,
    private readonly socketFactory: SocketFactory,
    private readonly reconnect = true,
  ) {
    this.layers = new LayerModel(myId);
  }

  connect(): void {
    this.closed = false;
    this.openSocket();
  }

  private openSocket(): void {
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.connected = true;
      this.backoffMs = BACKOFF_START_MS;
      this.replayToggles();
      this.flushQueue();
      this.notify("connection");
    };
    socket.onmessage = (ev: { data: unknown }) => {
      const text = typeof ev.data === "string" ? ev.data : String(ev.data);
      this.handleServerText(text.trim());
    };
    socket.onclose = () => {
      this.connected = false;
      this.notify("connection");
      if (!this.closed && this.reconnect) {
        const delay = this.backoffMs;
        this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
        setTimeout(() => {
          if (!this.closed) this.openSocket();
        }, delay);
      }
    };
    socket.onerror = () => {
      // close follows; backoff handles the retry
    };
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.connected = false;
  }

  private notify(changed: string): void {
    this.onUpdate?.(changed);
  }

  // -- inbound

  handleServerText(text: string): ServerEvent | null {
    if (!text) return null;
    let event: ServerEvent;
    try {
      event = parseServerEvent(text);
    } catch (err) {
      console.debug("dropping unparseable frame:", err);
      return null;
    }
    if (event.kind === "mapResponse" && event.target === this.myId && this.mapTimer) {
      clearTimeout(this.mapTimer);
      this.mapTimer = null;
      this.noMapNotice = false;
    }
    if (event.kind === "hearsayDelivery" && event.target === this.myId) {
      for (const pending of this.localEcho) {
        if (!pending.delivered && pending.text === event.message) {
          pending.delivered = true;
          break;
        }
      }
    }
    const changed = this.layers.applyEvent(event);
    if (changed) {
      if (changed === "map" && this.myCoord) {
        this.layers.setSelfPosition(this.myCoord, wireTimestamp());
      }
      this.notify(changed);
    }
    return event;
  }

  // -- outbound

  private rawSend(document: string): boolean {
    if (!this.connected || !this.socket) return false;
    try {
      this.socket.send(document);
      return true;
    } catch {
      return false;
    }
  }

  private sendOrQueue(document: string): void {
    if (!this.rawSend(document)) {
      this.queue.push(document);
    }
  }

  private flushQueue(): void {
    const queued = this.queue;
    this.queue = [];
    for (const document of queued) {
      this.sendOrQueue(document);
    }
  }

  private replayToggles(): void {
    for (const name of Object.keys(this.toggles) as ServiceName[]) {
      if (this.toggles[name]) {
        this.rawSend(this.buildToggle(name, true));
      }
    }
  }

  private buildToggle(name: ServiceName, on: boolean): string {
    if (name === "radar") return buildRadarRequest(this.myId, on);
    if (name === "hearsay") return buildHearsayRequest(this.myId, on);
    return buildTrailRequest(this.myId, on, this.trailsFilter);
  }

  /** Optimistic toggle; reverts when the send fails. Returns the toggle
   * state after the attempt. Disabled while disconnected. */
  toggleService(name: ServiceName, on: boolean): boolean {
    if (!this.connected) {
      return this.toggles[name]; // control disabled offline
    }
    const previous = this.toggles[name];
    this.toggles[name] = on;
    if (!this.rawSend(this.buildToggle(name, on))) {
      this.toggles[name] = previous;
    }
    this.notify("toggles");
    return this.toggles[name];
  }

  requestMap(center: GeoCoord, zoom: number): void {
    this.sendOrQueue(buildMapRequest(this.myId, center, zoom));
    if (this.mapTimer) clearTimeout(this.mapTimer);
    this.mapTimer = setTimeout(() => {
      this.noMapNotice = true; // previous map stays on display
      this.mapTimer = null;
      this.notify("map");
    }, MAP_TIMEOUT_MS);
  }

  panBy(dxPixels: number, dyPixels: number): void {
    const view = this.layers.view;
    if (!view) return;
    const center = {
      x: view.imageWidth / 2 + dxPixels,
      y: view.imageHeight / 2 + dyPixels,
    };
    const clamped = {
      x: Math.min(Math.max(center.x, 0), view.imageWidth),
      y: Math.min(Math.max(center.y, 0), view.imageHeight),
    };
    const tl = view.topLeft;
    const br = view.bottomRight;
    const coord = {
      latitude: tl.latitude - (clamped.y / view.imageHeight) * (tl.latitude - br.latitude),
      longitude: tl.longitude + (clamped.x / view.imageWidth) * (br.longitude - tl.longitude),
    };
    this.requestMap(coord, view.zoom);
  }

  zoomTo(zoom: number): void {
    const view = this.layers.view;
    if (!view) return;
    const center = {
      latitude: (view.topLeft.latitude + view.bottomRight.latitude) / 2,
      longitude: (view.topLeft.longitude + view.bottomRight.longitude) / 2,
    };
    this.requestMap(center, zoom);
  }

  /** Publish my position: sent to the server and drawn as the own-position
   * marker. Used by the simulated walk and manual entry. */
  reportPosition(coord: GeoCoord): void {
    this.myCoord = coord;
    const at = wireTimestamp();
    this.sendOrQueue(buildLocationEvent(this.myId, coord, at));
    this.layers.setSelfPosition(coord, at);
    this.notify("self");
  }

  /** Empty text is blocked client-side; offline submissions queue and
   * flush on reconnect. Returns whether the submission was accepted. */
  submitHearsay(text: string, receiverId: string, receiverCoord: GeoCoord): boolean {
    if (!text.trim()) return false;
    if (!this.myCoord) return false; // caller should prompt for manual entry
    const document = buildHearsaySubmission(
      this.myId, this.myCoord, receiverId, receiverCoord, text,
    );
    this.localEcho.push({
      text,
      receiverId,
      receiverCoord,
      sentAt: wireTimestamp(),
      delivered: false,
    });
    this.sendOrQueue(document);
    this.notify("hearsay");
    return true;
  }

  get queuedCount(): number {
    return this.queue.length;
  }
}
