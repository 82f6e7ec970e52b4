// Layer state: what each of the four display layers currently shows.
// Items remember their geographic coordinate; pixel positions are always
// recomputed against the current view, so replacing the map re-projects
// everything still visible and drops what fell outside.

import { contains, GeoCoord, MapView, PixelPoint, toPixel } from "./geo.js";
import { LocationReport, ServerEvent } from "./events.js";

export const SELF_COLOR = "green";
export const OTHER_COLOR = "yellow";

export interface Marker {
  userId: string;
  coord: GeoCoord;
  pixel: PixelPoint;
  color: string;
  observedAt: string;
}

export interface Bubble {
  from: string;
  text: string;
  coord: GeoCoord;
  pixel: PixelPoint;
}

export interface TrailLine {
  owner: string;
  points: { coord: GeoCoord; pixel: PixelPoint }[];
}

export interface LayerVisibility {
  map: boolean;
  radar: boolean;
  hearsay: boolean;
  trails: boolean;
}

export class LayerModel {
  view: MapView | null = null;
  visible: LayerVisibility = { map: true, radar: true, hearsay: true, trails: true };
  markers = new Map<string, Marker>();
  selfMarker: Marker | null = null;
  bubbles: Bubble[] = [];
  trails: TrailLine[] = [];
  ignored = 0;

  constructor(readonly myId: string) {}

  /** Route one server event to its layer; returns what changed. */
  applyEvent(e: ServerEvent): "map" | "radar" | "hearsay" | "trails" | null {
    if (e.kind === "other") {
      this.ignored += 1;
      console.debug(`ignoring unhandled event <${e.tag}>`);
      return null;
    }
    if (e.kind === "locationEvent") {
      return null; // clients do not consume raw reports
    }
    if (e.target !== this.myId) {
      this.ignored += 1;
      console.debug(`ignoring event for ${e.target}`);
      return null;
    }
    switch (e.kind) {
      case "mapResponse":
        this.setView(e.view);
        return "map";
      case "radarResponse":
        this.upsertMarker(e.location, OTHER_COLOR);
        return "radar";
      case "hearsayDelivery":
        this.addBubble(e.sender.id, e.message, e.receiver.where);
        return "hearsay";
      case "trailsResponse":
        this.addTrail(e.trail);
        return "trails";
    }
  }

  setView(view: MapView | null): void {
    this.view = view;
    if (view === null) {
      // no view: nothing can be projected
      this.markers.clear();
      this.selfMarker = null;
      this.bubbles = [];
      this.trails = [];
      return;
    }
    this.reproject();
  }

  private reproject(): void {
    const view = this.view!;
    for (const [userId, marker] of [...this.markers]) {
      if (contains(view, marker.coord)) {
        marker.pixel = toPixel(view, marker.coord);
      } else {
        this.markers.delete(userId);
      }
    }
    if (this.selfMarker) {
      if (contains(view, this.selfMarker.coord)) {
        this.selfMarker.pixel = toPixel(view, this.selfMarker.coord);
      } else {
        this.selfMarker = null;
      }
    }
    this.bubbles = this.bubbles.filter((b) => contains(view, b.coord));
    for (const bubble of this.bubbles) {
      bubble.pixel = toPixel(view, bubble.coord);
    }
    this.trails = this.trails.filter((t) => t.points.some((p) => contains(view, p.coord)));
    for (const trail of this.trails) {
      trail.points = trail.points
        .filter((p) => contains(view, p.coord))
        .map((p) => ({ coord: p.coord, pixel: toPixel(view!, p.coord) }));
    }
  }

  upsertMarker(location: LocationReport, color: string): void {
    if (!this.view || !contains(this.view, location.where)) return;
    this.markers.set(location.id, {
      userId: location.id,
      coord: location.where,
      pixel: toPixel(this.view, location.where),
      color,
      observedAt: location.observedAt,
    });
  }

  setSelfPosition(coord: GeoCoord, observedAt: string): void {
    if (!this.view || !contains(this.view, coord)) {
      this.selfMarker = null;
      return;
    }
    this.selfMarker = {
      userId: this.myId,
      coord,
      pixel: toPixel(this.view, coord),
      color: SELF_COLOR,
      observedAt,
    };
  }

  addBubble(from: string, text: string, at: GeoCoord): void {
    if (!this.view || !contains(this.view, at)) return;
    this.bubbles.push({ from, text, coord: at, pixel: toPixel(this.view, at) });
  }

  addTrail(points: LocationReport[]): void {
    if (!this.view) return;
    const view = this.view;
    const inside = points.filter((p) => contains(view, p.where));
    if (!inside.length) return;
    this.trails.push({
      owner: points[0].id,
      points: inside.map((p) => ({ coord: p.where, pixel: toPixel(view, p.where) })),
    });
  }
}
