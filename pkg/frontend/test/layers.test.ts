// Layer model behavior: dispatch, marker math, view replacement.

import { describe, expect, it } from "vitest";

import { parseServerEvent } from "../src/events.js";
import { toPixel } from "../src/geo.js";
import { LayerModel, OTHER_COLOR, SELF_COLOR } from "../src/layers.js";

const ME = "viewer@web";
const CITY_VIEW = {
  url: "http://maps/city.jpg",
  imageWidth: 600,
  imageHeight: 600,
  topLeft: { latitude: 56.3701, longitude: -2.842174 },
  bottomRight: { latitude: 56.316349, longitude: -2.744143 },
  zoom: 5,
};
const INSIDE = { latitude: 56.340232849121094, longitude: -2.808 };

function mapResponseFor(target: string): string {
  return (
    `<mapResponse><ID><email>${target}</email></ID><image>` +
    `<url>${CITY_VIEW.url}</url><imageWidth>600</imageWidth><imageHeight>600</imageHeight>` +
    `<corners><topLeft><latitude>56.3701</latitude><longitude>-2.842174</longitude></topLeft>` +
    `<bottomRight><latitude>56.316349</latitude><longitude>-2.744143</longitude></bottomRight></corners>` +
    `<ratio><widthRatio>1</widthRatio><heightRatio>1</heightRatio></ratio><zoom>5</zoom>` +
    `</image></mapResponse>`
  );
}

function radarResponseFor(target: string, subject: string, lat: number, lon: number): string {
  return (
    `<radarResponse><ID><email>${target}</email></ID>` +
    `<locationEvent><ID><email>${subject}</email></ID><processingSequence />` +
    `<observation><timeOfObservation>2003-08-17T12:00:00:000</timeOfObservation>` +
    `<where><physicalLocation><coordinate><latLongCoordinate>` +
    `<latitude>${lat}</latitude><longitude>${lon}</longitude>` +
    `</latLongCoordinate></coordinate></physicalLocation></where></observation></locationEvent>` +
    `</radarResponse>`
  );
}

function withMap(): LayerModel {
  const layers = new LayerModel(ME);
  layers.applyEvent(parseServerEvent(mapResponseFor(ME)));
  return layers;
}

describe("dispatch", () => {
  it("map response replaces the view", () => {
    const layers = withMap();
    expect(layers.view?.url).toBe(CITY_VIEW.url);
    expect(layers.view?.imageWidth).toBe(600);
  });

  it("radar response upserts a yellow marker at the projected pixel", () => {
    const layers = withMap();
    const changed = layers.applyEvent(
      parseServerEvent(radarResponseFor(ME, "al@x", INSIDE.latitude, INSIDE.longitude)),
    );
    expect(changed).toBe("radar");
    const marker = layers.markers.get("al@x")!;
    expect(marker.color).toBe(OTHER_COLOR);
    const expected = toPixel(CITY_VIEW, INSIDE);
    expect(marker.pixel.x).toBeCloseTo(expected.x, 9);
    expect(marker.pixel.y).toBeCloseTo(expected.y, 9);
    // the reference projection lands near (209.2, 333.4)
    expect(Math.abs(marker.pixel.x - 209)).toBeLessThanOrEqual(1);
    expect(Math.abs(marker.pixel.y - 333)).toBeLessThanOrEqual(1);
  });

  it("repeated radar responses for one user keep a single marker", () => {
    const layers = withMap();
    layers.applyEvent(parseServerEvent(radarResponseFor(ME, "al@x", 56.34, -2.80)));
    layers.applyEvent(parseServerEvent(radarResponseFor(ME, "al@x", 56.35, -2.81)));
    expect(layers.markers.size).toBe(1);
    expect(layers.markers.get("al@x")!.coord.latitude).toBeCloseTo(56.35, 9);
  });

  it("events targeted at someone else are ignored and counted", () => {
    const layers = withMap();
    const before = layers.ignored;
    const changed = layers.applyEvent(
      parseServerEvent(radarResponseFor("someone@else", "al@x", 56.34, -2.80)),
    );
    expect(changed).toBeNull();
    expect(layers.markers.size).toBe(0);
    expect(layers.ignored).toBe(before + 1);
  });

  it("unknown kinds are ignored, never crash", () => {
    const layers = withMap();
    expect(layers.applyEvent(parseServerEvent("<futureThing />"))).toBeNull();
    expect(layers.ignored).toBeGreaterThan(0);
  });

  it("own position renders green", () => {
    const layers = withMap();
    layers.setSelfPosition(INSIDE, "2003-08-17T12:00:00:000");
    expect(layers.selfMarker?.color).toBe(SELF_COLOR);
  });
});

describe("view replacement", () => {
  it("reprojects markers still visible and drops the rest", () => {
    const layers = withMap();
    layers.applyEvent(parseServerEvent(radarResponseFor(ME, "al@x", 56.317, -2.75)));
    expect(layers.markers.size).toBe(1);
    // a far-away replacement view: the marker's coordinate falls outside
    const far =
      `<mapResponse><ID><email>${ME}</email></ID><image>` +
      `<url>http://maps/elsewhere.jpg</url><imageWidth>400</imageWidth><imageHeight>400</imageHeight>` +
      `<corners><topLeft><latitude>10.0</latitude><longitude>10.0</longitude></topLeft>` +
      `<bottomRight><latitude>9.0</latitude><longitude>11.0</longitude></bottomRight></corners>` +
      `<ratio><widthRatio>1</widthRatio><heightRatio>1</heightRatio></ratio><zoom>5</zoom>` +
      `</image></mapResponse>`;
    layers.applyEvent(parseServerEvent(far));
    expect(layers.markers.size).toBe(0);
  });

  it("clearing the view clears dependent layers", () => {
    const layers = withMap();
    layers.applyEvent(parseServerEvent(radarResponseFor(ME, "al@x", 56.34, -2.80)));
    layers.addBubble("al@x", "hi", INSIDE);
    layers.setView(null);
    expect(layers.markers.size).toBe(0);
    expect(layers.bubbles.length).toBe(0);
    expect(layers.trails.length).toBe(0);
  });
});

describe("hearsay and trails layers", () => {
  it("delivery appends a bubble at the delivery location", () => {
    const layers = withMap();
    const doc =
      `<hearsayDelivery><ID><email>${ME}</email></ID>` +
      `<sender><locationEvent><ID><email>al@x</email></ID><processingSequence />` +
      `<observation><timeOfObservation>2003-08-17T12:00:00:000</timeOfObservation>` +
      `<where><physicalLocation><coordinate><latLongCoordinate>` +
      `<latitude>56.35</latitude><longitude>-2.80</longitude>` +
      `</latLongCoordinate></coordinate></physicalLocation></where></observation></locationEvent></sender>` +
      `<receiver><locationEvent><ID><email>${ME}</email></ID><processingSequence />` +
      `<observation><timeOfObservation>2003-08-17T12:00:01:000</timeOfObservation>` +
      `<where><physicalLocation><coordinate><latLongCoordinate>` +
      `<latitude>${INSIDE.latitude}</latitude><longitude>${INSIDE.longitude}</longitude>` +
      `</latLongCoordinate></coordinate></physicalLocation></where></observation></locationEvent></receiver>` +
      `<hearsayMessage>meet me</hearsayMessage></hearsayDelivery>`;
    const changed = layers.applyEvent(parseServerEvent(doc));
    expect(changed).toBe("hearsay");
    expect(layers.bubbles.length).toBe(1);
    expect(layers.bubbles[0].text).toBe("meet me");
    const expected = toPixel(CITY_VIEW, INSIDE);
    expect(layers.bubbles[0].pixel.x).toBeCloseTo(expected.x, 9);
  });

  it("trails response draws a polyline of projected points", () => {
    const layers = withMap();
    const point = (lat: number, lon: number, s: number) =>
      `<locationEvent><ID><email>al@x</email></ID><processingSequence />` +
      `<observation><timeOfObservation>2003-08-17T12:00:0${s}:000</timeOfObservation>` +
      `<where><physicalLocation><coordinate><latLongCoordinate>` +
      `<latitude>${lat}</latitude><longitude>${lon}</longitude>` +
      `</latLongCoordinate></coordinate></physicalLocation></where></observation></locationEvent>`;
    const doc =
      `<trailsResponse><ID><email>${ME}</email></ID><trail><observedTrail>` +
      point(56.34, -2.80, 1) + point(56.341, -2.801, 2) +
      `</observedTrail></trail></trailsResponse>`;
    const changed = layers.applyEvent(parseServerEvent(doc));
    expect(changed).toBe("trails");
    expect(layers.trails.length).toBe(1);
    expect(layers.trails[0].owner).toBe("al@x");
    expect(layers.trails[0].points.length).toBe(2);
    const expected = toPixel(CITY_VIEW, { latitude: 56.34, longitude: -2.80 });
    expect(layers.trails[0].points[0].pixel.y).toBeCloseTo(expected.y, 9);
  });
});
