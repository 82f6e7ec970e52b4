// Wire documents: builders for everything the client sends and parsers
// for everything the server delivers. Builder output is byte-identical to
// the server's own serialization of the same values (pinned by the shared
// golden_wire.json fixtures).

import { GeoCoord, MapView } from "./geo.js";
import { child, childrenOf, childText, escapeXml, parseXml, XmlNode } from "./xml.js";

export interface LocationReport {
  id: string;
  observedAt: string; // wire timestamp text
  where: GeoCoord;
}

export type ServerEvent =
  | { kind: "mapResponse"; target: string; view: MapView }
  | { kind: "radarResponse"; target: string; location: LocationReport }
  | { kind: "hearsayDelivery"; target: string; sender: LocationReport; receiver: LocationReport; message: string }
  | { kind: "trailsResponse"; target: string; trail: LocationReport[] }
  | { kind: "locationEvent"; target: null; location: LocationReport }
  | { kind: "other"; target: null; tag: string };

// -- timestamps

export function wireTimestamp(date: Date = new Date()): string {
  const p = (n: number, w: number) => String(n).padStart(w, "0");
  return (
    `${p(date.getFullYear(), 4)}-${p(date.getMonth() + 1, 2)}-${p(date.getDate(), 2)}` +
    `T${p(date.getHours(), 2)}:${p(date.getMinutes(), 2)}:${p(date.getSeconds(), 2)}` +
    `:${p(date.getMilliseconds(), 3)}`
  );
}

// -- builders

function idXml(email: string): string {
  return `<ID><email>${escapeXml(email)}</email></ID>`;
}

function latLongXml(c: GeoCoord): string {
  return `<latitude>${c.latitude}</latitude><longitude>${c.longitude}</longitude>`;
}

export function buildLocationEvent(id: string, where: GeoCoord, observedAt?: string): string {
  const t = observedAt ?? wireTimestamp();
  return (
    `<locationEvent>${idXml(id)}<processingSequence />` +
    `<observation><timeOfObservation>${t}</timeOfObservation>` +
    `<where><physicalLocation><coordinate><latLongCoordinate>` +
    latLongXml(where) +
    `</latLongCoordinate></coordinate></physicalLocation></where>` +
    `</observation></locationEvent>`
  );
}

export function buildRadarRequest(id: string, activate: boolean): string {
  return `<radarRequest>${idXml(id)}<activate>${activate}</activate></radarRequest>`;
}

export function buildHearsayRequest(id: string, activate: boolean): string {
  return `<hearsayRequest>${idXml(id)}<activate>${activate}</activate></hearsayRequest>`;
}

export function buildTrailRequest(id: string, activate: boolean, desiredUsers: string[] = []): string {
  const desired = desiredUsers.length
    ? `<desiredUsers>${desiredUsers.map(idXml).join("")}</desiredUsers>`
    : "";
  return `<trailRequest>${idXml(id)}<activate>${activate}</activate>${desired}</trailRequest>`;
}

export function buildMapRequest(id: string, center: GeoCoord, zoom: number): string {
  return (
    `<mapRequest>${idXml(id)}` +
    `<coordinate><latLongCoordinate>${latLongXml(center)}</latLongCoordinate></coordinate>` +
    `<zoom>${zoom}</zoom></mapRequest>`
  );
}

export function buildHearsaySubmission(
  senderId: string,
  senderWhere: GeoCoord,
  receiverId: string,
  receiverWhere: GeoCoord,
  message: string,
  senderAt?: string,
  receiverAt?: string,
): string {
  return (
    `<hearsaySubmission>` +
    `<sender>${buildLocationEvent(senderId, senderWhere, senderAt)}</sender>` +
    `<receiver>${buildLocationEvent(receiverId, receiverWhere, receiverAt)}</receiver>` +
    `<hearsayMessage>${escapeXml(message)}</hearsayMessage></hearsaySubmission>`
  );
}

// -- parsers

function parseEmail(node: XmlNode, what: string): string {
  const id = child(node, "ID");
  if (!id) throw new Error(`${what}: missing <ID>`);
  return childText(id, "email");
}

function parseLocation(node: XmlNode): LocationReport {
  const observation = child(node, "observation");
  if (!observation) throw new Error("locationEvent: missing <observation>");
  const where = child(observation, "where");
  const physical = where && child(where, "physicalLocation");
  const coordinate = physical && child(physical, "coordinate");
  const latLong = coordinate && child(coordinate, "latLongCoordinate");
  if (!latLong) throw new Error("locationEvent: missing coordinate");
  return {
    id: parseEmail(node, "locationEvent"),
    observedAt: childText(observation, "timeOfObservation"),
    where: {
      latitude: Number(childText(latLong, "latitude")),
      longitude: Number(childText(latLong, "longitude")),
    },
  };
}

function parseCorner(node: XmlNode): GeoCoord {
  return {
    latitude: Number(childText(node, "latitude")),
    longitude: Number(childText(node, "longitude")),
  };
}

function parseMapView(image: XmlNode): MapView {
  const corners = child(image, "corners");
  const tl = corners && child(corners, "topLeft");
  const br = corners && child(corners, "bottomRight");
  if (!tl || !br) throw new Error("mapResponse: missing corners");
  return {
    url: childText(image, "url"),
    imageWidth: Number(childText(image, "imageWidth")),
    imageHeight: Number(childText(image, "imageHeight")),
    topLeft: parseCorner(tl),
    bottomRight: parseCorner(br),
    zoom: Number(childText(image, "zoom")),
  };
}

function parseTrail(root: XmlNode, what: string): LocationReport[] {
  const trail = child(root, "trail");
  const observed = trail && child(trail, "observedTrail");
  if (!observed) throw new Error(`${what}: missing trail`);
  return childrenOf(observed, "locationEvent").map(parseLocation);
}

export function parseServerEvent(text: string): ServerEvent {
  const root = parseXml(text);
  switch (root.tag) {
    case "mapResponse": {
      const image = child(root, "image");
      if (!image) throw new Error("mapResponse: missing <image>");
      return { kind: "mapResponse", target: parseEmail(root, root.tag), view: parseMapView(image) };
    }
    case "radarResponse": {
      const location = child(root, "locationEvent");
      if (!location) throw new Error("radarResponse: missing <locationEvent>");
      return { kind: "radarResponse", target: parseEmail(root, root.tag), location: parseLocation(location) };
    }
    case "hearsayDelivery": {
      const sender = child(root, "sender");
      const receiver = child(root, "receiver");
      const senderLoc = sender && child(sender, "locationEvent");
      const receiverLoc = receiver && child(receiver, "locationEvent");
      if (!senderLoc || !receiverLoc) throw new Error("hearsayDelivery: missing endpoints");
      return {
        kind: "hearsayDelivery",
        target: parseEmail(root, root.tag),
        sender: parseLocation(senderLoc),
        receiver: parseLocation(receiverLoc),
        message: (child(root, "hearsayMessage")?.text ?? ""),
      };
    }
    case "trailsResponse":
      return { kind: "trailsResponse", target: parseEmail(root, root.tag), trail: parseTrail(root, root.tag) };
    case "locationEvent":
      return { kind: "locationEvent", target: null, location: parseLocation(root) };
    default:
      return { kind: "other", target: null, tag: root.tag };
  }
}
