// View containment and geo<->pixel mapping, mirroring the server's linear
// model. Marker positions rendered by the client must agree with the
// server's pixel math to the pixel, which the shared vector file checks.

export interface GeoCoord {
  latitude: number;
  longitude: number;
}

export interface MapView {
  url: string;
  imageWidth: number;
  imageHeight: number;
  topLeft: GeoCoord;
  bottomRight: GeoCoord;
  widthRatio?: number;
  heightRatio?: number;
  zoom: number;
}

export interface PixelPoint {
  x: number;
  y: number;
}

export function contains(view: MapView, c: GeoCoord): boolean {
  return (
    view.bottomRight.latitude <= c.latitude &&
    c.latitude <= view.topLeft.latitude &&
    view.topLeft.longitude <= c.longitude &&
    c.longitude <= view.bottomRight.longitude
  );
}

export function toPixel(view: MapView, c: GeoCoord): PixelPoint {
  if (!contains(view, c)) {
    throw new Error(`(${c.latitude}, ${c.longitude}) outside view ${view.url}`);
  }
  const tl = view.topLeft;
  const br = view.bottomRight;
  return {
    x: ((c.longitude - tl.longitude) / (br.longitude - tl.longitude)) * view.imageWidth,
    y: ((tl.latitude - c.latitude) / (tl.latitude - br.latitude)) * view.imageHeight,
  };
}

export function fromPixel(view: MapView, p: PixelPoint): GeoCoord {
  if (p.x < 0 || p.x > view.imageWidth || p.y < 0 || p.y > view.imageHeight) {
    throw new Error(`(${p.x}, ${p.y}) outside ${view.imageWidth}x${view.imageHeight}`);
  }
  const tl = view.topLeft;
  const br = view.bottomRight;
  return {
    latitude: tl.latitude - (p.y / view.imageHeight) * (tl.latitude - br.latitude),
    longitude: tl.longitude + (p.x / view.imageWidth) * (br.longitude - tl.longitude),
  };
}
