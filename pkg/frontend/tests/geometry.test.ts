import { describe, expect, it } from "vitest";

import {
  dragToNormal,
  leftOfDirection,
  normalGridLines,
  normalToDrag,
  pointInPolygon,
  polygonSelfIntersects,
} from "../src/geometry.js";

describe("hemisphere drag mapping", () => {
  it("no drag gives the frontal normal", () => {
    expect(dragToNormal(0, 0, 48)).toEqual([0, 0, 1]);
  });

  it("a drag tilting 60 degrees serializes nz = cos 60 = 0.5", () => {
    // tilt is linear in drag distance: 60/90 of the radius
    const r = 48 * (60 / 90);
    const [nx, ny, nz] = dragToNormal(r, 0, 48);
    expect(nz).toBeCloseTo(0.5, 12);
    expect(nx).toBeCloseTo(Math.sin(Math.PI / 3), 12);
    expect(ny).toBeCloseTo(0, 12);
  });

  it("always produces a unit, camera-facing vector", () => {
    for (const [dx, dy] of [[3, 4], [-20, 11], [100, -200], [0.1, 0]]) {
      const n = dragToNormal(dx, dy, 48);
      expect(Math.hypot(n[0], n[1], n[2])).toBeCloseTo(1, 12);
      expect(n[2]).toBeGreaterThan(0);
    }
  });

  it("round-trips through normalToDrag", () => {
    const n = dragToNormal(17, -23, 48);
    const [dx, dy] = normalToDrag(n, 48);
    const n2 = dragToNormal(dx, dy, 48);
    expect(n2[0]).toBeCloseTo(n[0], 10);
    expect(n2[1]).toBeCloseTo(n[1], 10);
    expect(n2[2]).toBeCloseTo(n[2], 10);
  });
});

describe("normal widget grid", () => {
  it("foreshortening depends on focal length, the normal does not", () => {
    const n: [number, number, number] = [0.3, 0.1, Math.sqrt(1 - 0.09 - 0.01)];
    const short = normalGridLines([100, 80], n, 150, 320, 240);
    const long = normalGridLines([100, 80], n, 600, 320, 240);
    expect(short.length).toBe(long.length);
    // the projected grid differs between focal lengths
    const flat = (lines: [number, number][][]) => lines.flat().flat();
    expect(flat(short)).not.toEqual(flat(long));
  });

  it("frontal grid is square around the anchor", () => {
    const lines = normalGridLines([160, 120], [0, 0, 1], 300, 320, 240, 16, 2);
    for (const line of lines) {
      for (const [x, y] of line) {
        expect(Math.abs(x - 160)).toBeLessThanOrEqual(16.01);
        expect(Math.abs(y - 120)).toBeLessThanOrEqual(16.01);
      }
    }
  });
});

describe("2d helpers", () => {
  it("point in polygon", () => {
    const square: [number, number][] = [[0, 0], [10, 0], [10, 10], [0, 10]];
    expect(pointInPolygon(5, 5, square)).toBe(true);
    expect(pointInPolygon(15, 5, square)).toBe(false);
  });

  it("self intersection", () => {
    expect(polygonSelfIntersects([[0, 0], [10, 10], [10, 0], [0, 10]])).toBe(true);
    expect(polygonSelfIntersects([[0, 0], [10, 0], [10, 10], [0, 10]])).toBe(false);
  });

  it("left of direction is up for an eastward segment", () => {
    expect(leftOfDirection(1, 0)).toEqual([0, -1]);
  });
});
