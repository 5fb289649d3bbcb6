import { describe, expect, it } from "vitest";

import type { AtlasRow } from "../src/csv.js";
import { maxCurveGap, policyCurve, types } from "../src/curves.js";

function atlasRows(probsByZ: Array<[number, number]>, t = 1): AtlasRow[] {
  // one type, two actions; probsByZ holds [z1, P(action 1)] pairs
  return probsByZ.flatMap(([z1, p], i) => [
    { t, zIndex: i, z: [1 - z1, z1], x: 0, a: 0, prob: 1 - p },
    { t, zIndex: i, z: [1 - z1, z1], x: 0, a: 1, prob: p },
  ]);
}

describe("policyCurve", () => {
  it("extracts the action-1 curve sorted by z", () => {
    const rows = atlasRows([
      [1.0, 0.9],
      [0.0, 0.1],
      [0.5, 0.4],
    ]);
    const curve = policyCurve(rows, 1, 0, 1);
    expect(curve.map((p) => p.z)).toEqual([0, 0.5, 1]);
    expect(curve.map((p) => p.p)).toEqual([0.1, 0.4, 0.9]);
  });

  it("mentions available stages when the stage is missing", () => {
    const rows = atlasRows([[0.5, 0.5]], 3);
    expect(() => policyCurve(rows, 1, 0, 1)).toThrowError(/stages available: 3/);
  });

  it("lists the types present", () => {
    const rows = atlasRows([[0.5, 0.5]]);
    rows.push({ t: 1, zIndex: 0, z: [0.5, 0.5], x: 1, a: 1, prob: 1 });
    expect(types(rows)).toEqual([0, 1]);
  });

  it("a constant policy gives a flat curve", () => {
    const rows = atlasRows([
      [0.0, 0.3],
      [0.5, 0.3],
      [1.0, 0.3],
    ]);
    const curve = policyCurve(rows, 1, 0, 1);
    expect(new Set(curve.map((p) => p.p)).size).toBe(1);
  });
});

describe("maxCurveGap", () => {
  it("measures the worst pointwise deviation", () => {
    const a = policyCurve(atlasRows([[0, 0.1], [1, 0.9]]), 1, 0, 1);
    const b = policyCurve(atlasRows([[0, 0.12], [1, 0.86]]), 1, 0, 1);
    expect(maxCurveGap(a, b)).toBeCloseTo(0.04, 12);
  });

  it("rejects mismatched grids", () => {
    const a = policyCurve(atlasRows([[0, 0.1], [1, 0.9]]), 1, 0, 1);
    const b = policyCurve(atlasRows([[0, 0.1], [0.5, 0.9]]), 1, 0, 1);
    expect(() => maxCurveGap(a, b)).toThrowError(/different grids/);
  });
});
