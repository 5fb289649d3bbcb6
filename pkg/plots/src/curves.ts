/** Policy-curve extraction and overlap checks on atlas rows. */

import type { AtlasRow } from "./csv.js";

export interface Curve {
  label: string;
  /** sorted by the z coordinate on the horizontal axis */
  points: Array<{ z: number; p: number }>;
}

/**
 * Probability of playing `action` for agents of type `x`, as a function of
 * the mean-field coordinate `zCoord`, at 1-based stage `stage`.
 */
export function policyCurve(
  rows: AtlasRow[],
  stage: number,
  x: number,
  action: number,
  zCoord = 1,
): Array<{ z: number; p: number }> {
  const picked = rows.filter(
    (r) => r.t === stage && r.x === x && r.a === action,
  );
  if (picked.length === 0) {
    const stages = [...new Set(rows.map((r) => r.t))];
    throw new Error(
      `no rows for stage ${stage}, type ${x}, action ${action} ` +
        `(stages available: ${stages.join(", ")})`,
    );
  }
  return picked
    .map((r) => ({ z: r.z[zCoord], p: r.prob }))
    .sort((a, b) => a.z - b.z);
}

export function types(rows: AtlasRow[]): number[] {
  return [...new Set(rows.map((r) => r.x))].sort((a, b) => a - b);
}

/**
 * Largest pointwise deviation between two curves sharing a z-grid.
 * Throws if the grids differ, since that makes the comparison meaningless.
 */
export function maxCurveGap(
  a: Array<{ z: number; p: number }>,
  b: Array<{ z: number; p: number }>,
): number {
  if (a.length !== b.length) {
    throw new Error(`curves have different lengths (${a.length} vs ${b.length})`);
  }
  let worst = 0;
  for (let i = 0; i < a.length; i++) {
    if (Math.abs(a[i].z - b[i].z) > 1e-9) {
      throw new Error(`curves sampled on different grids at index ${i}`);
    }
    worst = Math.max(worst, Math.abs(a[i].p - b[i].p));
  }
  return worst;
}
