/**
 * Readers for the solver's CSV artifacts.
 *
 * Schemas (stage column `t` is 1-based):
 *   atlas.csv:          t, z_index, z_0..z_{n-1}, x, a, prob
 *   trajectory.csv:     t, kind{stat|emp}, z_0..z_{n-1}
 *   exploitability.csv: t, z_index, x, gap
 */

import { readFileSync } from "node:fs";

export class SchemaError extends Error {}

export interface AtlasRow {
  t: number;
  zIndex: number;
  z: number[];
  x: number;
  a: number;
  prob: number;
}

export interface TrajectoryRow {
  t: number;
  kind: "stat" | "emp";
  z: number[];
}

export interface ExploitabilityRow {
  t: number;
  zIndex: number;
  x: number;
  gap: number;
}

function splitLines(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.length > 0)
    .map((line) => line.split(","));
}

function zColumnCount(header: string[]): number {
  return header.filter((c) => /^z_\d+$/.test(c)).length;
}

function expectHeader(got: string[], expected: string[], path: string): void {
  if (got.length !== expected.length || got.some((c, i) => c !== expected[i])) {
    throw new SchemaError(
      `${path}: expected header '${expected.join(",")}', found '${got.join(",")}'`,
    );
  }
}

function zColumns(n: number): string[] {
  return Array.from({ length: n }, (_, i) => `z_${i}`);
}

export function readAtlasCsv(path: string): AtlasRow[] {
  const [header, ...rows] = splitLines(readFileSync(path, "utf8"));
  const n = zColumnCount(header);
  expectHeader(header, ["t", "z_index", ...zColumns(n), "x", "a", "prob"], path);
  return rows.map((r) => ({
    t: Number(r[0]),
    zIndex: Number(r[1]),
    z: r.slice(2, 2 + n).map(Number),
    x: Number(r[2 + n]),
    a: Number(r[3 + n]),
    prob: Number(r[4 + n]),
  }));
}

export function readTrajectoryCsv(path: string): TrajectoryRow[] {
  const [header, ...rows] = splitLines(readFileSync(path, "utf8"));
  const n = zColumnCount(header);
  expectHeader(header, ["t", "kind", ...zColumns(n)], path);
  return rows.map((r) => {
    const kind = r[1];
    if (kind !== "stat" && kind !== "emp") {
      throw new SchemaError(`${path}: unknown trajectory kind '${kind}'`);
    }
    return { t: Number(r[0]), kind, z: r.slice(2).map(Number) };
  });
}

export function readExploitabilityCsv(path: string): ExploitabilityRow[] {
  const [header, ...rows] = splitLines(readFileSync(path, "utf8"));
  expectHeader(header, ["t", "z_index", "x", "gap"], path);
  return rows.map((r) => ({
    t: Number(r[0]),
    zIndex: Number(r[1]),
    x: Number(r[2]),
    gap: Number(r[3]),
  }));
}
