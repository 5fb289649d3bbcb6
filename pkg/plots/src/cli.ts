/**
 * Plotting CLI for the solver's CSV artifacts.
 *
 *   plot policy --atlas A.csv [--label exact] [--atlas B.csv --label rl]
 *               [--stage 1] [--action 1] [--z-coord 1] --out policy.svg
 *   plot trajectory --input trajectory.csv [--z-coord 1] --out traj.svg
 *   plot exploitability --input E1.csv --label M=25 [--input E2.csv ...] --out gaps.svg
 *   plot check-band --atlas A.csv --atlas B.csv [--stage 1] [--band 0.05]
 *
 * Inputs are read-only; the only file written is --out.
 */

import { writeFileSync } from "node:fs";

import { readAtlasCsv, readExploitabilityCsv, readTrajectoryCsv, SchemaError } from "./csv.js";
import { maxCurveGap, policyCurve, types } from "./curves.js";
import { renderChart, type Series } from "./svg.js";

interface Options {
  atlases: Array<{ path: string; label: string }>;
  inputs: Array<{ path: string; label: string }>;
  stage: number;
  action: number;
  zCoord: number;
  band: number;
  out?: string;
}

function parseArgs(argv: string[]): { command: string; opts: Options } {
  const [command, ...rest] = argv;
  const opts: Options = {
    atlases: [],
    inputs: [],
    stage: 1,
    action: 1,
    zCoord: 1,
    band: 0.05,
  };
  let pendingLabel: string | null = null;
  for (let i = 0; i < rest.length; i++) {
    const flag = rest[i];
    const need = () => {
      const v = rest[++i];
      if (v === undefined) throw new Error(`missing value for ${flag}`);
      return v;
    };
    switch (flag) {
      case "--atlas":
        opts.atlases.push({ path: need(), label: `atlas ${opts.atlases.length + 1}` });
        pendingLabel = "atlas";
        break;
      case "--input":
        opts.inputs.push({ path: need(), label: `input ${opts.inputs.length + 1}` });
        pendingLabel = "input";
        break;
      case "--label": {
        const v = need();
        const bucket = pendingLabel === "input" ? opts.inputs : opts.atlases;
        if (bucket.length === 0) throw new Error("--label must follow --atlas/--input");
        bucket[bucket.length - 1].label = v;
        break;
      }
      case "--stage":
        opts.stage = Number(need());
        break;
      case "--action":
        opts.action = Number(need());
        break;
      case "--z-coord":
        opts.zCoord = Number(need());
        break;
      case "--band":
        opts.band = Number(need());
        break;
      case "--out":
        opts.out = need();
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!command) throw new Error("missing command");
  return { command, opts };
}

function requireOut(opts: Options): string {
  if (!opts.out) throw new Error("--out is required");
  return opts.out;
}

function cmdPolicy(opts: Options): number {
  if (opts.atlases.length === 0) throw new Error("need at least one --atlas");
  const series: Series[] = [];
  for (const [ai, atlas] of opts.atlases.entries()) {
    const rows = readAtlasCsv(atlas.path);
    for (const x of types(rows)) {
      const curve = policyCurve(rows, opts.stage, x, opts.action, opts.zCoord);
      series.push({
        label: `${atlas.label}, type ${x}`,
        points: curve.map((p) => ({ x: p.z, y: p.p })),
        dashed: ai > 0,
      });
    }
  }
  const svg = renderChart({
    title: `P(action ${opts.action}) at stage ${opts.stage}`,
    xLabel: `mean-field coordinate z(${opts.zCoord})`,
    yLabel: `probability of action ${opts.action}`,
    yDomain: [0, 1],
    series,
  });
  writeFileSync(requireOut(opts), svg);
  console.log(`wrote ${opts.out} (${series.length} curves)`);
  return 0;
}

function cmdTrajectory(opts: Options): number {
  if (opts.inputs.length !== 1) throw new Error("need exactly one --input");
  const rows = readTrajectoryCsv(opts.inputs[0].path);
  const series: Series[] = [];
  for (const kind of ["stat", "emp"] as const) {
    const pts = rows
      .filter((r) => r.kind === kind)
      .sort((a, b) => a.t - b.t)
      .map((r) => ({ x: r.t, y: r.z[opts.zCoord] }));
    if (pts.length > 0) {
      series.push({
        label: kind === "stat" ? "statistical flow" : "empirical population",
        points: pts,
        dashed: kind === "emp",
      });
    }
  }
  if (series.length === 0) throw new Error("trajectory file has no rows");
  const svg = renderChart({
    title: "Mean-field trajectory",
    xLabel: "stage",
    yLabel: `z(${opts.zCoord})`,
    series,
  });
  writeFileSync(requireOut(opts), svg);
  console.log(`wrote ${opts.out} (${series.length} curves)`);
  return 0;
}

function cmdExploitability(opts: Options): number {
  if (opts.inputs.length === 0) throw new Error("need at least one --input");
  const points = opts.inputs.map((input, i) => {
    const rows = readExploitabilityCsv(input.path);
    const maxGap = rows.reduce((m, r) => Math.max(m, r.gap), 0);
    return { x: i, y: maxGap, label: input.label };
  });
  const svg = renderChart({
    title: "Worst deviation gap per artifact",
    xLabel: points.map((p) => `${p.x}: ${p.label}`).join("   "),
    yLabel: "max gap",
    series: [{ label: "max gap", points }],
  });
  writeFileSync(requireOut(opts), svg);
  for (const p of points) console.log(`${p.label}: max gap ${p.y}`);
  return 0;
}

function cmdCheckBand(opts: Options): number {
  if (opts.atlases.length !== 2) throw new Error("check-band needs exactly two --atlas");
  const [a, b] = opts.atlases.map((x) => readAtlasCsv(x.path));
  let worst = 0;
  for (const x of types(a)) {
    const gap = maxCurveGap(
      policyCurve(a, opts.stage, x, opts.action, opts.zCoord),
      policyCurve(b, opts.stage, x, opts.action, opts.zCoord),
    );
    console.log(`type ${x}: max |curve gap| = ${gap.toFixed(6)}`);
    worst = Math.max(worst, gap);
  }
  if (worst > opts.band) {
    console.error(`band check FAILED: ${worst.toFixed(6)} > ${opts.band}`);
    return 1;
  }
  console.log(`band check passed: ${worst.toFixed(6)} <= ${opts.band}`);
  return 0;
}

export function main(argv: string[]): number {
  try {
    const { command, opts } = parseArgs(argv);
    switch (command) {
      case "policy":
        return cmdPolicy(opts);
      case "trajectory":
        return cmdTrajectory(opts);
      case "exploitability":
        return cmdExploitability(opts);
      case "check-band":
        return cmdCheckBand(opts);
      default:
        throw new Error(`unknown command ${command}`);
    }
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
