import { existsSync, mkdtempSync, readFileSync, statSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { main } from "../src/cli.js";
import { renderChart } from "../src/svg.js";

const dir = mkdtempSync(join(tmpdir(), "plots-cli-"));

function makeAtlas(name: string, shift = 0): string {
  const lines = ["t,z_index,z_0,z_1,x,a,prob"];
  const m = 10;
  for (let g = 0; g <= m; g++) {
    const z1 = g / m;
    for (const x of [0, 1]) {
      const p = Math.min(1, Math.max(0, (x === 0 ? 0.5 - 0.4 * z1 : 0.9) + shift));
      lines.push(`1,${g},${1 - z1},${z1},${x},0,${1 - p}`);
      lines.push(`1,${g},${1 - z1},${z1},${x},1,${p}`);
    }
  }
  const path = join(dir, name);
  writeFileSync(path, lines.join("\n") + "\n");
  return path;
}

describe("svg rendering", () => {
  it("produces a non-empty well-formed document", () => {
    const svg = renderChart({
      title: "demo",
      xLabel: "x",
      yLabel: "y",
      series: [{ label: "s", points: [{ x: 0, y: 0 }, { x: 1, y: 1 }] }],
    });
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg.endsWith("</svg>")).toBe(true);
    expect(svg).toContain("<polyline");
    expect(svg).toContain("demo");
  });
});

describe("policy command", () => {
  it("renders overlaid curves and leaves inputs untouched", () => {
    const a = makeAtlas("exact.csv");
    const b = makeAtlas("rl.csv", 0.02);
    const before = readFileSync(a);
    const out = join(dir, "policy.svg");
    const code = main([
      "policy", "--atlas", a, "--label", "exact",
      "--atlas", b, "--label", "rl", "--stage", "1", "--out", out,
    ]);
    expect(code).toBe(0);
    expect(statSync(out).size).toBeGreaterThan(500);
    const svg = readFileSync(out, "utf8");
    expect(svg.match(/<polyline/g)?.length).toBe(4); // 2 atlases x 2 types
    expect(svg).toContain("exact, type 0");
    expect(svg).toContain("rl, type 1");
    expect(readFileSync(a)).toEqual(before);
  });

  it("flat policies render flat curves", () => {
    const path = join(dir, "flat.csv");
    const lines = ["t,z_index,z_0,z_1,x,a,prob"];
    for (let g = 0; g <= 4; g++) {
      lines.push(`1,${g},${1 - g / 4},${g / 4},0,0,0.7`);
      lines.push(`1,${g},${1 - g / 4},${g / 4},0,1,0.3`);
    }
    writeFileSync(path, lines.join("\n") + "\n");
    const out = join(dir, "flat.svg");
    expect(main(["policy", "--atlas", path, "--out", out])).toBe(0);
    const ys = [...readFileSync(out, "utf8").matchAll(/<polyline points="([^"]+)"/g)][0][1]
      .split(" ")
      .map((pair) => pair.split(",")[1]);
    expect(new Set(ys).size).toBe(1);
  });
});

describe("trajectory command", () => {
  it("renders stat and emp curves", () => {
    const path = join(dir, "traj.csv");
    const lines = ["t,kind,z_0,z_1"];
    for (let t = 1; t <= 10; t++) {
      const z = 1 - 0.1 ** (t - 1);
      lines.push(`${t},stat,${1 - z},${z}`);
      lines.push(`${t},emp,${1 - z - 0.003},${z + 0.003}`);
    }
    writeFileSync(path, lines.join("\n") + "\n");
    const out = join(dir, "traj.svg");
    expect(main(["trajectory", "--input", path, "--out", out])).toBe(0);
    expect(readFileSync(out, "utf8").match(/<polyline/g)?.length).toBe(2);
  });

  it("renders a single curve for stat-only files", () => {
    const path = join(dir, "stat-only.csv");
    writeFileSync(path, "t,kind,z_0,z_1\n1,stat,1,0\n2,stat,0.5,0.5\n");
    const out = join(dir, "stat-only.svg");
    expect(main(["trajectory", "--input", path, "--out", out])).toBe(0);
    expect(readFileSync(out, "utf8").match(/<polyline/g)?.length).toBe(1);
  });
});

describe("exploitability command", () => {
  it("plots the worst gap per artifact", () => {
    const mk = (name: string, gap: number) => {
      const path = join(dir, name);
      writeFileSync(path, `t,z_index,x,gap\n1,0,0,${gap}\n1,0,1,${gap / 2}\n`);
      return path;
    };
    const out = join(dir, "gaps.svg");
    const code = main([
      "exploitability",
      "--input", mk("e25.csv", 2e-3), "--label", "M=25",
      "--input", mk("e50.csv", 3e-4), "--label", "M=50",
      "--out", out,
    ]);
    expect(code).toBe(0);
    expect(existsSync(out)).toBe(true);
  });
});

describe("check-band command", () => {
  it("passes within the band and fails outside it", () => {
    const a = makeAtlas("band-a.csv");
    const close = makeAtlas("band-b.csv", 0.03);
    const far = makeAtlas("band-c.csv", 0.2);
    expect(main(["check-band", "--atlas", a, "--atlas", close])).toBe(0);
    expect(main(["check-band", "--atlas", a, "--atlas", far])).toBe(1);
    expect(main(["check-band", "--atlas", a, "--atlas", far, "--band", "0.5"])).toBe(0);
  });
});

describe("error handling", () => {
  it("returns 2 on schema mismatch and names the header", () => {
    const path = join(dir, "broken.csv");
    writeFileSync(path, "t,z_index,whoops,x,a,prob\n1,0,0,0,0,1\n");
    expect(main(["policy", "--atlas", path, "--out", join(dir, "x.svg")])).toBe(2);
  });

  it("returns 2 on unknown flags", () => {
    expect(main(["policy", "--frobnicate"])).toBe(2);
  });
});
