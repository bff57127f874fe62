import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { readImage, writeImage, ImageFile } from "../src/arrayfile.js";
import {
  denormalizeHU, normalizeHU, scaleHUDelta, unscaleHUDelta,
} from "../src/normalize.js";

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "arrayfile-"));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

function sampleImage(): ImageFile {
  const values = new Float32Array(6 * 4);
  for (let i = 0; i < values.length; i++) values[i] = i * 10.5 - 100;
  return {
    kind: "image",
    shape: [6, 4],
    spacing: [2.0, 3.0],
    center: [0, 0],
    unit: "HU",
    values,
    extra: { seed: 7 },
  };
}

describe("array file round trip", () => {
  it("preserves values and metadata bit-exactly", () => {
    const img = sampleImage();
    const p = path.join(tmp, "img.json");
    writeImage(p, img);
    const back = readImage(p);
    expect(Array.from(back.values)).toEqual(Array.from(img.values));
    expect(back.shape).toEqual(img.shape);
    expect(back.spacing).toEqual(img.spacing);
    expect(back.unit).toBe("HU");
    expect(back.extra.seed).toBe(7);
  });

  it("rejects bad magic", () => {
    const p = path.join(tmp, "bad.json");
    writeImage(p, sampleImage());
    const header = JSON.parse(fs.readFileSync(p, "utf-8"));
    header.magic = "NOPE";
    fs.writeFileSync(p, JSON.stringify(header));
    expect(() => readImage(p)).toThrow(/bad magic/);
  });

  it("rejects truncated payloads", () => {
    const p = path.join(tmp, "short.json");
    writeImage(p, sampleImage());
    const raw = path.join(tmp, "short.raw");
    fs.writeFileSync(raw, fs.readFileSync(raw).subarray(0, 10));
    expect(() => readImage(p)).toThrow(/payload/);
  });
});

describe("cross-language compatibility", () => {
  it("reads a file written by the Python package", () => {
    const script = `
from dcrct.core import Image, ImageGrid, Unit
from dcrct.io import save_image
import numpy as np, sys
grid = ImageGrid(nx=5, ny=3, dx=1.0, dy=2.0)
vals = np.arange(15, dtype=float).reshape(3, 5) * 7.25 - 11.0
save_image(sys.argv[1], Image(grid, vals, Unit.HU), seed=3)
`;
    const p = path.join(tmp, "from_py.json");
    execFileSync("python3", ["-c", script, p]);
    const img = readImage(p);
    expect(img.shape).toEqual([3, 5]);
    expect(img.values[6]).toBeCloseTo(6 * 7.25 - 11.0, 4);
    expect(img.extra.seed).toBe(3);
  });

  it("writes a file the Python package reads back", () => {
    const p = path.join(tmp, "to_py.json");
    writeImage(p, sampleImage());
    const script = `
from dcrct.io import load_image
import sys
img = load_image(sys.argv[1])
print(img.grid.nx, img.grid.ny, f"{img.values[2, 3]:.4f}")
`;
    const out = execFileSync("python3", ["-c", script, p]).toString().trim();
    const expected = sampleImage().values[2 * 4 + 3];
    expect(out).toBe(`4 6 ${expected.toFixed(4)}`);
  });
});

describe("normalization", () => {
  it("maps the HU window onto [-1, 1] and back", () => {
    const hu = new Float32Array([-1024, 1024, 3072, 0]);
    const n = normalizeHU(hu);
    expect(Array.from(n)).toEqual([-1, 0, 1, -0.5]);
    expect(Array.from(denormalizeHU(n))).toEqual(Array.from(hu));
  });

  it("scales deltas without an offset", () => {
    const d = new Float32Array([0, 2048, -1024]);
    const s = scaleHUDelta(d);
    expect(Array.from(s)).toEqual([0, 1, -0.5]);
    expect(Array.from(unscaleHUDelta(s))).toEqual(Array.from(d));
  });
});
