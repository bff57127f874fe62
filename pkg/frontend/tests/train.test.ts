import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { readImage } from "../src/arrayfile.js";
import { listPairs, loadSplit } from "../src/data.js";
import { predictPrior } from "../src/predict.js";
import { train } from "../src/train.js";

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "train-"));
const dataDir = path.join(tmp, "data");
const modelDir = path.join(tmp, "model");
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

// coarse geometry with the same physical extents as the reference setup
const SMALL_CFG = {
  geometry: { n_views: 90, n_det: 96, det_spacing: 6.25, n_det_virtual: 160 },
  grid: { nx: 64, ny: 64, dx: 5.0, dy: 5.0 },
  noise: { enabled: false },
};

beforeAll(() => {
  const cfgPath = path.join(tmp, "cfg.json");
  fs.writeFileSync(cfgPath, JSON.stringify(SMALL_CFG));
  execFileSync("python3", [
    "-m", "dcrct.cli", "dataset", "--out", dataDir,
    "--n-train", "12", "--n-test", "4", "--config", cfgPath,
  ], { stdio: "inherit" });
});

describe("dataset loading", () => {
  it("finds the generated pairs", () => {
    expect(listPairs(path.join(dataDir, "train"))).toHaveLength(12);
    expect(listPairs(path.join(dataDir, "test"))).toHaveLength(4);
  });

  it("builds normalized tensors", () => {
    const split = loadSplit(path.join(dataDir, "test"));
    expect(split.x.shape).toEqual([4, 64, 64, 1]);
    expect(split.y.shape).toEqual([4, 64, 64, 1]);
    const xs = split.x.dataSync();
    let max = 0;
    for (const v of xs) max = Math.max(max, Math.abs(v));
    expect(max).toBeLessThanOrEqual(1.5); // HU window covers the slice content
    split.x.dispose();
    split.y.dispose();
  });
});

describe("training and inference", () => {
  it("beats the zero-artifact baseline by at least 50% held-out MSE", async () => {
    const result = await train({
      dataDir, outDir: modelDir, epochs: 120, batchSize: 4,
      learningRate: 3e-3, baseChannels: 16, seed: 0,
      log: (line) => console.log(line),
    });
    expect(result.epochLosses.length).toBe(120);
    expect(result.heldOutMse).toBeLessThan(0.5 * result.zeroBaselineMse);
  });

  it("writes a prior the Python package accepts for dcr", async () => {
    const wcePath = path.join(dataDir, "test", "wce_0000.json");
    const priorPath = path.join(tmp, "prior_0000.json");
    await predictPrior(modelDir, wcePath, priorPath);
    const prior = readImage(priorPath);
    expect(prior.shape).toEqual([64, 64]);
    expect(prior.extra.model_sha256).toMatch(/^[0-9a-f]{64}$/);

    // the prior must be closer to the reference than the network input was
    const script = `
import sys
import numpy as np
from dcrct.io import load_image
prior = load_image(sys.argv[1])
wce = load_image(sys.argv[2])
ref = load_image(sys.argv[3])
rp = float(np.sqrt(((prior.values - ref.values) ** 2).mean()))
rw = float(np.sqrt(((wce.values - ref.values) ** 2).mean()))
print(f"{rp:.3f} {rw:.3f} {int(rp < rw)}")
`;
    const refPath = path.join(dataDir, "test", "reference_0000.json");
    const out = execFileSync("python3", ["-c", script, priorPath, wcePath, refPath])
      .toString().trim();
    console.log(`prior vs wce RMSE: ${out}`);
    expect(out.endsWith("1")).toBe(true);
  });
});
