/**
 * Loads (wce, artifact) training pairs produced by the Python `dcrct dataset`
 * command: one split directory holds wce_NNNN.json / artifact_NNNN.json /
 * reference_NNNN.json triples plus a manifest at the dataset root.
 */
import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

import { readImage } from "./arrayfile.js";
import { normalizeHU, scaleHUDelta } from "./normalize.js";

export interface SplitTensors {
  /** [n, ny, nx, 1] normalized wce slices */
  x: tf.Tensor4D;
  /** [n, ny, nx, 1] artifact in normalized delta units */
  y: tf.Tensor4D;
  shape: [number, number];
  count: number;
}

export function listPairs(splitDir: string): Array<{ wce: string; artifact: string }> {
  const names = fs.readdirSync(splitDir)
    .filter((n) => /^wce_\d+\.json$/.test(n))
    .sort();
  if (names.length === 0) throw new Error(`no wce_*.json files in ${splitDir}`);
  return names.map((n) => ({
    wce: path.join(splitDir, n),
    artifact: path.join(splitDir, n.replace("wce_", "artifact_")),
  }));
}

export function loadSplit(splitDir: string): SplitTensors {
  const pairs = listPairs(splitDir);
  let shape: [number, number] | null = null;
  const xs: Float32Array[] = [];
  const ys: Float32Array[] = [];
  for (const pair of pairs) {
    const wce = readImage(pair.wce);
    const artifact = readImage(pair.artifact);
    if (shape === null) shape = wce.shape;
    if (wce.shape[0] !== shape[0] || wce.shape[1] !== shape[1]) {
      throw new Error(`inconsistent slice shapes in ${splitDir}`);
    }
    xs.push(normalizeHU(wce.values));
    ys.push(scaleHUDelta(artifact.values));
  }
  const [ny, nx] = shape as [number, number];
  const n = pairs.length;
  const flat = (arrs: Float32Array[]) => {
    const out = new Float32Array(n * ny * nx);
    arrs.forEach((a, i) => out.set(a, i * ny * nx));
    return out;
  };
  return {
    x: tf.tensor4d(flat(xs), [n, ny, nx, 1]),
    y: tf.tensor4d(flat(ys), [n, ny, nx, 1]),
    shape: [ny, nx],
    count: n,
  };
}
