/**
 * Inference: subtract the predicted artifact from a WCE reconstruction to
 * produce a prior image the Python package can consume (`dcrct dcr --prior`).
 */
import * as tf from "@tensorflow/tfjs";

import { ImageFile, readImage, writeImage } from "./arrayfile.js";
import { initBackend } from "./backend.js";
import { normalizeHU, unscaleHUDelta } from "./normalize.js";
import { loadModel, ModelMeta } from "./model.js";

export function runModel(model: tf.LayersModel, meta: ModelMeta,
                         wce: ImageFile): Float32Array {
  const [ny, nx] = wce.shape;
  if (ny !== meta.inputShape[0] || nx !== meta.inputShape[1]) {
    throw new Error(
      `model expects ${meta.inputShape[0]}x${meta.inputShape[1]}, image is ${ny}x${nx}`,
    );
  }
  const normalized = tf.tidy(() => {
    const x = tf.tensor4d(normalizeHU(wce.values), [1, ny, nx, 1]);
    const pred = model.predict(x) as tf.Tensor4D;
    return pred.dataSync() as Float32Array;
  });
  return unscaleHUDelta(normalized);
}

export async function predictPrior(modelDir: string, wcePath: string,
                                   outPath: string): Promise<string> {
  await initBackend();
  const { model, meta } = await loadModel(modelDir);
  try {
    const wce = readImage(wcePath);
    const artifactHU = runModel(model, meta, wce);
    const prior = new Float32Array(wce.values.length);
    for (let i = 0; i < prior.length; i++) prior[i] = wce.values[i] - artifactHU[i];
    writeImage(outPath, {
      kind: "image",
      shape: wce.shape,
      spacing: wce.spacing,
      center: wce.center,
      unit: wce.unit,
      values: prior,
      extra: { model_sha256: meta.weightsSha256 },
    });
  } finally {
    model.dispose();
  }
  return outPath;
}
