/**
 * Small U-Net that maps a reconstructed slice (1 channel, [-1, 1]) to the
 * truncation artifact in the same normalized units. Three resolution levels,
 * 16 base channels; input sides must be multiples of 4.
 */
import * as crypto from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

export interface ModelMeta {
  inputShape: [number, number];
  baseChannels: number;
  weightsSha256: string;
}

function convBlock(x: tf.SymbolicTensor, filters: number, name: string): tf.SymbolicTensor {
  let y = tf.layers
    .conv2d({ filters, kernelSize: 3, padding: "same", activation: "relu", name: `${name}_a` })
    .apply(x) as tf.SymbolicTensor;
  y = tf.layers
    .conv2d({ filters, kernelSize: 3, padding: "same", activation: "relu", name: `${name}_b` })
    .apply(y) as tf.SymbolicTensor;
  return y;
}

export function buildUNet(height: number, width: number, base = 16): tf.LayersModel {
  if (height % 4 !== 0 || width % 4 !== 0) {
    throw new Error(`input sides must be multiples of 4, got ${height}x${width}`);
  }
  const input = tf.input({ shape: [height, width, 1], name: "slice" });
  const enc1 = convBlock(input, base, "enc1");
  const down1 = tf.layers.maxPooling2d({ poolSize: 2, name: "down1" }).apply(enc1) as tf.SymbolicTensor;
  const enc2 = convBlock(down1, base * 2, "enc2");
  const down2 = tf.layers.maxPooling2d({ poolSize: 2, name: "down2" }).apply(enc2) as tf.SymbolicTensor;
  const mid = convBlock(down2, base * 4, "mid");
  const up2 = tf.layers.upSampling2d({ size: [2, 2], name: "up2" }).apply(mid) as tf.SymbolicTensor;
  const dec2 = convBlock(
    tf.layers.concatenate({ name: "skip2" }).apply([up2, enc2]) as tf.SymbolicTensor,
    base * 2, "dec2");
  const up1 = tf.layers.upSampling2d({ size: [2, 2], name: "up1" }).apply(dec2) as tf.SymbolicTensor;
  const dec1 = convBlock(
    tf.layers.concatenate({ name: "skip1" }).apply([up1, enc1]) as tf.SymbolicTensor,
    base, "dec1");
  const out = tf.layers
    .conv2d({ filters: 1, kernelSize: 1, activation: "linear", name: "artifact" })
    .apply(dec1) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: out, name: "artifact_unet" });
}

/** Persist a model to a directory (model.json + weights.bin + meta.json). */
export async function saveModel(model: tf.LayersModel, dir: string,
                                meta: Omit<ModelMeta, "weightsSha256">): Promise<ModelMeta> {
  fs.mkdirSync(dir, { recursive: true });
  const artifacts = await new Promise<tf.io.ModelArtifacts>((resolve) => {
    void model.save(tf.io.withSaveHandler(async (a) => {
      resolve(a);
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
    }));
  });
  const weights = Buffer.from(artifacts.weightData as ArrayBuffer);
  const sha = crypto.createHash("sha256").update(weights).digest("hex");
  fs.writeFileSync(path.join(dir, "weights.bin"), weights);
  fs.writeFileSync(path.join(dir, "model.json"), JSON.stringify({
    modelTopology: artifacts.modelTopology,
    weightSpecs: artifacts.weightSpecs,
  }));
  const fullMeta: ModelMeta = { ...meta, weightsSha256: sha };
  fs.writeFileSync(path.join(dir, "meta.json"), JSON.stringify(fullMeta, null, 2));
  return fullMeta;
}

export async function loadModel(dir: string): Promise<{ model: tf.LayersModel; meta: ModelMeta }> {
  const spec = JSON.parse(fs.readFileSync(path.join(dir, "model.json"), "utf-8"));
  const weights = fs.readFileSync(path.join(dir, "weights.bin"));
  const meta = JSON.parse(fs.readFileSync(path.join(dir, "meta.json"), "utf-8")) as ModelMeta;
  const model = await tf.loadLayersModel(tf.io.fromMemory({
    modelTopology: spec.modelTopology,
    weightSpecs: spec.weightSpecs,
    weightData: weights.buffer.slice(weights.byteOffset, weights.byteOffset + weights.byteLength),
  }));
  return { model, meta };
}
