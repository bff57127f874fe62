/** Training loop: fit the artifact U-Net on a dataset directory. */
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

import { initBackend } from "./backend.js";
import { loadSplit } from "./data.js";
import { buildUNet, saveModel, ModelMeta } from "./model.js";

export interface TrainOptions {
  dataDir: string;
  outDir: string;
  epochs: number;
  batchSize: number;
  learningRate: number;
  baseChannels: number;
  seed: number;
  log?: (line: string) => void;
}

export interface TrainResult {
  meta: ModelMeta;
  /** mean squared error of the model on the held-out split (normalized units) */
  heldOutMse: number;
  /** mean squared error of always predicting zero artifact */
  zeroBaselineMse: number;
  epochLosses: number[];
}

export const DEFAULTS = {
  epochs: 150, batchSize: 4, learningRate: 3e-3, baseChannels: 16, seed: 0,
};

export async function train(opts: TrainOptions): Promise<TrainResult> {
  const log = opts.log ?? ((line: string) => console.log(line));
  log(`backend: ${await initBackend()}`);
  const trainSet = loadSplit(path.join(opts.dataDir, "train"));
  const testSet = loadSplit(path.join(opts.dataDir, "test"));
  const [ny, nx] = trainSet.shape;

  // deterministic initialization and shuffling
  Math.random = (() => {
    let state = opts.seed >>> 0 || 1;
    return () => {
      state = (state * 1664525 + 1013904223) >>> 0;
      return state / 2 ** 32;
    };
  })();

  const model = buildUNet(ny, nx, opts.baseChannels);
  model.compile({ optimizer: tf.train.adam(opts.learningRate), loss: "meanSquaredError" });

  const epochLosses: number[] = [];
  await model.fit(trainSet.x, trainSet.y, {
    epochs: opts.epochs,
    batchSize: opts.batchSize,
    shuffle: true,
    verbose: 0,
    callbacks: {
      onEpochEnd: async (epoch, logs) => {
        const loss = logs?.loss as number;
        epochLosses.push(loss);
        if ((epoch + 1) % 5 === 0 || epoch === 0) {
          const val = evaluateMse(model, testSet.x, testSet.y);
          log(`epoch ${epoch + 1}/${opts.epochs}  train ${loss.toExponential(3)}  held-out ${val.toExponential(3)}`);
        }
      },
    },
  });

  const heldOutMse = evaluateMse(model, testSet.x, testSet.y);
  const zeroBaselineMse = tf.tidy(() => testSet.y.square().mean().arraySync() as number);
  log(`held-out MSE ${heldOutMse.toExponential(3)} vs zero baseline ${zeroBaselineMse.toExponential(3)}`);

  const meta = await saveModel(model, opts.outDir, {
    inputShape: [ny, nx],
    baseChannels: opts.baseChannels,
  });
  trainSet.x.dispose(); trainSet.y.dispose();
  testSet.x.dispose(); testSet.y.dispose();
  return { meta, heldOutMse, zeroBaselineMse, epochLosses };
}

export function evaluateMse(model: tf.LayersModel, x: tf.Tensor4D, y: tf.Tensor4D): number {
  return tf.tidy(() => {
    const pred = model.predict(x) as tf.Tensor4D;
    return pred.sub(y).square().mean().arraySync() as number;
  });
}
