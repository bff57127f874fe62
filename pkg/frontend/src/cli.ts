#!/usr/bin/env node
/** CLI: `train` fits the artifact U-Net, `predict` emits a prior image. */
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { predictPrior } from "./predict.js";
import { DEFAULTS, train } from "./train.js";

export async function main(argv: string[]): Promise<void> {
  await yargs(argv)
    .scriptName("dcrct-prior")
    .command(
      "train",
      "Train the artifact U-Net on a dcrct dataset directory",
      (y) => y
        .option("data", { type: "string", demandOption: true, describe: "dataset root (train/, test/, manifest.json)" })
        .option("out", { type: "string", demandOption: true, describe: "output model directory" })
        .option("epochs", { type: "number", default: DEFAULTS.epochs })
        .option("batch", { type: "number", default: DEFAULTS.batchSize })
        .option("lr", { type: "number", default: DEFAULTS.learningRate })
        .option("base", { type: "number", default: DEFAULTS.baseChannels })
        .option("seed", { type: "number", default: DEFAULTS.seed }),
      async (args) => {
        const result = await train({
          dataDir: args.data, outDir: args.out, epochs: args.epochs,
          batchSize: args.batch, learningRate: args.lr,
          baseChannels: args.base, seed: args.seed,
        });
        console.log(JSON.stringify({
          model: args.out,
          weights_sha256: result.meta.weightsSha256,
          held_out_mse: result.heldOutMse,
          zero_baseline_mse: result.zeroBaselineMse,
        }));
      },
    )
    .command(
      "predict",
      "Subtract the predicted artifact from a WCE image to make a prior",
      (y) => y
        .option("model", { type: "string", demandOption: true })
        .option("in", { type: "string", demandOption: true, describe: "WCE image file" })
        .option("out", { type: "string", demandOption: true, describe: "prior image file" }),
      async (args) => {
        const out = await predictPrior(args.model, args.in, args.out);
        console.log(JSON.stringify({ prior: out }));
      },
    )
    .demandCommand(1)
    .strict()
    .parseAsync();
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js") ||
  process.argv[1]?.endsWith("cli.ts");
if (invokedDirectly) {
  main(hideBin(process.argv)).catch((err) => {
    console.error(err instanceof Error ? err.message : String(err));
    process.exit(1);
  });
}
