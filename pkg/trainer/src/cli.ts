/** Command line: train a mask estimator and export MNW1 weights.
 *
 *   train --noisy DIR --ref DIR --out weights.mnw1
 *         [--hidden 1024] [--batch 128] [--epochs N] [--seed 1]
 *         [--lr 0.001] [--fft 1024] [--hop 512] [--log train_log.json]
 */

import { writeFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { parseArgs } from "node:util";

import { buildDataset } from "./dataset.js";
import { exportWeights } from "./mnw1.js";
import { DEFAULT_TRAIN, train } from "./train.js";

export function runCli(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== "train") {
    process.stderr.write(JSON.stringify({ error: `unknown command '${command ?? ""}' (expected: train)` }) + "\n");
    return 2;
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: rest,
      options: {
        noisy: { type: "string" },
        ref: { type: "string" },
        out: { type: "string" },
        hidden: { type: "string", default: String(DEFAULT_TRAIN.hidden) },
        batch: { type: "string", default: String(DEFAULT_TRAIN.batchSize) },
        epochs: { type: "string", default: String(DEFAULT_TRAIN.epochs) },
        seed: { type: "string", default: String(DEFAULT_TRAIN.seed) },
        lr: { type: "string", default: String(DEFAULT_TRAIN.learningRate) },
        fft: { type: "string", default: "1024" },
        hop: { type: "string", default: "512" },
        log: { type: "string" },
      },
    });
  } catch (err) {
    process.stderr.write(JSON.stringify({ error: String(err) }) + "\n");
    return 2;
  }
  const opts = parsed.values;
  if (!opts.noisy || !opts.ref || !opts.out) {
    process.stderr.write(JSON.stringify({ error: "--noisy, --ref and --out are required" }) + "\n");
    return 2;
  }
  try {
    const dataset = buildDataset(opts.noisy, opts.ref,
                                 { fftSize: Number(opts.fft), hop: Number(opts.hop) });
    const result = train(dataset, {
      hidden: Number(opts.hidden),
      batchSize: Number(opts.batch),
      epochs: Number(opts.epochs),
      seed: Number(opts.seed),
      learningRate: Number(opts.lr),
    });
    exportWeights(opts.out, result.model, dataset.stats);
    const logPayload = {
      config: result.config,
      optimizer: { kind: "rmsprop", lr: result.config.learningRate, rho: 0.9, eps: 1e-8 },
      examples: dataset.examples.length,
      stoppedEpoch: result.stoppedEpoch,
      epochs: result.log.map((e) => ({
        epoch: e.epoch, train_loss: e.trainLoss, val_loss: e.valLoss,
      })),
    };
    const logText = JSON.stringify(logPayload, null, 2) + "\n";
    if (opts.log) {
      writeFileSync(opts.log, logText);
    } else {
      process.stdout.write(logText);
    }
    return 0;
  } catch (err) {
    process.stderr.write(JSON.stringify({ error: err instanceof Error ? err.message : String(err) }) + "\n");
    return 1;
  }
}

if (process.argv[1] && fileURLToPath(import.meta.url) === process.argv[1]) {
  process.exit(runCli(process.argv.slice(2)));
}
