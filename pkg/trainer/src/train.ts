/** Batch training with RMSprop and early stopping on validation loss. */

import type { Dataset, TrainExample } from "./dataset.js";
import { CHUNK_FRAMES } from "./dataset.js";
import {
  Gradients,
  ModelParams,
  RmsProp,
  cloneModel,
  initModel,
  lossAndGradients,
  scaleGradients,
  zeroGradients,
  forward,
} from "./lstm.js";
import { Rng } from "./rng.js";

export interface TrainConfig {
  hidden: number;
  batchSize: number;
  epochs: number;
  learningRate: number;
  patience: number;
  validationFraction: number;
  seed: number;
}

export const DEFAULT_TRAIN: TrainConfig = {
  hidden: 1024,
  batchSize: 128,
  epochs: 50,
  learningRate: 1e-3,
  patience: 5,
  validationFraction: 0.1,
  seed: 1,
};

export interface EpochLog {
  epoch: number;
  trainLoss: number;
  valLoss: number | null;
}

export interface TrainResult {
  model: ModelParams;
  log: EpochLog[];
  stoppedEpoch: number;
  config: TrainConfig;
}

export function exampleLoss(model: ModelParams, example: TrainExample): number {
  const { mask } = forward(model, example.features, CHUNK_FRAMES);
  let loss = 0.0;
  for (let i = 0; i < mask.length; i++) {
    const r = mask[i] * example.weight[i] - example.target[i] * example.weight[i];
    loss += r * r;
  }
  return loss;
}

export function meanLoss(model: ModelParams, examples: TrainExample[]): number {
  if (!examples.length) return NaN;
  let total = 0.0;
  for (const example of examples) total += exampleLoss(model, example);
  return total / examples.length;
}

/** Split by utterance so validation chunks never share a recording with
 * training chunks. */
export function splitByUtterance(dataset: Dataset, fraction: number,
                                 rng: Rng): { train: TrainExample[]; val: TrainExample[] } {
  const utterances = [...new Set(dataset.examples.map((e) => e.utterance))];
  if (utterances.length < 2 || fraction <= 0) {
    return { train: dataset.examples, val: [] };
  }
  rng.shuffle(utterances);
  const numVal = Math.max(1, Math.round(fraction * utterances.length));
  const valSet = new Set(utterances.slice(0, numVal));
  return {
    train: dataset.examples.filter((e) => !valSet.has(e.utterance)),
    val: dataset.examples.filter((e) => valSet.has(e.utterance)),
  };
}

export function train(dataset: Dataset, config: Partial<TrainConfig> = {}): TrainResult {
  const cfg: TrainConfig = { ...DEFAULT_TRAIN, ...config };
  if (!dataset.examples.length) {
    throw new Error("empty dataset");
  }
  const rng = new Rng(cfg.seed);
  const model = initModel(cfg.hidden, dataset.freqBins, rng);
  const optimizer = new RmsProp(cfg.learningRate);
  const { train: trainSet, val: valSet } = splitByUtterance(
    dataset, cfg.validationFraction, rng);

  const log: EpochLog[] = [];
  let best = cloneModel(model);
  let bestVal = Infinity;
  let sinceBest = 0;
  let stoppedEpoch = cfg.epochs;

  const order = trainSet.map((_, i) => i);
  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    rng.shuffle(order);
    let epochLoss = 0.0;
    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const batch = order.slice(start, start + cfg.batchSize);
      const grads: Gradients = zeroGradients(model);
      let batchLoss = 0.0;
      for (const idx of batch) {
        const ex = trainSet[idx];
        batchLoss += lossAndGradients(model, ex.features, CHUNK_FRAMES,
                                      ex.weight, mulArrays(ex.target, ex.weight), grads);
      }
      scaleGradients(grads, 1.0 / batch.length);
      optimizer.update(model, grads);
      epochLoss += batchLoss;
      if (!Number.isFinite(batchLoss)) {
        throw new Error(`training diverged (non-finite loss at epoch ${epoch})`);
      }
    }
    const trainLoss = epochLoss / trainSet.length;
    const valLoss = valSet.length ? meanLoss(model, valSet) : null;
    log.push({ epoch, trainLoss, valLoss });

    if (valLoss !== null) {
      if (valLoss < bestVal - 1e-12) {
        bestVal = valLoss;
        best = cloneModel(model);
        sinceBest = 0;
      } else {
        sinceBest += 1;
        if (sinceBest >= cfg.patience) {
          stoppedEpoch = epoch;
          break;
        }
      }
    } else {
      best = cloneModel(model);
    }
  }
  return {
    model: valSet.length ? best : model,
    log,
    stoppedEpoch,
    config: cfg,
  };
}

function mulArrays(a: Float64Array, b: Float64Array): Float64Array {
  const out = new Float64Array(a.length);
  for (let i = 0; i < a.length; i++) out[i] = a[i] * b[i];
  return out;
}
