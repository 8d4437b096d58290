/** Dataset assembly: paired noisy/reference WAV directories to normalized
 * feature chunks with ideal-amplitude-mask targets and magnitude weights. */

import { readdirSync } from "node:fs";
import { join } from "node:path";

import type { FeatureStats } from "./mnw1.js";
import { DEFAULT_STFT, StftConfig, stftMagnitudes } from "./stft.js";
import { readWav } from "./wav.js";

export const CHUNK_FRAMES = 50;
export const DB_EPS = 1e-8;

export interface TrainExample {
  /** normalized dB features, (T, F) row-major with T = CHUNK_FRAMES */
  features: Float64Array;
  /** clamped ideal amplitude mask, (F, T) frequency-major */
  target: Float64Array;
  /** noisy magnitudes |y|, (F, T) frequency-major, weights the loss */
  weight: Float64Array;
  utterance: string;
}

export interface Dataset {
  examples: TrainExample[];
  stats: FeatureStats;
  freqBins: number;
}

interface RawChunk {
  db: Float64Array;      // (T, F)
  target: Float64Array;  // (F, T)
  weight: Float64Array;  // (F, T)
  utterance: string;
}

export function pairedFiles(noisyDir: string, refDir: string): Array<[string, string, string]> {
  const noisy = readdirSync(noisyDir).filter((f) => f.toLowerCase().endsWith(".wav")).sort();
  if (!noisy.length) {
    throw new Error(`no WAV files in ${noisyDir}`);
  }
  const refs = new Set(readdirSync(refDir));
  return noisy.map((name) => {
    if (!refs.has(name)) {
      throw new Error(`no reference for '${name}' in ${refDir}`);
    }
    return [name, join(noisyDir, name), join(refDir, name)];
  });
}

function chunksFromPair(name: string, noisyPath: string, refPath: string,
                        cfg: StftConfig): RawChunk[] {
  const noisy = readWav(noisyPath);
  const ref = readWav(refPath);
  if (ref.channels.length !== 1) {
    throw new Error(`reference '${refPath}' must be mono, got ${ref.channels.length} channels`);
  }
  if (noisy.channels[0].length !== ref.channels[0].length) {
    throw new Error(
      `length mismatch for '${name}': noisy ${noisy.channels[0].length}, `
      + `reference ${ref.channels[0].length}`);
  }
  const refSpec = stftMagnitudes(ref.channels[0], cfg);
  const out: RawChunk[] = [];
  for (let ch = 0; ch < noisy.channels.length; ch++) {
    const noisySpec = stftMagnitudes(noisy.channels[ch], cfg);
    const { freqBins, frames } = noisySpec;
    const numChunks = Math.floor(frames / CHUNK_FRAMES);
    for (let chunk = 0; chunk < numChunks; chunk++) {
      const t0 = chunk * CHUNK_FRAMES;
      const db = new Float64Array(CHUNK_FRAMES * freqBins);
      const target = new Float64Array(freqBins * CHUNK_FRAMES);
      const weight = new Float64Array(freqBins * CHUNK_FRAMES);
      for (let f = 0; f < freqBins; f++) {
        for (let t = 0; t < CHUNK_FRAMES; t++) {
          const y = noisySpec.mags[f * frames + t0 + t];
          const s = refSpec.mags[f * frames + t0 + t];
          db[t * freqBins + f] = 20.0 * Math.log10(y + DB_EPS);
          weight[f * CHUNK_FRAMES + t] = y;
          target[f * CHUNK_FRAMES + t] = y > 0 ? Math.min(s / y, 1.0) : 0.0;
        }
      }
      out.push({ db, target, weight, utterance: name });
    }
  }
  return out;
}

/** Per-frequency mean/std of the dB features over all chunked frames. */
function computeStats(chunks: RawChunk[], freqBins: number): FeatureStats {
  const mean = new Float64Array(freqBins);
  const sq = new Float64Array(freqBins);
  let frames = 0;
  for (const chunk of chunks) {
    for (let t = 0; t < CHUNK_FRAMES; t++) {
      for (let f = 0; f < freqBins; f++) {
        const v = chunk.db[t * freqBins + f];
        mean[f] += v;
        sq[f] += v * v;
      }
    }
    frames += CHUNK_FRAMES;
  }
  const std = new Float64Array(freqBins);
  for (let f = 0; f < freqBins; f++) {
    mean[f] /= frames;
    const variance = Math.max(sq[f] / frames - mean[f] * mean[f], 0.0);
    std[f] = Math.sqrt(variance) + 1e-6; // guard constant bins
  }
  return { mean, std };
}

export function buildDataset(noisyDir: string, refDir: string,
                             cfg: StftConfig = DEFAULT_STFT): Dataset {
  const pairs = pairedFiles(noisyDir, refDir);
  const chunks: RawChunk[] = [];
  for (const [name, noisyPath, refPath] of pairs) {
    chunks.push(...chunksFromPair(name, noisyPath, refPath, cfg));
  }
  if (!chunks.length) {
    throw new Error("no full 50-frame chunks in the training data (utterances too short?)");
  }
  const freqBins = cfg.fftSize / 2 + 1;
  const stats = computeStats(chunks, freqBins);
  const examples = chunks.map((chunk) => {
    const features = new Float64Array(chunk.db.length);
    for (let t = 0; t < CHUNK_FRAMES; t++) {
      for (let f = 0; f < freqBins; f++) {
        features[t * freqBins + f] =
          (chunk.db[t * freqBins + f] - stats.mean[f]) / stats.std[f];
      }
    }
    return { features, target: chunk.target, weight: chunk.weight, utterance: chunk.utterance };
  });
  return { examples, stats, freqBins };
}

/** Normalized features for a whole utterance (inference-style), (T, F). */
export function utteranceFeatures(signal: Float64Array, stats: FeatureStats,
                                  cfg: StftConfig = DEFAULT_STFT): { x: Float64Array; frames: number } {
  const spec = stftMagnitudes(signal, cfg);
  const { freqBins, frames } = spec;
  const x = new Float64Array(frames * freqBins);
  for (let t = 0; t < frames; t++) {
    for (let f = 0; f < freqBins; f++) {
      const db = 20.0 * Math.log10(spec.mags[f * frames + t] + DB_EPS);
      x[t * freqBins + f] = (db - stats.mean[f]) / stats.std[f];
    }
  }
  return { x, frames };
}
