import { mkdirSync, mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { CHUNK_FRAMES, buildDataset } from "../src/dataset.js";
import { Rng } from "../src/rng.js";
import { writeWavPcm16 } from "../src/wav.js";

const CFG = { fftSize: 256, hop: 128 };

function noiseSignal(rng: Rng, n: number, scale = 0.3): Float64Array {
  const x = new Float64Array(n);
  for (let i = 0; i < n; i++) x[i] = scale * rng.normal();
  return x;
}

function makeDirs(): { noisy: string; ref: string } {
  const root = mkdtempSync(join(tmpdir(), "ds-"));
  const noisy = join(root, "noisy");
  const ref = join(root, "ref");
  mkdirSync(noisy);
  mkdirSync(ref);
  return { noisy, ref };
}

function samplesForFrames(frames: number): number {
  return (frames - 1) * CFG.hop + CFG.fftSize;
}

describe("buildDataset", () => {
  it("reference == noisy gives all-ones targets", () => {
    const { noisy, ref } = makeDirs();
    const rng = new Rng(31);
    const sig = noiseSignal(rng, samplesForFrames(CHUNK_FRAMES));
    writeWavPcm16(join(noisy, "u.wav"), [sig], 16000);
    writeWavPcm16(join(ref, "u.wav"), [sig], 16000);
    const dataset = buildDataset(noisy, ref, CFG);
    expect(dataset.examples.length).toBe(1);
    for (const v of dataset.examples[0].target) expect(v).toBeCloseTo(1.0, 10);
  });

  it("zero reference gives all-zero targets", () => {
    const { noisy, ref } = makeDirs();
    const rng = new Rng(32);
    const sig = noiseSignal(rng, samplesForFrames(CHUNK_FRAMES));
    writeWavPcm16(join(noisy, "u.wav"), [sig], 16000);
    writeWavPcm16(join(ref, "u.wav"), [new Float64Array(sig.length)], 16000);
    const dataset = buildDataset(noisy, ref, CFG);
    for (const v of dataset.examples[0].target) expect(v).toBe(0.0);
  });

  it("drops the tail frames beyond whole 50-frame chunks", () => {
    const { noisy, ref } = makeDirs();
    const rng = new Rng(33);
    const sig = noiseSignal(rng, samplesForFrames(103));
    writeWavPcm16(join(noisy, "u.wav"), [sig], 16000);
    writeWavPcm16(join(ref, "u.wav"), [sig], 16000);
    const dataset = buildDataset(noisy, ref, CFG);
    expect(dataset.examples.length).toBe(2); // floor(103 / 50)
  });

  it("multichannel noisy files pair every channel with the mono reference", () => {
    const { noisy, ref } = makeDirs();
    const rng = new Rng(34);
    const n = samplesForFrames(CHUNK_FRAMES);
    writeWavPcm16(join(noisy, "u.wav"),
                  [noiseSignal(rng, n), noiseSignal(rng, n), noiseSignal(rng, n)], 16000);
    writeWavPcm16(join(ref, "u.wav"), [noiseSignal(rng, n)], 16000);
    const dataset = buildDataset(noisy, ref, CFG);
    expect(dataset.examples.length).toBe(3);
  });

  it("normalizing the training features with the exported stats gives mean 0, std 1", () => {
    const { noisy, ref } = makeDirs();
    const rng = new Rng(35);
    for (const name of ["a.wav", "b.wav"]) {
      const sig = noiseSignal(rng, samplesForFrames(2 * CHUNK_FRAMES));
      writeWavPcm16(join(noisy, name), [sig], 16000);
      writeWavPcm16(join(ref, name), [noiseSignal(rng, sig.length, 0.1)], 16000);
    }
    const dataset = buildDataset(noisy, ref, CFG);
    const F = dataset.freqBins;
    const mean = new Float64Array(F);
    const sq = new Float64Array(F);
    let frames = 0;
    for (const ex of dataset.examples) {
      for (let t = 0; t < CHUNK_FRAMES; t++) {
        for (let f = 0; f < F; f++) {
          const v = ex.features[t * F + f];
          mean[f] += v;
          sq[f] += v * v;
        }
      }
      frames += CHUNK_FRAMES;
    }
    for (let f = 0; f < F; f++) {
      const mu = mean[f] / frames;
      const sigma = Math.sqrt(Math.max(sq[f] / frames - mu * mu, 0));
      expect(Math.abs(mu)).toBeLessThanOrEqual(1e-6);
      expect(Math.abs(sigma - 1.0)).toBeLessThanOrEqual(1e-6);
    }
  });

  it("rejects unpaired and mismatched files", () => {
    const { noisy, ref } = makeDirs();
    const rng = new Rng(36);
    writeWavPcm16(join(noisy, "u.wav"),
                  [noiseSignal(rng, samplesForFrames(CHUNK_FRAMES))], 16000);
    expect(() => buildDataset(noisy, ref, CFG)).toThrow(/no reference/);
    writeWavPcm16(join(ref, "u.wav"),
                  [noiseSignal(rng, samplesForFrames(CHUNK_FRAMES) - 100)], 16000);
    expect(() => buildDataset(noisy, ref, CFG)).toThrow(/length mismatch/);
  });
});
