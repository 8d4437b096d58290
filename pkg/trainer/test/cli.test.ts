import { existsSync, mkdirSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { runCli } from "../src/cli.js";
import { importWeights } from "../src/mnw1.js";
import { Rng } from "../src/rng.js";
import { writeWavPcm16 } from "../src/wav.js";

function makePair(root: string, frames: number): { noisy: string; ref: string } {
  const noisy = join(root, "noisy");
  const ref = join(root, "ref");
  mkdirSync(noisy);
  mkdirSync(ref);
  const rng = new Rng(5);
  const n = (frames - 1) * 128 + 256;
  for (const name of ["a.wav", "b.wav"]) {
    const clean = new Float64Array(n);
    const mix = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      clean[i] = 0.2 * rng.normal();
      mix[i] = clean[i] + 0.1 * rng.normal();
    }
    writeWavPcm16(join(noisy, name), [mix], 16000);
    writeWavPcm16(join(ref, name), [clean], 16000);
  }
  return { noisy, ref };
}

describe("cli", () => {
  it("trains and exports a loadable container plus a JSON log", () => {
    const root = mkdtempSync(join(tmpdir(), "cli-"));
    const { noisy, ref } = makePair(root, 60);
    const out = join(root, "w.mnw1");
    const log = join(root, "log.json");
    const rc = runCli([
      "train", "--noisy", noisy, "--ref", ref, "--out", out,
      "--hidden", "4", "--batch", "2", "--epochs", "3",
      "--fft", "256", "--hop", "128", "--log", log,
    ]);
    expect(rc).toBe(0);
    expect(existsSync(out)).toBe(true);
    const { model, stats } = importWeights(out);
    expect(model.hidden).toBe(4);
    expect(model.freqBins).toBe(129);
    expect(stats.mean.length).toBe(129);
    const payload = JSON.parse(readFileSync(log, "utf-8"));
    expect(payload.epochs.length).toBeGreaterThan(0);
    expect(payload.optimizer.kind).toBe("rmsprop");
    for (const epoch of payload.epochs) {
      expect(Number.isFinite(epoch.train_loss)).toBe(true);
    }
  });

  it("fails with exit 2 on missing arguments", () => {
    expect(runCli(["train", "--noisy", "/nope"])).toBe(2);
    expect(runCli(["not-a-command"])).toBe(2);
  });

  it("fails with exit 1 on unusable data directories", () => {
    const root = mkdtempSync(join(tmpdir(), "cli-"));
    mkdirSync(join(root, "empty"));
    mkdirSync(join(root, "empty2"));
    const rc = runCli([
      "train", "--noisy", join(root, "empty"), "--ref", join(root, "empty2"),
      "--out", join(root, "w.mnw1"),
    ]);
    expect(rc).toBe(1);
  });
});
