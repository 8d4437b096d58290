/** STFT magnitude analysis matching the inference engine's conventions:
 * square-root Hann (periodic), no padding, frames = floor((N-fft)/hop)+1. */

import { rfftMagnitudes } from "./fft.js";

export interface StftConfig {
  fftSize: number;
  hop: number;
}

export const DEFAULT_STFT: StftConfig = { fftSize: 1024, hop: 512 };

export function sqrtHann(size: number): Float64Array {
  const w = new Float64Array(size);
  for (let n = 0; n < size; n++) {
    w[n] = Math.sqrt(0.5 - 0.5 * Math.cos((2 * Math.PI * n) / size));
  }
  return w;
}

export function numFrames(samples: number, cfg: StftConfig): number {
  if (samples < cfg.fftSize) {
    throw new Error(`signal of ${samples} samples is shorter than one frame (${cfg.fftSize})`);
  }
  return Math.floor((samples - cfg.fftSize) / cfg.hop) + 1;
}

/** Magnitude spectrogram, frequency-major: mags[f * frames + t]. */
export interface MagSpectrogram {
  mags: Float64Array;
  freqBins: number;
  frames: number;
}

export function stftMagnitudes(signal: Float64Array, cfg: StftConfig = DEFAULT_STFT): MagSpectrogram {
  const frames = numFrames(signal.length, cfg);
  const freqBins = cfg.fftSize / 2 + 1;
  const window = sqrtHann(cfg.fftSize);
  const mags = new Float64Array(freqBins * frames);
  const frame = new Float64Array(cfg.fftSize);
  for (let t = 0; t < frames; t++) {
    const start = t * cfg.hop;
    for (let n = 0; n < cfg.fftSize; n++) {
      frame[n] = signal[start + n] * window[n];
    }
    const spectrum = rfftMagnitudes(frame);
    for (let f = 0; f < freqBins; f++) {
      mags[f * frames + t] = spectrum[f];
    }
  }
  return { mags, freqBins, frames };
}
