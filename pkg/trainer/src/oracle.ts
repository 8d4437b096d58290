/** Independent scalar-loop forward pass used as the equivalence oracle.
 *
 * Deliberately written as explicit per-timestep, per-unit arithmetic with
 * no shared code beyond the parameter layout, so it can catch indexing or
 * vectorization mistakes in the training-side forward pass (and, through
 * the container, in any other implementation of the same contract).
 */

import type { ModelParams } from "./lstm.js";

function sig(x: number): number {
  return x >= 0 ? 1 / (1 + Math.exp(-x)) : Math.exp(x) / (1 + Math.exp(x));
}

function runScalarDirection(x: number[][], W: Float64Array, U: Float64Array,
                            b: Float64Array, H: number): number[][] {
  const T = x.length;
  const F = x[0].length;
  let h = new Array(H).fill(0);
  let c = new Array(H).fill(0);
  const out: number[][] = [];
  for (let t = 0; t < T; t++) {
    const z = new Array(4 * H).fill(0);
    for (let r = 0; r < 4 * H; r++) {
      let acc = b[r];
      for (let j = 0; j < F; j++) acc += W[r * F + j] * x[t][j];
      for (let k = 0; k < H; k++) acc += U[r * H + k] * h[k];
      z[r] = acc;
    }
    const hNew = new Array(H).fill(0);
    const cNew = new Array(H).fill(0);
    for (let k = 0; k < H; k++) {
      const i = sig(z[k]);
      const f = sig(z[H + k]);
      const g = Math.tanh(z[2 * H + k]);
      const o = sig(z[3 * H + k]);
      cNew[k] = f * c[k] + i * g;
      hNew[k] = o * Math.tanh(cNew[k]);
    }
    h = hNew;
    c = cNew;
    out.push(h.slice());
  }
  return out;
}

/** Features (T, F) as nested arrays; returns the mask frequency-major (F, T). */
export function forwardOracle(model: ModelParams, x: number[][]): number[][] {
  const { hidden: H, freqBins: F } = model;
  const T = x.length;
  const hFw = runScalarDirection(x, model.fw.W, model.fw.U, model.fw.b, H);
  const xRev = x.slice().reverse();
  const hBwRev = runScalarDirection(xRev, model.bw.W, model.bw.U, model.bw.b, H);
  const hBw = hBwRev.slice().reverse();
  const mask: number[][] = Array.from({ length: F }, () => new Array(T).fill(0));
  for (let t = 0; t < T; t++) {
    for (let f = 0; f < F; f++) {
      let u = model.outB[f];
      for (let k = 0; k < H; k++) u += model.outW[f * 2 * H + k] * hFw[t][k];
      for (let k = 0; k < H; k++) u += model.outW[f * 2 * H + H + k] * hBw[t][k];
      mask[f][t] = sig(u);
    }
  }
  return mask;
}
