/** Bidirectional LSTM mask estimator: forward pass, full BPTT gradients and
 * an RMSprop optimizer.
 *
 * Layout contract (shared with the MNW1 container):
 *   per direction  W: (4H, F) row-major, U: (4H, H), b: (4H,)
 *   gate order i, f, g, o along the first axis
 *   output layer   outW: (F, 2H), outB: (F,)
 * The forward block of outW reads the forward hidden state, the trailing
 * block the (re-reversed) backward state. All math in float64.
 */

import { Rng } from "./rng.js";

export interface DirectionParams {
  W: Float64Array;
  U: Float64Array;
  b: Float64Array;
}

export interface ModelParams {
  hidden: number;
  freqBins: number;
  fw: DirectionParams;
  bw: DirectionParams;
  outW: Float64Array;
  outB: Float64Array;
}

export function initModel(hidden: number, freqBins: number, rng: Rng): ModelParams {
  const scaleIn = 1.0 / Math.sqrt(freqBins);
  const scaleRec = 1.0 / Math.sqrt(hidden);
  const dir = (): DirectionParams => {
    const W = new Float64Array(4 * hidden * freqBins);
    const U = new Float64Array(4 * hidden * hidden);
    const b = new Float64Array(4 * hidden);
    for (let i = 0; i < W.length; i++) W[i] = scaleIn * rng.normal();
    for (let i = 0; i < U.length; i++) U[i] = scaleRec * rng.normal();
    // forget-gate bias of 1 is the usual stabilizer
    for (let k = hidden; k < 2 * hidden; k++) b[k] = 1.0;
    return { W, U, b };
  };
  const outW = new Float64Array(freqBins * 2 * hidden);
  const outB = new Float64Array(freqBins);
  for (let i = 0; i < outW.length; i++) outW[i] = scaleRec * rng.normal();
  return { hidden, freqBins, fw: dir(), bw: dir(), outW, outB };
}

function sigmoid(x: number): number {
  return x >= 0 ? 1 / (1 + Math.exp(-x)) : Math.exp(x) / (1 + Math.exp(x));
}

interface DirectionTrace {
  /** gates and states per step, each (T, H) flattened */
  i: Float64Array;
  f: Float64Array;
  g: Float64Array;
  o: Float64Array;
  c: Float64Array;
  hc: Float64Array;
  h: Float64Array;
}

/** x: (T, F) flattened row-major; returns hidden states (T, H) plus trace. */
function runDirection(x: Float64Array, T: number, F: number, hidden: number,
                      p: DirectionParams): DirectionTrace {
  const H = hidden;
  const tr: DirectionTrace = {
    i: new Float64Array(T * H), f: new Float64Array(T * H),
    g: new Float64Array(T * H), o: new Float64Array(T * H),
    c: new Float64Array(T * H), hc: new Float64Array(T * H),
    h: new Float64Array(T * H),
  };
  const z = new Float64Array(4 * H);
  for (let t = 0; t < T; t++) {
    for (let r = 0; r < 4 * H; r++) {
      let acc = p.b[r];
      const wRow = r * F;
      const xRow = t * F;
      for (let j = 0; j < F; j++) acc += p.W[wRow + j] * x[xRow + j];
      if (t > 0) {
        const uRow = r * H;
        const hRow = (t - 1) * H;
        for (let k = 0; k < H; k++) acc += p.U[uRow + k] * tr.h[hRow + k];
      }
      z[r] = acc;
    }
    for (let k = 0; k < H; k++) {
      const ig = sigmoid(z[k]);
      const fg = sigmoid(z[H + k]);
      const gg = Math.tanh(z[2 * H + k]);
      const og = sigmoid(z[3 * H + k]);
      const cPrev = t > 0 ? tr.c[(t - 1) * H + k] : 0.0;
      const c = fg * cPrev + ig * gg;
      const hc = Math.tanh(c);
      tr.i[t * H + k] = ig;
      tr.f[t * H + k] = fg;
      tr.g[t * H + k] = gg;
      tr.o[t * H + k] = og;
      tr.c[t * H + k] = c;
      tr.hc[t * H + k] = hc;
      tr.h[t * H + k] = og * hc;
    }
  }
  return tr;
}

export interface ForwardResult {
  mask: Float64Array;       // (F, T) frequency-major
  traceFw: DirectionTrace;
  traceBw: DirectionTrace;  // over the reversed sequence
}

/** Features x: (T, F) row-major; mask out: (F, T) frequency-major. */
export function forward(model: ModelParams, x: Float64Array, T: number): ForwardResult {
  const { hidden: H, freqBins: F } = model;
  const xRev = reverseTime(x, T, F);
  const traceFw = runDirection(x, T, F, H, model.fw);
  const traceBw = runDirection(xRev, T, F, H, model.bw);
  const mask = new Float64Array(F * T);
  for (let t = 0; t < T; t++) {
    const hFw = t * H;
    const hBw = (T - 1 - t) * H; // re-reverse
    for (let f = 0; f < F; f++) {
      let u = model.outB[f];
      const row = f * 2 * H;
      for (let k = 0; k < H; k++) u += model.outW[row + k] * traceFw.h[hFw + k];
      for (let k = 0; k < H; k++) u += model.outW[row + H + k] * traceBw.h[hBw + k];
      mask[f * T + t] = sigmoid(u);
    }
  }
  return { mask, traceFw, traceBw };
}

function reverseTime(x: Float64Array, T: number, F: number): Float64Array {
  const out = new Float64Array(T * F);
  for (let t = 0; t < T; t++) {
    out.set(x.subarray((T - 1 - t) * F, (T - t) * F), t * F);
  }
  return out;
}

export interface Gradients {
  fw: DirectionParams;
  bw: DirectionParams;
  outW: Float64Array;
  outB: Float64Array;
}

export function zeroGradients(model: ModelParams): Gradients {
  const like = (p: DirectionParams): DirectionParams => ({
    W: new Float64Array(p.W.length),
    U: new Float64Array(p.U.length),
    b: new Float64Array(p.b.length),
  });
  return {
    fw: like(model.fw),
    bw: like(model.bw),
    outW: new Float64Array(model.outW.length),
    outB: new Float64Array(model.outB.length),
  };
}

/** Magnitude-weighted mask MSE over one chunk:
 *    loss = sum_{f,t} (mask * noisyMag - cleanMag)^2
 * noisyMag/cleanMag are (F, T) frequency-major. Returns the loss and adds
 * this chunk's gradients into `grads`.
 */
export function lossAndGradients(model: ModelParams, x: Float64Array, T: number,
                                 noisyMag: Float64Array, cleanMag: Float64Array,
                                 grads: Gradients): number {
  const { hidden: H, freqBins: F } = model;
  const { mask, traceFw, traceBw } = forward(model, x, T);

  let loss = 0.0;
  const du = new Float64Array(F * T); // dLoss/dLogit
  for (let f = 0; f < F; f++) {
    for (let t = 0; t < T; t++) {
      const idx = f * T + t;
      const m = mask[idx];
      const resid = m * noisyMag[idx] - cleanMag[idx];
      loss += resid * resid;
      du[idx] = 2.0 * resid * noisyMag[idx] * m * (1.0 - m);
    }
  }

  // output layer and external hidden-state gradients
  const dhFw = new Float64Array(T * H);
  const dhBwRev = new Float64Array(T * H); // aligned with the reversed sequence
  for (let t = 0; t < T; t++) {
    const hFw = t * H;
    const hBw = (T - 1 - t) * H;
    for (let f = 0; f < F; f++) {
      const g = du[f * T + t];
      if (g === 0.0) continue;
      const row = f * 2 * H;
      grads.outB[f] += g;
      for (let k = 0; k < H; k++) {
        grads.outW[row + k] += g * traceFw.h[hFw + k];
        grads.outW[row + H + k] += g * traceBw.h[hBw + k];
        dhFw[hFw + k] += g * model.outW[row + k];
        dhBwRev[hBw + k] += g * model.outW[row + H + k];
      }
    }
  }

  const xRev = reverseTime(x, T, F);
  backwardDirection(model.fw, grads.fw, traceFw, x, dhFw, T, F, H);
  backwardDirection(model.bw, grads.bw, traceBw, xRev, dhBwRev, T, F, H);
  return loss;
}

function backwardDirection(p: DirectionParams, g: DirectionParams, tr: DirectionTrace,
                           x: Float64Array, dhExt: Float64Array,
                           T: number, F: number, H: number): void {
  const dh = new Float64Array(H);
  const dcNext = new Float64Array(H);
  const dz = new Float64Array(4 * H);
  for (let t = T - 1; t >= 0; t--) {
    const row = t * H;
    for (let k = 0; k < H; k++) {
      dh[k] += dhExt[row + k];
      const o = tr.o[row + k];
      const hc = tr.hc[row + k];
      const dO = dh[k] * hc;
      let dc = dcNext[k] + dh[k] * o * (1.0 - hc * hc);
      const i = tr.i[row + k];
      const f = tr.f[row + k];
      const gg = tr.g[row + k];
      const cPrev = t > 0 ? tr.c[row - H + k] : 0.0;
      const dI = dc * gg;
      const dF = dc * cPrev;
      const dG = dc * i;
      dz[k] = dI * i * (1.0 - i);
      dz[H + k] = dF * f * (1.0 - f);
      dz[2 * H + k] = dG * (1.0 - gg * gg);
      dz[3 * H + k] = dO * o * (1.0 - o);
      dcNext[k] = dc * f;
    }
    const xRow = t * F;
    for (let r = 0; r < 4 * H; r++) {
      const d = dz[r];
      if (d === 0.0) continue;
      g.b[r] += d;
      const wRow = r * F;
      for (let j = 0; j < F; j++) g.W[wRow + j] += d * x[xRow + j];
      if (t > 0) {
        const uRow = r * H;
        const hRow = row - H;
        for (let k = 0; k < H; k++) g.U[uRow + k] += d * tr.h[hRow + k];
      }
    }
    // recurrent gradient into h_{t-1}
    dh.fill(0.0);
    if (t > 0) {
      for (let r = 0; r < 4 * H; r++) {
        const d = dz[r];
        if (d === 0.0) continue;
        const uRow = r * H;
        for (let k = 0; k < H; k++) dh[k] += d * p.U[uRow + k];
      }
    }
  }
}

/** RMSprop with the customary defaults (rho 0.9, lr 1e-3, eps 1e-8). */
export class RmsProp {
  readonly lr: number;
  readonly rho: number;
  readonly eps: number;
  private cache: Map<Float64Array, Float64Array> = new Map();

  constructor(lr = 1e-3, rho = 0.9, eps = 1e-8) {
    this.lr = lr;
    this.rho = rho;
    this.eps = eps;
  }

  private step(param: Float64Array, grad: Float64Array): void {
    let cache = this.cache.get(param);
    if (!cache) {
      cache = new Float64Array(param.length);
      this.cache.set(param, cache);
    }
    for (let i = 0; i < param.length; i++) {
      cache[i] = this.rho * cache[i] + (1 - this.rho) * grad[i] * grad[i];
      param[i] -= (this.lr * grad[i]) / (Math.sqrt(cache[i]) + this.eps);
    }
  }

  update(model: ModelParams, grads: Gradients): void {
    this.step(model.fw.W, grads.fw.W);
    this.step(model.fw.U, grads.fw.U);
    this.step(model.fw.b, grads.fw.b);
    this.step(model.bw.W, grads.bw.W);
    this.step(model.bw.U, grads.bw.U);
    this.step(model.bw.b, grads.bw.b);
    this.step(model.outW, grads.outW);
    this.step(model.outB, grads.outB);
  }
}

export function scaleGradients(grads: Gradients, factor: number): void {
  for (const arr of [grads.fw.W, grads.fw.U, grads.fw.b, grads.bw.W, grads.bw.U,
                     grads.bw.b, grads.outW, grads.outB]) {
    for (let i = 0; i < arr.length; i++) arr[i] *= factor;
  }
}

export function cloneModel(model: ModelParams): ModelParams {
  const dir = (p: DirectionParams): DirectionParams => ({
    W: Float64Array.from(p.W), U: Float64Array.from(p.U), b: Float64Array.from(p.b),
  });
  return {
    hidden: model.hidden,
    freqBins: model.freqBins,
    fw: dir(model.fw),
    bw: dir(model.bw),
    outW: Float64Array.from(model.outW),
    outB: Float64Array.from(model.outB),
  };
}
