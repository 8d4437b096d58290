/** MNW1 tensor container.
 *
 * magic "MNW1" | u32 tensor count | per tensor:
 *   u16 name length | UTF-8 name | u8 ndim | u32 dims[] | float32 data
 * Little-endian throughout, row-major data. Tensors are written in a fixed
 * canonical order so identical weights always produce identical bytes.
 */

import { readFileSync, writeFileSync } from "node:fs";

import type { ModelParams } from "./lstm.js";

export interface FeatureStats {
  mean: Float64Array;
  std: Float64Array;
}

export interface NamedTensor {
  dims: number[];
  data: Float64Array;
}

export const TENSOR_ORDER = [
  "lstm.fw.W", "lstm.fw.U", "lstm.fw.b",
  "lstm.bw.W", "lstm.bw.U", "lstm.bw.b",
  "out.W", "out.b", "stats.mean", "stats.std",
] as const;

export function modelTensors(model: ModelParams, stats: FeatureStats): Map<string, NamedTensor> {
  const { hidden: H, freqBins: F } = model;
  if (stats.mean.length !== F || stats.std.length !== F) {
    throw new Error(
      `stats.mean/std cover ${stats.mean.length}/${stats.std.length} bins, model has ${F}`);
  }
  return new Map<string, NamedTensor>([
    ["lstm.fw.W", { dims: [4 * H, F], data: model.fw.W }],
    ["lstm.fw.U", { dims: [4 * H, H], data: model.fw.U }],
    ["lstm.fw.b", { dims: [4 * H], data: model.fw.b }],
    ["lstm.bw.W", { dims: [4 * H, F], data: model.bw.W }],
    ["lstm.bw.U", { dims: [4 * H, H], data: model.bw.U }],
    ["lstm.bw.b", { dims: [4 * H], data: model.bw.b }],
    ["out.W", { dims: [F, 2 * H], data: model.outW }],
    ["out.b", { dims: [F], data: model.outB }],
    ["stats.mean", { dims: [F], data: stats.mean }],
    ["stats.std", { dims: [F], data: stats.std }],
  ]);
}

export function writeMnw1(path: string, tensors: Map<string, NamedTensor>): void {
  const parts: Buffer[] = [];
  const head = Buffer.alloc(8);
  head.write("MNW1", 0, "ascii");
  head.writeUInt32LE(tensors.size, 4);
  parts.push(head);
  for (const [name, tensor] of tensors) {
    const nameBuf = Buffer.from(name, "utf-8");
    const meta = Buffer.alloc(2 + nameBuf.length + 1 + 4 * tensor.dims.length);
    let pos = 0;
    meta.writeUInt16LE(nameBuf.length, pos); pos += 2;
    nameBuf.copy(meta, pos); pos += nameBuf.length;
    meta.writeUInt8(tensor.dims.length, pos); pos += 1;
    for (const d of tensor.dims) {
      meta.writeUInt32LE(d, pos); pos += 4;
    }
    parts.push(meta);
    const expect = tensor.dims.reduce((a, b) => a * b, 1);
    if (tensor.data.length !== expect) {
      throw new Error(`tensor '${name}' has ${tensor.data.length} values, dims say ${expect}`);
    }
    const data = Buffer.alloc(4 * tensor.data.length);
    for (let i = 0; i < tensor.data.length; i++) {
      data.writeFloatLE(Math.fround(tensor.data[i]), i * 4);
    }
    parts.push(data);
  }
  writeFileSync(path, Buffer.concat(parts));
}

export function exportWeights(path: string, model: ModelParams, stats: FeatureStats): void {
  writeMnw1(path, modelTensors(model, stats));
}

export function readMnw1(path: string): Map<string, NamedTensor> {
  const buf = readFileSync(path);
  if (buf.length < 8 || buf.toString("ascii", 0, 4) !== "MNW1") {
    throw new Error(`bad magic: not an MNW1 container: ${path}`);
  }
  const count = buf.readUInt32LE(4);
  let pos = 8;
  const need = (n: number, what: string) => {
    if (pos + n > buf.length) throw new Error(`truncated MNW1 file while reading ${what}`);
  };
  const tensors = new Map<string, NamedTensor>();
  for (let i = 0; i < count; i++) {
    need(2, "name length");
    const nameLen = buf.readUInt16LE(pos); pos += 2;
    need(nameLen, "name");
    const name = buf.toString("utf-8", pos, pos + nameLen); pos += nameLen;
    need(1, "ndim");
    const ndim = buf.readUInt8(pos); pos += 1;
    need(4 * ndim, "dims");
    const dims: number[] = [];
    for (let d = 0; d < ndim; d++) {
      dims.push(buf.readUInt32LE(pos)); pos += 4;
    }
    const total = dims.reduce((a, b) => a * b, 1);
    need(4 * total, `data of '${name}'`);
    const data = new Float64Array(total);
    for (let j = 0; j < total; j++) {
      data[j] = buf.readFloatLE(pos); pos += 4;
    }
    tensors.set(name, { dims, data });
  }
  return tensors;
}

/** Reassemble a model + stats from a container (validates shapes). */
export function importWeights(path: string): { model: ModelParams; stats: FeatureStats } {
  const tensors = readMnw1(path);
  const missing = TENSOR_ORDER.filter((name) => !tensors.has(name));
  if (missing.length) {
    throw new Error(`MNW1 container missing tensors: ${missing.join(", ")}`);
  }
  const get = (name: string): NamedTensor => tensors.get(name)!;
  const H = get("lstm.fw.U").dims[1];
  const F = get("out.W").dims[0];
  const expect: Record<string, number[]> = {
    "lstm.fw.W": [4 * H, F], "lstm.fw.U": [4 * H, H], "lstm.fw.b": [4 * H],
    "lstm.bw.W": [4 * H, F], "lstm.bw.U": [4 * H, H], "lstm.bw.b": [4 * H],
    "out.W": [F, 2 * H], "out.b": [F], "stats.mean": [F], "stats.std": [F],
  };
  for (const [name, dims] of Object.entries(expect)) {
    const got = get(name).dims;
    if (got.length !== dims.length || got.some((d, i) => d !== dims[i])) {
      throw new Error(`tensor '${name}' has dims [${got}], expected [${dims}]`);
    }
  }
  return {
    model: {
      hidden: H,
      freqBins: F,
      fw: { W: get("lstm.fw.W").data, U: get("lstm.fw.U").data, b: get("lstm.fw.b").data },
      bw: { W: get("lstm.bw.W").data, U: get("lstm.bw.U").data, b: get("lstm.bw.b").data },
      outW: get("out.W").data,
      outB: get("out.b").data,
    },
    stats: { mean: get("stats.mean").data, std: get("stats.std").data },
  };
}
