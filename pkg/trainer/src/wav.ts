/** Minimal RIFF/WAV reader: PCM16 and IEEE float32, little-endian. */

import { readFileSync, writeFileSync } from "node:fs";

export interface WavData {
  sampleRate: number;
  /** One Float64Array per channel, samples normalized to [-1, 1]. */
  channels: Float64Array[];
}

export function readWav(path: string): WavData {
  const buf = readFileSync(path);
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "RIFF" ||
      buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`not a RIFF/WAVE file: ${path}`);
  }
  let offset = 12;
  let fmt: { format: number; channels: number; sampleRate: number; bits: number } | null = null;
  let data: Buffer | null = null;
  while (offset + 8 <= buf.length) {
    const id = buf.toString("ascii", offset, offset + 4);
    const size = buf.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (id === "fmt ") {
      fmt = {
        format: buf.readUInt16LE(body),
        channels: buf.readUInt16LE(body + 2),
        sampleRate: buf.readUInt32LE(body + 4),
        bits: buf.readUInt16LE(body + 14),
      };
    } else if (id === "data") {
      data = buf.subarray(body, body + size);
    }
    offset = body + size + (size % 2); // chunks are word-aligned
  }
  if (!fmt || !data) {
    throw new Error(`missing fmt/data chunk in WAV file: ${path}`);
  }
  const { format, channels, sampleRate, bits } = fmt;
  const bytes = bits / 8;
  const frames = Math.floor(data.length / (bytes * channels));
  const out: Float64Array[] = Array.from({ length: channels }, () => new Float64Array(frames));
  if (format === 1 && bits === 16) {
    for (let i = 0; i < frames; i++) {
      for (let c = 0; c < channels; c++) {
        out[c][i] = data.readInt16LE((i * channels + c) * 2) / 32768;
      }
    }
  } else if (format === 3 && bits === 32) {
    for (let i = 0; i < frames; i++) {
      for (let c = 0; c < channels; c++) {
        out[c][i] = data.readFloatLE((i * channels + c) * 4);
      }
    }
  } else {
    throw new Error(`unsupported WAV encoding (format=${format}, bits=${bits}): ${path}`);
  }
  return { sampleRate, channels: out };
}

/** PCM16 writer, used by tests and demo tooling. */
export function writeWavPcm16(path: string, channels: Float64Array[], sampleRate: number): void {
  const numCh = channels.length;
  const frames = channels[0].length;
  const dataSize = frames * numCh * 2;
  const buf = Buffer.alloc(44 + dataSize);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataSize, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20);
  buf.writeUInt16LE(numCh, 22);
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * numCh * 2, 28);
  buf.writeUInt16LE(numCh * 2, 32);
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataSize, 40);
  let pos = 44;
  for (let i = 0; i < frames; i++) {
    for (let c = 0; c < numCh; c++) {
      const q = Math.max(-32768, Math.min(32767, Math.round(channels[c][i] * 32768)));
      buf.writeInt16LE(q, pos);
      pos += 2;
    }
  }
  writeFileSync(path, buf);
}
