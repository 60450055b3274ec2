/**
 * Checkpoint serialization: a single JSON document holding the network
 * spec, every parameter, and the batch-norm running statistics. Arrays are
 * base64-encoded little-endian float32 so checkpoints are portable and
 * byte-stable for identical models.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { DualUNet, NetSpec } from "./model.js";
import { ConfigError } from "./tensor.js";

const FORMAT = "segnet-checkpoint";
const VERSION = 1;

interface CheckpointDoc {
  format: string;
  version: number;
  spec: NetSpec;
  params: Record<string, string>;
  buffers: Record<string, string>;
}

function encodeF32(values: Float32Array): string {
  const buf = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    buf.writeFloatLE(values[i], i * 4);
  }
  return buf.toString("base64");
}

function decodeF32(text: string, expected: number, name: string): Float32Array {
  const buf = Buffer.from(text, "base64");
  if (buf.length !== expected * 4) {
    throw new ConfigError(
      `checkpoint array ${name} has ${buf.length / 4} values, model needs ${expected}`,
    );
  }
  const out = new Float32Array(expected);
  for (let i = 0; i < expected; i++) {
    out[i] = buf.readFloatLE(i * 4);
  }
  return out;
}

export function saveCheckpoint(model: DualUNet, path: string): void {
  const doc: CheckpointDoc = {
    format: FORMAT,
    version: VERSION,
    spec: model.spec,
    params: {},
    buffers: {},
  };
  for (const p of model.params()) {
    doc.params[p.name] = encodeF32(p.value);
  }
  for (const b of model.buffers()) {
    doc.buffers[b.name] = encodeF32(b.value);
  }
  writeFileSync(path, JSON.stringify(doc, undefined, 1) + "\n");
}

export function loadCheckpoint(path: string): DualUNet {
  let doc: CheckpointDoc;
  try {
    doc = JSON.parse(readFileSync(path, "utf8")) as CheckpointDoc;
  } catch (err) {
    throw new ConfigError(`cannot read checkpoint ${path}: ${(err as Error).message}`);
  }
  if (doc.format !== FORMAT) {
    throw new ConfigError(`${path} is not a ${FORMAT} file`);
  }
  if (doc.version !== VERSION) {
    throw new ConfigError(`unsupported checkpoint version ${doc.version}`);
  }
  if (
    typeof doc.spec?.baseChannels !== "number" ||
    typeof doc.spec?.inChannels !== "number"
  ) {
    throw new ConfigError(`checkpoint ${path} has an invalid spec section`);
  }
  const model = new DualUNet(doc.spec, 0);
  for (const p of model.params()) {
    const text = doc.params[p.name];
    if (text === undefined) {
      throw new ConfigError(`checkpoint ${path} is missing parameter ${p.name}`);
    }
    p.value.set(decodeF32(text, p.value.length, p.name));
  }
  for (const b of model.buffers()) {
    const text = doc.buffers[b.name];
    if (text === undefined) {
      throw new ConfigError(`checkpoint ${path} is missing buffer ${b.name}`);
    }
    b.value.set(decodeF32(text, b.value.length, b.name));
  }
  return model;
}
