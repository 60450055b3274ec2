/** Binary (P5) PGM reading and writing for frames and masks. */

import { readFileSync, writeFileSync } from "node:fs";

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major pixels, one byte per pixel. */
  pixels: Uint8Array;
}

export class PgmError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "PgmError";
  }
}

/** Parse a P5 PGM buffer. Header comments (# ...) are skipped. */
export function decodePgm(buf: Uint8Array): GrayImage {
  let pos = 0;
  const isSpace = (b: number) => b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;
  const token = (): string => {
    while (pos < buf.length) {
      if (isSpace(buf[pos])) {
        pos++;
      } else if (buf[pos] === 0x23) {
        while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < buf.length && !isSpace(buf[pos])) pos++;
    if (start === pos) throw new PgmError("truncated header");
    return Buffer.from(buf.subarray(start, pos)).toString("ascii");
  };
  if (token() !== "P5") throw new PgmError("not a binary PGM (missing P5 magic)");
  const width = Number(token());
  const height = Number(token());
  const maxval = Number(token());
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new PgmError(`bad dimensions ${width}x${height}`);
  }
  if (!Number.isInteger(maxval) || maxval <= 0 || maxval > 255) {
    throw new PgmError(`unsupported maxval ${maxval}`);
  }
  pos++;
  const need = width * height;
  if (buf.length - pos < need) {
    throw new PgmError(`pixel data truncated: need ${need}, have ${buf.length - pos}`);
  }
  return { width, height, pixels: buf.slice(pos, pos + need) };
}

export function encodePgm(img: GrayImage): Uint8Array {
  if (img.pixels.length !== img.width * img.height) {
    throw new PgmError(
      `pixel count ${img.pixels.length} does not match ${img.width}x${img.height}`,
    );
  }
  const header = Buffer.from(`P5\n${img.width} ${img.height}\n255\n`, "ascii");
  const out = new Uint8Array(header.length + img.pixels.length);
  out.set(header, 0);
  out.set(img.pixels, header.length);
  return out;
}

export function readPgm(path: string): GrayImage {
  return decodePgm(readFileSync(path));
}

export function writePgm(path: string, img: GrayImage): void {
  writeFileSync(path, encodePgm(img));
}

/** Frame bytes scaled to [0, 1] floats for the network input. */
export function toUnit(img: GrayImage): Float32Array {
  const out = new Float32Array(img.pixels.length);
  for (let i = 0; i < out.length; i++) out[i] = img.pixels[i] / 255;
  return out;
}

/** Mask bytes to {0, 1} labels; values of 128 and above are foreground. */
export function toLabels(img: GrayImage): Float32Array {
  const out = new Float32Array(img.pixels.length);
  for (let i = 0; i < out.length; i++) out[i] = img.pixels[i] >= 128 ? 1 : 0;
  return out;
}

/** Probabilities to a writable mask: 255 where p >= threshold, else 0. */
export function probsToMask(
  probs: Float32Array,
  width: number,
  height: number,
  threshold = 0.5,
): GrayImage {
  const pixels = new Uint8Array(width * height);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = probs[i] >= threshold ? 255 : 0;
  }
  return { width, height, pixels };
}
