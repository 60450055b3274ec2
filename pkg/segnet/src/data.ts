/**
 * Corpus access. A corpus is a directory with a `manifest.jsonl` whose
 * records point at a grayscale frame and the two reference masks; that is
 * the on-disk interface shared with the phantom generator, so records are
 * consumed as data rather than re-derived.
 */

import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";
import { GrayImage, readPgm } from "./pgm.js";
import { Rng } from "./rng.js";
import { ConfigError, ShapeError, Tensor, zeros } from "./tensor.js";

export interface CorpusItem {
  id: number;
  width: number;
  height: number;
  /** Raw frame bytes (0..255). */
  frame: Uint8Array;
  /** Per-pixel {0,1} labels for the vessel head. */
  vessel: Uint8Array;
  /** Per-pixel {0,1} labels for the robot head. */
  robot: Uint8Array;
  /** Flat pixel indices where the robot mask is set; used to aim crops. */
  robotPixels: Int32Array;
  framePath: string;
  vesselMaskPath: string;
  robotMaskPath: string;
}

function toBinary(img: GrayImage): Uint8Array {
  const out = new Uint8Array(img.pixels.length);
  for (let i = 0; i < out.length; i++) out[i] = img.pixels[i] >= 128 ? 1 : 0;
  return out;
}

export function loadCorpus(manifestPath: string): CorpusItem[] {
  let text: string;
  try {
    text = readFileSync(manifestPath, "utf8");
  } catch (err) {
    throw new ConfigError(`cannot read manifest ${manifestPath}: ${(err as Error).message}`);
  }
  const base = dirname(resolve(manifestPath));
  const items: CorpusItem[] = [];
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  for (const line of lines) {
    let rec: Record<string, unknown>;
    try {
      rec = JSON.parse(line) as Record<string, unknown>;
    } catch {
      throw new ConfigError(`manifest line is not valid JSON: ${line.slice(0, 80)}`);
    }
    const framePath = rec["frame_path"];
    const vesselPath = rec["vessel_mask_path"];
    const robotPath = rec["robot_mask_path"];
    if (typeof framePath !== "string") {
      throw new ConfigError(
        `manifest record ${String(rec["id"])} has no frame_path; generate the corpus with frames enabled`,
      );
    }
    if (typeof vesselPath !== "string" || typeof robotPath !== "string") {
      throw new ConfigError(`manifest record ${String(rec["id"])} is missing mask paths`);
    }
    const frame = readPgm(resolve(base, framePath));
    const vesselImg = readPgm(resolve(base, vesselPath));
    const robotImg = readPgm(resolve(base, robotPath));
    for (const [name, img] of [
      ["vessel mask", vesselImg],
      ["robot mask", robotImg],
    ] as const) {
      if (img.width !== frame.width || img.height !== frame.height) {
        throw new ShapeError(
          `record ${String(rec["id"])}: ${name} is ${img.width}x${img.height}, frame is ${frame.width}x${frame.height}`,
        );
      }
    }
    const robot = toBinary(robotImg);
    const robotPixels: number[] = [];
    for (let i = 0; i < robot.length; i++) {
      if (robot[i]) robotPixels.push(i);
    }
    items.push({
      id: typeof rec["id"] === "number" ? (rec["id"] as number) : items.length,
      width: frame.width,
      height: frame.height,
      frame: frame.pixels,
      vessel: toBinary(vesselImg),
      robot,
      robotPixels: Int32Array.from(robotPixels),
      framePath: framePath,
      vesselMaskPath: vesselPath,
      robotMaskPath: robotPath,
    });
  }
  if (items.length === 0) {
    throw new ConfigError(`manifest ${manifestPath} contains no records`);
  }
  return items;
}

export interface Batch {
  x: Tensor;
  vessel: Tensor;
  robot: Tensor;
}

/**
 * Pick the top-left corner of a crop. Three draws out of four are centered
 * on a random robot pixel so the rare class stays represented; the rest are
 * uniform. Corners are clamped so the window fits the image.
 */
export function sampleCropOrigin(
  item: CorpusItem,
  crop: number,
  rng: Rng,
): { x0: number; y0: number } {
  let cx: number;
  let cy: number;
  if (item.robotPixels.length > 0 && rng.next() < 0.75) {
    const p = item.robotPixels[rng.int(item.robotPixels.length)];
    cx = p % item.width;
    cy = Math.floor(p / item.width);
  } else {
    cx = rng.int(item.width);
    cy = rng.int(item.height);
  }
  const half = crop >> 1;
  const x0 = Math.min(Math.max(cx - half, 0), item.width - crop);
  const y0 = Math.min(Math.max(cy - half, 0), item.height - crop);
  return { x0, y0 };
}

/** Assemble a training batch of random crops from the given items. */
export function buildBatch(items: CorpusItem[], crop: number, rng: Rng): Batch {
  const n = items.length;
  const x = zeros(n, crop, crop, 1);
  const vessel = zeros(n, crop, crop, 1);
  const robot = zeros(n, crop, crop, 1);
  for (let b = 0; b < n; b++) {
    const item = items[b];
    if (item.width < crop || item.height < crop) {
      throw new ShapeError(
        `crop ${crop} exceeds image ${item.width}x${item.height} (record ${item.id})`,
      );
    }
    const { x0, y0 } = sampleCropOrigin(item, crop, rng);
    let dst = b * crop * crop;
    for (let y = 0; y < crop; y++) {
      let src = (y0 + y) * item.width + x0;
      for (let xx = 0; xx < crop; xx++) {
        x.data[dst] = item.frame[src] / 255;
        vessel.data[dst] = item.vessel[src];
        robot.data[dst] = item.robot[src];
        dst++;
        src++;
      }
    }
  }
  return { x, vessel, robot };
}

/** Whole frame as a single-sample input tensor. */
export function frameTensor(item: CorpusItem): Tensor {
  const x = zeros(1, item.height, item.width, 1);
  for (let i = 0; i < item.frame.length; i++) {
    x.data[i] = item.frame[i] / 255;
  }
  return x;
}
