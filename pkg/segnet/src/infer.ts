/**
 * Inference: run a trained checkpoint over frames and write the predicted
 * vessel and robot masks as binary PGMs, thresholded at 0.5. Outputs use
 * the same file conventions as generated corpora so downstream mask
 * consumers can read them unchanged.
 */

import { copyFileSync, mkdirSync, readFileSync } from "node:fs";
import { basename, dirname, extname, join, resolve } from "node:path";
import { DualUNet } from "./model.js";
import { GrayImage, probsToMask, readPgm, toUnit, writePgm } from "./pgm.js";
import { ConfigError, Tensor } from "./tensor.js";

export interface InferOutput {
  vesselPath: string;
  robotPath: string;
}

function frameToTensor(img: GrayImage): Tensor {
  return { data: toUnit(img), n: 1, h: img.height, w: img.width, c: 1 };
}

/** Predict both masks for one frame image. */
export function inferMasks(
  model: DualUNet,
  img: GrayImage,
  threshold = 0.5,
): { vessel: GrayImage; robot: GrayImage } {
  const [p1, p2] = model.forward(frameToTensor(img), false);
  return {
    vessel: probsToMask(p1.data, img.width, img.height, threshold),
    robot: probsToMask(p2.data, img.width, img.height, threshold),
  };
}

/** Infer one frame file into `<stem>_vessel.pgm` / `<stem>_robot.pgm`. */
export function inferFrameFile(model: DualUNet, framePath: string, outDir: string): InferOutput {
  const img = readPgm(framePath);
  const masks = inferMasks(model, img);
  mkdirSync(outDir, { recursive: true });
  const stem = basename(framePath, extname(framePath));
  const out: InferOutput = {
    vesselPath: join(outDir, `${stem}_vessel.pgm`),
    robotPath: join(outDir, `${stem}_robot.pgm`),
  };
  writePgm(out.vesselPath, masks.vessel);
  writePgm(out.robotPath, masks.robot);
  return out;
}

/**
 * Infer every frame of a corpus manifest into a new corpus directory: the
 * manifest is copied verbatim and predicted masks are written at each
 * record's mask paths, yielding a directory other mask consumers can read
 * like the original.
 */
export function inferManifest(
  model: DualUNet,
  manifestPath: string,
  outDir: string,
  log: (line: string) => void = () => {},
): number {
  let text: string;
  try {
    text = readFileSync(manifestPath, "utf8");
  } catch (err) {
    throw new ConfigError(`cannot read manifest ${manifestPath}: ${(err as Error).message}`);
  }
  const base = dirname(resolve(manifestPath));
  mkdirSync(outDir, { recursive: true });
  copyFileSync(manifestPath, join(outDir, basename(manifestPath)));
  let count = 0;
  for (const line of text.split("\n")) {
    if (line.trim().length === 0) continue;
    const rec = JSON.parse(line) as Record<string, unknown>;
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
    const img = readPgm(resolve(base, framePath));
    const masks = inferMasks(model, img);
    const vesselOut = join(outDir, vesselPath);
    const robotOut = join(outDir, robotPath);
    mkdirSync(dirname(vesselOut), { recursive: true });
    mkdirSync(dirname(robotOut), { recursive: true });
    writePgm(vesselOut, masks.vessel);
    writePgm(robotOut, masks.robot);
    count++;
    if (count % 25 === 0) log(`inferred ${count} frames`);
  }
  if (count === 0) {
    throw new ConfigError(`manifest ${manifestPath} contains no records`);
  }
  return count;
}
