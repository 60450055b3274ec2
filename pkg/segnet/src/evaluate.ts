/** Checkpoint evaluation: hard Dice per head over a labeled corpus. */

import { writeFileSync } from "node:fs";
import { frameTensor, loadCorpus } from "./data.js";
import { diceScore } from "./loss.js";
import { DualUNet } from "./model.js";

export interface FrameDice {
  id: number;
  vessel: number;
  robot: number;
}

export interface EvalReport {
  frames: number;
  meanDice: { vessel: number; robot: number };
  minDice: { vessel: number; robot: number };
  perFrame: FrameDice[];
}

export function evaluateCheckpoint(
  model: DualUNet,
  manifestPath: string,
  log: (line: string) => void = () => {},
): EvalReport {
  const corpus = loadCorpus(manifestPath);
  const perFrame: FrameDice[] = [];
  let sumV = 0;
  let sumR = 0;
  let minV = Infinity;
  let minR = Infinity;
  for (const item of corpus) {
    const [p1, p2] = model.forward(frameTensor(item), false);
    const v = new Uint8Array(p1.data.length);
    const r = new Uint8Array(p2.data.length);
    for (let i = 0; i < v.length; i++) {
      v[i] = p1.data[i] >= 0.5 ? 1 : 0;
      r[i] = p2.data[i] >= 0.5 ? 1 : 0;
    }
    const dv = diceScore(v, item.vessel);
    const dr = diceScore(r, item.robot);
    perFrame.push({ id: item.id, vessel: dv, robot: dr });
    sumV += dv;
    sumR += dr;
    minV = Math.min(minV, dv);
    minR = Math.min(minR, dr);
    if (perFrame.length % 50 === 0) log(`evaluated ${perFrame.length} frames`);
  }
  return {
    frames: perFrame.length,
    meanDice: { vessel: sumV / perFrame.length, robot: sumR / perFrame.length },
    minDice: { vessel: minV, robot: minR },
    perFrame,
  };
}

export function writeEvalReport(report: EvalReport, path: string): void {
  writeFileSync(path, JSON.stringify(report, undefined, 1) + "\n");
}
