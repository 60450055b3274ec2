/**
 * Training loop: random crops, BCE + soft Dice, Adam, and a per-epoch Dice
 * evaluation on a held-out split. Every random draw comes from streams
 * derived from the run seed, so a given config and corpus reproduce the
 * same run exactly.
 */

import { appendFileSync, mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { Adam } from "./adam.js";
import { saveCheckpoint } from "./checkpoint.js";
import { TrainConfig } from "./config.js";
import { CorpusItem, buildBatch, frameTensor, loadCorpus } from "./data.js";
import { diceScore, dualLoss } from "./loss.js";
import { DualUNet } from "./model.js";
import { Rng } from "./rng.js";
import { ConfigError } from "./tensor.js";

export interface EpochRow {
  epoch: number;
  loss: number;
  bceVessel: number;
  diceLossVessel: number;
  bceRobot: number;
  diceLossRobot: number;
  valDiceVessel: number;
  valDiceRobot: number;
}

export interface TrainResult {
  checkpointPath: string;
  metricsPath: string;
  rows: EpochRow[];
}

const CSV_HEADER =
  "epoch,loss,bce_vessel,dice_loss_vessel,bce_robot,dice_loss_robot,val_dice_vessel,val_dice_robot\n";

/** Mean hard-Dice per head over full frames, using inference-mode statistics. */
export function evaluateDice(
  model: DualUNet,
  items: CorpusItem[],
): { vessel: number; robot: number } {
  let vessel = 0;
  let robot = 0;
  for (const item of items) {
    const [p1, p2] = model.forward(frameTensor(item), false);
    const v = new Uint8Array(p1.data.length);
    const r = new Uint8Array(p2.data.length);
    for (let i = 0; i < v.length; i++) {
      v[i] = p1.data[i] >= 0.5 ? 1 : 0;
      r[i] = p2.data[i] >= 0.5 ? 1 : 0;
    }
    vessel += diceScore(v, item.vessel);
    robot += diceScore(r, item.robot);
  }
  return { vessel: vessel / items.length, robot: robot / items.length };
}

export function train(cfg: TrainConfig, log: (line: string) => void = () => {}): TrainResult {
  const corpus = loadCorpus(cfg.manifest);
  const splitRng = new Rng(Rng.derive(cfg.seed, 1));
  const order = corpus.map((_, i) => i);
  splitRng.shuffle(order);
  const holdoutCount = Math.min(
    corpus.length - 1,
    Math.round(cfg.holdoutFraction * corpus.length),
  );
  const holdout = order.slice(0, holdoutCount).map((i) => corpus[i]);
  const trainItems = order.slice(holdoutCount).map((i) => corpus[i]);
  if (trainItems.length === 0) {
    throw new ConfigError("holdoutFraction leaves no training records");
  }

  const model = new DualUNet({ baseChannels: cfg.baseChannels, inChannels: 1 }, cfg.seed);
  const optimizer = new Adam(model.params(), cfg.learningRate);
  const sampleRng = new Rng(Rng.derive(cfg.seed, 2));

  mkdirSync(cfg.outDir, { recursive: true });
  const metricsPath = join(cfg.outDir, "metrics.csv");
  const checkpointPath = join(cfg.outDir, "checkpoint.json");
  writeFileSync(metricsPath, CSV_HEADER);
  writeFileSync(join(cfg.outDir, "config.json"), JSON.stringify(cfg, undefined, 1) + "\n");
  log(
    `training on ${trainItems.length} records (${holdout.length} held out), ` +
      `base ${cfg.baseChannels}, crop ${cfg.cropSize}, batch ${cfg.batchSize}; ` +
      `deterministic for seed ${cfg.seed}`,
  );

  const steps = cfg.stepsPerEpoch ?? Math.ceil(trainItems.length / cfg.batchSize);
  const rows: EpochRow[] = [];
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    sampleRng.shuffle(trainItems);
    let cursor = 0;
    let lossSum = 0;
    let bce1 = 0;
    let dice1 = 0;
    let bce2 = 0;
    let dice2 = 0;
    for (let step = 0; step < steps; step++) {
      const batchItems: CorpusItem[] = [];
      for (let i = 0; i < cfg.batchSize; i++) {
        batchItems.push(trainItems[cursor]);
        cursor = (cursor + 1) % trainItems.length;
      }
      const batch = buildBatch(batchItems, cfg.cropSize, sampleRng);
      const [p1, p2] = model.forward(batch.x, true);
      const loss = dualLoss([p1, p2], [batch.vessel, batch.robot], cfg.headWeights);
      model.backward(loss.grads[0], loss.grads[1]);
      optimizer.step();
      lossSum += loss.total;
      bce1 += loss.heads[0].bce;
      dice1 += loss.heads[0].dice;
      bce2 += loss.heads[1].bce;
      dice2 += loss.heads[1].dice;
    }
    const val =
      holdout.length > 0 ? evaluateDice(model, holdout) : { vessel: NaN, robot: NaN };
    const row: EpochRow = {
      epoch,
      loss: lossSum / steps,
      bceVessel: bce1 / steps,
      diceLossVessel: dice1 / steps,
      bceRobot: bce2 / steps,
      diceLossRobot: dice2 / steps,
      valDiceVessel: val.vessel,
      valDiceRobot: val.robot,
    };
    rows.push(row);
    appendFileSync(
      metricsPath,
      `${row.epoch},${row.loss},${row.bceVessel},${row.diceLossVessel},` +
        `${row.bceRobot},${row.diceLossRobot},${row.valDiceVessel},${row.valDiceRobot}\n`,
    );
    log(
      `epoch ${epoch}: loss ${row.loss.toFixed(4)} ` +
        `val dice vessel ${row.valDiceVessel.toFixed(4)} robot ${row.valDiceRobot.toFixed(4)}`,
    );
  }

  saveCheckpoint(model, checkpointPath);
  return { checkpointPath, metricsPath, rows };
}
