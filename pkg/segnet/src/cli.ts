#!/usr/bin/env node
/**
 * Command line around the segmentation network: `train` fits a checkpoint
 * on a generated corpus, `infer` writes predicted masks for frames, and
 * `eval` scores a checkpoint against reference masks.
 *
 * Exit codes: 0 on success, 2 for configuration/shape/data errors, 1 for
 * unexpected failures.
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { loadCheckpoint } from "./checkpoint.js";
import { TRAIN_DEFAULTS, checkTrainConfig, readConfigFile } from "./config.js";
import { evaluateCheckpoint, writeEvalReport } from "./evaluate.js";
import { inferFrameFile, inferManifest } from "./infer.js";
import { PgmError } from "./pgm.js";
import { train } from "./train.js";
import { ConfigError, ShapeError } from "./tensor.js";

function fail(err: unknown): never {
  if (err instanceof ConfigError || err instanceof ShapeError || err instanceof PgmError) {
    console.error(`error: ${err.message}`);
    process.exit(2);
  }
  console.error(err);
  process.exit(1);
}

function parseHeadWeights(text: string): [number, number] {
  const parts = text.split(",").map((p) => Number(p.trim()));
  if (parts.length !== 2 || parts.some((v) => !Number.isFinite(v))) {
    throw new ConfigError(`head weights must be two numbers like "1,1", got "${text}"`);
  }
  return [parts[0], parts[1]];
}

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .scriptName("segnet")
    .strict()
    .demandCommand(1, "specify a command: train, infer, or eval")
    .command(
      "train",
      "fit the dual-head network on a corpus and write a run directory",
      (y) =>
        y
          .option("manifest", { type: "string", describe: "corpus manifest.jsonl with frames" })
          .option("out", { type: "string", describe: "run directory for checkpoint and metrics" })
          .option("config", { type: "string", describe: "JSON config file; flags override it" })
          .option("epochs", { type: "number" })
          .option("batch-size", { type: "number" })
          .option("crop-size", { type: "number", describe: "square crop edge, divisible by 16" })
          .option("learning-rate", { type: "number" })
          .option("seed", { type: "number" })
          .option("base-channels", { type: "number", describe: "channels of the first stage" })
          .option("head-weights", {
            type: "string",
            describe: 'loss weights "vessel,robot", e.g. "1,1"',
          })
          .option("holdout-fraction", { type: "number" })
          .option("steps-per-epoch", { type: "number" }),
      (argv) => {
        try {
          const fromFile = argv.config ? readConfigFile(argv.config) : {};
          const merged = {
            ...TRAIN_DEFAULTS,
            ...fromFile,
            ...(argv.manifest !== undefined && { manifest: argv.manifest }),
            ...(argv.out !== undefined && { outDir: argv.out }),
            ...(argv.epochs !== undefined && { epochs: argv.epochs }),
            ...(argv.batchSize !== undefined && { batchSize: argv.batchSize }),
            ...(argv.cropSize !== undefined && { cropSize: argv.cropSize }),
            ...(argv.learningRate !== undefined && { learningRate: argv.learningRate }),
            ...(argv.seed !== undefined && { seed: argv.seed }),
            ...(argv.baseChannels !== undefined && { baseChannels: argv.baseChannels }),
            ...(argv.headWeights !== undefined && {
              headWeights: parseHeadWeights(argv.headWeights),
            }),
            ...(argv.holdoutFraction !== undefined && { holdoutFraction: argv.holdoutFraction }),
            ...(argv.stepsPerEpoch !== undefined && { stepsPerEpoch: argv.stepsPerEpoch }),
          };
          const cfg = checkTrainConfig(merged);
          const result = train(cfg, (line) => console.log(line));
          console.log(`checkpoint: ${result.checkpointPath}`);
          console.log(`metrics: ${result.metricsPath}`);
        } catch (err) {
          fail(err);
        }
      },
    )
    .command(
      "infer",
      "write predicted vessel and robot masks for frames",
      (y) =>
        y
          .option("checkpoint", { type: "string", demandOption: true })
          .option("frame", { type: "string", describe: "a single frame PGM" })
          .option("manifest", {
            type: "string",
            describe: "corpus manifest; predicts masks for every frame",
          })
          .option("out", { type: "string", demandOption: true })
          .conflicts("frame", "manifest"),
      (argv) => {
        try {
          const model = loadCheckpoint(argv.checkpoint);
          if (argv.frame) {
            const out = inferFrameFile(model, argv.frame, argv.out);
            console.log(out.vesselPath);
            console.log(out.robotPath);
          } else if (argv.manifest) {
            const n = inferManifest(model, argv.manifest, argv.out, (line) =>
              console.log(line),
            );
            console.log(`wrote masks for ${n} frames under ${argv.out}`);
          } else {
            throw new ConfigError("provide --frame or --manifest");
          }
        } catch (err) {
          fail(err);
        }
      },
    )
    .command(
      "eval",
      "score a checkpoint against a corpus with reference masks",
      (y) =>
        y
          .option("checkpoint", { type: "string", demandOption: true })
          .option("manifest", { type: "string", demandOption: true })
          .option("report", { type: "string", describe: "write the full report as JSON" }),
      (argv) => {
        try {
          const model = loadCheckpoint(argv.checkpoint);
          const report = evaluateCheckpoint(model, argv.manifest, (line) => console.log(line));
          if (argv.report) writeEvalReport(report, argv.report);
          console.log(
            `frames ${report.frames} ` +
              `mean dice vessel ${report.meanDice.vessel.toFixed(4)} ` +
              `robot ${report.meanDice.robot.toFixed(4)}`,
          );
        } catch (err) {
          fail(err);
        }
      },
    )
    .parseAsync();
}

main().catch(fail);
