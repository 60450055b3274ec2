/** Training configuration: defaults, JSON loading, and validation. */

import { readFileSync } from "node:fs";
import { z } from "zod";
import { ConfigError } from "./tensor.js";

const trainConfigSchema = z.object({
  manifest: z.string().min(1),
  outDir: z.string().min(1),
  epochs: z.number().int().positive(),
  batchSize: z.number().int().positive(),
  cropSize: z
    .number()
    .int()
    .positive()
    .refine((v) => v % 16 === 0, { message: "cropSize must be divisible by 16" }),
  learningRate: z.number().positive(),
  seed: z.number().int().nonnegative(),
  baseChannels: z.number().int().positive(),
  headWeights: z.tuple([z.number().nonnegative(), z.number().nonnegative()]),
  holdoutFraction: z.number().min(0).max(0.9),
  stepsPerEpoch: z.number().int().positive().optional(),
});

export type TrainConfig = z.infer<typeof trainConfigSchema>;

export const TRAIN_DEFAULTS = {
  epochs: 10,
  batchSize: 8,
  cropSize: 64,
  learningRate: 1e-3,
  seed: 0,
  baseChannels: 16,
  headWeights: [1, 1] as [number, number],
  holdoutFraction: 0.1,
};

/** Validate a merged config object, raising ConfigError with field details. */
export function checkTrainConfig(raw: unknown): TrainConfig {
  const parsed = trainConfigSchema.safeParse(raw);
  if (!parsed.success) {
    const details = parsed.error.issues
      .map((i) => `${i.path.join(".") || "(root)"}: ${i.message}`)
      .join("; ");
    throw new ConfigError(`invalid training configuration: ${details}`);
  }
  if (parsed.data.headWeights[0] === 0 && parsed.data.headWeights[1] === 0) {
    throw new ConfigError("invalid training configuration: headWeights cannot both be zero");
  }
  return parsed.data;
}

/** Read a JSON config file to be merged beneath command-line flags. */
export function readConfigFile(path: string): Record<string, unknown> {
  let doc: unknown;
  try {
    doc = JSON.parse(readFileSync(path, "utf8"));
  } catch (err) {
    throw new ConfigError(`cannot read config ${path}: ${(err as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ConfigError(`config ${path} must hold a JSON object`);
  }
  return doc as Record<string, unknown>;
}
