/**
 * Release acceptance gate. Trains the dual-head network at toy scale on a
 * generated phantom corpus, then checks every pinned criterion against
 * seeded held-out corpora, printing one [PASS]/[FAIL] line per criterion.
 *
 * Everything here drives the packaged interfaces: the phantom generator and
 * pose perceiver through their CLI, and this package through dist/cli.js.
 */

import { spawn, spawnSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { readPgm } from "../src/pgm.js";

const LONG = 1_800_000;
const segnetCli = fileURLToPath(new URL("../dist/cli.js", import.meta.url));
const tmp = mkdtempSync(join(tmpdir(), "segnet-accept-"));
afterAll(() => rmSync(tmp, { recursive: true, force: true }));

const trainDir = join(tmp, "train500");
const heldoutDir = join(tmp, "heldout500");
const e2eDir = join(tmp, "e2e100");
const runDir = join(tmp, "run");
const predDir = join(tmp, "pred100");
const reportsDir = join(tmp, "reports");

// Async so multi-minute child processes (training, eval) don't block the
// event loop; vitest's worker must keep answering RPC pings meanwhile.
function run(cmd: string, args: string[], okStatus: number[] = [0]): Promise<string> {
  return new Promise((resolve, reject) => {
    const child = spawn(cmd, args, { stdio: ["ignore", "pipe", "pipe"] });
    let out = "";
    let err = "";
    child.stdout.on("data", (chunk) => (out += chunk));
    child.stderr.on("data", (chunk) => (err += chunk));
    child.on("error", reject);
    child.on("close", (status) => {
      if (okStatus.includes(status ?? -1)) resolve(out);
      else reject(new Error(`${cmd} ${args.join(" ")} exited ${status}:\n${err}`));
    });
  });
}

function gate(name: string, ok: boolean, detail: string): void {
  console.log(`[${ok ? "PASS" : "FAIL"}] ${name}: ${detail}`);
  expect(ok, `${name}: ${detail}`).toBe(true);
}

interface MetricsRow {
  epoch: number;
  loss: number;
  valDiceVessel: number;
  valDiceRobot: number;
}

function readMetrics(path: string): MetricsRow[] {
  const lines = readFileSync(path, "utf8").trim().split("\n").slice(1);
  return lines.map((line) => {
    const f = line.split(",").map(Number);
    return { epoch: f[0], loss: f[1], valDiceVessel: f[6], valDiceRobot: f[7] };
  });
}

beforeAll(async () => {
  for (const [dir, count, seed] of [
    [trainDir, 500, 41001],
    [heldoutDir, 500, 41002],
    [e2eDir, 100, 41003],
  ] as const) {
    await run("vesselpose", [
      "generate",
      "--count", String(count),
      "--seed", String(seed),
      "--profile", "small",
      "--states", "ABD",
      "--frames",
      "--out", dir,
    ]);
  }
  await run("node", [
    segnetCli,
    "train",
    "--manifest", join(trainDir, "manifest.jsonl"),
    "--out", runDir,
    "--epochs", "10",
    "--batch-size", "8",
    "--crop-size", "32",
    "--base-channels", "8",
    "--learning-rate", "3e-3",
    "--seed", "12",
    "--holdout-fraction", "0.05",
  ]);
}, LONG);

describe("acceptance", () => {
  it("criterion 1: held-out dice reaches 0.9 on both heads", { timeout: LONG }, async () => {
    const reportPath = join(tmp, "heldout-eval.json");
    await run("node", [
      segnetCli,
      "eval",
      "--checkpoint", join(runDir, "checkpoint.json"),
      "--manifest", join(heldoutDir, "manifest.jsonl"),
      "--report", reportPath,
    ]);
    const report = JSON.parse(readFileSync(reportPath, "utf8"));
    const v = report.meanDice.vessel as number;
    const r = report.meanDice.robot as number;
    gate(
      "heldout-dice",
      report.frames === 500 && v >= 0.9 && r >= 0.9,
      `vessel ${v.toFixed(4)} robot ${r.toFixed(4)} over ${report.frames} frames (threshold 0.90)`,
    );
  });

  it("criterion 2: training loss decreases over the first ten epochs", () => {
    const rows = readMetrics(join(runDir, "metrics.csv"));
    const first = rows[0].loss;
    const last = rows[9].loss;
    gate(
      "loss-decrease",
      rows.length === 10 && last < first,
      `epoch 0 loss ${first.toFixed(4)} -> epoch 9 loss ${last.toFixed(4)}`,
    );
  });

  it("criterion 3: predicted masks keep frame dimensions and round-trip as masks", { timeout: LONG }, async () => {
    await run("node", [
      segnetCli,
      "infer",
      "--checkpoint", join(runDir, "checkpoint.json"),
      "--manifest", join(e2eDir, "manifest.jsonl"),
      "--out", predDir,
    ]);
    let checked = 0;
    let shapesOk = true;
    for (const stem of ["0000", "0042", "0099"]) {
      const frame = readPgm(join(e2eDir, "frames", `${stem}.pgm`));
      for (const kind of ["vessel", "robot"]) {
        const maskPath = join(predDir, "masks", `${stem}_${kind}.pgm`);
        const mask = readPgm(maskPath);
        shapesOk &&= mask.width === frame.width && mask.height === frame.height;
        const probe = spawnSync(
          "python3",
          [
            "-c",
            "import sys\n" +
              "from vesselpose.grid import load_mask\n" +
              "g = load_mask(sys.argv[1])\n" +
              "print(g.cells.shape[1], g.cells.shape[0], int(g.cells.sum()))",
            maskPath,
          ],
          { encoding: "utf8" },
        );
        expect(probe.status, probe.stderr).toBe(0);
        const [w, h, fg] = probe.stdout.trim().split(" ").map(Number);
        shapesOk &&= w === frame.width && h === frame.height;
        let ours = 0;
        for (const px of mask.pixels) ours += px >= 128 ? 1 : 0;
        shapesOk &&= fg === ours;
        checked++;
      }
    }
    gate(
      "mask-roundtrip",
      checked === 6 && shapesOk,
      `${checked} predicted masks match frame dimensions and reload identically`,
    );
  });

  it("criterion 4: perceiving predicted masks recovers states at 0.85 accuracy", { timeout: LONG }, async () => {
    const cfgPath = join(tmp, "small.json");
    await run("vesselpose", ["config", "init", "--profile", "small", "--out", cfgPath]);
    // Records whose predicted masks defeat the perceiver exit with status 2
    // and no report; they count as misclassifications below.
    await run(
      "vesselpose",
      [
        "perceive",
        "--manifest", join(predDir, "manifest.jsonl"),
        "--out", reportsDir,
        "--config", cfgPath,
      ],
      [0, 2],
    );
    const manifest = readFileSync(join(e2eDir, "manifest.jsonl"), "utf8")
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line));
    let correct = 0;
    for (const rec of manifest) {
      const reportPath = join(reportsDir, `${String(rec.id).padStart(4, "0")}.json`);
      if (!existsSync(reportPath)) continue;
      const report = JSON.parse(readFileSync(reportPath, "utf8"));
      if (report.state === rec.truth.state_true) correct++;
    }
    const accuracy = correct / manifest.length;
    gate(
      "end-to-end-state-accuracy",
      manifest.length === 100 && accuracy >= 0.85,
      `${correct}/${manifest.length} states correct (${accuracy.toFixed(3)}, threshold 0.85)`,
    );
  });
});
