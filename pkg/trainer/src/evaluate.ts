/**
 * Deterministic checkpoint evaluation: the action is the policy mean.
 *
 * Reports total episode passenger-minutes per seed and the percent
 * deviation from a zero-action (no-rebalance) baseline on the same seeds;
 * negative deviation is an improvement. Because observations and actions
 * are fixed-shape grid matrices, the same checkpoint evaluates unchanged
 * on scenarios of any scale that share the grid; a different grid is a
 * shape error. With --requests the totals are also reported as mean wait
 * per request.
 */

import * as fs from "node:fs";
import { parseArgs } from "node:util";

import { connectWithRetry } from "./client.js";
import { loadCheckpoint } from "./checkpoint.js";
import { ActorCritic } from "./model.js";

export interface EvalRow {
  seed: number;
  totalWait: number;
  baselineWait: number;
}

export interface EvalResult {
  rows: EvalRow[];
  meanWait: number;
  meanBaseline: number;
  eNrPct: number;
  actions: number[][][];
}

export async function evaluate(
  net: ActorCritic,
  host: string,
  port: number,
  scenario: string,
  seeds: number[],
): Promise<EvalResult> {
  const client = await connectWithRetry(host, port);
  const rows: EvalRow[] = [];
  const actions: number[][][] = [];
  try {
    for (const seed of seeds) {
      let obs = await client.reset(scenario, seed);
      if (obs.V.length !== net.cells) {
        throw new Error(
          `grid shape mismatch: checkpoint has ${net.cells} cells, ` +
            `scenario observation has ${obs.V.length}`,
        );
      }
      const seedActions: number[][] = [];
      let total = 0;
      while (!obs.done) {
        const { mean } = net.policy(obs);
        seedActions.push(mean);
        obs = await client.step(mean);
        total += obs.reward;
      }
      actions.push(seedActions);

      let baseline = 0;
      let b = await client.reset(scenario, seed);
      const zeros = new Array(net.cells).fill(0);
      while (!b.done) {
        b = await client.step(zeros);
        baseline += b.reward;
      }
      rows.push({ seed, totalWait: -total, baselineWait: -baseline });
    }
  } finally {
    await client.close();
  }
  const meanWait = rows.reduce((a, r) => a + r.totalWait, 0) / rows.length;
  const meanBaseline =
    rows.reduce((a, r) => a + r.baselineWait, 0) / rows.length;
  const eNrPct =
    meanBaseline > 0 ? (100 * (meanWait - meanBaseline)) / meanBaseline : 0;
  return { rows, meanWait, meanBaseline, eNrPct, actions };
}

function parseSeeds(text: string): number[] {
  if (text.includes("..")) {
    const [lo, hi] = text.split("..").map(Number);
    return Array.from({ length: hi - lo + 1 }, (_, i) => lo + i);
  }
  return text.split(",").map(Number);
}

export async function main(argv = process.argv.slice(2)): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      endpoint: { type: "string", default: "127.0.0.1:9999" },
      scenario: { type: "string", default: "canonical" },
      checkpoint: { type: "string" },
      seeds: { type: "string", default: "0..9" },
      requests: { type: "string" },
      "emit-actions": { type: "string" },
    },
  });
  if (!values.checkpoint) throw new Error("--checkpoint is required");
  const { net } = loadCheckpoint(values.checkpoint);
  const idx = values.endpoint!.lastIndexOf(":");
  const result = await evaluate(
    net,
    values.endpoint!.slice(0, idx),
    Number(values.endpoint!.slice(idx + 1)),
    values.scenario!,
    parseSeeds(values.seeds!),
  );
  console.log("seed,total_wait_pass_min,baseline_wait_pass_min");
  for (const row of result.rows) {
    console.log(`${row.seed},${row.totalWait},${row.baselineWait}`);
  }
  const nReq = values.requests ? Number(values.requests) : null;
  const meanTxt = nReq
    ? ` mean wait ${(result.meanWait / nReq).toFixed(3)} min/request` +
      ` (baseline ${(result.meanBaseline / nReq).toFixed(3)})`
    : "";
  console.log(
    `rl: total ${result.meanWait.toFixed(1)} vs baseline ` +
      `${result.meanBaseline.toFixed(1)} passenger-minutes, ` +
      `E_NR ${result.eNrPct.toFixed(1)}%${meanTxt}`,
  );
  if (values["emit-actions"]) {
    fs.writeFileSync(
      values["emit-actions"],
      JSON.stringify(result.actions[0]),
    );
    console.log(`wrote ${result.actions[0].length} action matrices (seed ` +
      `${result.rows[0].seed}) to ${values["emit-actions"]}`);
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("evaluate.js") || entry.endsWith("evaluate.ts")) {
  main().catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
