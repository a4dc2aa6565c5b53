/**
 * PPO training entry point.
 *
 * Runs N parallel protocol sessions, collects whole episodes up to the
 * per-iteration step budget, applies the clipped-surrogate update, logs a
 * delimited line per iteration, and keeps the checkpoint with the best
 * mean episode reward (plus the latest one).
 *
 *   npm run train -- --endpoint 127.0.0.1:9999 --scenario canonical \
 *       --grid 5x5 --iterations 200 --out runs/ppo
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { parseArgs } from "node:util";

import { connectWithRetry, EnvClient } from "./client.js";
import { saveCheckpoint } from "./checkpoint.js";
import { ActorCritic } from "./model.js";
import { DEFAULT_CONFIG, PpoConfig, PpoUpdater } from "./ppo.js";
import { collectRollout, RewardScaler } from "./rollout.js";
import { Rng } from "./rng.js";

export interface TrainOptions {
  host: string;
  port: number;
  scenario: string;
  grid: { nX: number; nY: number };
  iterations: number;
  actors: number;
  stepsPerIteration: number;
  episodeSteps: number;
  seed: number;
  outDir: string;
  config: PpoConfig;
  initialLogStd: number;
  log?: (line: string) => void;
}

export interface TrainOutcome {
  bestMeanReward: number;
  bestIteration: number;
  lastMeanReward: number;
  bestCheckpoint: string;
  lastCheckpoint: string;
  logFile: string;
}

export async function train(opts: TrainOptions): Promise<TrainOutcome> {
  const net = new ActorCritic(opts.grid, opts.seed, opts.initialLogStd);
  const updater = new PpoUpdater(net, opts.config);
  const scaler = new RewardScaler();
  const shuffleRng = new Rng(opts.seed * 7919 + 17);
  const actorRngs = Array.from(
    { length: opts.actors },
    (_, i) => new Rng(opts.seed * 104729 + i + 1),
  );
  const episodesPerActor = Math.max(
    1,
    Math.ceil(opts.stepsPerIteration / opts.actors / opts.episodeSteps),
  );

  const clients: EnvClient[] = [];
  for (let i = 0; i < opts.actors; i++) {
    clients.push(await connectWithRetry(opts.host, opts.port));
  }

  fs.mkdirSync(opts.outDir, { recursive: true });
  const logFile = path.join(opts.outDir, "training_log.csv");
  fs.writeFileSync(
    logFile,
    "iteration,mean_episode_reward,approx_kl,entropy,policy_loss,value_loss\n",
  );
  const bestCheckpoint = path.join(opts.outDir, "best.json");
  const lastCheckpoint = path.join(opts.outDir, "last.json");

  let best = -Infinity;
  let bestIteration = 0;
  let lastMean = -Infinity;
  try {
    for (let iter = 1; iter <= opts.iterations; iter++) {
      const rollout = await collectRollout(
        net,
        clients,
        opts.scenario,
        episodesPerActor,
        opts.seed * 1_000_000 + iter * 1000,
        opts.config,
        scaler,
        actorRngs,
      );
      const meanReward =
        rollout.episodeRewards.reduce((a, b) => a + b, 0) /
        rollout.episodeRewards.length;
      const stats = updater.update(rollout.batch, shuffleRng);
      lastMean = meanReward;
      const line =
        `${iter},${meanReward.toFixed(3)},${stats.approxKl.toFixed(6)},` +
        `${stats.entropy.toFixed(4)},${stats.policyLoss.toFixed(6)},` +
        `${stats.valueLoss.toFixed(6)}`;
      fs.appendFileSync(logFile, line + "\n");
      opts.log?.(line);
      const meta = {
        grid: opts.grid,
        scenario: opts.scenario,
        meanEpisodeReward: meanReward,
        iteration: iter,
        config: opts.config as unknown as object,
      };
      saveCheckpoint(lastCheckpoint, net, meta);
      if (meanReward > best) {
        best = meanReward;
        bestIteration = iter;
        saveCheckpoint(bestCheckpoint, net, meta);
      }
    }
  } finally {
    await Promise.all(clients.map((c) => c.close()));
  }
  return {
    bestMeanReward: best,
    bestIteration,
    lastMeanReward: lastMean,
    bestCheckpoint,
    lastCheckpoint,
    logFile,
  };
}

function parseEndpoint(text: string): { host: string; port: number } {
  const idx = text.lastIndexOf(":");
  return { host: text.slice(0, idx), port: Number(text.slice(idx + 1)) };
}

function parseGrid(text: string): { nX: number; nY: number } {
  const [nX, nY] = text.split("x").map(Number);
  return { nX, nY };
}

export async function main(argv = process.argv.slice(2)): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      endpoint: { type: "string", default: "127.0.0.1:9999" },
      scenario: { type: "string", default: "canonical" },
      grid: { type: "string", default: "5x5" },
      iterations: { type: "string", default: "200" },
      actors: { type: "string", default: "4" },
      steps: { type: "string", default: "480" },
      "episode-steps": { type: "string", default: "24" },
      seed: { type: "string", default: "1" },
      out: { type: "string", default: "runs/ppo" },
      lr: { type: "string", default: String(DEFAULT_CONFIG.learningRate) },
      clip: { type: "string", default: String(DEFAULT_CONFIG.clipEpsilon) },
      gamma: { type: "string", default: String(DEFAULT_CONFIG.gamma) },
      lambda: { type: "string", default: String(DEFAULT_CONFIG.gaeLambda) },
      minibatch: { type: "string", default: String(DEFAULT_CONFIG.minibatchSize) },
      epochs: { type: "string", default: String(DEFAULT_CONFIG.epochs) },
      "init-log-std": { type: "string", default: "-0.5" },
    },
  });
  const endpoint = parseEndpoint(values.endpoint!);
  const outcome = await train({
    host: endpoint.host,
    port: endpoint.port,
    scenario: values.scenario!,
    grid: parseGrid(values.grid!),
    iterations: Number(values.iterations),
    actors: Number(values.actors),
    stepsPerIteration: Number(values.steps),
    episodeSteps: Number(values["episode-steps"]),
    seed: Number(values.seed),
    outDir: values.out!,
    initialLogStd: Number(values["init-log-std"]),
    config: {
      ...DEFAULT_CONFIG,
      learningRate: Number(values.lr),
      clipEpsilon: Number(values.clip),
      gamma: Number(values.gamma),
      gaeLambda: Number(values.lambda),
      minibatchSize: Number(values.minibatch),
      epochs: Number(values.epochs),
    },
    log: (line) => console.log(line),
  });
  console.log(
    `best mean episode reward ${outcome.bestMeanReward.toFixed(3)} ` +
      `at iteration ${outcome.bestIteration} -> ${outcome.bestCheckpoint}`,
  );
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("train.js") || entry.endsWith("train.ts")) {
  main().catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
