/**
 * Rollout collection over parallel protocol sessions.
 *
 * Each actor owns one connection and a private RNG, so trajectories are
 * reproducible no matter how socket replies interleave. Episodes are
 * collected whole; the per-step reward fed to GAE is the raw reward scaled
 * by a running standard deviation that is updated once per iteration.
 */

import * as tf from "@tensorflow/tfjs";

import { EnvClient, Observation } from "./client.js";
import { discountedReturns, gae } from "./gae.js";
import { ActorCritic, StepObservation } from "./model.js";
import { Batch, PpoConfig } from "./ppo.js";
import { Rng } from "./rng.js";

export class RewardScaler {
  private count = 0;
  private mean = 0;
  private m2 = 0;

  updateMany(rewards: number[]): void {
    for (const r of rewards) {
      this.count += 1;
      const d = r - this.mean;
      this.mean += d / this.count;
      this.m2 += d * (r - this.mean);
    }
  }

  get scale(): number {
    if (this.count < 2) return 1;
    const std = Math.sqrt(this.m2 / (this.count - 1));
    return std > 1e-6 ? std : 1;
  }
}

export interface RolloutResult {
  batch: Batch;
  episodeRewards: number[];
  rawRewards: number[];
}

interface EpisodeTrace {
  observations: StepObservation[];
  actions: number[][];
  logProbs: number[];
  values: number[];
  rawRewards: number[];
}

function toStepObservation(obs: Observation): StepObservation {
  return { V: obs.V, R: obs.R, tNorm: obs.tNorm };
}

/** Run one full episode; deterministic given the actor's rng state. */
export async function runEpisode(
  net: ActorCritic,
  client: EnvClient,
  scenario: string,
  seed: number,
  rng: Rng | null,
): Promise<EpisodeTrace> {
  const trace: EpisodeTrace = {
    observations: [],
    actions: [],
    logProbs: [],
    values: [],
    rawRewards: [],
  };
  let obs = toStepObservation(await client.reset(scenario, seed));
  let done = false;
  while (!done) {
    const { mean, std, value } = net.policy(obs);
    const action = rng
      ? mean.map((m, i) => m + std[i] * rng.normal())
      : mean.slice();
    const logProb = tf.tidy(() => {
      const a = tf.tensor2d([action]);
      const m = tf.tensor2d([mean]);
      return net.logProb(a, m).dataSync()[0];
    });
    const reply = await client.step(action);
    trace.observations.push(obs);
    trace.actions.push(action);
    trace.logProbs.push(logProb);
    trace.values.push(value);
    trace.rawRewards.push(reply.reward);
    obs = toStepObservation(reply);
    done = reply.done;
  }
  return trace;
}

export async function collectRollout(
  net: ActorCritic,
  clients: EnvClient[],
  scenario: string,
  episodesPerActor: number,
  seedBase: number,
  config: PpoConfig,
  scaler: RewardScaler,
  actorRngs: Rng[],
): Promise<RolloutResult> {
  const traces: EpisodeTrace[][] = await Promise.all(
    clients.map(async (client, actor) => {
      const out: EpisodeTrace[] = [];
      for (let e = 0; e < episodesPerActor; e++) {
        const seed = seedBase + actor * episodesPerActor + e;
        out.push(await runEpisode(net, client, scenario, seed, actorRngs[actor]));
      }
      return out;
    }),
  );

  const flat = traces.flat();
  const rawRewards = flat.flatMap((t) => t.rawRewards);
  scaler.updateMany(rawRewards);
  const scale = scaler.scale;

  const batch: Batch = {
    observations: [],
    actions: [],
    logProbsOld: [],
    advantages: [],
    returns: [],
  };
  const episodeRewards: number[] = [];
  for (const trace of flat) {
    const scaled = trace.rawRewards.map((r) => r / scale);
    const adv = gae(scaled, trace.values, config.gamma, config.gaeLambda, 0);
    const ret = discountedReturns(scaled, config.gamma, 0);
    batch.observations.push(...trace.observations);
    batch.actions.push(...trace.actions);
    batch.logProbsOld.push(...trace.logProbs);
    batch.advantages.push(...adv);
    batch.returns.push(...ret);
    episodeRewards.push(trace.rawRewards.reduce((a, b) => a + b, 0));
  }
  return { batch, episodeRewards, rawRewards };
}
