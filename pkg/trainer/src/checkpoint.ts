/** JSON checkpoints: every model weight plus the action log-std, along
 * with a config snapshot, reloadable bit for bit. */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { ActorCritic, GridShape } from "./model.js";

export interface CheckpointMeta {
  grid: GridShape;
  scenario?: string;
  meanEpisodeReward?: number;
  iteration?: number;
  config?: object;
}

interface StoredWeight {
  shape: number[];
  values: number[];
}

export function saveCheckpoint(
  file: string,
  net: ActorCritic,
  meta: CheckpointMeta,
): void {
  const weights: StoredWeight[] = net.model.getWeights().map((w) => ({
    shape: w.shape.slice(),
    values: Array.from(w.dataSync()),
  }));
  const logStd = Array.from(net.logStd.dataSync());
  fs.mkdirSync(path.dirname(file), { recursive: true });
  fs.writeFileSync(file, JSON.stringify({ meta, weights, logStd }));
}

export function loadCheckpoint(file: string): {
  net: ActorCritic;
  meta: CheckpointMeta;
} {
  const raw = JSON.parse(fs.readFileSync(file, "utf-8")) as {
    meta: CheckpointMeta;
    weights: StoredWeight[];
    logStd: number[];
  };
  const net = new ActorCritic(raw.meta.grid);
  net.model.setWeights(
    raw.weights.map((w) => tf.tensor(w.values, w.shape)),
  );
  net.logStd.assign(tf.tensor1d(raw.logStd));
  return { net, meta: raw.meta };
}
