/**
 * Clipped-surrogate PPO update over rollout batches.
 *
 * The importance ratio is computed against log probabilities recorded at
 * collection time (the frozen old policy); after the K-epoch update the
 * acting policy simply continues from the new parameters, which realizes
 * the old <- new sync. Advantages are normalized per update; the value head
 * is regressed on discounted returns. A non-finite loss aborts the update
 * with diagnostics.
 */

import * as tf from "@tensorflow/tfjs";

import { ActorCritic, StepObservation } from "./model.js";

export interface PpoConfig {
  clipEpsilon: number;
  gaeLambda: number;
  gamma: number;
  minibatchSize: number;
  epochs: number;
  valueCoef: number;
  learningRate: number;
}

export const DEFAULT_CONFIG: PpoConfig = {
  clipEpsilon: 0.3,
  gaeLambda: 1.0,
  gamma: 0.99,
  minibatchSize: 128,
  epochs: 30,
  valueCoef: 0.5,
  learningRate: 3e-4,
};

export interface Batch {
  observations: StepObservation[];
  actions: number[][];
  logProbsOld: number[];
  advantages: number[];
  returns: number[];
}

export interface UpdateStats {
  policyLoss: number;
  valueLoss: number;
  approxKl: number;
  entropy: number;
}

export function normalized(values: number[]): number[] {
  if (values.length < 2) return values.slice();
  const mean = values.reduce((a, b) => a + b, 0) / values.length;
  const varsum = values.reduce((a, b) => a + (b - mean) ** 2, 0);
  const std = Math.sqrt(varsum / values.length) + 1e-8;
  return values.map((v) => (v - mean) / std);
}

/** Per-sample clipped surrogate; exported for direct property tests. */
export function surrogateTerms(
  ratio: tf.Tensor1D,
  advantages: tf.Tensor1D,
  epsilon: number,
): tf.Tensor1D {
  const unclipped = ratio.mul(advantages);
  const clipped = ratio.clipByValue(1 - epsilon, 1 + epsilon).mul(advantages);
  return tf.minimum(unclipped, clipped) as tf.Tensor1D;
}

export class PpoUpdater {
  private readonly optimizer: tf.Optimizer;

  constructor(
    readonly net: ActorCritic,
    readonly config: PpoConfig = DEFAULT_CONFIG,
  ) {
    this.optimizer = tf.train.adam(config.learningRate);
  }

  /** One full PPO update (K epochs of minibatch ascent). */
  update(batch: Batch, rng: { uniform(): number }): UpdateStats {
    const n = batch.observations.length;
    if (n === 0) throw new Error("empty batch");
    const adv = normalized(batch.advantages);
    const order = [...Array(n).keys()];
    let lastPolicyLoss = 0;
    let lastValueLoss = 0;

    for (let epoch = 0; epoch < this.config.epochs; epoch++) {
      // Fisher-Yates with the caller's rng keeps updates reproducible
      for (let i = order.length - 1; i > 0; i--) {
        const j = Math.floor(rng.uniform() * (i + 1));
        [order[i], order[j]] = [order[j], order[i]];
      }
      for (let start = 0; start < n; start += this.config.minibatchSize) {
        const idx = order.slice(start, start + this.config.minibatchSize);
        const stats = this.minibatchStep(batch, adv, idx);
        lastPolicyLoss = stats.policyLoss;
        lastValueLoss = stats.valueLoss;
      }
    }

    const approxKl = this.approxKl(batch);
    return {
      policyLoss: lastPolicyLoss,
      valueLoss: lastValueLoss,
      approxKl,
      entropy: this.net.entropy(),
    };
  }

  private minibatchStep(
    batch: Batch,
    adv: number[],
    idx: number[],
  ): { policyLoss: number; valueLoss: number } {
    const obs = idx.map((i) => batch.observations[i]);
    const cells = this.net.cells;
    const actions = tf.tensor2d(
      idx.map((i) => batch.actions[i]),
      [idx.length, cells],
    );
    const logpOld = tf.tensor1d(idx.map((i) => batch.logProbsOld[i]));
    const advT = tf.tensor1d(idx.map((i) => adv[i]));
    const retT = tf.tensor1d(idx.map((i) => batch.returns[i]));
    const [obsT, tT] = this.net.obsTensor(obs);

    let policyLossOut = 0;
    let valueLossOut = 0;
    const loss = this.optimizer.minimize(
      () => {
        const [mean, value] = this.net.forward(obsT, tT);
        const logp = this.net.logProb(actions, mean);
        const ratio = logp.sub(logpOld).exp() as tf.Tensor1D;
        const surrogate = surrogateTerms(ratio, advT, this.config.clipEpsilon);
        const policyLoss = surrogate.mean().neg();
        const valueLoss = value.sub(retT).square().mean();
        policyLossOut = policyLoss.dataSync()[0];
        valueLossOut = valueLoss.dataSync()[0];
        return policyLoss.add(valueLoss.mul(this.config.valueCoef)) as tf.Scalar;
      },
      true,
      this.net.trainables,
    );
    const lossValue = loss!.dataSync()[0];
    tf.dispose([actions, logpOld, advT, retT, obsT, tT, loss!]);
    if (!Number.isFinite(lossValue)) {
      throw new Error(
        `non-finite loss ${lossValue} (policy=${policyLossOut}, value=${valueLossOut})`,
      );
    }
    return { policyLoss: policyLossOut, valueLoss: valueLossOut };
  }

  /** Mean(logp_old - logp_new): zero right after a parameter sync. */
  approxKl(batch: Batch): number {
    return tf.tidy(() => {
      const [obsT, tT] = this.net.obsTensor(batch.observations);
      const [mean] = this.net.forward(obsT, tT);
      const actions = tf.tensor2d(batch.actions, [
        batch.actions.length,
        this.net.cells,
      ]);
      const logp = this.net.logProb(actions, mean);
      const logpOld = tf.tensor1d(batch.logProbsOld);
      return logpOld.sub(logp).mean().dataSync()[0];
    });
  }
}
