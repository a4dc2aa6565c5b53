import * as tf from "@tensorflow/tfjs";
import { describe, expect, it } from "vitest";

import { ActorCritic, LOG_2PI, StepObservation } from "../src/model.js";
import { Batch, DEFAULT_CONFIG, PpoUpdater, surrogateTerms } from "../src/ppo.js";
import { Rng } from "../src/rng.js";

const GRID = { nX: 2, nY: 2 };

function randomObs(rng: Rng): StepObservation {
  return {
    V: Array.from({ length: 4 }, () => Math.floor(rng.uniform() * 5)),
    R: Array.from({ length: 4 }, () => Math.floor(rng.uniform() * 3)),
    tNorm: rng.uniform(),
  };
}

/** Batch whose old log-probs were computed by the same network (a sync). */
function syncedBatch(net: ActorCritic, rng: Rng, n: number): Batch {
  const batch: Batch = {
    observations: [],
    actions: [],
    logProbsOld: [],
    advantages: [],
    returns: [],
  };
  for (let i = 0; i < n; i++) {
    const obs = randomObs(rng);
    const { mean, std } = net.policy(obs);
    const action = mean.map((m, c) => m + std[c] * rng.normal());
    const logp = tf.tidy(
      () =>
        net
          .logProb(tf.tensor2d([action]), tf.tensor2d([mean]))
          .dataSync()[0],
    );
    batch.observations.push(obs);
    batch.actions.push(action);
    batch.logProbsOld.push(logp);
    batch.advantages.push(rng.normal());
    batch.returns.push(rng.normal());
  }
  return batch;
}

describe("importance ratio", () => {
  it("equals one for every sample immediately after a sync", () => {
    const net = new ActorCritic(GRID, 3);
    const rng = new Rng(42);
    const batch = syncedBatch(net, rng, 16);
    const ratios = tf.tidy(() => {
      const [obsT, tT] = net.obsTensor(batch.observations);
      const [mean] = net.forward(obsT, tT);
      const logp = net.logProb(tf.tensor2d(batch.actions), mean);
      return Array.from(
        logp.sub(tf.tensor1d(batch.logProbsOld)).exp().dataSync(),
      );
    });
    for (const r of ratios) {
      expect(Math.abs(r - 1)).toBeLessThan(1e-6);
    }
    const updater = new PpoUpdater(net);
    expect(Math.abs(updater.approxKl(batch))).toBeLessThan(1e-6);
    net.dispose();
  });
});

describe("clipped surrogate", () => {
  it("clipped objective never exceeds the unclipped one for positive advantage", () => {
    const rng = new Rng(7);
    const ratios = Array.from({ length: 200 }, () => 0.2 + rng.uniform() * 2.5);
    const advs = Array.from({ length: 200 }, () => rng.uniform() * 3);
    const surr = tf.tidy(() =>
      Array.from(
        surrogateTerms(tf.tensor1d(ratios), tf.tensor1d(advs), 0.3).dataSync(),
      ),
    );
    ratios.forEach((r, i) => {
      expect(surr[i]).toBeLessThanOrEqual(r * advs[i] + 1e-6);
      const clipped = Math.min(Math.max(r, 0.7), 1.3) * advs[i];
      expect(surr[i]).toBeCloseTo(Math.min(r * advs[i], clipped), 5);
    });
  });

  it("gradient matches float64 central finite differences within 1e-4 relative", () => {
    // tiny linear policy: mean = W x + b over 2 cells, fixed sigma
    const W0 = [
      [0.3, -0.2],
      [0.1, 0.4],
      [-0.5, 0.2],
    ];
    const b0 = [0.05, -0.1];
    const X = [
      [1.0, 0.5, -0.3],
      [0.2, -1.0, 0.8],
      [0.6, 0.1, 0.9],
      [-0.4, 0.7, 0.2],
    ];
    const A = [
      [0.5, -0.2],
      [1.2, 0.1],
      [-0.3, 0.8],
      [0.4, 0.4],
    ];
    const adv = [1.5, -0.7, 0.9, -1.2];
    const logpOld = [-2.1, -1.8, -2.4, -1.9];
    const sigma = 0.8;
    const eps = 0.3;

    const forward64 = (W: number[][], b: number[]): number => {
      let total = 0;
      for (let i = 0; i < X.length; i++) {
        const mean = [0, 1].map(
          (c) => X[i].reduce((s, x, k) => s + x * W[k][c], 0) + b[c],
        );
        let logp = 0;
        for (let c = 0; c < 2; c++) {
          const z = (A[i][c] - mean[c]) / sigma;
          logp += -0.5 * (z * z + 2 * Math.log(sigma) + LOG_2PI);
        }
        const ratio = Math.exp(logp - logpOld[i]);
        const clipped = Math.min(Math.max(ratio, 1 - eps), 1 + eps);
        total += Math.min(ratio * adv[i], clipped * adv[i]);
      }
      return -total / X.length;
    };

    const Wv = tf.variable(tf.tensor2d(W0));
    const bv = tf.variable(tf.tensor1d(b0));
    const loss = () =>
      tf.tidy(() => {
        const mean = tf.tensor2d(X).matMul(Wv).add(bv);
        const z = tf.tensor2d(A).sub(mean).div(sigma);
        const logp = z
          .square()
          .add(2 * Math.log(sigma) + LOG_2PI)
          .mul(-0.5)
          .sum(1) as tf.Tensor1D;
        const ratio = logp.sub(tf.tensor1d(logpOld)).exp() as tf.Tensor1D;
        const surr = surrogateTerms(ratio, tf.tensor1d(adv), eps);
        return surr.mean().neg() as tf.Scalar;
      });
    const grads = tf.variableGrads(loss, [Wv, bv]);
    const gW = grads.grads[Wv.name].arraySync() as number[][];

    const h = 1e-5;
    for (let k = 0; k < 3; k++) {
      for (let c = 0; c < 2; c++) {
        const Wp = W0.map((r) => r.slice());
        const Wm = W0.map((r) => r.slice());
        Wp[k][c] += h;
        Wm[k][c] -= h;
        const fd = (forward64(Wp, b0) - forward64(Wm, b0)) / (2 * h);
        const rel = Math.abs(gW[k][c] - fd) / Math.max(Math.abs(fd), 1e-8);
        expect(rel).toBeLessThan(1e-4);
      }
    }
    tf.dispose([Wv, bv, grads.grads[Wv.name], grads.grads[bv.name]]);
  });
});

describe("ppo update", () => {
  it("moves the action mean toward the sampled action when advantage > 0", () => {
    const net = new ActorCritic(GRID, 11);
    const rng = new Rng(5);
    const obs = randomObs(rng);
    const before = net.policy(obs);
    const action = before.mean.map((m) => m + 0.5);
    const logp = tf.tidy(
      () =>
        net
          .logProb(tf.tensor2d([action]), tf.tensor2d([before.mean]))
          .dataSync()[0],
    );
    const batch: Batch = {
      observations: [obs],
      actions: [action],
      logProbsOld: [logp],
      advantages: [2.0],
      returns: [1.0],
    };
    const updater = new PpoUpdater(net, {
      ...DEFAULT_CONFIG,
      epochs: 1,
      minibatchSize: 1,
      valueCoef: 0.0,
      learningRate: 1e-2,
    });
    updater.update(batch, new Rng(1));
    const after = net.policy(obs);
    const before_d = action.reduce((s, a, c) => s + (a - before.mean[c]) ** 2, 0);
    const after_d = action.reduce((s, a, c) => s + (a - after.mean[c]) ** 2, 0);
    expect(after_d).toBeLessThan(before_d);
    net.dispose();
  });

  it("aborts on non-finite loss with diagnostics", () => {
    const net = new ActorCritic(GRID, 13);
    const rng = new Rng(9);
    const batch = syncedBatch(net, rng, 4);
    batch.logProbsOld = batch.logProbsOld.map(() => Number.NaN);
    const updater = new PpoUpdater(net, {
      ...DEFAULT_CONFIG,
      epochs: 1,
      minibatchSize: 4,
    });
    expect(() => updater.update(batch, new Rng(1))).toThrow(/non-finite/);
    net.dispose();
  });

  it("reduces value error on a fixed regression batch", () => {
    const net = new ActorCritic(GRID, 17);
    const rng = new Rng(23);
    const batch = syncedBatch(net, rng, 32);
    batch.advantages = batch.advantages.map(() => 0);
    batch.returns = batch.returns.map((_, i) => (i % 2 === 0 ? 1.0 : -1.0));
    const updater = new PpoUpdater(net, {
      ...DEFAULT_CONFIG,
      epochs: 10,
      minibatchSize: 32,
      learningRate: 1e-2,
    });
    const err = (b: Batch) =>
      tf.tidy(() => {
        const [obsT, tT] = net.obsTensor(b.observations);
        const [, value] = net.forward(obsT, tT);
        return value
          .sub(tf.tensor1d(b.returns))
          .square()
          .mean()
          .dataSync()[0];
      });
    const before = err(batch);
    updater.update(batch, new Rng(2));
    expect(err(batch)).toBeLessThan(before);
    net.dispose();
  });
});
