/**
 * Convolutional actor-critic for grid-distribution observations.
 *
 * Inputs are two stacked count matrices (free vehicles, recent waiting
 * request origins) plus the normalized time injected after flattening.
 * Trunk: two 2x2 same-padded convolutions (2 then 4 filters, stride 1),
 * each followed by 2x2 max pooling, flattened, concatenated with the time
 * scalar, then one dense layer of 128 units. Heads: per-cell action mean,
 * and a scalar state value. The Gaussian action spread is a learned,
 * state-independent log-std variable.
 */

import * as tf from "@tensorflow/tfjs";

export interface GridShape {
  nX: number;
  nY: number;
}

export const LOG_2PI = Math.log(2 * Math.PI);

export interface StepObservation {
  V: number[];
  R: number[];
  tNorm: number;
}

export class ActorCritic {
  readonly model: tf.LayersModel;
  readonly logStd: tf.Variable;
  readonly cells: number;

  constructor(
    readonly grid: GridShape,
    seed = 1,
    initialLogStd = 0.0,
  ) {
    this.cells = grid.nX * grid.nY;
    const obsIn = tf.input({ shape: [grid.nX, grid.nY, 2] });
    const tIn = tf.input({ shape: [1] });
    let x = tf.layers
      .conv2d({
        filters: 2,
        kernelSize: 2,
        strides: 1,
        padding: "same",
        activation: "relu",
        kernelInitializer: tf.initializers.glorotUniform({ seed }),
      })
      .apply(obsIn) as tf.SymbolicTensor;
    x = tf.layers
      .maxPooling2d({ poolSize: 2, strides: 2, padding: "same" })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers
      .conv2d({
        filters: 4,
        kernelSize: 2,
        strides: 1,
        padding: "same",
        activation: "relu",
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
      })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers
      .maxPooling2d({ poolSize: 2, strides: 2, padding: "same" })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers.flatten().apply(x) as tf.SymbolicTensor;
    x = tf.layers.concatenate().apply([x, tIn]) as tf.SymbolicTensor;
    x = tf.layers
      .dense({
        units: 128,
        activation: "relu",
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 2 }),
      })
      .apply(x) as tf.SymbolicTensor;
    const mean = tf.layers
      .dense({
        units: this.cells,
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 3 }),
      })
      .apply(x) as tf.SymbolicTensor;
    const value = tf.layers
      .dense({
        units: 1,
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 4 }),
      })
      .apply(x) as tf.SymbolicTensor;
    this.model = tf.model({ inputs: [obsIn, tIn], outputs: [mean, value] });
    this.logStd = tf.variable(tf.fill([this.cells], initialLogStd), true);
  }

  get trainables(): tf.Variable[] {
    const weights = this.model.trainableWeights.map(
      (w) => w.read() as unknown as tf.Variable,
    );
    // LayersModel exposes weights as LayerVariables; collect the backing vars
    return [
      ...this.model.trainableWeights.map((w) => (w as any).val as tf.Variable),
      this.logStd,
    ];
  }

  /** Stack flat row-major V and R into a [batch, nX, nY, 2] tensor. */
  obsTensor(batch: StepObservation[]): [tf.Tensor4D, tf.Tensor2D] {
    const { nX, nY } = this.grid;
    const data = new Float32Array(batch.length * nX * nY * 2);
    const times = new Float32Array(batch.length);
    batch.forEach((obs, b) => {
      const base = b * nX * nY * 2;
      for (let c = 0; c < nX * nY; c++) {
        data[base + c * 2] = obs.V[c];
        data[base + c * 2 + 1] = obs.R[c];
      }
      times[b] = obs.tNorm;
    });
    return [
      tf.tensor4d(data, [batch.length, nX, nY, 2]),
      tf.tensor2d(times, [batch.length, 1]),
    ];
  }

  /** Forward pass: [mean [B, cells], value [B]] */
  forward(obs: tf.Tensor4D, t: tf.Tensor2D): [tf.Tensor2D, tf.Tensor1D] {
    const [mean, value] = this.model.apply([obs, t]) as [tf.Tensor2D, tf.Tensor2D];
    return [mean, value.squeeze([1]) as tf.Tensor1D];
  }

  /** Diagonal-Gaussian log density of actions under (mean, logStd). */
  logProb(actions: tf.Tensor2D, mean: tf.Tensor2D): tf.Tensor1D {
    return tf.tidy(() => {
      const logStd = this.logStd as unknown as tf.Tensor1D;
      const z = actions.sub(mean).div(logStd.exp());
      const perDim = z.square().add(logStd.mul(2)).add(LOG_2PI).mul(-0.5);
      return perDim.sum(1) as tf.Tensor1D;
    });
  }

  /** Gaussian entropy (state independent): sum over cells. */
  entropy(): number {
    return tf.tidy(() => {
      const logStd = this.logStd as unknown as tf.Tensor1D;
      return logStd.add(0.5 * (LOG_2PI + 1)).sum().dataSync()[0];
    });
  }

  /** Single-observation policy outputs as plain arrays. */
  policy(obs: StepObservation): { mean: number[]; std: number[]; value: number } {
    return tf.tidy(() => {
      const [o, t] = this.obsTensor([obs]);
      const [mean, value] = this.forward(o, t);
      const std = (this.logStd as unknown as tf.Tensor1D).exp();
      return {
        mean: Array.from(mean.dataSync()),
        std: Array.from(std.dataSync()),
        value: value.dataSync()[0],
      };
    });
  }

  dispose(): void {
    this.model.dispose();
    this.logStd.dispose();
  }
}
