/**
 * Reference network: one convolutional layer (16 filters, 5x5), one 2x2
 * max-pool, dense layers of 1024/512/128, and a 4-way output head trained
 * against the state-fraction vectors with softmax cross-entropy.
 *
 * The convolution is expressed as im2col + matMul so every gradient is a
 * plain matrix product: the wasm backend has no conv-filter-gradient
 * kernel, and its transposed-matMul path is several times slower than an
 * explicit transpose followed by a straight product (see fastMatMul).
 */

import * as tf from "@tensorflow/tfjs";

import { Rng } from "./rng";

/** Deterministic inverted-dropout mask stream (train-time only). */
export class DropoutStream {
  private readonly rng: Rng;

  constructor(seed: number, readonly rate: number) {
    this.rng = new Rng(seed ^ 0xd50f0a57);
  }

  /** Scaled Bernoulli mask of the given shape, or null when disabled. */
  mask(rows: number, cols: number): tf.Tensor2D | null {
    if (this.rate <= 0) return null;
    const keep = 1 - this.rate;
    const values = new Float32Array(rows * cols);
    for (let i = 0; i < values.length; i++) {
      values[i] = this.rng.next() < keep ? 1 / keep : 0;
    }
    return tf.tensor2d(values, [rows, cols]);
  }
}

export interface ModelConfig {
  patchSize: number;
  convFilters: number;
  kernelSize: number;
  denseUnits: number[];
  numClasses: number;
  padding: "valid" | "same";
  pool: "max" | "avg";
  dropout: number; // drop probability on dense hidden activations
}

export const DEFAULT_MODEL: Omit<ModelConfig, "patchSize"> = {
  convFilters: 16,
  kernelSize: 5,
  denseUnits: [1024, 512, 128],
  numClasses: 4,
  padding: "valid",
  pool: "avg",
  dropout: 0.5,
};

/** matMul whose gradients avoid the slow transposed-operand kernel path.
 *  gradForA=false marks a data-side left operand whose gradient is unused
 *  (nothing trainable upstream), saving one large product. */
export function fastMatMul(a: tf.Tensor2D, b: tf.Tensor2D,
                           gradForA = true): tf.Tensor2D {
  const grad = (aT: tf.Tensor2D, bT: tf.Tensor2D, save: tf.GradSaveFunc) => {
    save([aT, bT]);
    return {
      value: tf.matMul(aT, bT),
      gradFunc: (dy: tf.Tensor2D, saved: tf.Tensor[]) => {
        const [av, bv] = saved as [tf.Tensor2D, tf.Tensor2D];
        const da = gradForA
          ? tf.transpose(tf.matMul(bv, tf.transpose(dy)))
          : tf.zerosLike(av);
        const db = tf.matMul(tf.transpose(av), dy);
        return [da, db];
      },
    };
  };
  type GradFn = Parameters<typeof tf.customGrad<tf.Tensor2D>>[0];
  const op = tf.customGrad(grad as unknown as GradFn);
  return op(a, b) as tf.Tensor2D;
}

export class Network {
  readonly config: ModelConfig;
  readonly convSpan: number; // output edge of the valid convolution
  readonly pooledSpan: number;
  readonly variables: tf.Variable[] = [];
  private readonly weights: tf.Variable[] = [];
  private readonly biases: tf.Variable[] = [];

  constructor(config: ModelConfig, seed: number) {
    this.config = config;
    this.convSpan = config.padding === "same"
      ? config.patchSize
      : config.patchSize - config.kernelSize + 1;
    this.pooledSpan = Math.floor(this.convSpan / 2);
    const rng = new Rng(seed ^ 0x9e3779b9);
    const sizes: Array<[number, number]> = [
      [config.kernelSize * config.kernelSize, config.convFilters],
    ];
    let fanIn = this.pooledSpan * this.pooledSpan * config.convFilters;
    for (const units of config.denseUnits) {
      sizes.push([fanIn, units]);
      fanIn = units;
    }
    sizes.push([fanIn, config.numClasses]);
    for (const [rows, cols] of sizes) {
      this.weights.push(tf.variable(glorot(rows, cols, rng)));
      this.biases.push(tf.variable(tf.zeros([cols])));
    }
    this.variables.push(...this.weights, ...this.biases);
  }

  /** Expand [B, S, S, 1] into convolution columns [B * span^2, k^2]. */
  im2col(x: tf.Tensor4D): tf.Tensor2D {
    const k = this.config.kernelSize;
    const span = this.convSpan;
    return tf.tidy(() => {
      let grid = x;
      if (this.config.padding === "same") {
        const lo = Math.floor((k - 1) / 2);
        const hi = k - 1 - lo;
        grid = tf.pad(x, [[0, 0], [lo, hi], [lo, hi], [0, 0]]);
      }
      const slices: tf.Tensor4D[] = [];
      for (let di = 0; di < k; di++) {
        for (let dj = 0; dj < k; dj++) {
          slices.push(tf.slice(grid, [0, di, dj, 0], [-1, span, span, 1]));
        }
      }
      return tf.reshape(tf.concat(slices, 3), [-1, k * k]) as tf.Tensor2D;
    });
  }

  /** Logits for convolution columns produced by im2col; per-layer dropout
   *  masks (train time) come from a DropoutStream. */
  forward(cols: tf.Tensor2D, dropout: DropoutStream | null = null,
          batchSize = 0): tf.Tensor2D {
    const { convFilters } = this.config;
    return tf.tidy(() => {
      let h = tf.relu(tf.add(fastMatMul(cols, this.weights[0] as unknown as tf.Tensor2D, false),
                             this.biases[0]));
      let grid = tf.reshape(h, [-1, this.convSpan, this.convSpan, convFilters]) as tf.Tensor4D;
      grid = this.config.pool === "avg"
        ? tf.avgPool(grid, 2, 2, "valid")
        : tf.maxPool(grid, 2, 2, "valid");
      let flat = tf.reshape(grid,
        [-1, this.pooledSpan * this.pooledSpan * convFilters]) as tf.Tensor2D;
      for (let layer = 1; layer < this.weights.length - 1; layer++) {
        flat = tf.relu(tf.add(
          fastMatMul(flat, this.weights[layer] as unknown as tf.Tensor2D),
          this.biases[layer])) as tf.Tensor2D;
        const mask = dropout?.mask(batchSize, this.config.denseUnits[layer - 1]);
        if (mask) flat = tf.mul(flat, mask) as tf.Tensor2D;
      }
      const last = this.weights.length - 1;
      return tf.add(fastMatMul(flat, this.weights[last] as unknown as tf.Tensor2D),
                    this.biases[last]) as tf.Tensor2D;
    });
  }

  logitsForPatches(x: tf.Tensor4D): tf.Tensor2D {
    return tf.tidy(() => this.forward(this.im2col(x)));
  }

  dispose(): void {
    for (const v of this.variables) v.dispose();
  }
}

/** Glorot-uniform init drawn from the harness RNG, not the backend's. */
function glorot(rows: number, cols: number, rng: Rng): tf.Tensor2D {
  const limit = Math.sqrt(6 / (rows + cols));
  const values = new Float32Array(rows * cols);
  for (let i = 0; i < values.length; i++) {
    values[i] = rng.uniform(-limit, limit);
  }
  return tf.tensor2d(values, [rows, cols]);
}
