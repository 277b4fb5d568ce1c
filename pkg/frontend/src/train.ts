/**
 * Training and evaluation of the patch classifier.
 *
 * Targets are the [SC, QPC, SD, DD] state-fraction vectors under softmax
 * cross-entropy; evaluation compares the logit argmax against the fraction
 * argmax. Everything random flows from the configured seed; the wasm
 * backend runs with a fixed thread count, so identical seeds reproduce
 * identical scores.
 */

import * as tf from "@tensorflow/tfjs";
import { setThreadsCount } from "@tensorflow/tfjs-backend-wasm";

import { NUM_CLASSES, Patch } from "./data";
import { DEFAULT_MODEL, DropoutStream, Network } from "./model";
import { ConfusionMatrix, addPrediction, emptyConfusion, overallAccuracy,
         perClassAccuracy, weightedF1 } from "./metrics";
import { Rng } from "./rng";

export interface TrainConfig {
  convFilters: number;
  kernelSize: number;
  denseUnits: number[];
  padding: "valid" | "same";
  pool: "max" | "avg";
  dropout: number;
  classBalance: boolean;
  learningRate: number;
  steps: number;
  batchSize: number;
  trainFraction: number;
  seed: number;
  lossEvery: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  convFilters: DEFAULT_MODEL.convFilters,
  kernelSize: DEFAULT_MODEL.kernelSize,
  denseUnits: [...DEFAULT_MODEL.denseUnits],
  padding: DEFAULT_MODEL.padding,
  pool: DEFAULT_MODEL.pool,
  dropout: DEFAULT_MODEL.dropout,
  classBalance: false,
  learningRate: 0.001,
  steps: 5000,
  batchSize: 50,
  trainFraction: 0.9,
  seed: 0,
  lossEvery: 100,
};

export interface EvalReport {
  weighted_f1: number;
  overall_accuracy: number;
  per_class_accuracy: { [name: string]: number | null };
  confusion_matrix: ConfusionMatrix;
  wall_clock_seconds: number;
  train_size: number;
  eval_size: number;
  loss_first: number;
  loss_last: number;
  config: TrainConfig;
  channel: string;
}

let backendReady: Promise<void> | null = null;

/** Select the wasm backend once per process (cpu fallback if unavailable). */
export function initBackend(threads = 2): Promise<void> {
  if (!backendReady) {
    setThreadsCount(threads);
    backendReady = tf.setBackend("wasm").then((ok) => {
      if (!ok) {
        return tf.setBackend("cpu").then(() => undefined);
      }
      return undefined;
    });
  }
  return backendReady;
}

function toTensors(patches: Patch[], size: number): { x: tf.Tensor4D; y: tf.Tensor2D } {
  const n = patches.length;
  const pixels = new Float32Array(n * size * size);
  const targets = new Float32Array(n * NUM_CLASSES);
  patches.forEach((patch, i) => {
    pixels.set(patch.pixels, i * size * size);
    targets.set(patch.fractions, i * NUM_CLASSES);
  });
  return {
    x: tf.tensor4d(pixels, [n, size, size, 1]),
    y: tf.tensor2d(targets, [n, NUM_CLASSES]),
  };
}

export interface TrainedModel {
  network: Network;
  losses: number[];
}

/**
 * Square-root inverse-frequency class weights from the training split's
 * fraction mass, normalized so the weighted mass averages one. Rare states
 * (shorts are a few patches per desk-scale set) otherwise contribute too
 * little loss to be learned at all.
 */
export function classWeights(patches: Patch[]): number[] {
  const mass = new Array(NUM_CLASSES).fill(0);
  for (const p of patches) {
    for (let c = 0; c < NUM_CLASSES; c++) mass[c] += p.fractions[c];
  }
  const total = mass.reduce((a, b) => a + b, 0);
  const raw = mass.map((m) => (m > 0 ? Math.sqrt(total / (NUM_CLASSES * m)) : 0));
  const norm = raw.reduce((acc, w, c) => acc + w * mass[c], 0) / total;
  return raw.map((w) => w / norm);
}

export function train(patches: Patch[], size: number,
                      config: TrainConfig): TrainedModel {
  if (patches.length === 0) throw new Error("empty training set");
  const network = new Network({
    patchSize: size,
    convFilters: config.convFilters,
    kernelSize: config.kernelSize,
    denseUnits: config.denseUnits,
    numClasses: NUM_CLASSES,
    padding: config.padding,
    pool: config.pool,
    dropout: config.dropout,
  }, config.seed);
  const { x, y } = toTensors(patches, size);
  // expand every patch into convolution columns once; per-step work is
  // then a row gather plus pure matrix products
  const colWidth = config.kernelSize * config.kernelSize;
  const colsPerPatch = network.convSpan * network.convSpan;
  const allCols = tf.tidy(() => tf.reshape(
    network.im2col(x as tf.Tensor4D),
    [patches.length, colsPerPatch * colWidth])) as tf.Tensor2D;
  x.dispose();
  const optimizer = tf.train.adam(config.learningRate);
  const rng = new Rng(config.seed ^ 0x51f15eed);
  const dropout = config.dropout > 0
    ? new DropoutStream(config.seed, config.dropout) : null;
  const weights = config.classBalance ? classWeights(patches) : null;
  const losses: number[] = [];

  let order = rng.permutation(patches.length);
  let cursor = 0;
  const nextBatch = (): number[] => {
    const batch: number[] = [];
    while (batch.length < config.batchSize) {
      if (cursor === order.length) {
        order = rng.permutation(patches.length);
        cursor = 0;
      }
      batch.push(order[cursor++]);
    }
    return batch;
  };

  for (let step = 0; step < config.steps; step++) {
    const indices = nextBatch();
    const loss = tf.tidy(() => {
      const idx = tf.tensor1d(indices, "int32");
      const cols = tf.reshape(tf.gather(allCols, idx), [-1, colWidth]) as tf.Tensor2D;
      const by = tf.gather(y, idx) as tf.Tensor2D;
      let sampleWeights: tf.Tensor1D | undefined;
      if (weights) {
        const w = indices.map((i) => patches[i].fractions.reduce(
          (acc, f, c) => acc + f * weights[c], 0));
        sampleWeights = tf.tensor1d(w);
      }
      const value = optimizer.minimize(
        () => tf.losses.softmaxCrossEntropy(
          by, network.forward(cols, dropout, indices.length), sampleWeights),
        true, network.variables) as tf.Scalar;
      return value.dataSync()[0];
    });
    if (!Number.isFinite(loss)) {
      throw new Error(`training diverged at step ${step} (loss ${loss})`);
    }
    if (step % config.lossEvery === 0 || step === config.steps - 1) {
      losses.push(loss);
    }
  }
  allCols.dispose();
  y.dispose();
  optimizer.dispose();
  return { network, losses };
}

export function predictClasses(network: Network, patches: Patch[], size: number,
                               batch = 200): number[] {
  const out: number[] = [];
  for (let start = 0; start < patches.length; start += batch) {
    const chunk = patches.slice(start, start + batch);
    const { x } = toTensors(chunk, size);
    const classes = tf.tidy(() =>
      tf.argMax(network.logitsForPatches(x), 1).dataSync());
    x.dispose();
    out.push(...Array.from(classes, Number));
  }
  return out;
}

export function evaluate(network: Network, patches: Patch[], size: number): {
  confusion: ConfusionMatrix;
  weightedF1: number;
  perClass: (number | null)[];
  accuracy: number;
} {
  const predicted = predictClasses(network, patches, size);
  const confusion = emptyConfusion();
  patches.forEach((patch, i) => addPrediction(confusion, patch.majority,
                                              predicted[i]));
  return {
    confusion,
    weightedF1: weightedF1(confusion),
    perClass: perClassAccuracy(confusion),
    accuracy: overallAccuracy(confusion),
  };
}
