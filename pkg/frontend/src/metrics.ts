/**
 * Confusion-matrix metrics: support-weighted F1 and per-class accuracy.
 */

import { NUM_CLASSES } from "./data";

export type ConfusionMatrix = number[][]; // [true][predicted]

export function emptyConfusion(): ConfusionMatrix {
  return Array.from({ length: NUM_CLASSES }, () => new Array(NUM_CLASSES).fill(0));
}

export function addPrediction(matrix: ConfusionMatrix, truth: number,
                              predicted: number): void {
  matrix[truth][predicted] += 1;
}

/**
 * Support-weighted mean of per-class F1 scores. Classes with zero support
 * are excluded from the weighting; a class with an undefined precision or
 * recall contributes F1 = 0.
 */
export function weightedF1(matrix: ConfusionMatrix): number {
  const k = matrix.length;
  let total = 0;
  for (const row of matrix) {
    if (row.length !== k) throw new Error("confusion matrix must be square");
    for (const v of row) {
      if (v < 0) throw new Error("confusion matrix entries must be non-negative");
      total += v;
    }
  }
  if (total === 0) throw new Error("confusion matrix is empty");
  let weighted = 0;
  let supportSum = 0;
  for (let c = 0; c < k; c++) {
    const support = matrix[c].reduce((a, b) => a + b, 0);
    if (support === 0) continue;
    let predicted = 0;
    for (let r = 0; r < k; r++) predicted += matrix[r][c];
    const tp = matrix[c][c];
    const precision = predicted > 0 ? tp / predicted : 0;
    const recall = tp / support;
    const f1 = precision + recall > 0
      ? (2 * precision * recall) / (precision + recall)
      : 0;
    weighted += support * f1;
    supportSum += support;
  }
  return weighted / supportSum;
}

/** Per-class accuracy (recall); null for classes with no support. */
export function perClassAccuracy(matrix: ConfusionMatrix): (number | null)[] {
  return matrix.map((row, c) => {
    const support = row.reduce((a, b) => a + b, 0);
    return support > 0 ? row[c] / support : null;
  });
}

export function overallAccuracy(matrix: ConfusionMatrix): number {
  let correct = 0;
  let total = 0;
  for (let c = 0; c < matrix.length; c++) {
    for (let r = 0; r < matrix.length; r++) {
      total += matrix[c][r];
      if (c === r) correct += matrix[c][r];
    }
  }
  return correct / total;
}
