/**
 * Patch-container loading and dataset preparation.
 *
 * The simulator exports patches as JSON: flattened pixel grids, a
 * [SC, QPC, SD, DD] state-fraction vector per patch, and the majority
 * label. Pixels are normalized per patch to zero mean / unit variance
 * before training; targets are the fraction vectors and the evaluation
 * class is the fraction argmax (ties to the lower index).
 */

import * as fs from "fs";

import { Rng } from "./rng";

export const CLASS_NAMES = ["SC", "QPC", "SD", "DD"] as const;
export const NUM_CLASSES = CLASS_NAMES.length;

/** State labels -1/0/1/2 map onto fraction-vector indices 0..3. */
export function labelToClass(label: number): number {
  return label + 1;
}

export interface Patch {
  pixels: Float32Array;
  fractions: [number, number, number, number];
  majority: number; // class index 0..3
}

export interface Dataset {
  patches: Patch[];
  size: number; // patch edge length
  channel: string;
}

export type PixelTransform = "asinh" | "asinh-global" | "none";

export function loadPatchFile(path: string,
                              transform: PixelTransform = "asinh"): Dataset {
  const payload = JSON.parse(fs.readFileSync(path, "utf-8"));
  if (payload.type !== "labeled training patches from quantum-dot stability maps") {
    throw new Error(`${path} is not a patch container`);
  }
  const size: number = payload.patch_size;
  const patches: Patch[] = [];
  for (let i = 0; i < payload.pixels.length; i++) {
    const raw = payload.pixels[i];
    if (raw.length !== size * size) {
      throw new Error(`patch ${i} has ${raw.length} pixels, expected ${size * size}`);
    }
    let pixels: Float32Array = Float32Array.from(raw);
    if (transform === "asinh") {
      pixels = normalize(asinhCompress(pixels));
    } else if (transform === "asinh-global") {
      // fixed affine map of the compressed values: keeps the absolute
      // magnitude (short-circuit sheets sit at the top of the range)
      // instead of per-patch statistics
      pixels = asinhCompress(pixels);
      for (let k = 0; k < pixels.length; k++) pixels[k] = pixels[k] / 7 - 1;
    } else {
      pixels = normalize(pixels);
    }
    patches.push({
      pixels,
      fractions: payload.fractions[i],
      majority: labelToClass(payload.majority[i]),
    });
  }
  return { patches, size, channel: payload.channel };
}

/**
 * Magnitude compression ahead of the per-patch standardization. Channel
 * values span four-plus decades (double-dot transport peaks ~1e-4 of the
 * barrier-mode current, and the short-circuit constant another two decades
 * up); standardizing the raw values lets a single bright region flatten
 * every other feature in the patch. asinh(1e4 x) is linear near zero and
 * logarithmic beyond, keeping both faint honeycomb lines and bright sheets
 * visible; 1e4 matches the display rescaling of the current channel.
 */
export function asinhCompress(pixels: Float32Array): Float32Array {
  const out = new Float32Array(pixels.length);
  for (let i = 0; i < pixels.length; i++) out[i] = Math.asinh(1e4 * pixels[i]);
  return out;
}

/**
 * Contrast standardization that keeps the patch level. Plain per-patch
 * zero-mean/unit-variance erases the one feature separating flat classes:
 * a saturated short-circuit sheet and an empty barrier both become
 * all-zero patches. Here the centered pixels are scaled by the patch
 * spread (floored so near-flat patches stay flat instead of amplifying
 * noise) and the compressed DC level rides along as a bounded offset.
 */
export function contrastWithLevel(compressed: Float32Array): Float32Array {
  const n = compressed.length;
  let mean = 0;
  for (let i = 0; i < n; i++) mean += compressed[i];
  mean /= n;
  let variance = 0;
  for (let i = 0; i < n; i++) variance += (compressed[i] - mean) ** 2;
  variance /= n;
  const scale = 1 / Math.max(Math.sqrt(variance), 1.0);
  const offset = 0.5 * (mean / 7 - 1);
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = (compressed[i] - mean) * scale + offset;
  }
  return out;
}

/** Zero-mean, unit-variance per patch (flat patches pass through centered). */
export function normalize(pixels: Float32Array): Float32Array {
  const n = pixels.length;
  let mean = 0;
  for (let i = 0; i < n; i++) mean += pixels[i];
  mean /= n;
  let variance = 0;
  for (let i = 0; i < n; i++) variance += (pixels[i] - mean) ** 2;
  variance /= n;
  const scale = variance > 0 ? 1 / Math.sqrt(variance) : 1;
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) out[i] = (pixels[i] - mean) * scale;
  return out;
}

export interface Split {
  train: Patch[];
  evaluation: Patch[];
}

/**
 * Disjoint, seed-deterministic split; the training share is
 * floor(fraction * N), so 10,010 patches at 0.9 give 9,009 / 1,001.
 */
export function splitDataset(patches: Patch[], trainFraction: number,
                             seed: number): Split {
  if (patches.length < 10) {
    throw new Error(`need at least 10 patches to split, got ${patches.length}`);
  }
  if (!(trainFraction > 0 && trainFraction < 1)) {
    throw new Error(`train fraction must be in (0, 1), got ${trainFraction}`);
  }
  const order = new Rng(seed).permutation(patches.length);
  const cut = Math.floor(trainFraction * patches.length);
  return {
    train: order.slice(0, cut).map((i) => patches[i]),
    evaluation: order.slice(cut).map((i) => patches[i]),
  };
}
