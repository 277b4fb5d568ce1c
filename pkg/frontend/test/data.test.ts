import assert from "node:assert/strict";
import { test } from "node:test";

import { Patch, labelToClass, normalize, splitDataset } from "../src/data";

function fakePatches(count: number): Patch[] {
  return Array.from({ length: count }, (_, i) => ({
    pixels: Float32Array.from([i, i + 1, i + 2, i + 3]),
    fractions: [0, 0, 1, 0] as [number, number, number, number],
    majority: 2,
  }));
}

test("state labels map onto fraction indices", () => {
  assert.deepEqual([-1, 0, 1, 2].map(labelToClass), [0, 1, 2, 3]);
});

test("90/10 split of 10,010 patches gives 9,009 / 1,001", () => {
  const split = splitDataset(fakePatches(10_010), 0.9, 1);
  assert.equal(split.train.length, 9_009);
  assert.equal(split.evaluation.length, 1_001);
});

test("split is deterministic for a seed and disjoint", () => {
  const patches = fakePatches(100);
  const a = splitDataset(patches, 0.9, 42);
  const b = splitDataset(patches, 0.9, 42);
  assert.deepEqual(a.train.map((p) => p.pixels[0]),
                   b.train.map((p) => p.pixels[0]));
  const other = splitDataset(patches, 0.9, 43);
  assert.notDeepEqual(a.train.map((p) => p.pixels[0]),
                      other.train.map((p) => p.pixels[0]));

  const union = new Set([...a.train, ...a.evaluation].map((p) => p.pixels[0]));
  assert.equal(union.size, 100);
  const trainSet = new Set(a.train.map((p) => p.pixels[0]));
  for (const p of a.evaluation) assert.ok(!trainSet.has(p.pixels[0]));
});

test("too few patches are rejected", () => {
  assert.throws(() => splitDataset(fakePatches(9), 0.9, 0), /at least 10/);
});

test("normalization centers and scales each patch", () => {
  const out = normalize(Float32Array.from([1, 2, 3, 4, 5, 6]));
  const mean = out.reduce((a, b) => a + b, 0) / out.length;
  const variance = out.reduce((a, b) => a + b * b, 0) / out.length;
  assert.ok(Math.abs(mean) < 1e-6);
  assert.ok(Math.abs(variance - 1) < 1e-6);
});

test("flat patches normalize without dividing by zero", () => {
  const out = normalize(Float32Array.from([7, 7, 7, 7]));
  assert.deepEqual(Array.from(out), [0, 0, 0, 0]);
});
