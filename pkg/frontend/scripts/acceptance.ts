/**
 * Desk-scale classification acceptance:
 *
 *   node dist/scripts/acceptance.js <current_patches.json> <sensor_patches.json>
 *
 * Trains the reference network for 2,000 steps on each channel at the
 * canonical 90/10 split, once per training seed. Passes when the
 * three-seed mean weighted F1 reaches 0.85 (current) / 0.83
 * (sensor-gradient), every run stays within 5 percentage points of the
 * others, and each run finishes inside 10 minutes.
 */

import { loadPatchFile, splitDataset } from "../src/data";
import { DEFAULT_CONFIG, evaluate, initBackend, train } from "../src/train";

const SPLIT_SEED = 0;
const TRAIN_SEEDS = [1, 2, 3];
const THRESHOLDS: { [channel: string]: number } = { current: 0.85, sensor: 0.83 };
const MAX_SPREAD = 0.05;
const MAX_SECONDS = 600;

async function main(): Promise<void> {
  const [currentPath, sensorPath] = process.argv.slice(2);
  if (!currentPath || !sensorPath) {
    throw new Error("usage: acceptance.js <current_patches> <sensor_patches>");
  }
  await initBackend();
  let failed = false;

  for (const [channel, path] of [["current", currentPath],
                                 ["sensor", sensorPath]] as const) {
    const dataset = loadPatchFile(path);
    if (dataset.channel !== channel) {
      throw new Error(`${path} holds ${dataset.channel} patches, expected ${channel}`);
    }
    const split = splitDataset(dataset.patches, DEFAULT_CONFIG.trainFraction,
                               SPLIT_SEED);
    const scores: number[] = [];
    let worstWall = 0;
    for (const seed of TRAIN_SEEDS) {
      const config = { ...DEFAULT_CONFIG, denseUnits: [...DEFAULT_CONFIG.denseUnits],
                       steps: 2000, seed };
      const started = Date.now();
      const model = train(split.train, dataset.size, config);
      const result = evaluate(model.network, split.evaluation, dataset.size);
      const wall = (Date.now() - started) / 1000;
      model.network.dispose();
      scores.push(result.weightedF1);
      worstWall = Math.max(worstWall, wall);
      console.log(`  ${channel} seed ${seed}: weighted F1 ${result.weightedF1.toFixed(4)}, `
        + `${wall.toFixed(0)} s`);
    }
    const mean = scores.reduce((a, b) => a + b, 0) / scores.length;
    const spread = Math.max(...scores) - Math.min(...scores);
    const ok = mean >= THRESHOLDS[channel]
      && spread <= MAX_SPREAD && worstWall < MAX_SECONDS;
    failed = failed || !ok;
    console.log(`[${ok ? "PASS" : "FAIL"}] desk-scale ${channel}: `
      + `mean F1 ${mean.toFixed(4)} (threshold ${THRESHOLDS[channel]}), spread `
      + `${(spread * 100).toFixed(1)} pp (max ${MAX_SPREAD * 100}), `
      + `slowest run ${worstWall.toFixed(0)} s (max ${MAX_SECONDS})`);
  }
  process.exit(failed ? 1 : 0);
}

main().catch((err) => {
  console.error(`error: ${err.message}`);
  process.exit(1);
});
