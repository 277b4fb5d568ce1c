/**
 * Train the patch classifier and write an evaluation report.
 *
 *   node dist/src/cli.js --input patches.json --report report.json \
 *       [--steps N] [--batch N] [--learning-rate F] [--train-fraction F] \
 *       [--filters N] [--kernel-size N] [--dense 1024,512,128] [--seed N] \
 *       [--threads N]
 */

import * as fs from "fs";

import { CLASS_NAMES, PixelTransform, loadPatchFile, splitDataset } from "./data";
import { DEFAULT_CONFIG, EvalReport, TrainConfig, evaluate, initBackend,
         train } from "./train";

export function parseArgs(argv: string[]): { input: string; report: string;
                                             threads: number; transform: PixelTransform;
                                             splitSeed: number; config: TrainConfig } {
  const config: TrainConfig = { ...DEFAULT_CONFIG,
                                denseUnits: [...DEFAULT_CONFIG.denseUnits] };
  let input = "";
  let report = "report.json";
  let threads = 2;
  let transform: PixelTransform = "asinh";
  let splitSeed = 0;
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`missing value for ${flag}`);
    switch (flag) {
      case "--input": input = value; break;
      case "--report": report = value; break;
      case "--steps": config.steps = parseInt(value, 10); break;
      case "--batch": config.batchSize = parseInt(value, 10); break;
      case "--learning-rate": config.learningRate = parseFloat(value); break;
      case "--train-fraction": config.trainFraction = parseFloat(value); break;
      case "--filters": config.convFilters = parseInt(value, 10); break;
      case "--kernel-size": config.kernelSize = parseInt(value, 10); break;
      case "--dense":
        config.denseUnits = value.split(",").map((v) => parseInt(v, 10));
        break;
      case "--padding":
        if (value !== "valid" && value !== "same") throw new Error("--padding must be valid or same");
        config.padding = value; break;
      case "--pool":
        if (value !== "max" && value !== "avg") throw new Error("--pool must be max or avg");
        config.pool = value; break;
      case "--dropout": config.dropout = parseFloat(value); break;
      case "--class-balance": config.classBalance = value === "true"; break;
      case "--seed": config.seed = parseInt(value, 10); break;
      case "--split-seed": splitSeed = parseInt(value, 10); break;
      case "--threads": threads = parseInt(value, 10); break;
      case "--transform":
        if (value !== "asinh" && value !== "asinh-global" && value !== "none") {
          throw new Error("--transform must be asinh, asinh-global, or none");
        }
        transform = value; break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!input) throw new Error("--input is required");
  return { input, report, threads, transform, splitSeed, config };
}

export async function run(argv: string[]): Promise<EvalReport> {
  const { input, report, threads, transform, splitSeed, config } = parseArgs(argv);
  await initBackend(threads);
  const dataset = loadPatchFile(input, transform);
  const split = splitDataset(dataset.patches, config.trainFraction, splitSeed);
  const started = Date.now();
  const model = train(split.train, dataset.size, config);
  const result = evaluate(model.network, split.evaluation, dataset.size);
  const wall = (Date.now() - started) / 1000;
  model.network.dispose();

  const evalReport: EvalReport = {
    weighted_f1: result.weightedF1,
    overall_accuracy: result.accuracy,
    per_class_accuracy: Object.fromEntries(
      CLASS_NAMES.map((name, c) => [name, result.perClass[c]])),
    confusion_matrix: result.confusion,
    wall_clock_seconds: wall,
    train_size: split.train.length,
    eval_size: split.evaluation.length,
    loss_first: model.losses[0],
    loss_last: model.losses[model.losses.length - 1],
    config,
    channel: dataset.channel,
  };
  fs.writeFileSync(report, JSON.stringify(evalReport, null, 2) + "\n");
  console.log(`channel=${dataset.channel} seed=${config.seed} `
    + `weighted_f1=${result.weightedF1.toFixed(4)} `
    + `accuracy=${result.accuracy.toFixed(4)} wall=${wall.toFixed(1)}s `
    + `-> ${report}`);
  return evalReport;
}

if (require.main === module) {
  run(process.argv.slice(2)).catch((err) => {
    console.error(`error: ${err.message}`);
    process.exit(1);
  });
}
