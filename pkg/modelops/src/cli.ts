import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { loadTemplatesDir } from "./fingerprint.js";
import { createServer, listen } from "./serve.js";
import { createEngine, toJsonl, transcribeDir, TranscribeError } from "./transcribe.js";
import {
  defaultTrainConfig,
  loadArtifact,
  saveArtifact,
  train,
  TrainError,
  type Label,
  type TrainExample,
} from "./train.js";

function readJsonl(path: string): Record<string, unknown>[] {
  return readFileSync(path, "utf8")
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map((line) => JSON.parse(line) as Record<string, unknown>);
}

function cmdTranscribe(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      "audio-dir": { type: "string" },
      output: { type: "string" },
      model: { type: "string", default: "sidecar-text" },
    },
  });
  if (!values["audio-dir"] || !values.output) {
    console.error("usage: transcribe --audio-dir DIR --output FILE [--model ID]");
    return 1;
  }
  const records = transcribeDir(values["audio-dir"], createEngine(values.model!));
  writeFileSync(values.output, toJsonl(records), "utf8");
  console.error(`wrote ${records.length} transcript records to ${values.output}`);
  return 0;
}

function cmdTrain(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      manifest: { type: "string" },
      transcripts: { type: "string" },
      templates: { type: "string" },
      output: { type: "string" },
      "expected-fingerprint": { type: "string" },
      rank: { type: "string" },
      steps: { type: "string" },
      lr: { type: "string" },
      seed: { type: "string", default: "0" },
    },
  });
  if (!values.manifest || !values.transcripts || !values.templates || !values.output) {
    console.error(
      "usage: train --manifest FILE --transcripts FILE --templates DIR --output FILE " +
        "[--expected-fingerprint HEX] [--rank N] [--steps N] [--lr X] [--seed N]",
    );
    return 1;
  }
  const labels = new Map<string, Label>();
  for (const row of readJsonl(values.manifest)) {
    if (row.split === "train" || row.split === "unassigned" || row.split === undefined) {
      labels.set(String(row.participant_id), row.label as Label);
    }
  }
  const examples: TrainExample[] = [];
  for (const row of readJsonl(values.transcripts)) {
    const label = labels.get(String(row.participant_id));
    if (label !== undefined) examples.push({ text: String(row.text), label });
  }
  const config = defaultTrainConfig({
    seed: Number(values.seed),
    ...(values.rank ? { loraRank: Number(values.rank) } : {}),
    ...(values.lr ? { learningRate: Number(values.lr) } : {}),
  });
  const { artifact } = train(config, examples, loadTemplatesDir(values.templates), {
    expectedTemplateFingerprint: values["expected-fingerprint"],
    maxSteps: values.steps ? Number(values.steps) : undefined,
  });
  saveArtifact(artifact, values.output);
  const first = artifact.lossCurve[0];
  const last = artifact.lossCurve[artifact.lossCurve.length - 1];
  console.error(
    `trained on ${examples.length} examples; loss ${first?.toFixed(4)} -> ${last?.toFixed(4)}; ` +
      `artifact ${values.output}`,
  );
  return 0;
}

async function cmdServe(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      artifact: { type: "string" },
      port: { type: "string", default: "8700" },
    },
  });
  if (!values.artifact) {
    console.error("usage: serve --artifact FILE [--port N]");
    return 1;
  }
  const { artifact, model } = loadArtifact(values.artifact);
  const server = createServer(model, artifact.baseModelId);
  const port = await listen(server, Number(values.port));
  console.error(`serving ${artifact.baseModelId} adapters on http://127.0.0.1:${port}`);
  return new Promise(() => undefined); // run until killed
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case "transcribe":
        return cmdTranscribe(rest);
      case "train":
        return cmdTrain(rest);
      case "serve":
        return await cmdServe(rest);
      default:
        console.error("usage: modelops <transcribe|train|serve> ...");
        return 1;
    }
  } catch (err) {
    if (err instanceof TranscribeError || err instanceof TrainError) {
      console.error(err.message);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
