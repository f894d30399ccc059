import { execFile } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import type { Server } from "node:http";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { loadTemplatesDir, templateFingerprint } from "../src/fingerprint.js";
import { createServer, listen } from "../src/serve.js";
import { defaultTrainConfig, train, type Label, type TrainExample } from "../src/train.js";

/**
 * End-to-end interoperability with the transcript-analysis pipeline, talking
 * to it only through its CLI and file formats: its prompt bundles are
 * classified against our served endpoint and its evaluator scores the result.
 */

const HERE = dirname(fileURLToPath(import.meta.url));
const TEMPLATES_DIR = join(HERE, "..", "..", "src", "adscreen", "templates", "v1");

// async so the served endpoint keeps responding while the CLI runs
const execFileAsync = promisify(execFile);

async function pipeline(args: string[]): Promise<string> {
  const { stdout } = await execFileAsync("python3", ["-m", "adscreen.cli", ...args]);
  return stdout;
}

function readJsonl(path: string): Record<string, unknown>[] {
  return readFileSync(path, "utf8")
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map((line) => JSON.parse(line) as Record<string, unknown>);
}

describe("interop with the analysis pipeline CLI", () => {
  const work = mkdtempSync(join(tmpdir(), "interop-"));
  const corpus = join(work, "corpus");
  const run = join(work, "run");
  let server: Server;
  let baseUrl: string;

  beforeAll(async () => {
    await pipeline(["synth", "--output", corpus, "--n", "6", "--seed", "11"]);
    await pipeline([
      "pipeline",
      "--manifest", join(corpus, "manifest.jsonl"),
      "--output", run,
      "--mode", "cot",
      "--endpoint", "mock",
    ]);

    const labels = new Map<string, Label>();
    for (const row of readJsonl(join(run, "manifest.jsonl"))) {
      labels.set(String(row.participant_id), row.label as Label);
    }
    const examples: TrainExample[] = readJsonl(join(run, "transcripts.jsonl")).map((row) => ({
      text: String(row.text),
      label: labels.get(String(row.participant_id))!,
    }));

    const templates = loadTemplatesDir(TEMPLATES_DIR);
    const runManifest = JSON.parse(readFileSync(join(run, "run_manifest.json"), "utf8"));
    const { model } = train(
      defaultTrainConfig({
        loraRank: 2,
        learningRate: 0.01,
        seed: 3,
        schedule: { warmupSteps: 2, sustainSteps: 16, decaySteps: 2 },
      }),
      examples,
      templates,
      { expectedTemplateFingerprint: runManifest.template_fingerprint },
    );
    server = createServer(model, "toy-decoder-1b");
    const port = await listen(server, 0);
    baseUrl = `http://127.0.0.1:${port}`;
  }, 60_000);

  afterAll(() => {
    server?.close();
  });

  it("computes the same template fingerprint as the pipeline's run manifest", () => {
    const runManifest = JSON.parse(readFileSync(join(run, "run_manifest.json"), "utf8"));
    expect(templateFingerprint(loadTemplatesDir(TEMPLATES_DIR))).toBe(
      runManifest.template_fingerprint,
    );
  });

  it("serves verdicts that classify and eval ingest with zero schema errors", async () => {
    const predictions = join(work, "predictions.jsonl");
    const metricsPath = join(work, "metrics.json");
    await pipeline([
      "classify",
      "--input", join(run, "bundles.jsonl"),
      "--output", predictions,
      "--endpoint", "external",
      "--base-url", baseUrl,
      "--model", "toy-decoder-1b",
    ]);
    const rows = readJsonl(predictions);
    expect(rows).toHaveLength(12);
    for (const row of rows) {
      expect(["AD", "non_AD"]).toContain(row.label);
      expect(row.source).toBe("llm");
    }
    await pipeline([
      "eval",
      "--predictions", predictions,
      "--manifest", join(run, "manifest.jsonl"),
      "--output", metricsPath,
    ]);
    const metrics = JSON.parse(readFileSync(metricsPath, "utf8"));
    const cm = metrics.confusion_matrix;
    expect(cm.tp + cm.fp + cm.fn + cm.tn).toBe(12);
    expect(metrics.metrics.accuracy).toBeGreaterThanOrEqual(0);
    expect(metrics.metrics.accuracy).toBeLessThanOrEqual(1);
  }, 60_000);
});
