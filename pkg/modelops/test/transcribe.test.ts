import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import {
  MissingModel,
  SidecarTextEngine,
  UnreadableAudio,
  createEngine,
  toJsonl,
  transcribeDir,
} from "../src/transcribe.js";

/** Minimal valid RIFF/WAVE container holding silence. */
function writeWav(path: string): void {
  const header = Buffer.alloc(44);
  header.write("RIFF", 0, "ascii");
  header.writeUInt32LE(36, 4);
  header.write("WAVE", 8, "ascii");
  header.write("fmt ", 12, "ascii");
  header.writeUInt32LE(16, 16);
  header.writeUInt16LE(1, 20); // PCM
  header.writeUInt16LE(1, 22); // mono
  header.writeUInt32LE(16000, 24);
  header.writeUInt32LE(32000, 28);
  header.writeUInt16LE(2, 32);
  header.writeUInt16LE(16, 34);
  header.write("data", 36, "ascii");
  header.writeUInt32LE(0, 40);
  writeFileSync(path, header);
}

function makeDir(): string {
  return mkdtempSync(join(tmpdir(), "asr-"));
}

describe("transcribeDir with the sidecar engine", () => {
  it("joins a participant's chunk transcripts in filename order", () => {
    const dir = makeDir();
    for (const [i, text] of ["the boy", "is on the stool", "reaching for cookies"].entries()) {
      writeWav(join(dir, `p01_00${i}.wav`));
      writeFileSync(join(dir, `p01_00${i}.txt`), text + "\n", "utf8");
    }
    const records = transcribeDir(dir, new SidecarTextEngine());
    expect(records).toHaveLength(1);
    expect(records[0]!.participant_id).toBe("p01");
    expect(records[0]!.text).toBe("the boy is on the stool reaching for cookies");
    expect(records[0]!.utterance_count).toBe(3);
    expect(records[0]!.warnings).toEqual([]);
  });

  it("returns an empty list for an empty directory", () => {
    expect(transcribeDir(makeDir(), new SidecarTextEngine())).toEqual([]);
    expect(toJsonl([])).toBe("");
  });

  it("flags a silent chunk in the warnings field with empty text", () => {
    const dir = makeDir();
    writeWav(join(dir, "p02_000.wav")); // no sidecar: nothing recognized
    const records = transcribeDir(dir, new SidecarTextEngine());
    expect(records[0]!.text).toBe("");
    expect(records[0]!.warnings).toHaveLength(1);
    expect(records[0]!.warnings[0]).toMatch(/no speech/);
  });

  it("groups multiple participants and sorts records by id", () => {
    const dir = makeDir();
    for (const pid of ["b", "a"]) {
      writeWav(join(dir, `${pid}_000.wav`));
      writeFileSync(join(dir, `${pid}_000.txt`), `hello from ${pid}`, "utf8");
    }
    const records = transcribeDir(dir, new SidecarTextEngine());
    expect(records.map((r) => r.participant_id)).toEqual(["a", "b"]);
  });

  it("raises UnreadableAudio for files that are not RIFF/WAVE", () => {
    const dir = makeDir();
    writeFileSync(join(dir, "p03_000.wav"), "definitely not audio", "utf8");
    expect(() => transcribeDir(dir, new SidecarTextEngine())).toThrow(UnreadableAudio);
  });

  it("emits records in the transcript JSONL schema", () => {
    const dir = makeDir();
    writeWav(join(dir, "p04_000.wav"));
    writeFileSync(join(dir, "p04_000.txt"), "water everywhere", "utf8");
    const line = toJsonl(transcribeDir(dir, new SidecarTextEngine())).trim();
    const record = JSON.parse(line);
    expect(Object.keys(record).sort()).toEqual([
      "participant_id",
      "pause_counts",
      "repetition_count",
      "retrace_count",
      "text",
      "utterance_count",
      "warnings",
    ]);
    expect(record.pause_counts).toEqual([0, 0, 0]);
  });
});

describe("createEngine", () => {
  it("knows the sidecar engine and nothing else", () => {
    expect(createEngine("sidecar-text").modelId).toBe("sidecar-text");
    expect(() => createEngine("whisper-large-v2")).toThrow(MissingModel);
  });
});
