import { existsSync, readFileSync, readdirSync } from "node:fs";
import { basename, join } from "node:path";

/**
 * Batch transcription of per-participant audio chunks.
 *
 * Chunk files are named `<participant>_<index>.wav`; the chunk transcripts are
 * concatenated in filename order into one record per participant. The record
 * schema matches the transcript JSONL the analysis pipeline consumes, plus a
 * `warnings` field for chunks that produced no speech.
 */

export class TranscribeError extends Error {}

export class UnreadableAudio extends TranscribeError {}

export class MissingModel extends TranscribeError {}

export interface ChunkResult {
  text: string;
  warning?: string;
}

export interface AsrEngine {
  modelId: string;
  transcribeChunk(wavPath: string): ChunkResult;
}

export interface TranscriptRecord {
  participant_id: string;
  text: string;
  utterance_count: number;
  pause_counts: [number, number, number];
  repetition_count: number;
  retrace_count: number;
  warnings: string[];
}

function assertReadableWav(wavPath: string): void {
  let header: Buffer;
  try {
    header = readFileSync(wavPath).subarray(0, 12);
  } catch (err) {
    throw new UnreadableAudio(`${wavPath}: ${(err as Error).message}`);
  }
  if (header.length < 12 || header.toString("ascii", 0, 4) !== "RIFF" ||
      header.toString("ascii", 8, 12) !== "WAVE") {
    throw new UnreadableAudio(`${wavPath}: not a RIFF/WAVE file`);
  }
}

/**
 * Offline stand-in engine: reads the transcript from a `.txt` sidecar next to
 * each chunk. A chunk with no sidecar, or an empty one, is treated as
 * containing no recognizable speech.
 */
export class SidecarTextEngine implements AsrEngine {
  readonly modelId = "sidecar-text";

  transcribeChunk(wavPath: string): ChunkResult {
    assertReadableWav(wavPath);
    const sidecar = wavPath.replace(/\.wav$/i, ".txt");
    if (!existsSync(sidecar)) {
      return { text: "", warning: `${basename(wavPath)}: no speech recognized` };
    }
    const text = readFileSync(sidecar, "utf8").trim();
    if (text === "") {
      return { text: "", warning: `${basename(wavPath)}: no speech recognized` };
    }
    return { text };
  }
}

export function createEngine(modelId: string): AsrEngine {
  if (modelId === "sidecar-text") return new SidecarTextEngine();
  throw new MissingModel(`no ASR engine available for model "${modelId}"`);
}

function participantOf(filename: string): string {
  const stem = filename.replace(/\.wav$/i, "");
  const idx = stem.lastIndexOf("_");
  return idx > 0 ? stem.slice(0, idx) : stem;
}

export function transcribeDir(audioDir: string, engine: AsrEngine): TranscriptRecord[] {
  const chunks = readdirSync(audioDir)
    .filter((name) => /\.wav$/i.test(name))
    .sort();
  const byParticipant = new Map<string, string[]>();
  for (const chunk of chunks) {
    const pid = participantOf(chunk);
    const list = byParticipant.get(pid) ?? [];
    list.push(chunk);
    byParticipant.set(pid, list);
  }
  const records: TranscriptRecord[] = [];
  for (const [pid, files] of [...byParticipant.entries()].sort()) {
    const texts: string[] = [];
    const warnings: string[] = [];
    for (const file of files) {
      const result = engine.transcribeChunk(join(audioDir, file));
      if (result.text !== "") texts.push(result.text);
      if (result.warning) warnings.push(result.warning);
    }
    records.push({
      participant_id: pid,
      text: texts.join(" "),
      utterance_count: files.length,
      pause_counts: [0, 0, 0],
      repetition_count: 0,
      retrace_count: 0,
      warnings,
    });
  }
  return records;
}

export function toJsonl(records: TranscriptRecord[]): string {
  return records.map((r) => JSON.stringify(r)).join("\n") + (records.length ? "\n" : "");
}
