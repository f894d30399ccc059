import { createHash } from "node:crypto";
import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";

/**
 * Stable digest over a prompt-template set. The scheme (sorted names, each
 * name and body NUL-terminated, sha256) is a shared wire contract with the
 * transcript-analysis pipeline: training and inference must use templates
 * with the same fingerprint or the trainer refuses to run.
 */
export function templateFingerprint(templates: Record<string, string>): string {
  const h = createHash("sha256");
  for (const name of Object.keys(templates).sort()) {
    h.update(name, "utf8");
    h.update(Buffer.from([0]));
    h.update(templates[name]!, "utf8");
    h.update(Buffer.from([0]));
  }
  return h.digest("hex");
}

/** Load every *.txt in a directory, keyed by file stem. */
export function loadTemplatesDir(dir: string): Record<string, string> {
  const templates: Record<string, string> = {};
  for (const entry of readdirSync(dir).sort()) {
    if (!entry.endsWith(".txt")) continue;
    templates[entry.slice(0, -4)] = readFileSync(join(dir, entry), "utf8");
  }
  return templates;
}
