import { SeededRng } from "./rng.js";
import { hashMatrices, matVec, randn, type Matrix } from "./tensor.js";

/**
 * A small frozen decoder stand-in: token embedding table plus a stack of
 * layers whose projection matrices mirror the attention projections that
 * adapters target in a full-size model. Weights are derived deterministically
 * from the base model id, never trained, and never serialized into artifacts.
 */

export const VOCAB_SIZE = 2048;
export const HIDDEN_DIM = 64;
export const NUM_LAYERS = 2;

export const TARGET_MATRICES = ["q_proj", "k_proj", "v_proj", "o_proj"] as const;
export type TargetMatrix = (typeof TARGET_MATRICES)[number];

export type BaseLayer = Record<TargetMatrix, Matrix>;

function fnv1a(token: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < token.length; i++) {
    h ^= token.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

export function tokenize(text: string): string[] {
  return text
    .toLowerCase()
    .split(/\s+/)
    .map((t) => t.replace(/^[^\w']+|[^\w']+$/g, ""))
    .filter((t) => t.length > 0);
}

export class BaseModel {
  readonly baseModelId: string;
  readonly embedding: Matrix;
  readonly layers: BaseLayer[];

  constructor(baseModelId: string) {
    this.baseModelId = baseModelId;
    const rng = new SeededRng(`base-model:${baseModelId}`);
    this.embedding = randn(rng, VOCAB_SIZE, HIDDEN_DIM, 0.5);
    this.layers = [];
    for (let l = 0; l < NUM_LAYERS; l++) {
      const layer = {} as BaseLayer;
      for (const name of TARGET_MATRICES) {
        layer[name] = randn(rng, HIDDEN_DIM, HIDDEN_DIM, 1 / Math.sqrt(HIDDEN_DIM));
      }
      this.layers.push(layer);
    }
  }

  *weightMatrices(): Generator<Matrix> {
    yield this.embedding;
    for (const layer of this.layers) {
      for (const name of TARGET_MATRICES) yield layer[name];
    }
  }

  weightsHash(): string {
    return hashMatrices(this.weightMatrices());
  }

  paramCount(): number {
    let total = 0;
    for (const m of this.weightMatrices()) total += m.data.length;
    return total;
  }

  /** Mean-pooled token embedding of a text. */
  embed(text: string): Float64Array {
    const tokens = tokenize(text);
    const pooled = new Float64Array(HIDDEN_DIM);
    if (tokens.length === 0) return pooled;
    for (const token of tokens) {
      const row = fnv1a(token) % VOCAB_SIZE;
      const base = row * HIDDEN_DIM;
      for (let c = 0; c < HIDDEN_DIM; c++) pooled[c]! += this.embedding.data[base + c]!;
    }
    for (let c = 0; c < HIDDEN_DIM; c++) pooled[c]! /= tokens.length;
    return pooled;
  }

  /** Forward pass with the base (un-adapted) projections; inference only. */
  forwardBase(text: string): Float64Array {
    let h = this.embed(text);
    for (const layer of this.layers) {
      const q = matVec(layer.q_proj, h);
      const k = matVec(layer.k_proj, h);
      const v = matVec(layer.v_proj, h);
      const u = new Float64Array(HIDDEN_DIM);
      for (let i = 0; i < HIDDEN_DIM; i++) u[i] = q[i]! * k[i]! + v[i]!;
      const z = matVec(layer.o_proj, u);
      h = z.map(Math.tanh);
    }
    return h;
  }
}
