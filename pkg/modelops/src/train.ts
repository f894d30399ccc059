import { readFileSync, writeFileSync } from "node:fs";

import { BaseModel, HIDDEN_DIM, TARGET_MATRICES, type TargetMatrix } from "./baseModel.js";
import { templateFingerprint } from "./fingerprint.js";
import {
  adapterFromJson,
  adapterParamCount,
  adapterToJson,
  applyAdapted,
  backwardAdapted,
  initAdapter,
  type AdaptedForward,
  type AdapterGrad,
  type LoraAdapter,
} from "./lora.js";
import { SeededRng } from "./rng.js";
import { learningRateAt, totalSteps, validateSchedule, type ScheduleConfig } from "./schedule.js";
import { zeros, type Matrix } from "./tensor.js";

export const ARTIFACT_FORMAT_VERSION = "modelops-adapter-1";

export class TrainError extends Error {}

export class InvalidTrainConfig extends TrainError {}

export class EmptyTrainSet extends TrainError {}

/** The prompt templates on disk differ from the fingerprint the caller pinned. */
export class ConfigMismatch extends TrainError {}

export class ArtifactCorrupt extends TrainError {}

export interface TrainConfig {
  baseModelId: string;
  loraRank: number;
  loraAlpha: number;
  loraDropout: number;
  batchSize: number;
  learningRate: number;
  weightDecay: number;
  optimizer: "adamw";
  schedule: ScheduleConfig;
  seed: number;
}

export const DEFAULT_SCHEDULE: ScheduleConfig = {
  warmupSteps: 100,
  sustainSteps: 800,
  decaySteps: 100,
};

export function defaultTrainConfig(overrides: Partial<TrainConfig> = {}): TrainConfig {
  return {
    baseModelId: "toy-decoder-1b",
    loraRank: 16,
    loraAlpha: 16,
    loraDropout: 0.01,
    batchSize: 8,
    learningRate: 1e-4,
    weightDecay: 0.001,
    optimizer: "adamw",
    schedule: { ...DEFAULT_SCHEDULE },
    seed: 0,
    ...overrides,
  };
}

export function validateTrainConfig(config: TrainConfig): void {
  if (!Number.isInteger(config.loraRank) || config.loraRank <= 0) {
    throw new InvalidTrainConfig(`loraRank must be a positive integer, got ${config.loraRank}`);
  }
  if (!(config.loraDropout >= 0 && config.loraDropout < 1)) {
    throw new InvalidTrainConfig(`loraDropout must be in [0, 1), got ${config.loraDropout}`);
  }
  if (!Number.isInteger(config.batchSize) || config.batchSize < 1) {
    throw new InvalidTrainConfig(`batchSize must be >= 1, got ${config.batchSize}`);
  }
  if (!(config.learningRate > 0)) {
    throw new InvalidTrainConfig(`learningRate must be > 0, got ${config.learningRate}`);
  }
  if (config.weightDecay < 0) {
    throw new InvalidTrainConfig(`weightDecay must be >= 0, got ${config.weightDecay}`);
  }
  if (config.optimizer !== "adamw") {
    throw new InvalidTrainConfig(`unsupported optimizer ${String(config.optimizer)}`);
  }
  validateSchedule(config.schedule);
  if (totalSteps(config.schedule) < 1) {
    throw new InvalidTrainConfig("schedule must cover at least one step");
  }
}

export type Label = "AD" | "non_AD";

export interface TrainExample {
  text: string;
  label: Label;
}

export type LayerAdapters = Record<TargetMatrix, LoraAdapter>;

export interface ClassificationHead {
  w: Float64Array;
  b: number;
}

export interface AdaptedModel {
  base: BaseModel;
  adapters: LayerAdapters[];
  head: ClassificationHead;
}

export interface AdapterArtifact {
  version: string;
  baseModelId: string;
  baseWeightsHash: string;
  config: TrainConfig;
  templateFingerprint: string;
  adapters: object[];
  head: { w: number[]; b: number };
  lossCurve: number[];
  trainableParamCount: number;
  adapterParamCount: number;
}

export function initModel(config: TrainConfig): AdaptedModel {
  const base = new BaseModel(config.baseModelId);
  const rng = new SeededRng(`init:${config.seed}`);
  const adapters: LayerAdapters[] = base.layers.map(() => {
    const layer = {} as LayerAdapters;
    for (const name of TARGET_MATRICES) {
      layer[name] = initAdapter(rng, HIDDEN_DIM, HIDDEN_DIM, config.loraRank, config.loraAlpha);
    }
    return layer;
  });
  const head: ClassificationHead = { w: new Float64Array(HIDDEN_DIM), b: 0 };
  for (let i = 0; i < HIDDEN_DIM; i++) head.w[i] = rng.normal() * 0.02;
  return { base, adapters, head };
}

/** Adapter parameters only; the head is counted separately. */
export function adapterTrainableCount(model: AdaptedModel): number {
  let total = 0;
  for (const layer of model.adapters) {
    for (const name of TARGET_MATRICES) {
      const a = layer[name];
      total += a.a.data.length + a.b.data.length;
    }
  }
  return total;
}

export function closedFormAdapterCount(rank: number, numLayers: number): number {
  return numLayers * TARGET_MATRICES.length * adapterParamCount(rank, HIDDEN_DIM, HIDDEN_DIM);
}

export function headParamCount(model: AdaptedModel): number {
  return model.head.w.length + 1;
}

interface LayerCache {
  x: Float64Array;
  q: AdaptedForward;
  k: AdaptedForward;
  v: AdaptedForward;
  u: Float64Array;
  o: AdaptedForward;
  h: Float64Array;
}

interface ForwardCache {
  layers: LayerCache[];
  hidden: Float64Array;
  logit: number;
}

function dropoutMask(rng: SeededRng | null, p: number): Float64Array | null {
  if (rng === null || p === 0) return null;
  const mask = new Float64Array(HIDDEN_DIM);
  const keep = 1 - p;
  for (let i = 0; i < HIDDEN_DIM; i++) mask[i] = rng.next() < keep ? 1 / keep : 0;
  return mask;
}

function forward(model: AdaptedModel, text: string, dropout: { rng: SeededRng; p: number } | null): ForwardCache {
  let h = model.base.embed(text);
  const layers: LayerCache[] = [];
  model.base.layers.forEach((baseLayer, l) => {
    const adapters = model.adapters[l]!;
    const rng = dropout?.rng ?? null;
    const p = dropout?.p ?? 0;
    const q = applyAdapted(baseLayer.q_proj, adapters.q_proj, h, dropoutMask(rng, p));
    const k = applyAdapted(baseLayer.k_proj, adapters.k_proj, h, dropoutMask(rng, p));
    const v = applyAdapted(baseLayer.v_proj, adapters.v_proj, h, dropoutMask(rng, p));
    const u = new Float64Array(HIDDEN_DIM);
    for (let i = 0; i < HIDDEN_DIM; i++) u[i] = q.y[i]! * k.y[i]! + v.y[i]!;
    const o = applyAdapted(baseLayer.o_proj, adapters.o_proj, u, dropoutMask(rng, p));
    const next = o.y.map(Math.tanh);
    layers.push({ x: h, q, k, v, u, o, h: next });
    h = next;
  });
  let logit = model.head.b;
  for (let i = 0; i < HIDDEN_DIM; i++) logit += model.head.w[i]! * h[i]!;
  return { layers, hidden: h, logit };
}

export function forwardLogit(model: AdaptedModel, text: string): number {
  return forward(model, text, null).logit;
}

export function predictLabel(model: AdaptedModel, text: string): Label {
  return forwardLogit(model, text) > 0 ? "AD" : "non_AD";
}

/** Numerically stable binary cross-entropy from the logit. */
export function bceLoss(logit: number, y: number): number {
  return Math.max(logit, 0) - logit * y + Math.log1p(Math.exp(-Math.abs(logit)));
}

interface Grads {
  adapters: Record<TargetMatrix, AdapterGrad>[];
  headW: Float64Array;
  headB: number;
}

function zeroGrads(model: AdaptedModel): Grads {
  return {
    adapters: model.adapters.map((layer) => {
      const out = {} as Record<TargetMatrix, AdapterGrad>;
      for (const name of TARGET_MATRICES) {
        out[name] = {
          a: zeros(layer[name].a.rows, layer[name].a.cols),
          b: zeros(layer[name].b.rows, layer[name].b.cols),
        };
      }
      return out;
    }),
    headW: new Float64Array(HIDDEN_DIM),
    headB: 0,
  };
}

function backward(model: AdaptedModel, cache: ForwardCache, y: number, grads: Grads): number {
  const loss = bceLoss(cache.logit, y);
  const p = 1 / (1 + Math.exp(-cache.logit));
  const dLogit = p - y;
  let dh = new Float64Array(HIDDEN_DIM);
  for (let i = 0; i < HIDDEN_DIM; i++) {
    grads.headW[i]! += dLogit * cache.hidden[i]!;
    dh[i] = dLogit * model.head.w[i]!;
  }
  grads.headB += dLogit;
  for (let l = model.base.layers.length - 1; l >= 0; l--) {
    const baseLayer = model.base.layers[l]!;
    const adapters = model.adapters[l]!;
    const layerGrads = grads.adapters[l]!;
    const c = cache.layers[l]!;
    const dz = new Float64Array(HIDDEN_DIM);
    for (let i = 0; i < HIDDEN_DIM; i++) dz[i] = dh[i]! * (1 - c.h[i]! * c.h[i]!);
    const du = backwardAdapted(baseLayer.o_proj, adapters.o_proj, c.u, c.o, dz, layerGrads.o_proj);
    const dq = new Float64Array(HIDDEN_DIM);
    const dk = new Float64Array(HIDDEN_DIM);
    const dv = new Float64Array(HIDDEN_DIM);
    for (let i = 0; i < HIDDEN_DIM; i++) {
      dq[i] = du[i]! * c.k.y[i]!;
      dk[i] = du[i]! * c.q.y[i]!;
      dv[i] = du[i]!;
    }
    const dxQ = backwardAdapted(baseLayer.q_proj, adapters.q_proj, c.x, c.q, dq, layerGrads.q_proj);
    const dxK = backwardAdapted(baseLayer.k_proj, adapters.k_proj, c.x, c.k, dk, layerGrads.k_proj);
    const dxV = backwardAdapted(baseLayer.v_proj, adapters.v_proj, c.x, c.v, dv, layerGrads.v_proj);
    dh = new Float64Array(HIDDEN_DIM);
    for (let i = 0; i < HIDDEN_DIM; i++) dh[i] = dxQ[i]! + dxK[i]! + dxV[i]!;
  }
  return loss;
}

interface AdamSlot {
  m: Float64Array;
  v: Float64Array;
}

class AdamW {
  private slots = new Map<Float64Array, AdamSlot>();
  private step = 0;
  constructor(
    private readonly weightDecay: number,
    private readonly beta1 = 0.9,
    private readonly beta2 = 0.999,
    private readonly eps = 1e-8,
  ) {}

  beginStep(): void {
    this.step += 1;
  }

  update(param: Float64Array, grad: Float64Array, lr: number, decay = true): void {
    let slot = this.slots.get(param);
    if (!slot) {
      slot = { m: new Float64Array(param.length), v: new Float64Array(param.length) };
      this.slots.set(param, slot);
    }
    const c1 = 1 - Math.pow(this.beta1, this.step);
    const c2 = 1 - Math.pow(this.beta2, this.step);
    for (let i = 0; i < param.length; i++) {
      const g = grad[i]!;
      slot.m[i] = this.beta1 * slot.m[i]! + (1 - this.beta1) * g;
      slot.v[i] = this.beta2 * slot.v[i]! + (1 - this.beta2) * g * g;
      const mHat = slot.m[i]! / c1;
      const vHat = slot.v[i]! / c2;
      let updated = param[i]! - lr * (mHat / (Math.sqrt(vHat) + this.eps));
      if (decay) updated -= lr * this.weightDecay * param[i]!;
      param[i] = updated;
    }
  }
}

export interface TrainResult {
  artifact: AdapterArtifact;
  model: AdaptedModel;
}

export interface TrainOptions {
  /** Refuse to train if the provided templates hash differently. */
  expectedTemplateFingerprint?: string;
  maxSteps?: number;
}

export function train(
  config: TrainConfig,
  examples: TrainExample[],
  templates: Record<string, string>,
  options: TrainOptions = {},
): TrainResult {
  validateTrainConfig(config);
  if (examples.length === 0) throw new EmptyTrainSet("no training examples");
  const fingerprint = templateFingerprint(templates);
  if (
    options.expectedTemplateFingerprint !== undefined &&
    options.expectedTemplateFingerprint !== fingerprint
  ) {
    throw new ConfigMismatch(
      `template fingerprint ${fingerprint} does not match pinned ${options.expectedTemplateFingerprint}`,
    );
  }

  const model = initModel(config);
  const optimizer = new AdamW(config.weightDecay);
  const dropoutRng = new SeededRng(`dropout:${config.seed}`);
  const steps = Math.min(totalSteps(config.schedule), options.maxSteps ?? Infinity);
  const lossCurve: number[] = [];

  for (let step = 0; step < steps; step++) {
    const grads = zeroGrads(model);
    let batchLoss = 0;
    const batch: TrainExample[] = [];
    for (let i = 0; i < config.batchSize; i++) {
      batch.push(examples[(step * config.batchSize + i) % examples.length]!);
    }
    for (const example of batch) {
      const cache = forward(model, example.text, { rng: dropoutRng, p: config.loraDropout });
      batchLoss += backward(model, cache, example.label === "AD" ? 1 : 0, grads);
    }
    batchLoss /= batch.length;
    if (!Number.isFinite(batchLoss)) {
      throw new TrainError(`loss became non-finite at step ${step}`);
    }
    lossCurve.push(batchLoss);

    const lr = learningRateAt(step, config.learningRate, config.schedule);
    const invBatch = 1 / batch.length;
    optimizer.beginStep();
    model.adapters.forEach((layer, l) => {
      for (const name of TARGET_MATRICES) {
        const grad = grads.adapters[l]![name];
        scaleInPlace(grad.a.data, invBatch);
        scaleInPlace(grad.b.data, invBatch);
        optimizer.update(layer[name].a.data, grad.a.data, lr);
        optimizer.update(layer[name].b.data, grad.b.data, lr);
      }
    });
    scaleInPlace(grads.headW, invBatch);
    optimizer.update(model.head.w, grads.headW, lr);
    const headBGrad = new Float64Array([grads.headB * invBatch]);
    const headB = new Float64Array([model.head.b]);
    optimizer.update(headB, headBGrad, lr, false);
    model.head.b = headB[0]!;
  }

  const artifact: AdapterArtifact = {
    version: ARTIFACT_FORMAT_VERSION,
    baseModelId: config.baseModelId,
    baseWeightsHash: model.base.weightsHash(),
    config,
    templateFingerprint: fingerprint,
    adapters: model.adapters.map((layer) => {
      const out: Record<string, object> = {};
      for (const name of TARGET_MATRICES) out[name] = adapterToJson(layer[name]);
      return out;
    }),
    head: { w: Array.from(model.head.w), b: model.head.b },
    lossCurve,
    trainableParamCount: adapterTrainableCount(model) + headParamCount(model),
    adapterParamCount: adapterTrainableCount(model),
  };
  return { artifact, model };
}

function scaleInPlace(arr: Float64Array, scale: number): void {
  for (let i = 0; i < arr.length; i++) arr[i]! *= scale;
}

export function saveArtifact(artifact: AdapterArtifact, path: string): void {
  writeFileSync(path, JSON.stringify(artifact, null, 2), "utf8");
}

export function loadArtifact(path: string): { artifact: AdapterArtifact; model: AdaptedModel } {
  let artifact: AdapterArtifact;
  try {
    artifact = JSON.parse(readFileSync(path, "utf8")) as AdapterArtifact;
  } catch (err) {
    throw new ArtifactCorrupt(`unreadable artifact: ${(err as Error).message}`);
  }
  if (artifact.version !== ARTIFACT_FORMAT_VERSION) {
    throw new ArtifactCorrupt(`unknown artifact version ${String(artifact.version)}`);
  }
  const base = new BaseModel(artifact.baseModelId);
  if (base.weightsHash() !== artifact.baseWeightsHash) {
    throw new ArtifactCorrupt(
      `base weights hash mismatch for ${artifact.baseModelId}: artifact was trained against different frozen weights`,
    );
  }
  const adapters = artifact.adapters.map((layerDoc) => {
    const layer = {} as LayerAdapters;
    for (const name of TARGET_MATRICES) {
      const doc = (layerDoc as Record<string, never>)[name];
      if (!doc) throw new ArtifactCorrupt(`adapter ${name} missing from artifact`);
      layer[name] = adapterFromJson(doc);
    }
    return layer;
  });
  const head: ClassificationHead = {
    w: Float64Array.from(artifact.head.w),
    b: artifact.head.b,
  };
  return { artifact, model: { base, adapters, head } };
}
