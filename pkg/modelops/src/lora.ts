import type { SeededRng } from "./rng.js";
import { fromNested, matTVec, matVec, randn, toNested, zeros, type Matrix } from "./tensor.js";

/**
 * Low-rank adapter for one frozen weight matrix W (dOut x dIn):
 *
 *   W' x = W x + (alpha / rank) * B (A x)
 *
 * A is rank x dIn (gaussian init), B is dOut x rank (zero init), so at step 0
 * the adapted model is exactly the base model.
 */
export interface LoraAdapter {
  a: Matrix;
  b: Matrix;
  rank: number;
  alpha: number;
}

export function initAdapter(
  rng: SeededRng,
  dIn: number,
  dOut: number,
  rank: number,
  alpha: number,
): LoraAdapter {
  return { a: randn(rng, rank, dIn, 0.02), b: zeros(dOut, rank), rank, alpha };
}

/** Closed-form trainable-parameter count of one adapter pair. */
export function adapterParamCount(rank: number, dIn: number, dOut: number): number {
  return rank * (dIn + dOut);
}

export function adapterScale(adapter: LoraAdapter): number {
  return adapter.alpha / adapter.rank;
}

export interface AdaptedForward {
  y: Float64Array;
  /** A (mask . x), cached for the backward pass. */
  ax: Float64Array;
  /** Dropout mask applied to the adapter branch input (1/(1-p) inverted). */
  mask: Float64Array | null;
}

export function applyAdapted(
  base: Matrix,
  adapter: LoraAdapter,
  x: Float64Array,
  mask: Float64Array | null = null,
): AdaptedForward {
  const branchInput = mask === null ? x : x.map((v, i) => v * mask[i]!);
  const ax = matVec(adapter.a, branchInput);
  const y = matVec(base, x);
  const scale = adapterScale(adapter);
  const bax = matVec(adapter.b, ax);
  for (let i = 0; i < y.length; i++) y[i]! += scale * bax[i]!;
  return { y, ax, mask };
}

export interface AdapterGrad {
  a: Matrix;
  b: Matrix;
}

/**
 * Backward pass through one adapted matrix. Accumulates adapter gradients and
 * returns dL/dx. The base matrix receives no gradient (frozen by contract).
 */
export function backwardAdapted(
  base: Matrix,
  adapter: LoraAdapter,
  x: Float64Array,
  fwd: AdaptedForward,
  dy: Float64Array,
  grad: AdapterGrad,
): Float64Array {
  const scale = adapterScale(adapter);
  const branchInput = fwd.mask === null ? x : x.map((v, i) => v * fwd.mask![i]!);
  // dL/dB = scale * dy (A x~)^T
  for (let r = 0; r < grad.b.rows; r++) {
    const dyr = dy[r]! * scale;
    for (let c = 0; c < grad.b.cols; c++) grad.b.data[r * grad.b.cols + c]! += dyr * fwd.ax[c]!;
  }
  // dL/dA = scale * (B^T dy) x~^T
  const btDy = matTVec(adapter.b, dy);
  for (let r = 0; r < grad.a.rows; r++) {
    const br = btDy[r]! * scale;
    for (let c = 0; c < grad.a.cols; c++) grad.a.data[r * grad.a.cols + c]! += br * branchInput[c]!;
  }
  // dL/dx = W^T dy + scale * mask . (A^T (B^T dy))
  const dx = matTVec(base, dy);
  const atBtDy = matTVec(adapter.a, btDy);
  for (let i = 0; i < dx.length; i++) {
    const m = fwd.mask === null ? 1 : fwd.mask[i]!;
    dx[i]! += scale * m * atBtDy[i]!;
  }
  return dx;
}

export function adapterToJson(adapter: LoraAdapter): object {
  return {
    rank: adapter.rank,
    alpha: adapter.alpha,
    a: toNested(adapter.a),
    b: toNested(adapter.b),
  };
}

export function adapterFromJson(doc: {
  rank: number;
  alpha: number;
  a: number[][];
  b: number[][];
}): LoraAdapter {
  return { rank: doc.rank, alpha: doc.alpha, a: fromNested(doc.a), b: fromNested(doc.b) };
}
