import { createHash } from "node:crypto";

import type { SeededRng } from "./rng.js";

/** Dense row-major matrix over Float64Array. */
export interface Matrix {
  rows: number;
  cols: number;
  data: Float64Array;
}

export function zeros(rows: number, cols: number): Matrix {
  return { rows, cols, data: new Float64Array(rows * cols) };
}

export function randn(rng: SeededRng, rows: number, cols: number, std: number): Matrix {
  const m = zeros(rows, cols);
  for (let i = 0; i < m.data.length; i++) m.data[i] = rng.normal() * std;
  return m;
}

/** y = W x */
export function matVec(w: Matrix, x: Float64Array): Float64Array {
  if (x.length !== w.cols) {
    throw new Error(`matVec shape mismatch: ${w.rows}x${w.cols} @ ${x.length}`);
  }
  const y = new Float64Array(w.rows);
  for (let r = 0; r < w.rows; r++) {
    let acc = 0;
    const base = r * w.cols;
    for (let c = 0; c < w.cols; c++) acc += w.data[base + c]! * x[c]!;
    y[r] = acc;
  }
  return y;
}

/** y = W^T x */
export function matTVec(w: Matrix, x: Float64Array): Float64Array {
  if (x.length !== w.rows) {
    throw new Error(`matTVec shape mismatch: ${w.rows}x${w.cols} ^T @ ${x.length}`);
  }
  const y = new Float64Array(w.cols);
  for (let r = 0; r < w.rows; r++) {
    const base = r * w.cols;
    const xr = x[r]!;
    for (let c = 0; c < w.cols; c++) y[c]! += w.data[base + c]! * xr;
  }
  return y;
}

/** acc += scale * (y outer x) */
export function addOuter(acc: Matrix, y: Float64Array, x: Float64Array, scale = 1): void {
  if (y.length !== acc.rows || x.length !== acc.cols) {
    throw new Error("addOuter shape mismatch");
  }
  for (let r = 0; r < acc.rows; r++) {
    const base = r * acc.cols;
    const yr = y[r]! * scale;
    for (let c = 0; c < acc.cols; c++) acc.data[base + c]! += yr * x[c]!;
  }
}

export function toNested(m: Matrix): number[][] {
  const out: number[][] = [];
  for (let r = 0; r < m.rows; r++) {
    out.push(Array.from(m.data.subarray(r * m.cols, (r + 1) * m.cols)));
  }
  return out;
}

export function fromNested(rows: number[][]): Matrix {
  const m = zeros(rows.length, rows[0]?.length ?? 0);
  rows.forEach((row, r) => row.forEach((v, c) => (m.data[r * m.cols + c] = v)));
  return m;
}

/** sha256 over the raw float64 bytes of the matrices, in the given order. */
export function hashMatrices(matrices: Iterable<Matrix>): string {
  const h = createHash("sha256");
  for (const m of matrices) {
    h.update(Buffer.from(m.data.buffer, m.data.byteOffset, m.data.byteLength));
  }
  return h.digest("hex");
}
