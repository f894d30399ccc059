import { describe, expect, it } from "vitest";

import {
  adapterParamCount,
  applyAdapted,
  backwardAdapted,
  initAdapter,
  type AdapterGrad,
} from "../src/lora.js";
import { SeededRng } from "../src/rng.js";
import { matVec, randn, zeros } from "../src/tensor.js";

function vec(rng: SeededRng, n: number): Float64Array {
  return Float64Array.from({ length: n }, () => rng.normal());
}

describe("adapterParamCount", () => {
  it("is rank * (dIn + dOut)", () => {
    expect(adapterParamCount(16, 64, 64)).toBe(16 * 128);
    expect(adapterParamCount(2, 10, 30)).toBe(80);
  });

  it("matches the actual allocation", () => {
    const adapter = initAdapter(new SeededRng("n"), 10, 30, 2, 16);
    expect(adapter.a.data.length + adapter.b.data.length).toBe(adapterParamCount(2, 10, 30));
  });
});

describe("applyAdapted", () => {
  it("equals the base matrix at init because B starts at zero", () => {
    const rng = new SeededRng("apply");
    const base = randn(rng, 6, 4, 1);
    const adapter = initAdapter(rng, 4, 6, 3, 16);
    const x = vec(rng, 4);
    const { y } = applyAdapted(base, adapter, x);
    const plain = matVec(base, x);
    y.forEach((value, i) => expect(value).toBeCloseTo(plain[i]!, 12));
  });
});

describe("backwardAdapted", () => {
  it("matches central finite differences on A, B, and x", () => {
    const rng = new SeededRng("grad");
    const dIn = 5;
    const dOut = 4;
    const base = randn(rng, dOut, dIn, 1);
    const adapter = initAdapter(rng, dIn, dOut, 2, 8);
    // make B non-zero so gradients flow everywhere
    for (let i = 0; i < adapter.b.data.length; i++) adapter.b.data[i] = rng.normal() * 0.3;
    const x = vec(rng, dIn);
    const probe = vec(rng, dOut); // loss = probe . y

    const loss = (xx: Float64Array) => {
      const { y } = applyAdapted(base, adapter, xx);
      let acc = 0;
      for (let i = 0; i < dOut; i++) acc += probe[i]! * y[i]!;
      return acc;
    };

    const fwd = applyAdapted(base, adapter, x);
    const grad: AdapterGrad = { a: zeros(2, dIn), b: zeros(dOut, 2) };
    const dx = backwardAdapted(base, adapter, x, fwd, probe, grad);

    const h = 1e-6;
    for (let i = 0; i < x.length; i++) {
      const xp = x.slice();
      const xm = x.slice();
      xp[i]! += h;
      xm[i]! -= h;
      expect(dx[i]!).toBeCloseTo((loss(xp) - loss(xm)) / (2 * h), 6);
    }
    for (const [param, g] of [
      [adapter.a, grad.a],
      [adapter.b, grad.b],
    ] as const) {
      for (let i = 0; i < param.data.length; i++) {
        const original = param.data[i]!;
        param.data[i] = original + h;
        const up = loss(x);
        param.data[i] = original - h;
        const down = loss(x);
        param.data[i] = original;
        expect(g.data[i]!).toBeCloseTo((up - down) / (2 * h), 6);
      }
    }
  });

  it("never writes gradients into the base matrix", () => {
    const rng = new SeededRng("frozen");
    const base = randn(rng, 4, 4, 1);
    const before = base.data.slice();
    const adapter = initAdapter(rng, 4, 4, 2, 16);
    const x = vec(rng, 4);
    const fwd = applyAdapted(base, adapter, x);
    backwardAdapted(base, adapter, x, fwd, vec(rng, 4), {
      a: zeros(2, 4),
      b: zeros(4, 2),
    });
    expect([...base.data]).toEqual([...before]);
  });
});
