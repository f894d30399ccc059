import { describe, expect, it } from "vitest";

import { learningRateAt, totalSteps, validateSchedule } from "../src/schedule.js";

const SCHEDULE = { warmupSteps: 4, sustainSteps: 10, decaySteps: 5 };

describe("learningRateAt", () => {
  it("ramps linearly to the peak during warm-up", () => {
    expect(learningRateAt(0, 1.0, SCHEDULE)).toBeCloseTo(0.25, 12);
    expect(learningRateAt(1, 1.0, SCHEDULE)).toBeCloseTo(0.5, 12);
    expect(learningRateAt(3, 1.0, SCHEDULE)).toBeCloseTo(1.0, 12);
  });

  it("holds the peak through the sustain phase", () => {
    for (let step = 4; step < 14; step++) {
      expect(learningRateAt(step, 1.0, SCHEDULE)).toBe(1.0);
    }
  });

  it("decays linearly to zero afterwards", () => {
    expect(learningRateAt(14, 1.0, SCHEDULE)).toBeCloseTo(1.0, 12);
    expect(learningRateAt(16, 1.0, SCHEDULE)).toBeCloseTo(0.6, 12);
    expect(learningRateAt(19, 1.0, SCHEDULE)).toBe(0);
    expect(learningRateAt(100, 1.0, SCHEDULE)).toBe(0);
  });

  it("is non-increasing after the warm-up", () => {
    let previous = Infinity;
    for (let step = SCHEDULE.warmupSteps; step < 30; step++) {
      const lr = learningRateAt(step, 3e-4, SCHEDULE);
      expect(lr).toBeLessThanOrEqual(previous + 1e-15);
      previous = lr;
    }
  });

  it("rejects negative steps and malformed phases", () => {
    expect(() => learningRateAt(-1, 1.0, SCHEDULE)).toThrow(RangeError);
    expect(() => validateSchedule({ warmupSteps: -1, sustainSteps: 0, decaySteps: 0 })).toThrow(
      RangeError,
    );
    expect(() => validateSchedule({ warmupSteps: 1.5, sustainSteps: 0, decaySteps: 0 })).toThrow(
      RangeError,
    );
  });

  it("counts total steps across the three phases", () => {
    expect(totalSteps(SCHEDULE)).toBe(19);
  });
});
