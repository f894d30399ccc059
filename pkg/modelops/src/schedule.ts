/**
 * Three-phase linear learning-rate schedule: linear warm-up to the peak rate,
 * a constant sustain phase, then linear decay back to zero.
 */
export interface ScheduleConfig {
  warmupSteps: number;
  sustainSteps: number;
  decaySteps: number;
}

export function validateSchedule(schedule: ScheduleConfig): void {
  for (const [name, value] of Object.entries(schedule)) {
    if (!Number.isInteger(value) || value < 0) {
      throw new RangeError(`schedule.${name} must be a non-negative integer, got ${value}`);
    }
  }
}

export function totalSteps(schedule: ScheduleConfig): number {
  return schedule.warmupSteps + schedule.sustainSteps + schedule.decaySteps;
}

/** Learning rate at a zero-based step index. */
export function learningRateAt(step: number, peak: number, schedule: ScheduleConfig): number {
  const { warmupSteps, sustainSteps, decaySteps } = schedule;
  if (step < 0) throw new RangeError(`step must be >= 0, got ${step}`);
  if (step < warmupSteps) {
    return (peak * (step + 1)) / warmupSteps;
  }
  if (step < warmupSteps + sustainSteps) {
    return peak;
  }
  const intoDecay = step - warmupSteps - sustainSteps;
  if (intoDecay >= decaySteps) return 0;
  return peak * (1 - intoDecay / decaySteps);
}
