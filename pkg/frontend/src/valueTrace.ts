/**
 * Rolling value-estimate trace with drop detection: a step whose estimate
 * fell by more than `delta` relative to any of the previous `window` steps
 * is flagged — the cue a supervisor watches for before taking over.
 */

export interface TracePoint {
  step: number;
  value: number;
  drop: boolean;
}

export class ValueTrace {
  readonly points: TracePoint[] = [];

  constructor(
    private readonly delta: number = 0.05,
    private readonly window: number = 5,
    private readonly capacity: number = 512,
  ) {}

  push(step: number, value: number): TracePoint {
    const start = Math.max(0, this.points.length - this.window);
    let drop = false;
    for (let i = start; i < this.points.length; i++) {
      if (this.points[i].value - value > this.delta) {
        drop = true;
        break;
      }
    }
    const point = { step, value, drop };
    this.points.push(point);
    if (this.points.length > this.capacity) this.points.shift();
    return point;
  }

  reset(): void {
    this.points.length = 0;
  }

  /** Contiguous [start, end] index ranges of flagged points, for overlays. */
  dropRanges(): Array<[number, number]> {
    const ranges: Array<[number, number]> = [];
    for (let i = 0; i < this.points.length; i++) {
      if (!this.points[i].drop) continue;
      if (ranges.length > 0 && ranges[ranges.length - 1][1] === i - 1) {
        ranges[ranges.length - 1][1] = i;
      } else {
        ranges.push([i, i]);
      }
    }
    return ranges;
  }
}
