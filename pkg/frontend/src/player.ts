/**
 * Playback clock: maps wall time to a frame index at the clip's native
 * rate. The controller samples it each animation tick; when a frame is
 * still being fetched the sample is simply skipped, so playback drops
 * frames under load and never queues them.
 */
export class Playback {
  readonly frameCount: number;
  readonly frameTime: number;
  private startedAt: number | null = null;
  private startFrame = 0;

  constructor(frameCount: number, frameTime: number) {
    if (frameCount < 1 || frameTime <= 0) {
      throw new Error("playback needs at least one frame and a positive frame time");
    }
    this.frameCount = frameCount;
    this.frameTime = frameTime;
  }

  get playing(): boolean {
    return this.startedAt !== null;
  }

  start(now: number, fromFrame = 0): void {
    this.startedAt = now;
    this.startFrame = fromFrame;
  }

  stop(): void {
    this.startedAt = null;
  }

  /** Frame the clip should be showing at time `now`; loops at the end. */
  frameAt(now: number): number {
    if (this.startedAt === null) {
      return this.startFrame;
    }
    const elapsed = Math.max(0, now - this.startedAt);
    // epsilon keeps exact frame boundaries from flooring to the previous
    // frame when the division lands at 2.9999999999999996
    const advanced = Math.floor(elapsed / this.frameTime + 1e-6);
    return (this.startFrame + advanced) % this.frameCount;
  }

  get framesPerSecond(): number {
    return 1 / this.frameTime;
  }
}
