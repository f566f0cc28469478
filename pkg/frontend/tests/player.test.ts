import { describe, expect, it } from "vitest";

import { Playback } from "../src/player";

describe("Playback", () => {
  it("advances at the clip rate", () => {
    const playback = new Playback(100, 0.1);
    playback.start(10.0);
    expect(playback.frameAt(10.0)).toBe(0);
    expect(playback.frameAt(10.05)).toBe(0);
    expect(playback.frameAt(10.1)).toBe(1);
    expect(playback.frameAt(11.0)).toBe(10);
    expect(playback.frameAt(12.34)).toBe(23);
  });

  it("loops at the end of the clip", () => {
    const playback = new Playback(4, 0.25);
    playback.start(0);
    expect(playback.frameAt(0.99)).toBe(3);
    expect(playback.frameAt(1.0)).toBe(0);
    expect(playback.frameAt(1.25)).toBe(1);
  });

  it("resumes from the current frame", () => {
    const playback = new Playback(10, 0.1);
    playback.start(5.0, 7);
    expect(playback.frameAt(5.0)).toBe(7);
    expect(playback.frameAt(5.2)).toBe(9);
    expect(playback.frameAt(5.3)).toBe(0);
  });

  it("holds the start frame while stopped", () => {
    const playback = new Playback(10, 0.1);
    playback.start(0, 3);
    playback.stop();
    expect(playback.playing).toBe(false);
    expect(playback.frameAt(99)).toBe(3);
  });

  it("rejects degenerate clips", () => {
    expect(() => new Playback(0, 0.1)).toThrow();
    expect(() => new Playback(10, 0)).toThrow();
  });
});
