import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { Api, FrameRequest, Meta, TrackResponse } from "../src/api.js";
import { Player } from "../src/player.js";

const META: Meta = {
  seq: "demo", frames: 6, H: 32, W: 32, A: 5,
  keyframe_stride: 5, d_min: -2, d_max: 2,
};

class MockApi implements Api {
  frameCalls: FrameRequest[] = [];
  clickResult = 1.5;
  trackResult: TrackResponse = {
    points: [0, 1, 2, 3, 4, 5].map((t) => ({ t, x: 10 + t, y: 8, s: 0.1 * t, lost: false })),
    lost: false,
  };
  frameDelayMs = 0;
  failFrames = false;

  async sequences(): Promise<string[]> {
    return ["demo"];
  }

  async meta(): Promise<Meta> {
    return META;
  }

  async frame(_seq: string, req: FrameRequest): Promise<Blob> {
    if (this.failFrames) throw new Error("boom");
    this.frameCalls.push({ ...req });
    if (this.frameDelayMs > 0) {
      await new Promise((resolve) => setTimeout(resolve, this.frameDelayMs));
    }
    return new Blob(["x"]);
  }

  async click(): Promise<number> {
    return this.clickResult;
  }

  async track(): Promise<TrackResponse> {
    return this.trackResult;
  }
}

function makePlayer(api: MockApi) {
  const drawn: FrameRequest[] = [];
  const player = new Player(api, META, { draw: (_b, req) => drawn.push(req) }, 10);
  return { player, drawn };
}

describe("player", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("play issues one request per frame period with current parameters", async () => {
    const api = new MockApi();
    const { player } = makePlayer(api);
    player.setAperture(1);
    await vi.runAllTimersAsync();
    api.frameCalls.length = 0;
    player.play();
    await vi.advanceTimersByTimeAsync(300); // 3 ticks at 10 fps
    expect(api.frameCalls.length).toBe(3);
    expect(api.frameCalls[0].t).toBe(1);
    expect(api.frameCalls[0].r).toBe(1);
    expect(api.frameCalls.map((r) => r.t)).toEqual([1, 2, 3]);
  });

  it("pause stops issuing requests", async () => {
    const api = new MockApi();
    const { player } = makePlayer(api);
    player.play();
    await vi.advanceTimersByTimeAsync(200);
    player.pause();
    const count = api.frameCalls.length;
    await vi.advanceTimersByTimeAsync(500);
    expect(api.frameCalls.length).toBe(count);
    expect(player.state.playing).toBe(false);
  });

  it("drops frames instead of queueing when the server lags", async () => {
    const api = new MockApi();
    api.frameDelayMs = 450; // much slower than the 100 ms frame period
    const { player } = makePlayer(api);
    player.play();
    await vi.advanceTimersByTimeAsync(1000);
    expect(api.frameCalls.length).toBeLessThanOrEqual(3);
    expect(player.framesDropped).toBeGreaterThan(2);
  });

  it("aperture r=0 at the central view requests the refocus endpoint", async () => {
    const api = new MockApi();
    const { player } = makePlayer(api);
    await player.renderCurrent();
    const last = api.frameCalls.at(-1)!;
    expect(last.kind).toBe("refocus");
    expect(last.r).toBe(0);
  });

  it("click during playback: the next frame uses the new focus", async () => {
    const api = new MockApi();
    api.clickResult = 1.25;
    const { player } = makePlayer(api);
    player.play();
    await vi.advanceTimersByTimeAsync(200);
    const clickDone = player.clickToFocus(16, 16);
    await vi.runOnlyPendingTimersAsync();
    await clickDone;
    api.frameCalls.length = 0;
    await vi.advanceTimersByTimeAsync(100); // exactly one frame period later
    expect(api.frameCalls.length).toBeGreaterThanOrEqual(1);
    expect(api.frameCalls[0].s).toBe(1.25);
  });

  it("tracking mode applies the /api/track schedule per frame", async () => {
    const api = new MockApi();
    const { player } = makePlayer(api);
    const done = player.enableTracking(10, 8);
    await vi.runOnlyPendingTimersAsync();
    await done;
    expect(player.state.mode).toBe("tracking");
    api.frameCalls.length = 0;
    player.play();
    await vi.advanceTimersByTimeAsync(300);
    for (const req of api.frameCalls) {
      expect(req.s).toBeCloseTo(0.1 * req.t, 10);
    }
  });

  it("track-lost response flags the banner state and holds focus", async () => {
    const api = new MockApi();
    api.trackResult = {
      points: [
        { t: 0, x: 1, y: 1, s: 0.4, lost: false },
        { t: 1, x: 1, y: 1, s: null, lost: true },
      ],
      lost: true,
    };
    const { player } = makePlayer(api);
    const done = player.enableTracking(1, 1);
    await vi.runOnlyPendingTimersAsync();
    await done;
    expect(player.state.trackLost).toBe(true);
    player.seek(3);
    await vi.runOnlyPendingTimersAsync();
    expect(api.frameCalls.at(-1)!.s).toBe(0.4);
  });

  it("network failure pauses with a visible error", async () => {
    const api = new MockApi();
    const { player } = makePlayer(api);
    player.play();
    await vi.advanceTimersByTimeAsync(100);
    api.failFrames = true;
    await vi.advanceTimersByTimeAsync(200);
    expect(player.state.error).toBeTruthy();
    expect(player.state.playing).toBe(false);
  });
});
