/** Playback engine: a frame clock driving the state machine plus at most one
 * in-flight render request. When the server lags, playhead frames are simply
 * dropped rather than queued. */

import type { Api, FrameRequest } from "./api.js";
import * as S from "./state.js";
import type { ViewerState } from "./state.js";

export interface PlayerHooks {
  /** Draw a fetched frame (already the current request's response). */
  draw(blob: Blob, req: FrameRequest): void;
  /** Called after every state change, for UI sync. */
  onState?(st: ViewerState): void;
}

export class Player {
  state: ViewerState;
  private timer: ReturnType<typeof setInterval> | null = null;
  private inflight = false;
  requestsIssued = 0;
  framesDropped = 0;

  constructor(private api: Api, meta: Parameters<typeof S.initState>[0],
              private hooks: PlayerHooks, private fps: number = 10) {
    this.state = S.initState(meta);
  }

  private update(st: ViewerState, render = true): void {
    this.state = st;
    this.hooks.onState?.(st);
    if (render) void this.renderCurrent();
  }

  /** Fetch and draw the current frame unless a request is already pending. */
  async renderCurrent(): Promise<void> {
    if (this.inflight) {
      this.framesDropped += 1;
      return;
    }
    const req = S.frameRequest(this.state);
    this.inflight = true;
    this.requestsIssued += 1;
    try {
      const blob = await this.api.frame(this.state.seq, req);
      this.hooks.draw(blob, req);
    } catch (err) {
      this.update(S.setError(this.state, String(err)), false);
      this.stopClock();
    } finally {
      this.inflight = false;
    }
  }

  private stopClock(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  play(): void {
    if (this.timer !== null) return;
    this.update(S.play(this.state), false);
    this.timer = setInterval(() => {
      this.update(S.tick(this.state), false);
      void this.renderCurrent();
    }, 1000 / this.fps);
  }

  pause(): void {
    this.stopClock();
    this.update(S.pause(this.state), false);
  }

  seek(t: number): void {
    this.update(S.seek(this.state, t));
  }

  setAperture(r: number): void {
    this.update(S.setAperture(this.state, r));
  }

  setFocus(s: number): void {
    this.update(S.setFocus(this.state, s));
  }

  setView(u: number, v: number): void {
    this.update(S.setView(this.state, u, v));
  }

  /** Free-focus click: ask the service for the disparity under the cursor;
   * the next displayed frame uses the returned focus. */
  async clickToFocus(x: number, y: number): Promise<void> {
    try {
      const s = await this.api.click(this.state.seq, this.state.t, x, y);
      this.update(S.applyClick(this.state, s));
    } catch (err) {
      this.update(S.setError(this.state, String(err)), false);
    }
  }

  /** Tracking mode: one /api/track call caches the whole focus schedule. */
  async enableTracking(x: number, y: number): Promise<void> {
    try {
      const resp = await this.api.track(this.state.seq, this.state.t, x, y);
      this.update(S.enableTracking(this.state, resp.points, resp.lost));
    } catch (err) {
      this.update(S.setError(this.state, String(err)), false);
    }
  }

  disableTracking(): void {
    this.update(S.disableTracking(this.state));
  }
}
