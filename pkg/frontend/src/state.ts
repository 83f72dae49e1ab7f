/** Viewer state machine: pure transitions, no I/O, fully testable. */

import type { FrameRequest, Meta, TrackPoint } from "./api.js";

export type Mode = "free" | "tracking";

export interface ViewerState {
  seq: string;
  frames: number;
  t: number;
  playing: boolean;
  mode: Mode;
  focus: number;
  aperture: number;
  view: { u: number; v: number };
  dMin: number;
  dMax: number;
  rMax: number;
  /** per-frame focus schedule while tracking */
  schedule: Map<number, number> | null;
  trackLost: boolean;
  /** last free-focus value, restored when tracking is disabled */
  lastFreeFocus: number;
  error: string | null;
}

export function initState(meta: Meta): ViewerState {
  const mid = 0.5 * (meta.d_min + meta.d_max);
  return {
    seq: meta.seq,
    frames: meta.frames,
    t: 0,
    playing: false,
    mode: "free",
    focus: mid,
    aperture: 0,
    view: { u: 0, v: 0 },
    dMin: meta.d_min,
    dMax: meta.d_max,
    rMax: (meta.A - 1) / 2,
    schedule: null,
    trackLost: false,
    lastFreeFocus: mid,
    error: null,
  };
}

const clamp = (x: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, x));

export function play(st: ViewerState): ViewerState {
  return { ...st, playing: true, error: null };
}

export function pause(st: ViewerState): ViewerState {
  return { ...st, playing: false };
}

/** Advance the playhead one frame (wrapping); no-op while paused. */
export function tick(st: ViewerState): ViewerState {
  if (!st.playing) return st;
  return { ...st, t: (st.t + 1) % st.frames };
}

export function seek(st: ViewerState, t: number): ViewerState {
  return { ...st, t: clamp(Math.round(t), 0, st.frames - 1) };
}

export function setFocus(st: ViewerState, s: number): ViewerState {
  const focus = clamp(s, st.dMin, st.dMax);
  return { ...st, focus, lastFreeFocus: focus, mode: "free", schedule: null, trackLost: false };
}

export function setAperture(st: ViewerState, r: number): ViewerState {
  return { ...st, aperture: clamp(r, 0, st.rMax) };
}

export function setView(st: ViewerState, u: number, v: number): ViewerState {
  return { ...st, view: { u: clamp(Math.round(u), -st.rMax, st.rMax), v: clamp(Math.round(v), -st.rMax, st.rMax) } };
}

/** A click answered by /api/click while in free-focus mode. */
export function applyClick(st: ViewerState, s: number): ViewerState {
  return setFocus(st, s);
}

/** A /api/track response turning on tracking mode. */
export function enableTracking(st: ViewerState, points: TrackPoint[], lost: boolean): ViewerState {
  const schedule = new Map<number, number>();
  for (const p of points) {
    if (p.s !== null && !p.lost) schedule.set(p.t, p.s);
  }
  return { ...st, mode: "tracking", schedule, trackLost: lost };
}

export function disableTracking(st: ViewerState): ViewerState {
  return { ...st, mode: "free", schedule: null, trackLost: false, focus: st.lastFreeFocus };
}

export function setError(st: ViewerState, message: string): ViewerState {
  return { ...st, playing: false, error: message };
}

/** Focus used for a given frame: the track schedule when active (holding the
 * last scheduled value past a lost track), else the free focus. */
export function focusForFrame(st: ViewerState, t: number): number {
  if (st.mode === "tracking" && st.schedule && st.schedule.size > 0) {
    if (st.schedule.has(t)) return st.schedule.get(t)!;
    let best = st.focus;
    let bestT = -1;
    for (const [ft, fs] of st.schedule) {
      if (ft <= t && ft > bestT) {
        bestT = ft;
        best = fs;
      }
    }
    return bestT >= 0 ? best : st.focus;
  }
  return st.focus;
}

/** What to fetch for the current frame: the raw view when off-center, else
 * the refocused central render (r=0 equals the central view exactly). */
export function frameRequest(st: ViewerState): FrameRequest {
  if (st.view.u !== 0 || st.view.v !== 0) {
    return { kind: "view", t: st.t, u: st.view.u, v: st.view.v, s: 0, r: 0 };
  }
  return { kind: "refocus", t: st.t, u: 0, v: 0, s: focusForFrame(st, st.t), r: st.aperture };
}
