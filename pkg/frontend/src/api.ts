/** Typed client for the light-field video service. The viewer is a thin
 * client: every displayed pixel comes from these endpoints. */

export interface Meta {
  seq: string;
  frames: number;
  H: number;
  W: number;
  A: number;
  keyframe_stride: number;
  d_min: number;
  d_max: number;
}

export interface TrackPoint {
  t: number;
  x: number;
  y: number;
  s: number | null;
  lost: boolean;
}

export interface TrackResponse {
  points: TrackPoint[];
  lost: boolean;
}

/** What the player fetches for one displayed frame. */
export interface FrameRequest {
  kind: "view" | "refocus";
  t: number;
  u: number;
  v: number;
  s: number;
  r: number;
}

export interface Api {
  sequences(): Promise<string[]>;
  meta(seq: string): Promise<Meta>;
  frame(seq: string, req: FrameRequest): Promise<Blob>;
  click(seq: string, t: number, x: number, y: number): Promise<number>;
  track(seq: string, t0: number, x: number, y: number): Promise<TrackResponse>;
}

async function jsonOrThrow(resp: Response): Promise<any> {
  if (!resp.ok) {
    let message = `${resp.status}`;
    try {
      const body = await resp.json();
      message = body.message ?? message;
    } catch {
      /* non-JSON error body */
    }
    throw new Error(message);
  }
  return resp.json();
}

export class HttpApi implements Api {
  constructor(private base: string = "") {}

  frameUrl(seq: string, req: FrameRequest): string {
    if (req.kind === "view") {
      return `${this.base}/api/view?seq=${encodeURIComponent(seq)}&t=${req.t}&u=${req.u}&v=${req.v}`;
    }
    return `${this.base}/api/refocus?seq=${encodeURIComponent(seq)}&t=${req.t}&s=${req.s}&r=${req.r}`;
  }

  async sequences(): Promise<string[]> {
    const body = await jsonOrThrow(await fetch(`${this.base}/api/sequences`));
    return body.sequences;
  }

  async meta(seq: string): Promise<Meta> {
    return jsonOrThrow(await fetch(`${this.base}/api/meta?seq=${encodeURIComponent(seq)}`));
  }

  async frame(seq: string, req: FrameRequest): Promise<Blob> {
    const resp = await fetch(this.frameUrl(seq, req));
    if (!resp.ok) {
      throw new Error(`frame request failed: ${resp.status}`);
    }
    return resp.blob();
  }

  async click(seq: string, t: number, x: number, y: number): Promise<number> {
    const resp = await fetch(`${this.base}/api/click`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ seq, t, x, y }),
    });
    const body = await jsonOrThrow(resp);
    return body.s;
  }

  async track(seq: string, t0: number, x: number, y: number): Promise<TrackResponse> {
    const resp = await fetch(`${this.base}/api/track`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ seq, t0, x, y }),
    });
    return jsonOrThrow(resp);
  }
}
