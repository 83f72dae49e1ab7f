/** DOM wiring: canvas blitting plus the control strip. */

import { HttpApi } from "./api.js";
import { Player } from "./player.js";
import type { ViewerState } from "./state.js";

const api = new HttpApi("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("screen");
  const ctx = canvas.getContext("2d")!;
  const seqSelect = el<HTMLSelectElement>("seq");
  const playBtn = el<HTMLButtonElement>("play");
  const frameSlider = el<HTMLInputElement>("frame");
  const frameLabel = el<HTMLSpanElement>("frame-label");
  const focusSlider = el<HTMLInputElement>("focus");
  const focusLabel = el<HTMLSpanElement>("focus-label");
  const apertureSlider = el<HTMLInputElement>("aperture");
  const trackToggle = el<HTMLButtonElement>("track");
  const banner = el<HTMLDivElement>("banner");
  const viewPad = el<HTMLDivElement>("viewpad");

  const sequences = await api.sequences();
  for (const name of sequences) {
    const opt = document.createElement("option");
    opt.value = opt.textContent = name;
    seqSelect.appendChild(opt);
  }

  let player: Player | null = null;
  let trackArmed = false;

  function syncControls(st: ViewerState): void {
    playBtn.textContent = st.playing ? "pause" : "play";
    frameSlider.value = String(st.t);
    frameLabel.textContent = `${st.t}/${st.frames - 1}`;
    focusSlider.value = String(st.focus);
    focusLabel.textContent = st.focus.toFixed(2);
    apertureSlider.value = String(st.aperture);
    trackToggle.textContent = st.mode === "tracking" ? "tracking: on" : "tracking: off";
    banner.textContent = st.error ? `error: ${st.error}` :
      st.trackLost ? "track lost: holding last focus" :
      trackArmed ? "click a point to track" : "";
    banner.style.display = banner.textContent ? "block" : "none";
    viewPad.querySelectorAll("button").forEach((btn) => {
      const [u, v] = [Number(btn.dataset.u), Number(btn.dataset.v)];
      btn.classList.toggle("active", u === st.view.u && v === st.view.v);
    });
  }

  async function load(seq: string): Promise<void> {
    player?.pause();
    const meta = await api.meta(seq);
    canvas.width = meta.W;
    canvas.height = meta.H;
    frameSlider.max = String(meta.frames - 1);
    focusSlider.min = String(meta.d_min);
    focusSlider.max = String(meta.d_max);
    focusSlider.step = "0.05";
    apertureSlider.max = String((meta.A - 1) / 2);
    apertureSlider.step = "1";

    viewPad.innerHTML = "";
    const c = (meta.A - 1) / 2;
    for (let v = -c; v <= c; v++) {
      for (let u = -c; u <= c; u++) {
        const btn = document.createElement("button");
        btn.dataset.u = String(u);
        btn.dataset.v = String(v);
        btn.title = `view (${u}, ${v})`;
        btn.addEventListener("click", () => player?.setView(u, v));
        viewPad.appendChild(btn);
      }
      viewPad.appendChild(document.createElement("br"));
    }

    player = new Player(api, meta, {
      draw: (blob) => {
        createImageBitmap(blob).then((bmp) => {
          ctx.drawImage(bmp, 0, 0);
          bmp.close();
        });
      },
      onState: syncControls,
    }, 10);
    void player.renderCurrent();
    syncControls(player.state);
  }

  seqSelect.addEventListener("change", () => void load(seqSelect.value));
  playBtn.addEventListener("click", () => {
    if (!player) return;
    player.state.playing ? player.pause() : player.play();
    syncControls(player.state);
  });
  frameSlider.addEventListener("input", () => player?.seek(Number(frameSlider.value)));
  focusSlider.addEventListener("input", () => player?.setFocus(Number(focusSlider.value)));
  apertureSlider.addEventListener("input", () => player?.setAperture(Number(apertureSlider.value)));
  trackToggle.addEventListener("click", () => {
    if (!player) return;
    if (player.state.mode === "tracking") {
      player.disableTracking();
      trackArmed = false;
    } else {
      trackArmed = true;
    }
    syncControls(player.state);
  });
  canvas.addEventListener("click", (ev) => {
    if (!player) return;
    const rect = canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
    const y = ((ev.clientY - rect.top) / rect.height) * canvas.height;
    if (trackArmed) {
      trackArmed = false;
      void player.enableTracking(x, y);
    } else {
      void player.clickToFocus(x, y);
    }
  });

  if (sequences.length) {
    seqSelect.value = sequences[0];
    await load(sequences[0]);
  }
}

void boot();
