/** Console entry point: wires the session client to the DOM. */
import { HeldKeyTicker, SessionClient } from "./session.js";
import { ValueTrace } from "./valueTrace.js";
import { renderFrame, renderStatus, renderTrace, showHint } from "./ui.js";

const TICK_MS = 50;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function start(): void {
  const frameCanvas = byId<HTMLCanvasElement>("frame");
  const traceCanvas = byId<HTMLCanvasElement>("trace");
  const statusEl = byId<HTMLElement>("status");
  const hintEl = byId<HTMLElement>("hint");
  const trace = new ValueTrace();

  const url = `ws://${location.host}/ws`;
  const session = new SessionClient(
    { url, makeSocket: (u) => new WebSocket(u) as never },
    {
      onStatus: (s) =>
        renderStatus(statusEl, s, session.control, session.grip),
      onHint: (t) => showHint(hintEl, t),
    },
  );

  const ticker = new HeldKeyTicker(session);
  document.addEventListener("keydown", (e) => {
    ticker.keyDown(e.key);
    if (e.key.toLowerCase() === "g") session.labelEpisode("success");
    if (e.key.toLowerCase() === "f") session.labelEpisode("failure");
    if (e.key.startsWith("Arrow") || e.key === " ") e.preventDefault();
  });
  document.addEventListener("keyup", (e) => ticker.keyUp(e.key));
  byId<HTMLButtonElement>("btn-take").onclick = () => session.takeover();
  byId<HTMLButtonElement>("btn-release").onclick = () => session.release();
  byId<HTMLButtonElement>("btn-success").onclick = () =>
    session.labelEpisode("success");
  byId<HTMLButtonElement>("btn-failure").onclick = () =>
    session.labelEpisode("failure");

  setInterval(() => {
    ticker.tick();
    // rendering drains the bounded queue; slow paints drop old frames
    let msg = session.nextFrame();
    let last;
    while (msg) {
      trace.push(msg.step, msg.value_estimate);
      last = msg;
      msg = session.nextFrame();
    }
    if (last) renderFrame(frameCanvas, last);
    renderTrace(traceCanvas, trace);
    renderStatus(statusEl, session.status, session.control, session.grip);
  }, TICK_MS);
}

start();
