/** Canvas rendering and status widgets. Browser-only; logic-free on purpose
 * so everything testable lives in session.ts / valueTrace.ts. */
import { decodeFrame, frameToRgba, StateMessage } from "./protocol.js";
import { ConnectionStatus } from "./session.js";
import { ValueTrace } from "./valueTrace.js";

export function renderFrame(canvas: HTMLCanvasElement, msg: StateMessage): void {
  const frame = decodeFrame(msg.frame);
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const image = new ImageData(frameToRgba(frame), frame.width, frame.height);
  const off = new OffscreenCanvas(frame.width, frame.height);
  const offCtx = off.getContext("2d");
  if (!offCtx) return;
  offCtx.putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

export function renderTrace(canvas: HTMLCanvasElement, trace: ValueTrace): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const pts = trace.points;
  if (pts.length < 2) return;
  const x = (i: number) => (i / (pts.length - 1)) * (width - 4) + 2;
  const y = (v: number) => height - 2 - v * (height - 4);
  for (const [a, b] of trace.dropRanges()) {
    ctx.fillStyle = "rgba(255, 140, 0, 0.25)";
    ctx.fillRect(x(a), 0, Math.max(2, x(b) - x(a)), height);
  }
  ctx.strokeStyle = "#4caf50";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  pts.forEach((p, i) => (i === 0 ? ctx.moveTo(x(i), y(p.value))
                                 : ctx.lineTo(x(i), y(p.value))));
  ctx.stroke();
}

export function renderStatus(el: HTMLElement, status: ConnectionStatus,
                             control: string, grip: number): void {
  el.textContent =
    `${status} · control: ${control} · grip: ${grip ? "closed" : "open"}`;
  el.className = `banner ${status}`;
}

export function showHint(el: HTMLElement, text: string): void {
  el.textContent = text;
  el.classList.add("visible");
  setTimeout(() => el.classList.remove("visible"), 1200);
}
