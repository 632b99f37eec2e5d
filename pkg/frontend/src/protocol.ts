/**
 * Wire protocol shared with the bridge server.
 *
 * Server -> client: {"type":"state","seq":u64,"frame":base64,"step":u32,
 *                    "value_estimate":f64,"intervening":bool}
 * Client -> server: {"type":"takeover"} | {"type":"release"} |
 *                   {"type":"action","ax":f64,"ay":f64,"grip":0|1} |
 *                   {"type":"label","outcome":"success"|"failure"}
 *
 * The frame blob is self-describing: three little-endian u32 extents
 * (C, H, W) followed by row-major uint8 intensities (value * 255).
 */

export interface StateMessage {
  type: "state";
  seq: number;
  frame: string;
  step: number;
  value_estimate: number;
  intervening: boolean;
}

export type ClientMessage =
  | { type: "takeover" }
  | { type: "release" }
  | { type: "action"; ax: number; ay: number; grip: 0 | 1 }
  | { type: "label"; outcome: "success" | "failure" };

export interface DecodedFrame {
  channels: number;
  height: number;
  width: number;
  /** channel-major uint8 intensities, length = channels*height*width */
  data: Uint8Array;
}

export class ProtocolError extends Error {}

function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export function parseStateMessage(raw: string): StateMessage {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    throw new ProtocolError(`not JSON: ${raw.slice(0, 80)}`);
  }
  const m = msg as Record<string, unknown>;
  if (m.type !== "state") throw new ProtocolError(`unexpected type ${m.type}`);
  for (const key of ["seq", "step", "value_estimate"]) {
    if (typeof m[key] !== "number")
      throw new ProtocolError(`missing numeric field ${key}`);
  }
  if (typeof m.frame !== "string") throw new ProtocolError("missing frame");
  if (typeof m.intervening !== "boolean")
    throw new ProtocolError("missing intervening flag");
  return m as unknown as StateMessage;
}

export function decodeFrame(blob: string): DecodedFrame {
  const bytes = base64ToBytes(blob);
  if (bytes.length < 12) throw new ProtocolError("frame blob too short");
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const channels = view.getUint32(0, true);
  const height = view.getUint32(4, true);
  const width = view.getUint32(8, true);
  const data = bytes.subarray(12);
  if (data.length !== channels * height * width) {
    throw new ProtocolError(
      `frame payload ${data.length} != ${channels}*${height}*${width}`,
    );
  }
  return { channels, height, width, data };
}

/** RGBA pixels for a canvas ImageData, mixing up to three channels. */
export function frameToRgba(frame: DecodedFrame): Uint8ClampedArray<ArrayBuffer> {
  const { channels, height, width, data } = frame;
  const out = new Uint8ClampedArray(new ArrayBuffer(width * height * 4));
  const plane = width * height;
  for (let i = 0; i < plane; i++) {
    out[i * 4 + 0] = channels > 0 ? data[i] : 0;
    out[i * 4 + 1] = channels > 1 ? data[plane + i] : 0;
    out[i * 4 + 2] = channels > 2 ? data[2 * plane + i] : 0;
    out[i * 4 + 3] = 255;
  }
  return out;
}
