// Sketch canvas model with a software rasterizer, so composition and
// export are testable without a browser. The tracing overlay is a view
// concern only: exportPng never reads it.

import { encodePng } from "./png.js";

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  points: Point[];
  width: number;
  erase: boolean;
}

export interface BackgroundLayer {
  /** /assets URL of a server render or re_sketch used as tracing aid. */
  url: string;
  /** decoded grayscale pixels, if the host has fetched them */
  pixels: Float32Array | null;
  opacity: number;
}

export const DEFAULT_OVERLAY_OPACITY = 0.35;

export class CanvasState {
  readonly size: number;
  strokes: Stroke[] = [];
  background: BackgroundLayer | null = null;

  constructor(size: number) {
    if (size < 8) throw new Error(`canvas size ${size} is too small`);
    this.size = size;
  }

  beginStroke(p: Point, width = 2, erase = false): void {
    this.strokes.push({ points: [clampPoint(p, this.size)], width, erase });
  }

  extendStroke(p: Point): void {
    const s = this.strokes[this.strokes.length - 1];
    if (!s) throw new Error("no active stroke");
    s.points.push(clampPoint(p, this.size));
  }

  undo(): boolean {
    return this.strokes.pop() !== undefined;
  }

  clear(): void {
    this.strokes = [];
  }

  setBackground(layer: BackgroundLayer | null): void {
    if (layer && (layer.opacity < 0 || layer.opacity > 1)) {
      throw new Error(`opacity ${layer.opacity} out of [0, 1]`);
    }
    this.background = layer;
  }

  get canSubmit(): boolean {
    return this.strokes.length > 0;
  }

  /** Ink-over-white raster in [0,1] grayscale; replays all strokes. */
  rasterize(): Float32Array {
    const n = this.size;
    const out = new Float32Array(n * n).fill(1);
    for (const s of this.strokes) {
      paintStroke(out, n, s);
    }
    return out;
  }

  /** Display composite: raster atop the semi-transparent overlay. */
  compositeWithOverlay(): Float32Array {
    const raster = this.rasterize();
    const bg = this.background;
    if (!bg || !bg.pixels) return raster;
    const out = new Float32Array(raster.length);
    for (let i = 0; i < raster.length; i++) {
      const under = (1 - bg.opacity) * 1 + bg.opacity * bg.pixels[i];
      // ink always wins over the tracing aid
      out[i] = Math.min(raster[i], under);
    }
    return out;
  }

  /** PNG of the strokes over white only — overlay is never baked in. */
  exportPng(): Uint8Array {
    const raster = this.rasterize();
    const rgba = new Uint8Array(raster.length * 4);
    for (let i = 0; i < raster.length; i++) {
      const v = Math.round(raster[i] * 255);
      rgba[4 * i] = v;
      rgba[4 * i + 1] = v;
      rgba[4 * i + 2] = v;
      rgba[4 * i + 3] = 255;
    }
    return encodePng(this.size, this.size, rgba);
  }
}

function clampPoint(p: Point, size: number): Point {
  return {
    x: Math.min(Math.max(p.x, 0), size - 1),
    y: Math.min(Math.max(p.y, 0), size - 1),
  };
}

function paintStroke(buf: Float32Array, size: number, s: Stroke): void {
  const value = s.erase ? 1 : 0;
  const radius = s.width / 2;
  const pts = s.points;
  for (let i = 0; i < pts.length; i++) {
    stampDisk(buf, size, pts[i], radius, value);
    if (i > 0) {
      const a = pts[i - 1];
      const b = pts[i];
      const steps = Math.ceil(Math.hypot(b.x - a.x, b.y - a.y));
      for (let k = 1; k < steps; k++) {
        const t = k / steps;
        stampDisk(buf, size, { x: a.x + t * (b.x - a.x), y: a.y + t * (b.y - a.y) }, radius, value);
      }
    }
  }
}

function stampDisk(buf: Float32Array, size: number, c: Point, radius: number, value: number): void {
  const r = Math.max(radius, 0.5);
  const y0 = Math.max(Math.floor(c.y - r), 0);
  const y1 = Math.min(Math.ceil(c.y + r), size - 1);
  const x0 = Math.max(Math.floor(c.x - r), 0);
  const x1 = Math.min(Math.ceil(c.x + r), size - 1);
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      if (Math.hypot(x - c.x, y - c.y) <= r) {
        buf[y * size + x] = value;
      }
    }
  }
}
