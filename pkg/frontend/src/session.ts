/**
 * Editing session: the loaded image, the binary mask raster being drawn,
 * the last inpaint result, and an undo/redo history of (mask, result).
 *
 * The mask raster always has the image's dimensions; 1 marks pixels to be
 * filled by the server. All edits are pure raster operations so that undo
 * and redo restore prior states bit-exactly.
 */

import { bytesToBase64, encodePng } from "./png.js";

export interface Point {
  x: number;
  y: number;
}

export interface BrushStroke {
  tool: "brush" | "eraser";
  points: Point[];
  size: number; // diameter in pixels
}

export interface RectStroke {
  tool: "rectangle";
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export type Stroke = BrushStroke | RectStroke;

interface Snapshot {
  mask: Uint8Array;
  result: string | null;
}

export const HISTORY_DEPTH = 50; // spec floor is 10

export class Session {
  readonly width: number;
  readonly height: number;
  /** Source image as base64 PNG, exactly what the request payload carries. */
  readonly imagePngB64: string;
  mask: Uint8Array;
  result: string | null = null;
  private undoStack: Snapshot[] = [];
  private redoStack: Snapshot[] = [];

  constructor(width: number, height: number, imagePngB64: string) {
    if (width < 1 || height < 1) throw new Error(`bad session size ${width}x${height}`);
    this.width = width;
    this.height = height;
    this.imagePngB64 = imagePngB64;
    this.mask = new Uint8Array(width * height);
  }

  private snapshot(): Snapshot {
    return { mask: this.mask.slice(), result: this.result };
  }

  private pushHistory(): void {
    this.undoStack.push(this.snapshot());
    if (this.undoStack.length > HISTORY_DEPTH) this.undoStack.shift();
    this.redoStack = [];
  }

  private restore(snap: Snapshot): void {
    this.mask = snap.mask.slice();
    this.result = snap.result;
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  undo(): void {
    const snap = this.undoStack.pop();
    if (!snap) return;
    this.redoStack.push(this.snapshot());
    this.restore(snap);
  }

  redo(): void {
    const snap = this.redoStack.pop();
    if (!snap) return;
    this.undoStack.push(this.snapshot());
    this.restore(snap);
  }

  maskEmpty(): boolean {
    return !this.mask.some((v) => v !== 0);
  }

  applyStroke(stroke: Stroke): void {
    this.pushHistory();
    if (stroke.tool === "rectangle") {
      this.fillRect(stroke);
    } else {
      this.paint(stroke);
    }
  }

  clearMask(): void {
    this.pushHistory();
    this.mask.fill(0);
  }

  /** Record an arrived server result in the history. */
  setResult(pngB64: string): void {
    this.pushHistory();
    this.result = pngB64;
  }

  private fillRect(rect: RectStroke): void {
    const x0 = Math.max(0, Math.min(rect.x0, rect.x1));
    const y0 = Math.max(0, Math.min(rect.y0, rect.y1));
    const x1 = Math.min(this.width - 1, Math.max(rect.x0, rect.x1));
    const y1 = Math.min(this.height - 1, Math.max(rect.y0, rect.y1));
    for (let y = y0; y <= y1; y++) {
      this.mask.fill(1, y * this.width + x0, y * this.width + x1 + 1);
    }
  }

  private paint(stroke: BrushStroke): void {
    const value = stroke.tool === "eraser" ? 0 : 1;
    const radius = Math.max(0.5, stroke.size / 2);
    const pts = stroke.points;
    if (pts.length === 0) return;
    this.stamp(pts[0], radius, value);
    for (let i = 1; i < pts.length; i++) {
      // interpolate along the segment so fast strokes stay solid
      const a = pts[i - 1];
      const b = pts[i];
      const dist = Math.hypot(b.x - a.x, b.y - a.y);
      const steps = Math.max(1, Math.ceil(dist / (radius / 2)));
      for (let s = 1; s <= steps; s++) {
        const t = s / steps;
        this.stamp({ x: a.x + (b.x - a.x) * t, y: a.y + (b.y - a.y) * t }, radius, value);
      }
    }
  }

  private stamp(center: Point, radius: number, value: number): void {
    const r2 = radius * radius;
    const y0 = Math.max(0, Math.floor(center.y - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(center.y + radius));
    const x0 = Math.max(0, Math.floor(center.x - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(center.x + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x + 0.5 - center.x;
        const dy = y + 0.5 - center.y;
        if (dx * dx + dy * dy <= r2) {
          this.mask[y * this.width + x] = value;
        }
      }
    }
  }
}

/** Mask raster as a single-channel 0/255 PNG, base64 encoded. */
export function maskToPngB64(session: Session): string {
  const gray = new Uint8Array(session.mask.length);
  for (let i = 0; i < gray.length; i++) gray[i] = session.mask[i] ? 255 : 0;
  return bytesToBase64(encodePng(session.width, session.height, 1, gray));
}

/** The exact JSON body POST /inpaint expects. */
export function buildInpaintRequest(session: Session): { image: string; mask: string } {
  return { image: session.imagePngB64, mask: maskToPngB64(session) };
}
