/**
 * DOM wiring for the mask studio: load an image, draw/erase the mask with
 * brush and rectangle tools, pan/zoom, send to the inpaint service, and
 * inspect the result side by side with the original.
 */

import { ApiError, InpaintClient } from "./api.js";
import { Session, Point, Stroke } from "./session.js";

type ToolName = "brush" | "rectangle" | "eraser" | "pan";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

class StudioApp {
  private session: Session | null = null;
  private client: InpaintClient;
  private tool: ToolName = "brush";
  private brushSize = 24;
  private scale = 1;
  private panX = 0;
  private panY = 0;
  private dragPoints: Point[] = [];
  private dragRect: { x0: number; y0: number; x1: number; y1: number } | null = null;
  private dragging = false;
  private panStart: { x: number; y: number; panX: number; panY: number } | null = null;

  private imageCanvas = $<HTMLCanvasElement>("image-canvas");
  private overlayCanvas = $<HTMLCanvasElement>("overlay-canvas");
  private resultImg = $<HTMLImageElement>("result-img");
  private statusEl = $<HTMLElement>("status");
  private healthEl = $<HTMLElement>("health");
  private viewport = $<HTMLElement>("viewport");
  private inpaintBtn = $<HTMLButtonElement>("inpaint-btn");
  private undoBtn = $<HTMLButtonElement>("undo-btn");
  private redoBtn = $<HTMLButtonElement>("redo-btn");
  private clearBtn = $<HTMLButtonElement>("clear-btn");
  private serverInput = $<HTMLInputElement>("server-url");

  constructor() {
    this.client = new InpaintClient(this.serverInput.value);
    this.bindUi();
    this.refreshHealth();
  }

  private bindUi(): void {
    $<HTMLInputElement>("file-input").addEventListener("change", (e) => {
      const file = (e.target as HTMLInputElement).files?.[0];
      if (file) void this.loadImage(file);
    });
    for (const name of ["brush", "rectangle", "eraser", "pan"] as ToolName[]) {
      $<HTMLButtonElement>(`tool-${name}`).addEventListener("click", () => {
        this.tool = name;
        this.updateToolButtons();
      });
    }
    $<HTMLInputElement>("brush-size").addEventListener("input", (e) => {
      this.brushSize = Number((e.target as HTMLInputElement).value);
      $<HTMLElement>("brush-size-label").textContent = `${this.brushSize}px`;
    });
    this.undoBtn.addEventListener("click", () => this.withSession((s) => s.undo()));
    this.redoBtn.addEventListener("click", () => this.withSession((s) => s.redo()));
    this.clearBtn.addEventListener("click", () => this.withSession((s) => s.clearMask()));
    this.inpaintBtn.addEventListener("click", () => void this.requestInpaint());
    this.serverInput.addEventListener("change", () => {
      this.client = new InpaintClient(this.serverInput.value);
      void this.refreshHealth();
    });

    const overlay = this.overlayCanvas;
    overlay.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    overlay.addEventListener("pointermove", (e) => this.onPointerMove(e));
    window.addEventListener("pointerup", (e) => this.onPointerUp(e));
    this.viewport.addEventListener("wheel", (e) => this.onWheel(e), { passive: false });
  }

  private withSession(fn: (s: Session) => void): void {
    if (!this.session) return;
    fn(this.session);
    this.render();
  }

  private async loadImage(file: File): Promise<void> {
    try {
      const bitmap = await createImageBitmap(file);
      const canvas = document.createElement("canvas");
      canvas.width = bitmap.width;
      canvas.height = bitmap.height;
      canvas.getContext("2d")!.drawImage(bitmap, 0, 0);
      const b64 = canvas.toDataURL("image/png").split(",", 2)[1];
      this.session = new Session(bitmap.width, bitmap.height, b64);
      this.scale = 1;
      this.panX = this.panY = 0;
      this.resultImg.removeAttribute("src");
      this.setStatus(`loaded ${file.name} (${bitmap.width}x${bitmap.height})`);
      this.render();
    } catch {
      this.setStatus(`cannot decode ${file.name}; PNG or JPEG expected`, true);
    }
  }

  private async refreshHealth(): Promise<void> {
    try {
      const info = await this.client.health();
      this.healthEl.textContent =
        `model ${info.model_id} · ${info.levels} levels · receptive field ${info.receptive_field}px`;
    } catch {
      this.healthEl.textContent = "service unreachable";
    }
  }

  private async requestInpaint(): Promise<void> {
    if (!this.session) return;
    this.setStatus("inpainting…");
    this.inpaintBtn.disabled = true;
    try {
      const image = await this.client.inpaint(this.session);
      this.session.setResult(image);
      this.setStatus("done — compare side by side, adjust the mask and iterate");
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      this.setStatus(message, true);
    }
    this.render();
  }

  // -- pointer handling -------------------------------------------------

  private toImageCoords(e: PointerEvent): Point {
    const rect = this.overlayCanvas.getBoundingClientRect();
    return {
      x: ((e.clientX - rect.left) / rect.width) * this.overlayCanvas.width,
      y: ((e.clientY - rect.top) / rect.height) * this.overlayCanvas.height,
    };
  }

  private onPointerDown(e: PointerEvent): void {
    if (!this.session) return;
    if (this.tool === "pan") {
      this.panStart = { x: e.clientX, y: e.clientY, panX: this.panX, panY: this.panY };
      return;
    }
    this.dragging = true;
    const p = this.toImageCoords(e);
    if (this.tool === "rectangle") {
      this.dragRect = { x0: p.x, y0: p.y, x1: p.x, y1: p.y };
    } else {
      this.dragPoints = [p];
    }
    this.renderOverlay();
  }

  private onPointerMove(e: PointerEvent): void {
    if (this.panStart) {
      this.panX = this.panStart.panX + (e.clientX - this.panStart.x);
      this.panY = this.panStart.panY + (e.clientY - this.panStart.y);
      this.applyTransform();
      return;
    }
    if (!this.dragging || !this.session) return;
    const p = this.toImageCoords(e);
    if (this.dragRect) {
      this.dragRect.x1 = p.x;
      this.dragRect.y1 = p.y;
    } else {
      this.dragPoints.push(p);
    }
    this.renderOverlay();
  }

  private onPointerUp(_e: PointerEvent): void {
    this.panStart = null;
    if (!this.dragging || !this.session) return;
    this.dragging = false;
    let stroke: Stroke | null = null;
    if (this.dragRect) {
      stroke = {
        tool: "rectangle",
        x0: Math.round(this.dragRect.x0),
        y0: Math.round(this.dragRect.y0),
        x1: Math.round(this.dragRect.x1),
        y1: Math.round(this.dragRect.y1),
      };
      this.dragRect = null;
    } else if (this.dragPoints.length > 0) {
      stroke = {
        tool: this.tool === "eraser" ? "eraser" : "brush",
        points: this.dragPoints,
        size: this.brushSize,
      };
      this.dragPoints = [];
    }
    if (stroke) this.session.applyStroke(stroke);
    this.render();
  }

  private onWheel(e: WheelEvent): void {
    if (!this.session) return;
    e.preventDefault();
    const factor = Math.exp(-e.deltaY / 400);
    this.scale = Math.min(8, Math.max(0.25, this.scale * factor));
    this.applyTransform();
  }

  private applyTransform(): void {
    const stage = $<HTMLElement>("stage");
    stage.style.transform = `translate(${this.panX}px, ${this.panY}px) scale(${this.scale})`;
  }

  // -- rendering ---------------------------------------------------------

  private render(): void {
    const session = this.session;
    if (!session) return;
    this.imageCanvas.width = this.overlayCanvas.width = session.width;
    this.imageCanvas.height = this.overlayCanvas.height = session.height;
    const img = new Image();
    img.onload = () => {
      this.imageCanvas.getContext("2d")!.drawImage(img, 0, 0);
    };
    img.src = `data:image/png;base64,${session.imagePngB64}`;
    this.renderOverlay();
    if (session.result) {
      this.resultImg.src = `data:image/png;base64,${session.result}`;
    } else {
      this.resultImg.removeAttribute("src");
    }
    this.undoBtn.disabled = !session.canUndo();
    this.redoBtn.disabled = !session.canRedo();
    this.inpaintBtn.disabled = session.maskEmpty() || this.client.busy;
    this.applyTransform();
  }

  private renderOverlay(): void {
    const session = this.session;
    if (!session) return;
    const ctx = this.overlayCanvas.getContext("2d")!;
    const overlay = ctx.createImageData(session.width, session.height);
    for (let i = 0; i < session.mask.length; i++) {
      if (session.mask[i]) {
        overlay.data[i * 4] = 255; // translucent red over masked pixels
        overlay.data[i * 4 + 3] = 110;
      }
    }
    ctx.putImageData(overlay, 0, 0);
    // ghost preview of the in-progress stroke
    ctx.fillStyle = "rgba(255,80,80,0.5)";
    if (this.dragRect) {
      const { x0, y0, x1, y1 } = this.dragRect;
      ctx.fillRect(Math.min(x0, x1), Math.min(y0, y1), Math.abs(x1 - x0), Math.abs(y1 - y0));
    }
    if (this.dragPoints.length > 0 && this.tool !== "eraser") {
      for (const p of this.dragPoints) {
        ctx.beginPath();
        ctx.arc(p.x, p.y, this.brushSize / 2, 0, Math.PI * 2);
        ctx.fill();
      }
    }
  }

  private updateToolButtons(): void {
    for (const name of ["brush", "rectangle", "eraser", "pan"]) {
      $<HTMLButtonElement>(`tool-${name}`).classList.toggle("active", name === this.tool);
    }
  }

  private setStatus(message: string, isError = false): void {
    this.statusEl.textContent = message;
    this.statusEl.classList.toggle("error", isError);
  }
}

window.addEventListener("DOMContentLoaded", () => {
  new StudioApp();
});
