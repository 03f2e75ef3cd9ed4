import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { inflateSync } from "node:zlib";
import { ApiError, InpaintClient } from "../src/api.js";
import { base64ToBytes, bytesToBase64, decodePng, encodePng } from "../src/png.js";
import { Session } from "../src/session.js";
import { startStubServer, StubHandle } from "./stub_server.js";

const inflate = (d: Uint8Array) => new Uint8Array(inflateSync(d));

let stub: StubHandle;

beforeAll(async () => {
  stub = await startStubServer();
});

afterAll(async () => {
  await stub.close();
});

function sessionWithImage(w: number, h: number): { session: Session; rgb: Uint8Array } {
  const rgb = new Uint8Array(w * h * 3).map((_, i) => (i * 31 + 7) & 0xff);
  const session = new Session(w, h, bytesToBase64(encodePng(w, h, 3, rgb)));
  return { session, rgb };
}

describe("health", () => {
  it("returns the service contract fields", async () => {
    const client = new InpaintClient(stub.url);
    const info = await client.health();
    expect(info.status).toBe("ok");
    expect(info.model_id).toBe("stub");
    expect(typeof info.receptive_field).toBe("number");
  });
});

describe("inpaint", () => {
  it("refuses an empty mask before any network traffic", async () => {
    const client = new InpaintClient(stub.url);
    const { session } = sessionWithImage(8, 8);
    await expect(client.inpaint(session)).rejects.toThrow(/mask is empty/);
    expect(stub.lastRequest).toBeNull();
  });

  it("sends the drawn mask bit-exactly and preserves unmasked pixels", async () => {
    const client = new InpaintClient(stub.url);
    const { session, rgb } = sessionWithImage(16, 16);
    session.applyStroke({ tool: "rectangle", x0: 4, y0: 4, x1: 9, y1: 9 });

    const resultB64 = await client.inpaint(session);

    // server saw exactly the raster the user drew
    const seen = stub.lastRequest!.mask;
    for (let i = 0; i < session.mask.length; i++) {
      expect(seen.data[i] >= 128 ? 1 : 0).toBe(session.mask[i]);
    }

    // response: unmasked pixels identical to the source, masked pixels synthesized
    const out = decodePng(base64ToBytes(resultB64), inflate);
    expect(out.width).toBe(16);
    for (let i = 0; i < session.mask.length; i++) {
      for (let c = 0; c < 3; c++) {
        if (session.mask[i] === 0) {
          expect(out.data[i * 3 + c]).toBe(rgb[i * 3 + c]);
        } else {
          expect(out.data[i * 3 + c]).toBe(128); // stub fill value
        }
      }
    }
  });

  it("pushes the result into session history for undo", async () => {
    const client = new InpaintClient(stub.url);
    const { session } = sessionWithImage(8, 8);
    session.applyStroke({ tool: "rectangle", x0: 0, y0: 0, x1: 3, y1: 3 });
    const image = await client.inpaint(session);
    session.setResult(image);
    expect(session.result).toBe(image);
    session.undo();
    expect(session.result).toBeNull();
    session.redo();
    expect(session.result).toBe(image);
  });

  it("surfaces server-side validation errors with field and status", async () => {
    const client = new InpaintClient(stub.url);
    // session whose declared size disagrees with its actual image bytes
    const tiny = encodePng(4, 4, 3, new Uint8Array(4 * 4 * 3));
    const session = new Session(8, 8, bytesToBase64(tiny));
    session.applyStroke({ tool: "rectangle", x0: 0, y0: 0, x1: 7, y1: 7 });
    const err = await client.inpaint(session).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(400);
    expect(err.field).toBe("mask");
    expect(err.message).toMatch(/8x8/);
  });

  it("allows only one request in flight", async () => {
    const slow = await startStubServer({ delayMs: 150 });
    try {
      const client = new InpaintClient(slow.url);
      const { session } = sessionWithImage(8, 8);
      session.applyStroke({ tool: "rectangle", x0: 0, y0: 0, x1: 3, y1: 3 });
      const first = client.inpaint(session);
      await expect(client.inpaint(session)).rejects.toThrow(/in flight/);
      await first; // the original request still completes
    } finally {
      await slow.close();
    }
  });

  it("times out slow servers", async () => {
    const slow = await startStubServer({ delayMs: 500 });
    try {
      const client = new InpaintClient(slow.url, undefined, 50);
      const { session } = sessionWithImage(8, 8);
      session.applyStroke({ tool: "rectangle", x0: 0, y0: 0, x1: 3, y1: 3 });
      await expect(client.inpaint(session)).rejects.toThrow(/timed out/);
    } finally {
      await slow.close();
    }
  });
});
