/**
 * Node stub implementing the inpaint service's HTTP contract, so the client
 * is testable without a trained model: masked pixels come back mid-gray,
 * unmasked pixels are copied from the request image byte for byte.
 */

import { createServer, Server } from "node:http";
import { inflateSync } from "node:zlib";
import { decodePng, encodePng, RawImage } from "../src/png.js";

const inflate = (data: Uint8Array) => new Uint8Array(inflateSync(data));

export interface StubOptions {
  delayMs?: number;
}

export interface StubHandle {
  url: string;
  close(): Promise<void>;
  /** Rasters decoded from the most recent /inpaint request. */
  lastRequest: { image: RawImage; mask: RawImage } | null;
}

function errorBody(field: string, message: string): string {
  return JSON.stringify({ error: { field, message } });
}

export function startStubServer(options: StubOptions = {}): Promise<StubHandle> {
  const handle: StubHandle = { url: "", close: async () => {}, lastRequest: null };

  const server: Server = createServer((req, res) => {
    const respond = (status: number, body: string) => {
      setTimeout(() => {
        res.writeHead(status, { "Content-Type": "application/json" });
        res.end(body);
      }, options.delayMs ?? 0);
    };

    if (req.method === "GET" && req.url === "/health") {
      respond(200, JSON.stringify({
        status: "ok", model_id: "stub", levels: 0, receptive_field: 0,
      }));
      return;
    }
    if (req.method !== "POST" || req.url !== "/inpaint") {
      respond(404, JSON.stringify({ error: { message: "not found" } }));
      return;
    }
    const chunks: Buffer[] = [];
    req.on("data", (c) => chunks.push(c));
    req.on("end", () => {
      let image: RawImage;
      let mask: RawImage;
      try {
        const body = JSON.parse(Buffer.concat(chunks).toString("utf8"));
        try {
          image = decodePng(new Uint8Array(Buffer.from(body.image, "base64")), inflate);
        } catch {
          respond(400, errorBody("image", "not a decodable PNG image"));
          return;
        }
        try {
          mask = decodePng(new Uint8Array(Buffer.from(body.mask, "base64")), inflate);
        } catch {
          respond(400, errorBody("mask", "not a decodable PNG image"));
          return;
        }
      } catch {
        respond(400, JSON.stringify({ error: { message: "malformed JSON body" } }));
        return;
      }
      if (mask.width !== image.width || mask.height !== image.height) {
        respond(400, errorBody(
          "mask",
          `mask is ${mask.width}x${mask.height} but image is ${image.width}x${image.height}`,
        ));
        return;
      }
      handle.lastRequest = { image, mask };
      const out = new Uint8Array(image.data); // copy: unmasked bytes untouched
      for (let i = 0; i < mask.width * mask.height; i++) {
        if (mask.data[i] >= 128) {
          for (let c = 0; c < image.channels; c++) out[i * image.channels + c] = 128;
        }
      }
      const png = encodePng(image.width, image.height, image.channels, out);
      respond(200, JSON.stringify({ image: Buffer.from(png).toString("base64") }));
    });
  });

  return new Promise((resolve) => {
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address && typeof address === "object") {
        handle.url = `http://127.0.0.1:${address.port}`;
      }
      handle.close = () => new Promise((done) => server.close(() => done()));
      resolve(handle);
    });
  });
}
