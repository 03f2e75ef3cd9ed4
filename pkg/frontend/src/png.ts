/**
 * Minimal dependency-free PNG codec for 8-bit grayscale/RGB/RGBA images.
 *
 * Encoding writes an uncompressed zlib stream (deflate "stored" blocks), so
 * it works identically in the browser and in Node and round-trips rasters
 * bit-exactly. Decoding handles any 8-bit non-interlaced PNG (all five scanline
 * filters); the caller injects the inflate implementation since the platforms
 * differ (node:zlib vs DecompressionStream).
 */

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let crc = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    crc = CRC_TABLE[(crc ^ bytes[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function writeU32(target: Uint8Array, offset: number, value: number): void {
  target[offset] = (value >>> 24) & 0xff;
  target[offset + 1] = (value >>> 16) & 0xff;
  target[offset + 2] = (value >>> 8) & 0xff;
  target[offset + 3] = value & 0xff;
}

function readU32(bytes: Uint8Array, offset: number): number {
  return (
    ((bytes[offset] << 24) | (bytes[offset + 1] << 16) | (bytes[offset + 2] << 8) | bytes[offset + 3]) >>> 0
  );
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + data.length);
  writeU32(out, 0, data.length);
  for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i);
  out.set(data, 8);
  writeU32(out, 8 + data.length, crc32(out.subarray(4, 8 + data.length)));
  return out;
}

/** zlib container around deflate "stored" (uncompressed) blocks. */
function zlibStored(raw: Uint8Array): Uint8Array {
  const MAX_BLOCK = 65535;
  const blockCount = Math.max(1, Math.ceil(raw.length / MAX_BLOCK));
  const out = new Uint8Array(2 + blockCount * 5 + raw.length + 4);
  out[0] = 0x78; // 32K window, deflate
  out[1] = 0x01; // no preset dictionary, fastest-compression flag; checksum-valid header
  let pos = 2;
  for (let b = 0; b < blockCount; b++) {
    const start = b * MAX_BLOCK;
    const part = raw.subarray(start, Math.min(start + MAX_BLOCK, raw.length));
    out[pos++] = b === blockCount - 1 ? 1 : 0; // BFINAL, BTYPE=00 (stored)
    out[pos++] = part.length & 0xff;
    out[pos++] = (part.length >>> 8) & 0xff;
    out[pos++] = ~part.length & 0xff;
    out[pos++] = (~part.length >>> 8) & 0xff;
    out.set(part, pos);
    pos += part.length;
  }
  writeU32(out, pos, adler32(raw));
  return out;
}

const COLOR_TYPE: Record<number, number> = { 1: 0, 3: 2, 4: 6 };
const CHANNELS_OF: Record<number, number> = { 0: 1, 2: 3, 6: 4 };

export interface RawImage {
  width: number;
  height: number;
  channels: number;
  data: Uint8Array; // row-major, width*height*channels
}

export function encodePng(width: number, height: number, channels: number, data: Uint8Array): Uint8Array {
  if (!(channels in COLOR_TYPE)) {
    throw new Error(`unsupported channel count ${channels}`);
  }
  if (data.length !== width * height * channels) {
    throw new Error(`data length ${data.length} != ${width}x${height}x${channels}`);
  }
  const stride = width * channels;
  const raw = new Uint8Array((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: none
    raw.set(data.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }
  const ihdr = new Uint8Array(13);
  writeU32(ihdr, 0, width);
  writeU32(ihdr, 4, height);
  ihdr[8] = 8; // bit depth
  ihdr[9] = COLOR_TYPE[channels];
  // compression/filter/interlace all 0
  const parts = [
    new Uint8Array(SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

export type Inflate = (compressed: Uint8Array) => Uint8Array;

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function unfilter(raw: Uint8Array, width: number, height: number, bpp: number): Uint8Array {
  const stride = width * bpp;
  const out = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const o = y * stride;
    for (let x = 0; x < stride; x++) {
      const left = x >= bpp ? out[o + x - bpp] : 0;
      const up = y > 0 ? out[o + x - stride] : 0;
      const upLeft = y > 0 && x >= bpp ? out[o + x - stride - bpp] : 0;
      let value = row[x];
      switch (filter) {
        case 0: break;
        case 1: value += left; break;
        case 2: value += up; break;
        case 3: value += (left + up) >> 1; break;
        case 4: value += paeth(left, up, upLeft); break;
        default: throw new Error(`unsupported PNG filter ${filter}`);
      }
      out[o + x] = value & 0xff;
    }
  }
  return out;
}

export function decodePng(bytes: Uint8Array, inflate: Inflate): RawImage {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
  }
  let pos = 8;
  let width = 0;
  let height = 0;
  let channels = 0;
  const idat: Uint8Array[] = [];
  while (pos < bytes.length) {
    const length = readU32(bytes, pos);
    const type = String.fromCharCode(bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]);
    const data = bytes.subarray(pos + 8, pos + 8 + length);
    if (type === "IHDR") {
      width = readU32(data, 0);
      height = readU32(data, 4);
      if (data[8] !== 8) throw new Error(`unsupported bit depth ${data[8]}`);
      if (!(data[9] in CHANNELS_OF)) throw new Error(`unsupported color type ${data[9]}`);
      if (data[12] !== 0) throw new Error("interlaced PNGs are not supported");
      channels = CHANNELS_OF[data[9]];
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + length;
  }
  if (!width || !height || !channels) throw new Error("missing IHDR");
  const compressed = new Uint8Array(idat.reduce((n, d) => n + d.length, 0));
  let at = 0;
  for (const d of idat) {
    compressed.set(d, at);
    at += d.length;
  }
  // strip the 2-byte zlib header and 4-byte adler; inflate raw deflate? Most
  // inflate impls accept the full zlib stream, so hand it over unchanged.
  const raw = inflate(compressed);
  return { width, height, channels, data: unfilter(raw, width, height, channels) };
}

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const CHUNK = 0x8000;
  for (let i = 0; i < bytes.length; i += CHUNK) {
    binary += String.fromCharCode(...bytes.subarray(i, i + CHUNK));
  }
  return btoa(binary);
}

export function base64ToBytes(b64: string): Uint8Array {
  const binary = atob(b64);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}
