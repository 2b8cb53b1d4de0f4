/**
 * Minimal 8-bit grayscale PNG codec, dependency-free.
 *
 * Encoding writes filter-0 scanlines inside zlib "stored" blocks, so it
 * needs no compressor and works identically in browsers and node. Decoding
 * handles any filter (0-4) on non-interlaced 8-bit grayscale images and
 * inflates via the platform's DecompressionStream.
 */

import { Raster, makeRaster } from './raster.js'

const SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10]

// -- checksums ---------------------------------------------------------------

const CRC_TABLE = (() => {
  const table = new Uint32Array(256)
  for (let n = 0; n < 256; n++) {
    let c = n
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1
    table[n] = c >>> 0
  }
  return table
})()

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff
  for (let i = 0; i < bytes.length; i++) c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8)
  return (c ^ 0xffffffff) >>> 0
}

function adler32(bytes: Uint8Array): number {
  let a = 1
  let b = 0
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]) % 65521
    b = (b + a) % 65521
  }
  return ((b << 16) | a) >>> 0
}

// -- byte plumbing ------------------------------------------------------------

function u32be(v: number): number[] {
  return [(v >>> 24) & 0xff, (v >>> 16) & 0xff, (v >>> 8) & 0xff, v & 0xff]
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const typed = new Uint8Array(4 + data.length)
  for (let i = 0; i < 4; i++) typed[i] = type.charCodeAt(i)
  typed.set(data, 4)
  const out = new Uint8Array(4 + typed.length + 4)
  out.set(u32be(data.length), 0)
  out.set(typed, 4)
  out.set(u32be(crc32(typed)), 4 + typed.length)
  return out
}

function concatBytes(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0)
  const out = new Uint8Array(total)
  let at = 0
  for (const p of parts) {
    out.set(p, at)
    at += p.length
  }
  return out
}

// -- encode --------------------------------------------------------------------

/** Raw scanlines wrapped in an uncompressed (stored) zlib stream. */
function zlibStored(raw: Uint8Array): Uint8Array {
  const parts: Uint8Array[] = [new Uint8Array([0x78, 0x01])]
  const max = 65535
  for (let at = 0; at < raw.length || at === 0; at += max) {
    const block = raw.subarray(at, Math.min(raw.length, at + max))
    const final = at + max >= raw.length ? 1 : 0
    const len = block.length
    const head = new Uint8Array([final, len & 0xff, len >>> 8, ~len & 0xff, (~len >>> 8) & 0xff])
    parts.push(head, block)
    if (raw.length === 0) break
  }
  parts.push(new Uint8Array(u32be(adler32(raw))))
  return concatBytes(parts)
}

export function encodeGrayPng(raster: Raster): Uint8Array {
  const { width, height, data } = raster
  const ihdr = new Uint8Array([...u32be(width), ...u32be(height), 8, 0, 0, 0, 0])
  const scanlines = new Uint8Array(height * (width + 1))
  for (let y = 0; y < height; y++) {
    scanlines[y * (width + 1)] = 0 // filter: none
    scanlines.set(data.subarray(y * width, (y + 1) * width), y * (width + 1) + 1)
  }
  return concatBytes([
    new Uint8Array(SIGNATURE),
    chunk('IHDR', ihdr),
    chunk('IDAT', zlibStored(scanlines)),
    chunk('IEND', new Uint8Array(0)),
  ])
}

// -- decode ---------------------------------------------------------------------

async function inflate(zlibBytes: Uint8Array): Promise<Uint8Array> {
  const ds = new DecompressionStream('deflate')
  const stream = new Blob([zlibBytes as BlobPart]).stream().pipeThrough(ds)
  const buf = await new Response(stream).arrayBuffer()
  return new Uint8Array(buf)
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c
  const pa = Math.abs(p - a)
  const pb = Math.abs(p - b)
  const pc = Math.abs(p - c)
  if (pa <= pb && pa <= pc) return a
  return pb <= pc ? b : c
}

export async function decodeGrayPng(bytes: Uint8Array): Promise<Raster> {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error('not a PNG: bad signature')
  }
  let width = 0
  let height = 0
  const idat: Uint8Array[] = []
  let at = 8
  while (at < bytes.length) {
    const len = (bytes[at] << 24) | (bytes[at + 1] << 16) | (bytes[at + 2] << 8) | bytes[at + 3]
    const type = String.fromCharCode(bytes[at + 4], bytes[at + 5], bytes[at + 6], bytes[at + 7])
    const data = bytes.subarray(at + 8, at + 8 + len)
    if (type === 'IHDR') {
      width = (data[0] << 24) | (data[1] << 16) | (data[2] << 8) | data[3]
      height = (data[4] << 24) | (data[5] << 16) | (data[6] << 8) | data[7]
      const [depth, color, , , interlace] = [data[8], data[9], data[10], data[11], data[12]]
      if (depth !== 8 || color !== 0 || interlace !== 0) {
        throw new Error(`unsupported PNG: depth=${depth} color=${color} interlace=${interlace}`)
      }
    } else if (type === 'IDAT') {
      idat.push(data)
    } else if (type === 'IEND') {
      break
    }
    at += 12 + len
  }
  if (!width || !height) throw new Error('PNG missing IHDR dimensions')

  const raw = await inflate(concatBytes(idat))
  const stride = width + 1
  if (raw.length < height * stride) throw new Error('PNG scanline data truncated')
  const out = makeRaster(width, height)
  const prev = new Uint8Array(width)
  for (let y = 0; y < height; y++) {
    const filter = raw[y * stride]
    const row = raw.subarray(y * stride + 1, y * stride + 1 + width)
    const line = out.data.subarray(y * width, (y + 1) * width)
    for (let x = 0; x < width; x++) {
      const left = x > 0 ? line[x - 1] : 0
      const up = prev[x]
      const upLeft = x > 0 ? prev[x - 1] : 0
      let v = row[x]
      if (filter === 1) v += left
      else if (filter === 2) v += up
      else if (filter === 3) v += (left + up) >> 1
      else if (filter === 4) v += paeth(left, up, upLeft)
      else if (filter !== 0) throw new Error(`unsupported PNG filter ${filter}`)
      line[x] = v & 0xff
    }
    prev.set(line)
  }
  return out
}

// -- base64 ------------------------------------------------------------------------

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = ''
  const step = 0x8000
  for (let i = 0; i < bytes.length; i += step) {
    binary += String.fromCharCode(...bytes.subarray(i, i + step))
  }
  return btoa(binary)
}

export function base64ToBytes(b64: string): Uint8Array {
  const binary = atob(b64)
  const out = new Uint8Array(binary.length)
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i)
  return out
}
