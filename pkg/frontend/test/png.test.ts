import { describe, it, expect } from 'vitest'

import { encodeGrayPng, decodeGrayPng, bytesToBase64, base64ToBytes } from '../src/png.js'
import { makeRaster, rastersEqual } from '../src/raster.js'

function randomRaster(w: number, h: number, seed = 1) {
  const r = makeRaster(w, h)
  let s = seed
  for (let i = 0; i < r.data.length; i++) {
    s = (s * 1103515245 + 12345) & 0x7fffffff
    r.data[i] = s % 256
  }
  return r
}

describe('png codec', () => {
  it('round-trips random rasters exactly', async () => {
    for (const [w, h] of [[1, 1], [7, 3], [64, 64], [200, 50]] as const) {
      const src = randomRaster(w, h, w * 31 + h)
      const decoded = await decodeGrayPng(encodeGrayPng(src))
      expect(rastersEqual(src, decoded)).toBe(true)
    }
  })

  it('handles rasters larger than one stored deflate block', async () => {
    const src = randomRaster(300, 300, 9) // 90k+ scanline bytes > 65535
    const decoded = await decodeGrayPng(encodeGrayPng(src))
    expect(rastersEqual(src, decoded)).toBe(true)
  })

  it('decodes filtered scanlines (sub, up, average, paeth)', async () => {
    // hand-build a 3x3 PNG whose rows use filters 1, 2 and 4
    const { deflateSync } = await import('node:zlib')
    const rows = [
      [1, 10, 5, 5],   // filter 1 (sub):   10, 15, 20
      [2, 1, 2, 3],    // filter 2 (up):    11, 17, 23
      [4, 5, 0, 250],  // filter 4 (paeth)
    ]
    const raw = new Uint8Array(rows.flat())
    const zipped = deflateSync(raw)

    const crcTable = new Uint32Array(256)
    for (let n = 0; n < 256; n++) {
      let c = n
      for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1
      crcTable[n] = c >>> 0
    }
    const crc32 = (b: Uint8Array) => {
      let c = 0xffffffff
      for (const v of b) c = crcTable[(c ^ v) & 0xff] ^ (c >>> 8)
      return (c ^ 0xffffffff) >>> 0
    }
    const u32 = (v: number) => [(v >>> 24) & 255, (v >>> 16) & 255, (v >>> 8) & 255, v & 255]
    const chunk = (type: string, data: number[]) => {
      const typed = [...type].map((ch) => ch.charCodeAt(0)).concat(data)
      return [...u32(data.length), ...typed, ...u32(crc32(new Uint8Array(typed)))]
    }
    const png = new Uint8Array([
      137, 80, 78, 71, 13, 10, 26, 10,
      ...chunk('IHDR', [...u32(3), ...u32(3), 8, 0, 0, 0, 0]),
      ...chunk('IDAT', Array.from(zipped)),
      ...chunk('IEND', []),
    ])

    const decoded = await decodeGrayPng(png)
    expect(Array.from(decoded.data.subarray(0, 3))).toEqual([10, 15, 20])
    expect(Array.from(decoded.data.subarray(3, 6))).toEqual([11, 17, 23])
    // paeth row: predictors are (left, up, upleft)
    // x=0: paeth(0,11,0)=11 -> 16; x=1: paeth(16,17,11)=17 -> 17; x=2: paeth(17,23,17)=23 -> (23+250)%256=17
    expect(Array.from(decoded.data.subarray(6, 9))).toEqual([16, 17, 17])
  })

  it('rejects non-PNG bytes and unsupported color types', async () => {
    await expect(decodeGrayPng(new Uint8Array([1, 2, 3, 4, 5, 6, 7, 8, 9]))).rejects.toThrow(
      /signature/,
    )
  })
})

describe('base64', () => {
  it('round-trips binary data', () => {
    const bytes = new Uint8Array(70000).map((_, i) => (i * 7 + 3) % 256)
    const back = base64ToBytes(bytesToBase64(bytes))
    expect(back.length).toBe(bytes.length)
    expect(back.every((v, i) => v === bytes[i])).toBe(true)
  })
})
