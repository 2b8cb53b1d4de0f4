import { describe, it, expect } from 'vitest'

import { makeRaster, drawPolyline, nonZeroCount, rastersEqual, cloneRaster } from '../src/raster.js'

describe('drawPolyline', () => {
  it('stamps a disc of diameter ~5 for a single point at radius 2', () => {
    const r = makeRaster(16, 16)
    drawPolyline(r, [{ x: 8, y: 8 }], 2, 200)
    let minX = 16, maxX = -1, minY = 16, maxY = -1
    for (let y = 0; y < 16; y++) {
      for (let x = 0; x < 16; x++) {
        if (r.data[y * 16 + x]) {
          minX = Math.min(minX, x); maxX = Math.max(maxX, x)
          minY = Math.min(minY, y); maxY = Math.max(maxY, y)
        }
      }
    }
    expect(maxX - minX + 1).toBe(5)
    expect(maxY - minY + 1).toBe(5)
    expect(nonZeroCount(r)).toBe(13) // |{(dx,dy): dx^2+dy^2 <= 4}|
  })

  it('clamps out-of-bounds points instead of throwing', () => {
    const r = makeRaster(8, 8)
    drawPolyline(r, [{ x: -10, y: 4 }, { x: 30, y: 4 }], 1, 99)
    expect(nonZeroCount(r)).toBeGreaterThan(0)
    // every written pixel is inside the raster by construction
    expect(r.data.length).toBe(64)
  })

  it('connects segment interiors without gaps', () => {
    const r = makeRaster(32, 32)
    drawPolyline(r, [{ x: 2, y: 2 }, { x: 29, y: 2 }], 1, 255)
    for (let x = 2; x <= 29; x++) expect(r.data[2 * 32 + x]).toBe(255)
  })

  it('value 0 erases previously drawn pixels', () => {
    const r = makeRaster(16, 16)
    drawPolyline(r, [{ x: 8, y: 8 }], 3, 120)
    drawPolyline(r, [{ x: 8, y: 8 }], 3, 0)
    expect(nonZeroCount(r)).toBe(0)
  })
})

describe('raster utils', () => {
  it('cloneRaster produces an independent copy', () => {
    const a = makeRaster(4, 4, 7)
    const b = cloneRaster(a)
    b.data[0] = 99
    expect(a.data[0]).toBe(7)
    expect(rastersEqual(a, b)).toBe(false)
  })
})
