import { describe, it, expect } from 'vitest'

import { thresholdMask, maskArea, tintedOverlay } from '../src/overlay.js'
import { makeRaster } from '../src/raster.js'

function gradientProb(side = 32) {
  const r = makeRaster(side, side)
  for (let i = 0; i < r.data.length; i++) r.data[i] = Math.floor((i / r.data.length) * 255)
  return r
}

describe('thresholdMask', () => {
  it('overlay area is non-increasing as the threshold rises', () => {
    const prob = gradientProb()
    let prev = Infinity
    for (let t = 0.05; t <= 0.95; t += 0.05) {
      const area = maskArea(thresholdMask(prob, t))
      expect(area).toBeLessThanOrEqual(prev)
      prev = area
    }
  })

  it('matches the server binarization rule prob8 >= round(t*255)', () => {
    const prob = makeRaster(2, 2)
    prob.data.set([127, 128, 200, 0])
    const mask = thresholdMask(prob, 0.5) // cut = 128
    expect(Array.from(mask.data)).toEqual([0, 255, 255, 0])
  })

  it('threshold 0.5 -> 0.9 strictly shrinks a generic probability map', () => {
    const prob = gradientProb(64)
    const a = maskArea(thresholdMask(prob, 0.5))
    const b = maskArea(thresholdMask(prob, 0.9))
    expect(b).toBeLessThan(a)
    expect(b).toBeGreaterThan(0)
  })
})

describe('tintedOverlay', () => {
  it('tints mask pixels and leaves the rest transparent', () => {
    const mask = makeRaster(2, 1)
    mask.data.set([255, 0])
    const rgba = tintedOverlay(mask, { r: 10, g: 20, b: 30 }, 0.5)
    expect(Array.from(rgba.subarray(0, 4))).toEqual([10, 20, 30, 128])
    expect(Array.from(rgba.subarray(4, 8))).toEqual([0, 0, 0, 0])
  })
})
